"""Period calculus of the torus moduli chart: p-matrix, L^2 Gram m, signature."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError
from .exterior7 import KForm
from .torus_moduli import (
    ModuliPoint,
    coperiods,
    four_form_to_dual,
    periods,
    point_from_phi,
    slice_basis,
)

__all__ = [
    "PeriodJet",
    "period_jet",
    "p_matrix",
    "p_matrix_fd",
    "m_matrix",
    "typed_orthonormal_basis",
    "isotypic_pattern",
    "lagrangian_residual",
    "pullback_metric_signature",
    "eq21_residual",
    "eq23_residual",
    "eq23_blocks",
    "log_abs_det_p",
    "euler_x",
    "euler_y",
    "point_with_coperiods",
    "inertia",
]


@dataclass(frozen=True, eq=False)
class PeriodJet:
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    m: np.ndarray

    @property
    def U(self) -> float:
        return float(self.x @ self.y)


def p_matrix(m: ModuliPoint) -> np.ndarray:
    """Jacobian dy/dx, column B = coperiods of the star-derivative along alpha_B."""
    return four_form_to_dual(m.structure.star_derivative_matrix)


def p_matrix_fd(m: ModuliPoint, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference Jacobian of x -> y (oracle for p_matrix)."""
    x = m.x

    def jac(h):
        cols = []
        for b in range(35):
            e = np.zeros(35)
            e[b] = h
            yp = coperiods(point_from_phi(KForm(3, x + e)).structure)
            ym = coperiods(point_from_phi(KForm(3, x - e)).structure)
            cols.append((yp - ym) / (2 * h))
        return np.column_stack(cols)

    return (4.0 * jac(step / 2) - jac(step)) / 3.0


def m_matrix(m: ModuliPoint) -> np.ndarray:
    """L^2 Gram matrix of the basis alpha_A (harmonic representatives are constant)."""
    return m.structure.gram3.copy()


def period_jet(m: ModuliPoint) -> PeriodJet:
    pv = periods(m)
    return PeriodJet(pv.x, pv.y, p_matrix(m), m_matrix(m))


def typed_orthonormal_basis(m: ModuliPoint) -> tuple[np.ndarray, np.ndarray]:
    """35 x 35 L^2-orthonormal basis (phi-direction, 7, 27) and its type labels."""
    sb = slice_basis(m)
    nu = m.x / np.sqrt(m.x @ m.structure.gram3 @ m.x)
    E = np.column_stack([nu, sb.basis])
    labels = np.array((1,) + sb.type_labels)
    return E, labels


def isotypic_pattern(m: ModuliPoint, p: np.ndarray | None = None) -> np.ndarray:
    """E^T p E in the typed orthonormal basis; ideally diag(4/3, 1 x7, -1 x27)."""
    p = p_matrix(m) if p is None else p
    E, _ = typed_orthonormal_basis(m)
    return E.T @ p @ E


def eq21_residual(m: ModuliPoint, p: np.ndarray | None = None) -> float:
    """||4 y - 3 p x|| / ||4 y||."""
    pv = periods(m)
    p = p_matrix(m) if p is None else p
    return float(np.linalg.norm(4 * pv.y - 3 * p @ pv.x) / np.linalg.norm(4 * pv.y))


def lagrangian_residual(curve, ts, step: float = 1e-5) -> float:
    """max_t |3 x.y' - 4 y.x'| along a curve t -> ModuliPoint (central differences)."""
    worst = 0.0
    for t in ts:
        pv = periods(curve(t))
        pp, pm = periods(curve(t + step)), periods(curve(t - step))
        xd = (pp.x - pm.x) / (2 * step)
        yd = (pp.y - pm.y) / (2 * step)
        worst = max(worst, abs(3 * pv.x @ yd - 4 * pv.y @ xd))
    return float(worst)


def inertia(S: np.ndarray, rel_tol: float = 1e-8) -> tuple[int, int]:
    """(positive, negative) eigenvalue counts of a symmetric matrix."""
    S = 0.5 * (S + S.T)
    w = np.linalg.eigvalsh(S)
    scale = np.abs(w).max()
    if np.min(np.abs(w)) < rel_tol * scale:
        raise DegeneracyError("quadratic form has a numerically zero eigenvalue")
    return int(np.sum(w > 0)), int(np.sum(w < 0))


def pullback_metric_signature(m: ModuliPoint, p: np.ndarray | None = None) -> tuple[int, int]:
    """Signature of dx^T p dx on the 35-dimensional chart tangent."""
    return inertia(p_matrix(m) if p is None else p)


def eq23_residual(m: ModuliPoint) -> np.ndarray:
    """R = p + m - 7/(3U) y y^T."""
    jet = period_jet(m)
    return jet.p + jet.m - 7.0 / (3.0 * jet.U) * np.outer(jet.y, jet.y)


def eq23_blocks(m: ModuliPoint) -> dict[str, np.ndarray]:
    """Blocks of E^T R E in the typed orthonormal basis.

    On T^7 the expected blocks are 0 on (1 + 27) and 2 I on the 7-block,
    since b^1 = 7 there; the identity p = -m + 7/(3U) y y^T needs b^1 = 0.
    """
    R = eq23_residual(m)
    E, labels = typed_orthonormal_basis(m)
    T = E.T @ R @ E
    i1, i7, i27 = (np.flatnonzero(labels == k) for k in (1, 7, 27))
    rest = np.concatenate([i1, i27])
    return {
        "one_27": T[np.ix_(rest, rest)],
        "seven": T[np.ix_(i7, i7)],
        "cross": T[np.ix_(i7, rest)],
    }


def log_abs_det_p(m: ModuliPoint) -> tuple[float, float]:
    """(sign, log|det p|)."""
    sign, logdet = np.linalg.slogdet(p_matrix(m))
    return float(sign), float(logdet)


def euler_x(m: ModuliPoint, step: float = 1e-4) -> float:
    """sum_A x^A d log|det p| / dx^A, by central differences along the radial ray."""
    lp = log_abs_det_p(point_from_phi(m.phi * np.exp(step)))[1]
    lm = log_abs_det_p(point_from_phi(m.phi * np.exp(-step)))[1]
    return (lp - lm) / (2 * step)


def point_with_coperiods(y_target: np.ndarray, start: ModuliPoint, tol: float = 1e-14,
                         max_iter: int = 50) -> ModuliPoint:
    """Newton inversion of the coperiod map near ``start``."""
    m = start
    for _ in range(max_iter):
        r = y_target - coperiods(m.structure)
        if np.linalg.norm(r) <= tol * np.linalg.norm(y_target):
            return m
        m = point_from_phi(KForm(3, m.x + np.linalg.solve(p_matrix(m), r)))
    return m


def euler_y(m: ModuliPoint, step: float = 1e-4) -> float:
    """sum_A y_A d log|det p| / dy_A: moves along the coperiod ray y -> e^{+-s} y."""
    y = coperiods(m.structure)
    mp = point_with_coperiods(np.exp(step) * y, m)
    mm = point_with_coperiods(np.exp(-step) * y, m)
    return (log_abs_det_p(mp)[1] - log_abs_det_p(mm)[1]) / (2 * step)
