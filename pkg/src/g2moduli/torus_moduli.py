"""Constant G2 forms on the flat torus R^7/Z^7 as an explicit moduli chart.

Every constant definite 3-form is closed and coclosed, so the chart is the
open cone of definite forms in Lambda^3 (R^7)^* = H^3(T^7) (dimension 35) and
its L^2 metric is the pointwise one times the volume.  Periods x are the
coefficients of phi in the monomial basis alpha_A = dx^{I_A}; coperiods y are
the coordinates of *phi in the dual basis beta^A = sigma_A dx^{I_A^c}.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import exterior7 as ex
from .errors import ConvergenceError, DegeneracyError, NotCriticalError, OrientationError
from .exterior7 import KForm
from .g2core import PHI0, G2Structure, derivation, volume_density

log = logging.getLogger(__name__)

__all__ = [
    "ModuliPoint",
    "PeriodVector",
    "SliceTangentBasis",
    "HessianResult",
    "orbit_point",
    "point_from_phi",
    "periods",
    "coperiods",
    "F_beta",
    "G_alpha",
    "normalize_volume",
    "slice_basis",
    "slice_gradient",
    "criticality_residual",
    "find_critical",
    "hessian_slice",
    "morse_index",
    "random_orbit_matrix",
    "chart_tangent_rank",
    "type_leakage",
    "HESSIAN_CONSTANTS",
    "PUBLISHED_CONSTANTS",
]

_COMP_RANK, _COMP_SIGN = ex.complement_table(3)


@dataclass(frozen=True, eq=False)
class ModuliPoint:
    """A constant G2 form on T^7 with its structure data."""

    phi: KForm
    structure: G2Structure = field(repr=False)

    @property
    def vol(self) -> float:
        return self.structure.volume_density

    @property
    def x(self) -> np.ndarray:
        return self.phi.coeffs

    def to_dict(self) -> dict:
        return {"phi": self.phi.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ModuliPoint":
        if not isinstance(d, dict):
            raise ValueError("moduli point JSON must be an object")
        if "A" in d:
            A = d["A"]
            if not isinstance(A, list) or len(A) != 49:
                raise ValueError("'A' must be a list of 49 numbers (row-major 7x7)")
            return orbit_point(np.array(A, dtype=float).reshape(7, 7))
        if "phi" in d:
            phi = KForm.from_dict(d["phi"])
            if phi.degree != 3:
                raise ValueError("'phi' must be a 3-form")
            return point_from_phi(phi)
        raise ValueError("moduli point JSON needs 'A' or 'phi'")

    @classmethod
    def from_json(cls, text: str) -> "ModuliPoint":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class PeriodVector:
    x: np.ndarray
    y: np.ndarray

    @property
    def U(self) -> float:
        return float(self.x @ self.y)


@dataclass(frozen=True, eq=False)
class SliceTangentBasis:
    """L^2-orthonormal typed basis of the tangent space of the volume-1 slice.

    ``basis`` has shape 35 x 34: the first 7 columns span Lambda^3_7, the
    remaining 27 span Lambda^3_27.
    """

    basis: np.ndarray
    gram: np.ndarray
    type_labels: tuple[int, ...]

    @property
    def idx7(self) -> np.ndarray:
        return np.flatnonzero(np.array(self.type_labels) == 7)

    @property
    def idx27(self) -> np.ndarray:
        return np.flatnonzero(np.array(self.type_labels) == 27)


@dataclass(frozen=True, eq=False)
class HessianResult:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    basis: SliceTangentBasis
    c: float
    residual: float


def point_from_phi(phi: KForm) -> ModuliPoint:
    return ModuliPoint(phi, G2Structure(phi))


def orbit_point(A) -> ModuliPoint:
    """The point A^* phi0 for det A > 0; its metric is A^T A and volume det A."""
    A = np.asarray(A, dtype=float)
    if A.shape != (7, 7):
        raise ValueError("A must be 7x7")
    if not np.linalg.det(A) > 0:
        raise OrientationError("orbit_point needs det A > 0")
    return point_from_phi(ex.pullback(A, PHI0))


def random_orbit_matrix(rng: np.random.Generator, scale: float = 0.2, unimodular: bool = False,
                        max_cond: float = 10.0) -> np.ndarray:
    """I + scale * N(0,1) with det > 0 and cond(A) <= max_cond (optionally det 1)."""
    while True:
        A = np.eye(7) + scale * rng.standard_normal((7, 7))
        d = np.linalg.det(A)
        if np.linalg.cond(A) <= max_cond:
            break
    if d < 0:
        A[0] = -A[0]
        d = -d
    if unimodular:
        A = A / d ** (1.0 / 7.0)
    return A


def coperiods(s: G2Structure) -> np.ndarray:
    """Coordinates of *phi in the dual basis beta^A."""
    return _COMP_SIGN * s.star_phi.coeffs[_COMP_RANK]


def four_form_to_dual(psi: np.ndarray) -> np.ndarray:
    """Dual-basis coordinates y_A = int alpha_A ^ psi of 4-form coefficient arrays."""
    return _COMP_SIGN[:, None] * psi[_COMP_RANK] if psi.ndim == 2 else _COMP_SIGN * psi[_COMP_RANK]


def dual_to_four_form(y: np.ndarray) -> KForm:
    c = np.zeros(35)
    c[_COMP_RANK] = _COMP_SIGN * y
    return KForm(4, c)


def periods(m: ModuliPoint) -> PeriodVector:
    return PeriodVector(m.x.copy(), coperiods(m.structure))


def F_beta(beta, m: ModuliPoint) -> float:
    """Height function beta([phi])."""
    return float(np.asarray(beta, dtype=float) @ m.x)


def G_alpha(alpha, m: ModuliPoint) -> float:
    """Height function alpha([*phi])."""
    return float(np.asarray(alpha, dtype=float) @ coperiods(m.structure))


def normalize_volume(m: ModuliPoint) -> ModuliPoint:
    """Rescale phi so that the volume is 1 (volume scales as lambda^{7/3})."""
    return point_from_phi(m.phi / m.vol ** (3.0 / 7.0))


def _normalized_coeffs(c: np.ndarray) -> np.ndarray:
    return c / volume_density(KForm(3, c)) ** (3.0 / 7.0)


def _orthonormalize(V: np.ndarray, G: np.ndarray) -> np.ndarray:
    L = np.linalg.cholesky(V.T @ G @ V)
    return np.linalg.solve(L, V.T).T


def slice_basis(m: ModuliPoint) -> SliceTangentBasis:
    """Typed L^2-orthonormal basis of Lambda^3_7 + Lambda^3_27 at m."""
    s = m.structure
    g = s.metric
    eye = np.eye(7)
    V7 = np.column_stack([ex.interior(eye[i], s.star_phi).coeffs for i in range(7)])
    # traceless symmetric tensors (w.r.t. g): symmetric basis minus trace part
    sym = []
    for a in range(7):
        for b in range(a, 7):
            S = np.zeros((7, 7))
            S[a, b] = S[b, a] = 1.0
            sym.append(S - np.trace(s.metric_inv @ S) / 7.0 * g)
    V27 = np.column_stack([derivation(S, m.phi, g).coeffs for S in sym])
    # 28 traceless tensors span a 27-dim space; keep the top 27 singular directions
    U, sv, _ = np.linalg.svd(V27, full_matrices=False)
    V27 = U[:, :27]
    G = s.gram3
    B7 = _orthonormalize(V7, G)
    B27 = _orthonormalize(V27, G)
    basis = np.column_stack([B7, B27])
    return SliceTangentBasis(basis, basis.T @ G @ basis, (7,) * 7 + (27,) * 27)


def chart_tangent_rank(m: ModuliPoint) -> int:
    """Rank of the derivative of the period map phi -> (x, y) at m.

    Constant forms are closed and coclosed, so every constant 3-form is a
    harmonic tangent vector and the rank equals 35.
    """
    J = np.vstack([np.eye(35), m.structure.star_derivative_matrix[_COMP_RANK] * _COMP_SIGN[:, None]])
    sv = np.linalg.svd(J, compute_uv=False)
    return int(np.sum(sv > 1e-10 * sv[0]))


def slice_gradient(beta, m: ModuliPoint, basis: SliceTangentBasis | None = None) -> np.ndarray:
    """Components of the gradient of F^beta restricted to the volume slice."""
    basis = basis or slice_basis(m)
    return basis.basis.T @ np.asarray(beta, dtype=float)


def criticality_residual(beta, m: ModuliPoint) -> tuple[float, float]:
    """(||beta - c y|| / ||beta||, c) with c = F^beta / U."""
    beta = np.asarray(beta, dtype=float)
    pv = periods(m)
    c = float(beta @ pv.x) / pv.U
    return float(np.linalg.norm(beta - c * pv.y) / np.linalg.norm(beta)), c


def _newton_coperiods(target: np.ndarray, x0: np.ndarray, tol: float, max_iter: int,
                      patience: int = 25):
    x = x0.copy()
    best, best_it = np.inf, 0
    for it in range(max_iter):
        try:
            m = point_from_phi(KForm(3, x))
        except ValueError:
            return None, it
        r = target - coperiods(m.structure)
        rn = np.linalg.norm(r)
        if rn <= tol * np.linalg.norm(target):
            return m, it
        if rn < 0.5 * best:
            best, best_it = rn, it
        elif it - best_it > patience:  # stagnating: target is not reachable from here
            return None, it
        p = m.structure.star_derivative_matrix[_COMP_RANK] * _COMP_SIGN[:, None]
        dx = np.linalg.solve(p, r)
        t = 1.0
        while t > 1e-8:
            trial = x + t * dx
            try:
                mt = point_from_phi(KForm(3, trial))
                if np.linalg.norm(target - coperiods(mt.structure)) < rn:
                    break
            except ValueError:
                pass
            t *= 0.5
        else:
            return None, it
        x = trial
    return None, max_iter


def find_critical(beta, start: ModuliPoint | None = None, tol: float = 1e-13,
                  max_iter: int = 500) -> ModuliPoint:
    """Volume-1 critical point of F^beta, i.e. a point with beta = c [*phi].

    Solves y(x) = +beta or y(x) = -beta by damped Newton iteration (the
    Jacobian dy/dx is the p-matrix), then rescales to volume 1.  Newton is
    used instead of gradient ascent because on T^7 every critical point is a
    saddle of index 7.
    """
    beta = np.asarray(beta, dtype=float)
    if not np.any(beta):
        raise ValueError("beta must be nonzero")
    start = start or point_from_phi(PHI0)
    res, _ = criticality_residual(beta, start)
    if res <= 1e-14:
        return normalize_volume(start)
    y0 = coperiods(start.structure)
    for sign in (1.0, -1.0):
        target = sign * beta
        # coperiods scale like lambda^{4/3}; match magnitudes first
        x0 = start.x * (np.linalg.norm(target) / np.linalg.norm(y0)) ** 0.75
        m, iters = _newton_coperiods(target, x0, tol, max_iter)
        if m is not None:
            log.debug("find_critical converged in %d iterations (sign %+g)", iters, sign)
            return normalize_volume(m)
    raise ConvergenceError("no critical point found: beta is outside the coperiod cone or start is too far")


def _chart_value(beta, x_star, B, s):
    return float(beta @ _normalized_coeffs(x_star + B @ s))


def hessian_slice(beta, m_star: ModuliPoint, step: float = 1e-3, tol: float = 1e-8) -> HessianResult:
    """Finite-difference Hessian of F^beta on the volume-1 slice at a critical point.

    The chart is s -> normalize_volume(phi* + sum s_i b_i) with b_i the typed
    orthonormal slice basis; central second differences with one Richardson step.
    """
    beta = np.asarray(beta, dtype=float)
    res, c = criticality_residual(beta, m_star)
    if res > tol:
        raise NotCriticalError(f"criticality residual {res:.3g} exceeds {tol:g}")
    if abs(m_star.vol - 1.0) > 1e-10:
        raise NotCriticalError("Hessian point must have volume 1")
    basis = slice_basis(m_star)
    B = basis.basis
    n = B.shape[1]
    x_star = m_star.x
    f0 = _chart_value(beta, x_star, B, np.zeros(n))

    def fd(h):
        H = np.empty((n, n))
        e = np.eye(n) * h
        fp = np.array([_chart_value(beta, x_star, B, e[i]) for i in range(n)])
        fm = np.array([_chart_value(beta, x_star, B, -e[i]) for i in range(n)])
        for i in range(n):
            H[i, i] = (fp[i] - 2 * f0 + fm[i]) / h**2
            for j in range(i + 1, n):
                fpp = _chart_value(beta, x_star, B, e[i] + e[j])
                fpm = _chart_value(beta, x_star, B, e[i] - e[j])
                fmp = _chart_value(beta, x_star, B, -e[i] + e[j])
                fmm = _chart_value(beta, x_star, B, -e[i] - e[j])
                H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4 * h**2)
        return H

    H = (4.0 * fd(step / 2) - fd(step)) / 3.0
    H = 0.5 * (H + H.T)
    w, V = np.linalg.eigh(H)
    return HessianResult(H, w, V, basis, c, res)


def morse_index(beta, m_star: ModuliPoint, hess: HessianResult | None = None,
                zero_tol: float = 1e-6) -> tuple[int, int]:
    """(number of negative, number of positive) Hessian eigenvalues."""
    hess = hess or hessian_slice(beta, m_star)
    w = hess.eigenvalues
    if np.min(np.abs(w)) < zero_tol:
        raise DegeneracyError(f"Hessian eigenvalue {w[np.argmin(np.abs(w))]:.3g} is numerically zero")
    return int(np.sum(w < 0)), int(np.sum(w > 0))


#: Hessian eigenvalues per unit c at the model critical point, as measured on T^7.
HESSIAN_CONSTANTS = {"seven": -1.0, "twenty_seven": 1.0}
#: The constants of the published Hessian formula (5/6, 7/6); see the README.
PUBLISHED_CONSTANTS = {"seven": -5.0 / 6.0, "twenty_seven": 7.0 / 6.0}


def type_leakage(hess: HessianResult) -> tuple[float, float]:
    """Worst off-type weight of the Hessian eigenvectors.

    Returns (leak7, leak27): the largest norm of the Lambda_27 part of one of
    the 7 most negative eigenvectors, and the largest Lambda_7 part of one of
    the remaining 27.  Eigenvectors are in the orthonormal typed slice basis.
    """
    V = hess.eigenvectors
    i7, i27 = hess.basis.idx7, hess.basis.idx27
    leak7 = np.linalg.norm(V[np.ix_(i27, np.arange(7))], axis=0).max()
    leak27 = np.linalg.norm(V[np.ix_(i7, np.arange(7, V.shape[1]))], axis=0).max()
    return float(leak7), float(leak27)
