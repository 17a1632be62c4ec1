"""Linear algebra of definite 3-forms on R^7.

The derivation action of a symmetric 2-tensor h on a form is the derivation
induced by the endomorphism g^{-1} h, so the metric itself acts on 3-forms as
multiplication by 3 and ``phi = (g/3) . phi``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from . import exterior7 as ex
from .errors import DefinitenessError, G2ModuliError
from .exterior7 import DIM, KForm

__all__ = [
    "PHI0",
    "G2Structure",
    "TypeSplit",
    "bilinear_B",
    "metric_from_phi",
    "is_definite",
    "decompose",
    "star_derivative",
    "l2_inner",
    "metric_variation",
    "connection_pairing",
    "derivation",
    "stabilizer_dimension",
]

#: The model definite 3-form on R^7.
PHI0 = ex.monomial(
    (1, "127"), (1, "347"), (1, "567"), (1, "135"), (-1, "146"), (-1, "362"), (-1, "524")
)

DEFINITE_TOL = 1e-10


def _sym_basis() -> np.ndarray:
    basis = []
    for a in range(DIM):
        for b in range(a, DIM):
            S = np.zeros((DIM, DIM))
            S[a, b] = S[b, a] = 1.0
            basis.append(S)
    return np.array(basis)


_SYM = _sym_basis()  # 28 x 7 x 7


def _interior_matrices(k: int) -> np.ndarray:
    eye = np.eye(DIM)
    return np.array([
        np.column_stack([ex.interior(eye[i], ex.basis_form(k, r)).coeffs for r in range(len(ex.multi_indices(k)))])
        for i in range(DIM)
    ])


_INT3 = _interior_matrices(3)  # 7 x 21 x 35
_INT4 = _interior_matrices(4)  # 7 x 35 x 35


def _wedge_223() -> np.ndarray:
    # W[a, b, c]: coefficient of dx^{1..7} in dx^{I_a} ^ dx^{I_b} ^ dx^{I_c}.
    ia, ib, ic, sg = ex._wedge_table(2, 2)
    ja, jb, jc, tg = ex._wedge_table(4, 3)
    four = np.zeros((21, 21, 35))
    np.add.at(four, (ia, ib, ic), sg)
    to7 = np.zeros((35, 35))
    to7[ja, jb] = tg
    return np.einsum("abf,fc->abc", four, to7)


_W223 = _wedge_223()


def bilinear_B(phi: KForm) -> np.ndarray:
    """B_ij with (e_i _| phi) ^ (e_j _| phi) ^ phi = 6 B_ij dx^{1..7}."""
    if phi.degree != 3:
        raise ValueError("bilinear_B needs a 3-form")
    c = phi.coeffs
    omega = _INT3 @ c  # 7 x 21
    W = _W223 @ c  # 21 x 21
    B = omega @ W @ omega.T / 6.0
    return 0.5 * (B + B.T)


def _normalized_B(phi: KForm):
    B = bilinear_B(phi)
    detB = np.linalg.det(B)
    if not np.isfinite(detB) or detB <= 0.0:
        return B, detB, None
    g = B / detB ** (1.0 / 9.0)
    return B, detB, g


def is_definite(phi: KForm) -> bool:
    """True iff phi lies in the open GL+(7) orbit of the model form."""
    if phi.degree != 3:
        return False
    _, detB, g = _normalized_B(phi)
    if g is None:
        return False
    w = np.linalg.eigvalsh(g)
    return bool(w[0] > DEFINITE_TOL * max(1.0, w[-1]))


def metric_from_phi(phi: KForm) -> np.ndarray:
    """Metric g_phi = B / det(B)^(1/9)."""
    if phi.degree != 3:
        raise ValueError("metric_from_phi needs a 3-form")
    _, detB, g = _normalized_B(phi)
    if g is None:
        raise DefinitenessError(f"3-form is not definite (det B = {detB:.3g})")
    w = np.linalg.eigvalsh(g)
    if w[0] <= DEFINITE_TOL * max(1.0, w[-1]):
        raise DefinitenessError("3-form is not definite (B is not positive definite)")
    return g


def volume_density(phi: KForm) -> float:
    """sqrt(det g_phi), computed as det(B)^(1/9) without forming g."""
    detB = np.linalg.det(bilinear_B(phi))
    if detB <= 0.0:
        raise DefinitenessError("3-form is not definite")
    return float(detB ** (1.0 / 9.0))


def derivation(h, form: KForm, g=None) -> KForm:
    """Action h . form of a symmetric tensor as a derivation (via g^{-1} h)."""
    a = np.asarray(h, dtype=float) if g is None else np.linalg.solve(g, h)
    return KForm(form.degree, ex.derivation_matrix(a, form.degree) @ form.coeffs)


@dataclass(frozen=True, eq=False)
class TypeSplit:
    """X = x1 + x7 + x27 together with its witness pair (h, v)."""

    x1: KForm
    x7: KForm
    x27: KForm
    h: np.ndarray
    v: np.ndarray

    def total(self) -> KForm:
        return self.x1 + self.x7 + self.x27


@dataclass(frozen=True, eq=False)
class G2Structure:
    """A definite 3-form with its metric, volume density and *phi.

    Only ``phi`` is primary data; everything else is derived on construction
    or lazily cached.
    """

    phi: KForm

    def __post_init__(self):
        if self.phi.degree != 3:
            raise ValueError("G2Structure needs a 3-form")
        metric = metric_from_phi(self.phi)
        object.__setattr__(self, "metric", metric)
        object.__setattr__(self, "volume_density", float(np.sqrt(np.linalg.det(metric))))
        object.__setattr__(self, "star_phi", ex.hodge_star(metric, self.phi))

    metric: np.ndarray = field(init=False, repr=False)
    volume_density: float = field(init=False)
    star_phi: KForm = field(init=False, repr=False)

    @cached_property
    def metric_inv(self) -> np.ndarray:
        return np.linalg.inv(self.metric)

    @cached_property
    def gram3(self) -> np.ndarray:
        """L^2 Gram matrix of the monomial 3-forms (unit torus)."""
        return ex.compound(self.metric_inv, 3) * self.volume_density

    @cached_property
    def star3(self) -> np.ndarray:
        return ex.star_matrix(self.metric, 3)

    @cached_property
    def splitting_matrix(self) -> np.ndarray:
        """35 x 35 map (h coordinates, v) -> h . phi + v _| *phi."""
        c = self.phi.coeffs
        cols = [ex.derivation_matrix(self.metric_inv @ S, 3) @ c for S in _SYM]
        cols += [_INT4[i] @ self.star_phi.coeffs for i in range(DIM)]
        return np.column_stack(cols)

    @cached_property
    def _lu(self):
        L = self.splitting_matrix
        if np.linalg.cond(L) > 1e12:
            raise G2ModuliError("type splitting system is singular")
        return scipy.linalg.lu_factor(L)

    def witness(self, X: np.ndarray):
        """Solve for (h, v) with X = h . phi + v _| *phi; X may be 35 x n."""
        sol = scipy.linalg.lu_solve(self._lu, X)
        h = np.tensordot(sol[:28], _SYM, axes=(0, 0))
        return h, sol[28:]

    @cached_property
    def projectors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Matrices of X -> X1, X7, X27 on coefficient vectors."""
        sol = scipy.linalg.lu_solve(self._lu, np.eye(35))
        L = self.splitting_matrix
        P7 = L[:, 28:] @ sol[28:]
        # trace part of h: tr_g(h)/7 * g, acting as multiplication by 3 tr_g(h)/7
        tr_coeff = np.array([np.trace(self.metric_inv @ S) for S in _SYM])
        trace = tr_coeff @ sol[:28]  # tr_g h for each basis input
        P1 = (3.0 / 7.0) * np.outer(self.phi.coeffs, trace)
        P27 = L[:, :28] @ sol[:28] - P1
        return P1, P7, P27

    @cached_property
    def star_derivative_matrix(self) -> np.ndarray:
        """Matrix of X -> *(4/3 X1 + X7 - X27), a 35 x 35 map from 3- to 4-forms."""
        P1, P7, P27 = self.projectors
        return self.star3 @ (4.0 / 3.0 * P1 + P7 - P27)


def decompose(s: G2Structure, X: KForm) -> TypeSplit:
    """Split a 3-form into its Lambda^3_1, Lambda^3_7, Lambda^3_27 parts."""
    if X.degree != 3:
        raise ValueError("decompose needs a 3-form")
    h, v = s.witness(X.coeffs)
    tr = float(np.trace(s.metric_inv @ h))
    h0 = h - tr / 7.0 * s.metric
    x1 = s.phi * (3.0 * tr / 7.0)
    x27 = derivation(h0, s.phi, s.metric)
    x7 = ex.interior(v, s.star_phi)
    return TypeSplit(x1, x7, x27, h, np.asarray(v, dtype=float))


def star_derivative(s: G2Structure, X: KForm) -> KForm:
    """Derivative of phi -> *_phi phi in the direction X."""
    if X.degree != 3:
        raise ValueError("star_derivative needs a 3-form")
    return KForm(4, s.star_derivative_matrix @ X.coeffs)


def l2_inner(s: G2Structure, X: KForm, Y: KForm) -> float:
    """L^2 product of constant 3-forms on the unit torus."""
    return float(X.coeffs @ s.gram3 @ Y.coeffs)


def metric_variation(s: G2Structure, Z: KForm) -> np.ndarray:
    """First variation 2 h_Z of the metric along phi + t Z."""
    h, _ = s.witness(Z.coeffs)
    return 2.0 * h


def connection_pairing(s: G2Structure, X: KForm, Y: KForm, Z: KForm) -> float:
    """<<D_X Y, Z>> for translation-invariant fields, from the Koszul-type formula."""
    hX, _ = s.witness(X.coeffs)
    hY, _ = s.witness(Y.coeffs)
    hZ, _ = s.witness(Z.coeffs)
    g = s.metric
    tr = lambda h: float(np.trace(s.metric_inv @ h))  # noqa: E731
    ip = lambda a, b: l2_inner(s, a, b)  # noqa: E731
    rhs = (
        -2.0 * ip(derivation(hX, Y, g) + derivation(hY, X, g), Z)
        + 2.0 * ip(Y, derivation(hZ, X, g))
        + tr(hX) * ip(Y, Z)
        + tr(hY) * ip(X, Z)
        - tr(hZ) * ip(X, Y)
    )
    return 0.5 * rhs


def stabilizer_dimension(phi: KForm = PHI0, cutoff: float = 1e-8) -> int:
    """Dimension of the kernel of a -> a . phi on gl(7)."""
    cols = []
    for i in range(DIM):
        for j in range(DIM):
            E = np.zeros((DIM, DIM))
            E[i, j] = 1.0
            cols.append(ex.derivation_matrix(E, 3) @ phi.coeffs)
    M = np.column_stack(cols)  # 35 x 49
    sv = np.linalg.svd(M, compute_uv=False)
    return DIM * DIM - int(np.sum(sv > cutoff * sv[0]))
