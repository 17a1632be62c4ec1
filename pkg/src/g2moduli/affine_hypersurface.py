"""Centroaffine hypersurface invariants via moving frames.

A patch is a chart u in R^{l-1} -> (x(u), y(u)) of a hypersurface in R^l with
a conormal y (y . dx = 0).  With a distinguished index L (taken as
argmax |y_A| at the evaluation point) the adapted frame is
e_i = alpha_i - (y_i / y_L) alpha_L, e_L = alpha_L, the second fundamental form
is h_ij with -d(y_i / y_L) = h_ij dx^j, and the affine normal is
|H|^{1/(l+1)} (e_L + t^i e_i) with (1/(l+1)) d log|H| + t^i omega^L_i = 0.

Affine normals are oriented so that xi^x . y > 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError, FrameSingularError
from .exterior7 import KForm
from .g2core import PHI0, volume_density
from .torus_moduli import ModuliPoint, coperiods, orbit_point, point_from_phi, slice_basis
from .period_geometry import p_matrix

__all__ = [
    "HypersurfacePatch",
    "QuadricPatch",
    "ProductPatch",
    "TorusModuliPatch",
    "TransformedPatch",
    "Frame",
    "AffineInvariants",
    "SphereVerdict",
    "patch_from_spec",
    "frames",
    "second_fundamental",
    "h_from_p",
    "h_pullback",
    "blaschke_metric",
    "blaschke_form",
    "H_formula_check",
    "affine_normal",
    "affine_normal_generic",
    "conormal_affine_normal",
    "affine_invariants",
    "affine_sphere_test",
    "line_angle",
]

JET_STEP = 1e-3
FRAME_TOL = 1e-12
DEGENERATE_TOL = 1e-14
DEGENERATE_RATIO = 1e-12


def _jacobian(f, u, step=JET_STEP):
    """Central differences with one Richardson step; columns are d f / d u_a."""
    u = np.asarray(u, dtype=float)

    def d(h):
        cols = []
        for a in range(u.size):
            e = np.zeros_like(u)
            e[a] = h
            cols.append((np.asarray(f(u + e)) - np.asarray(f(u - e))) / (2 * h))
        return np.stack(cols, axis=-1)

    return (4.0 * d(step / 2) - d(step)) / 3.0


def line_angle(a, b) -> float:
    """Angle in [0, pi/2] between the lines spanned by a and b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))
    s = np.linalg.norm(a / np.linalg.norm(a) * np.sign(a @ b or 1.0) - b / np.linalg.norm(b))
    # 2 asin(s/2) is accurate for tiny angles where acos(c) is not
    return float(min(2 * np.arcsin(min(s / 2, 1.0)), np.arccos(min(c, 1.0)) if c < 0.99 else np.inf))


class HypersurfacePatch:
    """Base class: subclasses provide ``l``, ``position`` and ``conormal``."""

    l: int
    kind = "generic"

    def position(self, u) -> np.ndarray:
        raise NotImplementedError

    def conormal(self, u) -> np.ndarray:
        raise NotImplementedError

    def base(self) -> np.ndarray:
        return np.zeros(self.l - 1)

    # moduli-derived patches override these
    has_periods = False

    def p_at(self, x) -> np.ndarray:
        raise NotImplementedError

    volume: float = float("nan")


class QuadricPatch(HypersurfacePatch):
    """Ellipsoid, elliptic paraboloid or hyperplane in R^l as a graph over x^1..x^{l-1}.

    ellipsoid:  x = c + a * (u, sqrt(1 - |u|^2)), conormal (x - c) / a^2
    paraboloid: x = (u, offset + |u|^2), conormal (-2u, 1)
    plane:      x = (u, offset), conormal e_l
    """

    def __init__(self, shape: str, l: int = 3, axes=None, center=None, offset: float = 1.0):
        if shape not in ("ellipsoid", "paraboloid", "plane"):
            raise ValueError(f"unknown quadric type {shape!r}")
        self.shape = shape
        self.kind = "quadric"
        self.l = int(l)
        self.axes = np.ones(self.l) if axes is None else np.asarray(axes, dtype=float)
        self.center = np.zeros(self.l) if center is None else np.asarray(center, dtype=float)
        self.offset = float(offset)
        if self.axes.shape != (self.l,) or self.center.shape != (self.l,):
            raise ValueError("axes and center must have length l")

    def position(self, u):
        u = np.asarray(u, dtype=float)
        if self.shape == "ellipsoid":
            r2 = u @ u
            if r2 >= 1.0:
                raise ValueError("ellipsoid chart needs |u| < 1")
            return self.center + self.axes * np.append(u, np.sqrt(1.0 - r2))
        if self.shape == "paraboloid":
            return np.append(u, self.offset + u @ u)
        return np.append(u, self.offset)

    def conormal(self, u):
        u = np.asarray(u, dtype=float)
        if self.shape == "ellipsoid":
            return (self.position(u) - self.center) / self.axes**2
        if self.shape == "paraboloid":
            return np.append(-2.0 * u, 1.0)
        return np.append(np.zeros(self.l - 1), 1.0)

    def closed_form_normal(self, u) -> np.ndarray:
        """Classical affine normal of the ellipsoid: det(A)^{-2/(n+2)} (x - c)."""
        if self.shape != "ellipsoid":
            raise ValueError("closed form available for ellipsoids only")
        n = self.l - 1
        return np.prod(self.axes) ** (-2.0 / (n + 2)) * (self.position(u) - self.center)


class ProductPatch(HypersurfacePatch):
    """The level set x^1 x^2 ... x^l = 1 in the positive orthant.

    x_i = exp(u_i) for i < l and x_l = exp(-sum u); conormal y = 1/x.
    """

    kind = "level_set"

    def __init__(self, l: int = 3):
        self.l = int(l)

    def position(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(np.append(u, -u.sum()))

    def conormal(self, u):
        return 1.0 / self.position(u)


class TorusModuliPatch(HypersurfacePatch):
    """The period locus {x(phi) : vol(phi) = V} in R^35 near a base point.

    Chart: u -> rescale(x* + B u) to volume V, with B the L^2-orthonormal
    slice basis at the base point x*.
    """

    kind = "torus_moduli"
    has_periods = True

    def __init__(self, base: ModuliPoint | None = None, V: float = 1.0):
        base = base or point_from_phi(PHI0)
        self.volume = float(V)
        self.l = 35
        x = base.x * (V / base.vol) ** (3.0 / 7.0)
        self.base_point = point_from_phi(KForm(3, x))
        self.B = slice_basis(self.base_point).basis
        self._G = self.base_point.structure.gram3

    def position(self, u):
        x = self.base_point.x + self.B @ np.asarray(u, dtype=float)
        return x * (self.volume / volume_density(KForm(3, x))) ** (3.0 / 7.0)

    def conormal(self, u):
        return coperiods(point_from_phi(KForm(3, self.position(u))).structure)

    def p_at(self, x):
        return p_matrix(point_from_phi(KForm(3, np.asarray(x, dtype=float))))

    def u_of(self, x) -> np.ndarray:
        """Chart coordinates of a point x of the locus (inverse of ``position``)."""
        x0 = self.base_point.x
        lam = (x0 @ self._G @ x0) / (np.asarray(x) @ self._G @ x0)
        if lam <= 0:
            raise ValueError("point is outside the chart")
        return self.B.T @ self._G @ (lam * np.asarray(x) - x0)

    def orbit_sample(self, A) -> np.ndarray:
        """Chart coordinates of the volume-V point on the orbit of A^* phi0."""
        m = orbit_point(A)
        return self.u_of(m.x * (self.volume / m.vol) ** (3.0 / 7.0))


class TransformedPatch(HypersurfacePatch):
    """Image of a patch under x -> A x, y -> A^{-T} y."""

    def __init__(self, patch: HypersurfacePatch, A):
        self.inner = patch
        self.A = np.asarray(A, dtype=float)
        self.Ainv = np.linalg.inv(self.A)
        self.l = patch.l
        self.kind = patch.kind
        self.has_periods = patch.has_periods
        self.volume = patch.volume * abs(np.linalg.det(self.A)) if patch.has_periods else patch.volume

    def base(self):
        return self.inner.base()

    def position(self, u):
        return self.A @ self.inner.position(u)

    def conormal(self, u):
        return self.Ainv.T @ self.inner.conormal(u)

    def p_at(self, x):
        return self.Ainv.T @ self.inner.p_at(self.Ainv @ np.asarray(x)) @ self.Ainv


def patch_from_spec(spec: dict) -> HypersurfacePatch:
    """Build a patch from a JSON spec ``{"kind": ..., ...}``."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError("patch spec needs a 'kind'")
    kind = spec["kind"]
    if kind == "quadric":
        return QuadricPatch(spec.get("type", "ellipsoid"), int(spec.get("l", 3)), spec.get("axes"),
                            spec.get("center"), float(spec.get("offset", 1.0)))
    if kind == "level_set":
        if spec.get("function", "product") != "product":
            raise ValueError("only the 'product' level set is supported")
        return ProductPatch(int(spec.get("l", 3)))
    if kind == "torus_moduli":
        base = None
        if "A" in spec or "phi" in spec:
            base = ModuliPoint.from_dict({k: spec[k] for k in ("A", "phi") if k in spec})
        return TorusModuliPatch(base, float(spec.get("V", 1.0)))
    raise ValueError(f"unknown patch kind {kind!r}")


@dataclass(frozen=True, eq=False)
class Frame:
    index: int  # distinguished index L (0-based)
    others: np.ndarray  # the remaining l-1 indices, in order
    e: np.ndarray  # l x (l-1), columns e_i
    e_l: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def omega(self, dx) -> tuple[np.ndarray, float]:
        """(omega^i, omega^L) of an ambient displacement dx."""
        dx = np.asarray(dx, dtype=float)
        yl = self.y[self.index]
        return dx[self.others], float(dx[self.index] + self.y[self.others] @ dx[self.others] / yl)


def _frame_at(x, y, index=None) -> Frame:
    l = x.size
    L = int(np.argmax(np.abs(y))) if index is None else int(index)
    yl = y[L]
    if abs(yl) < FRAME_TOL * max(1.0, np.abs(y).max()):
        raise FrameSingularError(f"|y_L| = {abs(yl):.3g} is too small")
    others = np.array([i for i in range(l) if i != L])
    e = np.zeros((l, l - 1))
    e[others, np.arange(l - 1)] = 1.0
    e[L, :] = -y[others] / yl
    e_l = np.zeros(l)
    e_l[L] = 1.0
    return Frame(L, others, e, e_l, x, y)


def frames(patch: HypersurfacePatch, u, index=None) -> Frame:
    """Adapted frame e_i = alpha_i - (y_i/y_L) alpha_L, e_L = alpha_L at u."""
    u = np.asarray(u, dtype=float)
    return _frame_at(patch.position(u), patch.conormal(u), index)


def _h_generic(patch, u, L, step=JET_STEP):
    fr = frames(patch, u, L)
    others = fr.others

    def ratios(v):
        y = patch.conormal(v)
        return y[others] / y[L]

    Jx = _jacobian(lambda v: patch.position(v)[others], u, step)
    Jr = _jacobian(ratios, u, step)
    h = -Jr @ np.linalg.inv(Jx)
    return h, Jx


@dataclass(frozen=True, eq=False)
class SecondFundamental:
    h: np.ndarray
    H: float
    index: int
    asymmetry: float


def second_fundamental(patch: HypersurfacePatch, u=None, index=None, step=JET_STEP) -> SecondFundamental:
    """h_ij from finite-difference jets of y_i/y_L along the patch, and H = det h."""
    u = patch.base() if u is None else np.asarray(u, dtype=float)
    L = frames(patch, u, index).index
    h, _ = _h_generic(patch, u, L, step)
    asym = float(np.abs(h - h.T).max() / max(np.abs(h).max(), 1e-300))
    h = 0.5 * (h + h.T)
    return SecondFundamental(h, float(np.linalg.det(h)), L, asym)


def h_from_p(p, y, L) -> np.ndarray:
    """Component formula for h_ij in terms of the p-matrix."""
    others = np.array([i for i in range(len(y)) if i != L])
    yl = y[L]
    yi = y[others]
    pij = p[np.ix_(others, others)]
    pli = p[L, others]
    return (-pij / yl - p[L, L] / yl**3 * np.outer(yi, yi)
            + (np.outer(pli, yi) + np.outer(yi, pli)) / yl**2)


def h_pullback(p, y, L) -> np.ndarray:
    """-(1/y_L) E^T p E: the quadratic form -(1/y_L) p restricted to the tangent frame."""
    fr = _frame_at(np.zeros_like(y), y, L)
    return -(fr.e.T @ p @ fr.e) / y[L]


def _det_checked(h) -> float:
    """det h, raising DegenerateError when h is (numerically) singular.

    Singularity is judged by eigenvalue ratio rather than |H| alone: on the
    l = 35 locus H carries a factor y_L^(-36) and is tiny at regular points.
    """
    w = np.abs(np.linalg.eigvalsh(h))
    H = float(np.linalg.det(h))
    if w.max() == 0.0 or w.min() < DEGENERATE_RATIO * w.max() or (h.shape[0] == 1 and abs(H) < DEGENERATE_TOL):
        raise DegenerateError(f"|H| = {abs(H):.3g}: second fundamental form is degenerate")
    return H


def blaschke_form(h, H, l) -> np.ndarray:
    _det_checked(h)
    return abs(H) ** (-1.0 / (l + 1)) * h


def blaschke_metric(patch: HypersurfacePatch, u=None, index=None) -> np.ndarray:
    """|H|^{-1/(l+1)} h in the coordinates omega^i = dx^i (i != L)."""
    sf = second_fundamental(patch, u, index)
    return blaschke_form(sf.h, sf.H, patch.l)


def H_formula_check(patch: HypersurfacePatch, u=None, index=None) -> dict:
    """Compare det(h) from jets with (21/4) V det(p) (-1)^{l-1} y_L^{-(l+1)}."""
    if not patch.has_periods:
        raise ValueError("H formula needs a moduli-derived patch")
    u = patch.base() if u is None else np.asarray(u, dtype=float)
    sf = second_fundamental(patch, u, index)
    x, y = patch.position(u), patch.conormal(u)
    l = patch.l
    sign, logdet = np.linalg.slogdet(patch.p_at(x))
    yl = y[sf.index]
    # evaluate in logs: det p and y_L^{-36} are far outside float range separately
    log_formula = np.log(21.0 / 4.0 * patch.volume) + logdet - (l + 1) * np.log(abs(yl))
    sign_formula = sign * (-1.0) ** (l - 1) * np.sign(yl) ** (l + 1)
    formula = sign_formula * np.exp(log_formula)
    return {
        "H": sf.H,
        "formula": float(formula),
        "residual": float(abs(sf.H - formula) / abs(sf.H)),
        "index": sf.index,
    }


def _grad_log_det_p(patch, x, step=1e-4):
    """Ambient gradient d log|det p| / dx^A by central differences."""
    g = np.empty(x.size)
    for a in range(x.size):
        e = np.zeros_like(x)
        e[a] = step
        lp = np.linalg.slogdet(patch.p_at(x + e))[1]
        lm = np.linalg.slogdet(patch.p_at(x - e))[1]
        g[a] = (lp - lm) / (2 * step)
    return g


@dataclass(frozen=True, eq=False)
class AffineInvariants:
    h: np.ndarray
    H: float
    blaschke: np.ndarray
    q_up: np.ndarray
    q_low: np.ndarray
    lam: float
    t: np.ndarray
    xi_x: np.ndarray
    xi_y: np.ndarray
    index: int
    det_p: float
    scalars: dict = field(default_factory=dict)
    closed_forms: dict = field(default_factory=dict)


def affine_normal_generic(patch: HypersurfacePatch, u=None, index=None, step=JET_STEP,
                          analytic_h: bool = False) -> tuple[np.ndarray, np.ndarray, float]:
    """Affine normal with t solved from (1/(l+1)) d log|H| + t^i h_ij dx^j = 0.

    Returns (xi_x, t, H).  With ``analytic_h`` (moduli patches only) h is
    taken from the p-matrix formula at each stencil point instead of jets.
    """
    u = patch.base() if u is None else np.asarray(u, dtype=float)
    fr = frames(patch, u, index)
    L, l = fr.index, patch.l

    if analytic_h:
        def h_at(v):
            x = patch.position(v)
            return h_from_p(patch.p_at(x), patch.conormal(v), L)
        h = h_at(u)
        Jx = _jacobian(lambda v: patch.position(v)[fr.others], u, step)
    else:
        def h_at(v):
            return _h_generic(patch, v, L, step)[0]
        h, Jx = _h_generic(patch, u, L, step)
    h = 0.5 * (h + h.T)
    H = _det_checked(h)

    def log_abs_H(v):
        return np.array([np.linalg.slogdet(h_at(v))[1]])

    grad_u = _jacobian(log_abs_H, u, step)[0]
    grad_x = np.linalg.solve(Jx.T, grad_u)
    t = -np.linalg.solve(h, grad_x) / (l + 1)
    xi = abs(H) ** (1.0 / (l + 1)) * (fr.e_l + fr.e @ t)
    return np.sign(fr.y[L]) * xi, t, H


def affine_invariants(patch: HypersurfacePatch, u=None, index=None, grad_step=1e-4) -> AffineInvariants:
    """Full centroaffine data at a point of a moduli-derived patch (q^A / lambda route)."""
    if not patch.has_periods:
        raise ValueError("the q^A route needs a moduli-derived patch; use affine_normal_generic")
    u = patch.base() if u is None else np.asarray(u, dtype=float)
    fr = frames(patch, u, index)
    L, l, V = fr.index, patch.l, patch.volume
    x, y = fr.x, fr.y
    p = patch.p_at(x)
    sign_p, logdet_p = np.linalg.slogdet(p)
    h = h_from_p(p, y, L)
    h = 0.5 * (h + h.T)
    H = _det_checked(h)
    g = _grad_log_det_p(patch, x, grad_step)
    q_low = g / (l + 1)
    q_up = np.linalg.solve(p, q_low)
    lam = (-1.0 + y @ q_up) / (7.0 * V)
    t = y[L] * (q_up[fr.others] - lam * x[fr.others])
    xi_x = np.sign(y[L]) * abs(H) ** (1.0 / (l + 1)) * (fr.e_l + fr.e @ t)
    abs_det_p_root = np.exp(logdet_p / (l + 1))
    xi_y = (1.0 / (7 * V) * (3.0 / (28 * V)) ** (1.0 / (l + 1)) / abs_det_p_root
            * (y + (-7 * V * q_low + y * (x @ q_low))))
    scalars = {
        "xi_y_of_x": float(xi_y @ x),
        "xi_x_of_y": float(xi_x @ y),
        "xi_y_of_xi_x": float(xi_y @ xi_x),
    }
    closed = {
        "xi_y_of_x": (3.0 / (28 * V)) ** (1.0 / (l + 1)) / abs_det_p_root,
        "xi_x_of_y": (21.0 * V / 4.0) ** (1.0 / (l + 1)) * abs_det_p_root,
        "xi_y_of_xi_x": 1.0 / (7 * V) * (9.0 / 16.0) ** (1.0 / (l + 1))
        * (1.0 + l**2 / (12.0 * (l + 1) ** 2) - 7 * V * (q_up @ q_low)),
    }
    return AffineInvariants(
        h=h, H=H, blaschke=blaschke_form(h, H, l), q_up=q_up, q_low=q_low, lam=float(lam), t=t,
        xi_x=xi_x, xi_y=xi_y, index=L, det_p=float(sign_p * np.exp(logdet_p)),
        scalars=scalars, closed_forms=closed,
    )


def affine_normal(patch: HypersurfacePatch, u=None, index=None) -> np.ndarray:
    """Affine normal xi^x: q^A route for moduli patches, direct solve for t otherwise."""
    if patch.has_periods:
        return affine_invariants(patch, u, index).xi_x
    return affine_normal_generic(patch, u, index)[0]


def conormal_affine_normal(patch: HypersurfacePatch, u=None, index=None) -> np.ndarray:
    return affine_invariants(patch, u, index).xi_y


@dataclass(frozen=True, eq=False)
class SphereVerdict:
    is_sphere: bool
    max_angle: float
    tolerance: float
    rows: list
    det_p_spread: float | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "verdict": "affine sphere (center 0)" if self.is_sphere else "not an affine sphere centered at 0",
            "is_sphere": self.is_sphere,
            "max_angle": self.max_angle,
            "tolerance": self.tolerance,
            "det_p_spread": self.det_p_spread,
            "reason": self.reason,
        }


def affine_sphere_test(patch: HypersurfacePatch, samples, center=None, tol: float = 1e-3) -> SphereVerdict:
    """Check whether the affine normal lines at the samples all pass through ``center``."""
    samples = [np.asarray(u, dtype=float) for u in samples]
    if len(samples) < 2:
        raise ValueError("affine_sphere_test needs at least 2 samples")
    center = np.zeros(patch.l) if center is None else np.asarray(center, dtype=float)
    rows = []
    max_angle = 0.0
    det_ps = []
    for u in samples:
        x = patch.position(u)
        try:
            if patch.has_periods:
                inv = affine_invariants(patch, u)
                xi, H, det_p = inv.xi_x, inv.H, inv.det_p
                det_ps.append(det_p)
            else:
                xi, _, H = affine_normal_generic(patch, u)
                det_p = float("nan")
        except DegenerateError:
            return SphereVerdict(False, float("inf"), tol, rows, None, "degenerate second fundamental form")
        ang = line_angle(xi, x - center)
        max_angle = max(max_angle, ang)
        rows.append({"u": u.tolist(), "H": H, "angle": ang, "det_p": det_p})
    spread = None
    if det_ps:
        d = np.array(det_ps)
        spread = float((d.max() - d.min()) / np.abs(d).mean())
    return SphereVerdict(bool(max_angle <= tol), float(max_angle), tol, rows, spread)
