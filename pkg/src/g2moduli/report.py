"""Verification suites and the machine-readable report format.

A report is a JSON object::

    {"schema": "g2moduli.report/1", "suite": ..., "seed": ..., "status": "pass" | "fail",
     "checks": [{"name", "measured", "expected", "tolerance", "pass"}, ...],
     "data": {...}, "notes": [...]}

Checks are sorted by name.  A check passes when |measured - expected| <= tolerance
(componentwise maximum for lists).  Reports carry no timings, so equal inputs
and seeds give byte-identical output.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import exterior7 as ex
from .affine_hypersurface import (
    H_formula_check,
    ProductPatch,
    QuadricPatch,
    TorusModuliPatch,
    affine_invariants,
    affine_normal_generic,
    affine_sphere_test,
    h_from_p,
    h_pullback,
    line_angle,
)
from .errors import ConvergenceError
from .exterior7 import KForm
from .g2core import (
    PHI0,
    G2Structure,
    connection_pairing,
    decompose,
    is_definite,
    l2_inner,
    metric_from_phi,
    metric_variation,
    stabilizer_dimension,
    star_derivative,
)
from .period_geometry import (
    eq21_residual,
    eq23_blocks,
    euler_x,
    euler_y,
    isotypic_pattern,
    lagrangian_residual,
    log_abs_det_p,
    p_matrix,
    pullback_metric_signature,
)
from .torus_moduli import (
    HESSIAN_CONSTANTS,
    PUBLISHED_CONSTANTS,
    ModuliPoint,
    coperiods,
    criticality_residual,
    find_critical,
    hessian_slice,
    orbit_point,
    periods,
    point_from_phi,
    random_orbit_matrix,
    type_leakage,
)

SCHEMA = "g2moduli.report/1"

#: Default tolerance for every named check.
DEFAULT_TOLERANCES: dict[str, float] = {
    "metric.fixture": 1e-12,
    "metric.equivariance": 1e-9,
    "metric.stabilizer_dim": 0.0,
    "metric.variation_fd": 1e-6,
    "metric.definite": 0.0,
    "decompose.ranks": 0.0,
    "decompose.reconstruction": 1e-10,
    "decompose.orthogonality": 1e-10,
    "star.derivative_fd": 1e-6,
    "star.phi_wedge_star_phi": 1e-10,
    "star.l2_normalization": 1e-10,
    "connection.torsion_symmetry": 1e-10,
    "connection.metric_compat_fd": 1e-6,
    "periods.U_equals_7vol": 1e-10,
    "periods.four_y_three_px": 1e-8,
    "periods.lagrangian_curve": 1e-6,
    "periods.signature": 0.0,
    "periods.isotypic_pattern": 1e-8,
    "periods.eq23_blocks": 1e-8,
    "periods.euler_x": 1e-4,
    "periods.euler_y": 1e-4,
    "morse.convergence": 0.0,
    "morse.criticality": 1e-8,
    "morse.spectrum": 1e-4,
    "morse.type_leakage": 1e-4,
    "morse.index": 0.0,
    "morse.recovery": 1e-8,
    "affine.verdict": 0.0,
    "affine.max_angle": 1e-3,
    "affine.det_p_spread": 1e-6,
    "affine.H_formula": 1e-5,
    "affine.scalar_pairings": 1e-5,
    "affine.route_agreement": 1e-6,
    "affine.h_routes": 1e-6,
    "affine.toy_angle": 1e-6,
}

SUITES = ("decompose", "metric", "star", "morse", "periods", "affine")


def _clean(v):
    """JSON-safe copy: numpy to python, non-finite floats to strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


@dataclass
class Check:
    name: str
    measured: object
    expected: object
    tolerance: float

    @property
    def passed(self) -> bool:
        m = np.asarray(self.measured, dtype=float)
        e = np.asarray(self.expected, dtype=float)
        if m.shape != e.shape and e.ndim and m.ndim:
            return False
        d = np.abs(m - e)
        return bool(np.all(np.isfinite(d)) and np.all(d <= self.tolerance))

    def to_dict(self) -> dict:
        return _clean({
            "name": self.name,
            "measured": self.measured,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "pass": self.passed,
        })


@dataclass
class Report:
    suite: str
    seed: int
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: Check):
        self.checks.append(check)

    def merge(self, other: "Report"):
        self.checks.extend(other.checks)
        if other.data:
            self.data[other.suite] = other.data
        self.notes.extend(other.notes)

    def to_dict(self) -> dict:
        return _clean({
            "schema": SCHEMA,
            "suite": self.suite,
            "seed": self.seed,
            "status": "pass" if self.passed else "fail",
            "checks": [c.to_dict() for c in sorted(self.checks, key=lambda c: c.name)],
            "data": self.data,
            "notes": self.notes,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def summary(self) -> str:
        lines = [f"suite {self.suite} (seed {self.seed}): {'PASS' if self.passed else 'FAIL'}"]
        for c in sorted(self.checks, key=lambda c: c.name):
            lines.append(f"  [{'pass' if c.passed else 'FAIL'}] {c.name}")
        return "\n".join(lines)


@dataclass
class Config:
    seed: int = 0
    samples: int = 10
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    input: dict | None = None
    csv_path: str | None = None

    def tol(self, name: str) -> float:
        return self.tolerances[name]

    def rng(self, stream: int) -> np.random.Generator:
        """Independent generator per suite so suites do not perturb each other."""
        return np.random.default_rng([self.seed, stream])


def _random_form(rng, k=3) -> KForm:
    return KForm(k, rng.normal(size=len(ex.multi_indices(k))))


def _point_from_input(inp: dict | None) -> ModuliPoint:
    if not inp or not ({"A", "phi"} & inp.keys()):
        return point_from_phi(PHI0)
    return ModuliPoint.from_dict({k: inp[k] for k in ("A", "phi") if k in inp})


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


# -- suites ------------------------------------------------------------------

def run_metric(cfg: Config) -> Report:
    rep = Report("metric", cfg.seed)
    rng = cfg.rng(1)
    m = _point_from_input(cfg.input)
    rep.data = {"phi": m.phi.to_dict(), "metric": m.structure.metric, "volume": m.vol}
    rep.add(Check("metric.definite", int(is_definite(m.phi)), 1, cfg.tol("metric.definite")))
    rep.add(Check("metric.fixture", float(np.abs(metric_from_phi(PHI0) - np.eye(7)).max()), 0.0,
                  cfg.tol("metric.fixture")))
    worst = 0.0
    for _ in range(cfg.samples):
        A = random_orbit_matrix(rng)
        worst = max(worst, float(np.abs(metric_from_phi(ex.pullback(A, PHI0)) - A.T @ A).max()))
    rep.add(Check("metric.equivariance", worst, 0.0, cfg.tol("metric.equivariance")))
    rep.add(Check("metric.stabilizer_dim", stabilizer_dimension(), 14, cfg.tol("metric.stabilizer_dim")))
    worst = 0.0
    s = m.structure
    for _ in range(cfg.samples):
        Z = _random_form(rng)

        def d(t):
            return (metric_from_phi(m.phi + t * Z) - metric_from_phi(m.phi - t * Z)) / (2 * t)

        fd = (4 * d(5e-4) - d(1e-3)) / 3
        worst = max(worst, _rel(fd, metric_variation(s, Z)))
    rep.add(Check("metric.variation_fd", worst, 0.0, cfg.tol("metric.variation_fd")))
    return rep


def run_decompose(cfg: Config) -> Report:
    rep = Report("decompose", cfg.seed)
    rng = cfg.rng(2)
    m = _point_from_input(cfg.input)
    s = m.structure
    P1, P7, P27 = s.projectors
    ranks = [int(np.linalg.matrix_rank(P, tol=1e-8)) for P in (P1, P7, P27)]
    rep.add(Check("decompose.ranks", ranks, [1, 7, 27], cfg.tol("decompose.ranks")))
    Xs = [KForm.from_dict(cfg.input["X"])] if cfg.input and "X" in cfg.input else []
    Xs += [_random_form(rng) for _ in range(cfg.samples)]
    rec = orth = 0.0
    for X in Xs:
        sp = decompose(s, X)
        rec = max(rec, _rel(sp.total().coeffs, X.coeffs))
        nx = l2_inner(s, X, X)
        for a, b in ((sp.x1, sp.x7), (sp.x1, sp.x27), (sp.x7, sp.x27)):
            orth = max(orth, abs(l2_inner(s, a, b)) / nx)
    sp = decompose(s, Xs[0])
    rep.data = {"X": Xs[0].to_dict(), "x1": sp.x1.to_dict(), "x7": sp.x7.to_dict(),
                "x27": sp.x27.to_dict(), "h": sp.h, "v": sp.v}
    rep.add(Check("decompose.reconstruction", rec, 0.0, cfg.tol("decompose.reconstruction")))
    rep.add(Check("decompose.orthogonality", orth, 0.0, cfg.tol("decompose.orthogonality")))
    return rep


def _star_of(phi: KForm) -> KForm:
    return G2Structure(phi).star_phi


def run_star(cfg: Config) -> Report:
    rep = Report("star", cfg.seed)
    rng = cfg.rng(3)
    m = _point_from_input(cfg.input)
    s = m.structure
    rep.data = {"phi": m.phi.to_dict(), "star_phi": s.star_phi.to_dict()}
    top = (m.phi ^ s.star_phi).coeffs[0]
    rep.add(Check("star.phi_wedge_star_phi", abs(top - 7 * m.vol) / (7 * m.vol), 0.0,
                  cfg.tol("star.phi_wedge_star_phi")))
    worst = 0.0
    for _ in range(cfg.samples):
        X = _random_form(rng)

        def fd(t):
            return (_star_of(m.phi + t * X).coeffs - _star_of(m.phi - t * X).coeffs) / (2 * t)

        t = 1e-3
        est = (4 * fd(t / 2) - fd(t)) / 3
        worst = max(worst, _rel(est, star_derivative(s, X).coeffs))
    rep.add(Check("star.derivative_fd", worst, 0.0, cfg.tol("star.derivative_fd")))
    worst = 0.0
    for _ in range(cfg.samples):
        mp = orbit_point(random_orbit_matrix(rng))
        worst = max(worst, abs(l2_inner(mp.structure, mp.phi, mp.phi) - 7 * mp.vol) / (7 * mp.vol))
    rep.add(Check("star.l2_normalization", worst, 0.0, cfg.tol("star.l2_normalization")))
    return rep


def run_connection(cfg: Config) -> Report:
    rep = Report("connection", cfg.seed)
    rng = cfg.rng(4)
    m = _point_from_input(cfg.input)
    s = m.structure
    sym = comp = 0.0
    for _ in range(cfg.samples):
        X, Y, Z = (_random_form(rng) for _ in range(3))
        a, b = connection_pairing(s, X, Y, Z), connection_pairing(s, Y, X, Z)
        sym = max(sym, abs(a - b) / max(abs(a), 1.0))

        def d(t):
            return (l2_inner(G2Structure(m.phi + t * X), Y, Z) - l2_inner(G2Structure(m.phi - t * X), Y, Z)) / (2 * t)

        fd = (4 * d(5e-4) - d(1e-3)) / 3
        pred = connection_pairing(s, X, Y, Z) + connection_pairing(s, X, Z, Y)
        comp = max(comp, abs(fd - pred) / max(abs(pred), 1.0))
    rep.add(Check("connection.torsion_symmetry", sym, 0.0, cfg.tol("connection.torsion_symmetry")))
    rep.add(Check("connection.metric_compat_fd", comp, 0.0, cfg.tol("connection.metric_compat_fd")))
    return rep


def run_periods(cfg: Config) -> Report:
    rep = Report("periods", cfg.seed)
    rng = cfg.rng(5)
    given = _point_from_input(cfg.input)
    pts = [given] + [orbit_point(random_orbit_matrix(rng)) for _ in range(max(cfg.samples - 1, 1))]
    U_err = e21 = iso = e23 = 0.0
    sig_ok = []
    for m in pts:
        pv = periods(m)
        p = p_matrix(m)
        U_err = max(U_err, abs(pv.U - 7 * m.vol) / (7 * m.vol))
        e21 = max(e21, eq21_residual(m, p))
        sig_ok.append(list(pullback_metric_signature(m, p)))
        T = isotypic_pattern(m, p)
        target = np.diag([4.0 / 3.0] + [1.0] * 7 + [-1.0] * 27)
        iso = max(iso, float(np.abs(T - target).max()))
        blocks = eq23_blocks(m)
        e23 = max(e23, float(np.abs(blocks["one_27"]).max()),
                  float(np.abs(blocks["seven"] - 2 * np.eye(7)).max()),
                  float(np.abs(blocks["cross"]).max()))
    pv = periods(given)
    p0 = p_matrix(given)
    blocks = eq23_blocks(given)
    rep.data = {"x": pv.x, "y": pv.y, "U": pv.U, "volume": given.vol, "p": p0, "m": given.structure.gram3,
                "signature": list(pullback_metric_signature(given, p0)),
                "eq21_residual": eq21_residual(given, p0), "eq23_blocks": blocks,
                "log_abs_det_p": log_abs_det_p(given)[1], "det_p_sign": log_abs_det_p(given)[0]}
    rep.add(Check("periods.U_equals_7vol", U_err, 0.0, cfg.tol("periods.U_equals_7vol")))
    rep.add(Check("periods.four_y_three_px", e21, 0.0, cfg.tol("periods.four_y_three_px")))
    rep.add(Check("periods.signature", sig_ok, [[8, 27]] * len(pts), cfg.tol("periods.signature")))
    rep.add(Check("periods.isotypic_pattern", iso, 0.0, cfg.tol("periods.isotypic_pattern")))
    rep.add(Check("periods.eq23_blocks", e23, 0.0, cfg.tol("periods.eq23_blocks")))
    curve_res = 0.0
    for _ in range(max(cfg.samples // 2, 1)):
        A0 = random_orbit_matrix(rng)
        W = rng.normal(size=(7, 7)) * 0.1

        def curve(t, A0=A0, W=W):
            return orbit_point(A0 @ (np.eye(7) + t * W))

        curve_res = max(curve_res, lagrangian_residual(curve, [0.0, 0.5]))
    rep.add(Check("periods.lagrangian_curve", curve_res, 0.0, cfg.tol("periods.lagrangian_curve")))
    ex_, ey = euler_x(given), euler_y(given)
    rep.add(Check("periods.euler_x", ex_ / (35 / 3), 1.0, cfg.tol("periods.euler_x")))
    rep.add(Check("periods.euler_y", ey / (35 / 4), 1.0, cfg.tol("periods.euler_y")))
    return rep


def _beta_from_input(inp: dict | None) -> np.ndarray:
    if inp and "beta" in inp:
        beta = inp["beta"]
        if not isinstance(beta, list) or len(beta) != 35:
            raise ValueError("'beta' must be a list of 35 numbers")
        return np.array(beta, dtype=float)
    return coperiods(_point_from_input(inp).structure)


def run_morse(cfg: Config) -> Report:
    rep = Report("morse", cfg.seed)
    rng = cfg.rng(6)
    beta = _beta_from_input(cfg.input)
    rep.data = {"beta": beta}
    try:
        m = find_critical(beta)
    except ConvergenceError as exc:
        rep.add(Check("morse.convergence", 0, 1, cfg.tol("morse.convergence")))
        rep.notes.append(f"find_critical: {exc}")
        return rep
    rep.add(Check("morse.convergence", 1, 1, cfg.tol("morse.convergence")))
    res, c = criticality_residual(beta, m)
    rep.add(Check("morse.criticality", res, 0.0, cfg.tol("morse.criticality")))
    hess = hessian_slice(beta, m, tol=max(cfg.tol("morse.criticality"), 1e-8))
    w = hess.eigenvalues
    expected = np.array([HESSIAN_CONSTANTS["seven"] * c] * 7 + [HESSIAN_CONSTANTS["twenty_seven"] * c] * 27)
    published = np.array([PUBLISHED_CONSTANTS["seven"] * c] * 7 + [PUBLISHED_CONSTANTS["twenty_seven"] * c] * 27)
    order = np.argsort(w) if c > 0 else np.argsort(-w)
    w_sorted = w[order]
    rep.add(Check("morse.spectrum", w_sorted, expected, cfg.tol("morse.spectrum")))
    rep.add(Check("morse.type_leakage", max(type_leakage(hess)) if c > 0 else float("nan"), 0.0,
                  cfg.tol("morse.type_leakage")))
    neg, pos = int(np.sum(w < 0)), int(np.sum(w > 0))
    rep.add(Check("morse.index", [neg, pos], [7, 27] if c > 0 else [27, 7], cfg.tol("morse.index")))
    pv = periods(m)
    rep.data.update({"c": c, "eigenvalues": w_sorted, "spectrum": w_sorted, "index": [neg, pos],
                     "x": pv.x, "y": pv.y, "U": pv.U, "criticality_residual": res,
                     "type_leakage": list(type_leakage(hess)), "critical_point": m.phi.to_dict(),
                     "published_deviation": float(np.abs(w_sorted - published).max())})
    rep.notes.append(
        "spectrum is compared with {-c (x7), +c (x27)}; the published constants "
        "{-5c/6, +7c/6} differ by c/6, reported as data.published_deviation"
    )
    rec = 0.0
    for _ in range(cfg.samples if cfg.input is None else 0):
        A = random_orbit_matrix(rng, scale=0.05, unimodular=True)
        b = coperiods(orbit_point(A).structure)
        found = find_critical(b, point_from_phi(PHI0))
        rec = max(rec, criticality_residual(b, found)[0])
    if cfg.input is None:
        rep.add(Check("morse.recovery", rec, 0.0, cfg.tol("morse.recovery")))
    return rep


def _write_csv(path: str, rows: list):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "H", "angle", "det_p"])
        for r in rows:
            w.writerow([" ".join(repr(float(v)) for v in r["u"]), repr(float(r["H"])),
                        repr(float(r["angle"])), repr(float(r["det_p"]))])


def _toy_checks(cfg: Config, rep: Report):
    worst = 0.0
    # x^1 x^2 = 1: affine normal 2^{-2/3} (a, 1/a)
    hyp = ProductPatch(2)
    for u in (-0.4, 0.0, 0.7):
        a = np.exp(u)
        xi = affine_normal_generic(hyp, np.array([u]))[0]
        worst = max(worst, line_angle(xi, np.array([a, 1 / a])), _rel(xi, 2 ** (-2 / 3) * np.array([a, 1 / a])))
    ell = QuadricPatch("ellipsoid", 3, axes=[1.0, 2.0, 0.5], center=[0.3, -0.2, 1.0])
    for u in ([0.0, 0.0], [0.2, -0.3], [-0.5, 0.1]):
        u = np.array(u)
        xi = affine_normal_generic(ell, u)[0]
        worst = max(worst, _rel(xi, ell.closed_form_normal(u)))
    rep.add(Check("affine.toy_angle", worst, 0.0, cfg.tol("affine.toy_angle")))


def run_affine(cfg: Config) -> Report:
    from .affine_hypersurface import patch_from_spec

    rep = Report("affine", cfg.seed)
    rng = cfg.rng(7)
    spec = (cfg.input or {}).get("patch", {"kind": "torus_moduli"})
    patch = patch_from_spec(spec)
    if isinstance(patch, TorusModuliPatch):
        samples = [patch.base()] + [patch.orbit_sample(random_orbit_matrix(rng, unimodular=True))
                                    for _ in range(max(cfg.samples - 1, 1))]
    else:
        samples = [rng.uniform(-0.3, 0.3, size=patch.l - 1) for _ in range(max(cfg.samples, 2))]
    verdict = affine_sphere_test(patch, samples, tol=cfg.tol("affine.max_angle"))
    expect_sphere = patch.kind in ("torus_moduli", "level_set") or getattr(patch, "shape", "") == "ellipsoid"
    center = getattr(patch, "center", None)
    if center is not None and np.any(center):
        verdict = affine_sphere_test(patch, samples, center=center, tol=cfg.tol("affine.max_angle"))
    rep.data = {"patch": spec, **verdict.to_dict()}
    rep.add(Check("affine.verdict", int(verdict.is_sphere), int(expect_sphere), cfg.tol("affine.verdict")))
    if verdict.is_sphere:
        rep.add(Check("affine.max_angle", verdict.max_angle, 0.0, cfg.tol("affine.max_angle")))
    if cfg.csv_path:
        _write_csv(cfg.csv_path, verdict.rows)
    if patch.has_periods:
        rep.add(Check("affine.det_p_spread", verdict.det_p_spread, 0.0, cfg.tol("affine.det_p_spread")))
        Hres = sc = route = e3031 = 0.0
        for u in samples[:3]:
            Hres = max(Hres, H_formula_check(patch, u)["residual"])
            inv = affine_invariants(patch, u)
            for k, v in inv.closed_forms.items():
                sc = max(sc, abs(inv.scalars[k] - v) / abs(v))
            xg = affine_normal_generic(patch, u, analytic_h=True)[0]
            route = max(route, _rel(xg, inv.xi_x))
            x, y = patch.position(u), patch.conormal(u)
            p = patch.p_at(x)
            a, b = h_from_p(p, y, inv.index), h_pullback(p, y, inv.index)
            e3031 = max(e3031, float(np.abs(a - b).max() / np.abs(b).max()))
        rep.add(Check("affine.H_formula", Hres, 0.0, cfg.tol("affine.H_formula")))
        rep.add(Check("affine.scalar_pairings", sc, 0.0, cfg.tol("affine.scalar_pairings")))
        rep.add(Check("affine.route_agreement", route, 0.0, cfg.tol("affine.route_agreement")))
        rep.add(Check("affine.h_routes", e3031, 0.0, cfg.tol("affine.h_routes")))
    if cfg.input is None:
        _toy_checks(cfg, rep)
    return rep


RUNNERS = {
    "metric": run_metric,
    "decompose": run_decompose,
    "star": run_star,
    "periods": run_periods,
    "morse": run_morse,
    "affine": run_affine,
}


def run_verify(cfg: Config) -> Report:
    """Every suite with default inputs; the connection checks only run here."""
    rep = Report("verify", cfg.seed)
    base = Config(cfg.seed, cfg.samples, cfg.tolerances, None, None)
    for name in ("metric", "decompose", "star"):
        rep.merge(RUNNERS[name](base))
    rep.merge(run_connection(base))
    for name in ("periods", "morse", "affine"):
        rep.merge(RUNNERS[name](base))
    return rep
