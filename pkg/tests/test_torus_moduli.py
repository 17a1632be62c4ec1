import numpy as np
import pytest

from g2moduli import exterior7 as ex
from g2moduli.errors import ConvergenceError, NotCriticalError, OrientationError
from g2moduli.exterior7 import KForm
from g2moduli.g2core import PHI0
from g2moduli.torus_moduli import (
    F_beta,
    G_alpha,
    ModuliPoint,
    chart_tangent_rank,
    coperiods,
    criticality_residual,
    dual_to_four_form,
    find_critical,
    four_form_to_dual,
    hessian_slice,
    morse_index,
    normalize_volume,
    orbit_point,
    periods,
    point_from_phi,
    random_orbit_matrix,
    slice_basis,
    slice_gradient,
    type_leakage,
)

M0 = point_from_phi(PHI0)
BETA0 = coperiods(M0.structure)


def test_orbit_point_metric_and_volume():
    rng = np.random.default_rng(0)
    A = random_orbit_matrix(rng)
    m = orbit_point(A)
    assert np.allclose(m.structure.metric, A.T @ A, atol=1e-10)
    assert m.vol == pytest.approx(np.linalg.det(A), rel=1e-12)


def test_orbit_point_orientation():
    with pytest.raises(OrientationError):
        orbit_point(np.diag([-1.0, 1, 1, 1, 1, 1, 1]))


def test_random_orbit_matrix_unimodular():
    rng = np.random.default_rng(1)
    A = random_orbit_matrix(rng, unimodular=True)
    assert np.linalg.det(A) == pytest.approx(1.0, abs=1e-12)


def test_coperiod_pairing_is_top_form():
    # sum_A x^A y_A equals the coefficient of phi ^ *phi
    rng = np.random.default_rng(2)
    m = orbit_point(random_orbit_matrix(rng))
    pv = periods(m)
    top = (m.phi ^ m.structure.star_phi).coeffs[0]
    assert pv.U == pytest.approx(top, rel=1e-12)
    assert pv.U == pytest.approx(7 * m.vol, rel=1e-12)


def test_dual_round_trip():
    y = np.random.default_rng(3).normal(size=35)
    assert np.allclose(four_form_to_dual(dual_to_four_form(y).coeffs), y)


def test_height_functions():
    assert F_beta(BETA0, M0) == pytest.approx(7.0)
    assert G_alpha(PHI0.coeffs, M0) == pytest.approx(7.0)


def test_normalize_volume():
    m = normalize_volume(point_from_phi(3.0 * PHI0))
    assert m.vol == pytest.approx(1.0, abs=1e-13)
    assert m.phi.allclose(PHI0, atol=1e-12)


def test_slice_basis_is_typed_and_orthonormal():
    sb = slice_basis(M0)
    assert sb.basis.shape == (35, 34)
    assert np.allclose(sb.gram, np.eye(34), atol=1e-10)
    P1, P7, P27 = M0.structure.projectors
    assert np.allclose(P7 @ sb.basis[:, sb.idx7], sb.basis[:, sb.idx7], atol=1e-10)
    assert np.allclose(P27 @ sb.basis[:, sb.idx27], sb.basis[:, sb.idx27], atol=1e-10)
    # tangent to the volume slice: L^2-orthogonal to phi
    assert np.allclose(PHI0.coeffs @ M0.structure.gram3 @ sb.basis, 0, atol=1e-10)


def test_chart_tangent_rank():
    assert chart_tangent_rank(M0) == 35


def test_gradient_vanishes_at_model_point():
    assert np.allclose(slice_gradient(BETA0, M0), 0, atol=1e-12)
    assert criticality_residual(BETA0, M0)[0] < 1e-14


def test_gradient_along_phi_is_phi_over_3():
    # d/dt vol(phi + t phi) at t = 0 equals <<phi, phi>>/3 = 7/3 at phi0
    t = 1e-6
    fd = (point_from_phi((1 + t) * PHI0).vol - point_from_phi((1 - t) * PHI0).vol) / (2 * t)
    assert fd == pytest.approx(7.0 / 3.0, rel=1e-6)


def test_find_critical_recovers_orbit_point():
    rng = np.random.default_rng(4)
    A = random_orbit_matrix(rng, scale=0.05, unimodular=True)
    beta = coperiods(orbit_point(A).structure)
    m = find_critical(beta, M0)
    assert criticality_residual(beta, m)[0] < 1e-8
    assert m.vol == pytest.approx(1.0, abs=1e-12)


def test_find_critical_negative_beta():
    m = find_critical(-BETA0)
    res, c = criticality_residual(-BETA0, m)
    assert res < 1e-10 and c == pytest.approx(-1.0)


def test_find_critical_outside_cone():
    beta = BETA0.copy()
    i = int(np.argmax(np.abs(beta)))
    beta[i] = -beta[i]
    with pytest.raises(ConvergenceError):
        find_critical(beta)


def test_find_critical_rejects_zero():
    with pytest.raises(ValueError):
        find_critical(np.zeros(35))


def test_hessian_requires_critical_point():
    rng = np.random.default_rng(5)
    with pytest.raises(NotCriticalError):
        hessian_slice(BETA0, normalize_volume(orbit_point(random_orbit_matrix(rng))))


@pytest.fixture(scope="module")
def hess0():
    return hessian_slice(BETA0, M0)


def test_hessian_spectrum_on_torus(hess0):
    w = hess0.eigenvalues
    assert np.allclose(w[:7], -1.0, atol=1e-6)
    assert np.allclose(w[7:], 1.0, atol=1e-6)
    assert max(type_leakage(hess0)) < 1e-6
    assert morse_index(BETA0, M0, hess0) == (7, 27)


def test_hessian_scales_with_beta():
    h2 = hessian_slice(2 * BETA0, M0)
    assert np.allclose(h2.eigenvalues[:7], -2.0, atol=1e-5)
    assert h2.c == pytest.approx(2.0)


def test_moduli_point_json():
    rng = np.random.default_rng(6)
    A = random_orbit_matrix(rng)
    m = ModuliPoint.from_dict({"A": A.reshape(-1).tolist()})
    back = ModuliPoint.from_json(__import__("json").dumps(m.to_dict()))
    assert np.array_equal(back.x, m.x)
    with pytest.raises(ValueError):
        ModuliPoint.from_dict({"A": [1.0] * 48})
    with pytest.raises(ValueError):
        ModuliPoint.from_dict({"phi": KForm(2, np.zeros(21)).to_dict()})


def test_periods_of_pullback_transform_contragrediently():
    # x -> C3(A)^T x and y -> (C4-dual) y: U scales by det A
    rng = np.random.default_rng(7)
    A = random_orbit_matrix(rng)
    m = orbit_point(A)
    assert periods(m).U == pytest.approx(7 * np.linalg.det(A), rel=1e-12)
    assert np.allclose(m.x, ex.pullback(A, PHI0).coeffs)
