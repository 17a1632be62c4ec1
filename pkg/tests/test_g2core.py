import numpy as np
import pytest

from g2moduli import exterior7 as ex
from g2moduli.errors import DefinitenessError
from g2moduli.exterior7 import KForm
from g2moduli.g2core import (
    PHI0,
    G2Structure,
    bilinear_B,
    connection_pairing,
    decompose,
    is_definite,
    l2_inner,
    metric_from_phi,
    metric_variation,
    stabilizer_dimension,
    star_derivative,
)
from g2moduli.torus_moduli import random_orbit_matrix

import oracles

S0 = G2Structure(PHI0)


def rand3(rng):
    return KForm(3, rng.normal(size=35))


def test_B_of_phi0_and_scaling():
    assert np.allclose(bilinear_B(PHI0), np.eye(7), atol=1e-14)
    assert np.allclose(bilinear_B(2.0 * PHI0), 8.0 * np.eye(7), atol=1e-13)


def test_B_matches_bruteforce_expansion():
    rng = np.random.default_rng(0)
    phi = ex.pullback(random_orbit_matrix(rng), PHI0)
    assert np.allclose(bilinear_B(phi), oracles.bilinear_B(phi.coeffs), atol=1e-12)


def test_metric_of_diag_pullback_matches_oracle():
    A = np.diag([1, 1, 1, 1, 1, 1, 4.0])
    phi = ex.pullback(A, PHI0)
    expected = oracles.metric_from_phi(phi.coeffs)
    assert np.allclose(expected, A.T @ A, atol=1e-12)
    assert np.allclose(metric_from_phi(phi), expected, atol=1e-12)


def test_metric_scaling_law():
    lam = 1.7
    assert np.allclose(metric_from_phi(lam**3 * PHI0), lam**2 * np.eye(7), atol=1e-12)


@pytest.mark.parametrize("phi,ok", [
    (PHI0, True),
    (KForm.zero(3), False),
    (ex.monomial((1, "123")), False),
    (ex.monomial((1, "123"), (1, "456")), False),
    (-1 * PHI0, False),
])
def test_is_definite(phi, ok):
    assert is_definite(phi) is ok


def test_metric_rejects_degenerate():
    with pytest.raises(DefinitenessError):
        metric_from_phi(ex.monomial((1, "123")))


def test_decompose_phi0():
    sp = decompose(S0, PHI0)
    assert sp.x1.allclose(PHI0, atol=1e-12)
    assert np.allclose(sp.h, np.eye(7) / 3, atol=1e-12)
    assert np.allclose(sp.v, 0, atol=1e-12)


def test_decompose_seven_type():
    X = ex.interior(np.eye(7)[0], S0.star_phi)
    sp = decompose(S0, X)
    assert sp.x7.allclose(X, atol=1e-12)
    assert np.allclose(sp.x1.coeffs, 0, atol=1e-12) and np.allclose(sp.x27.coeffs, 0, atol=1e-12)


def test_projector_ranks_and_idempotence():
    P1, P7, P27 = S0.projectors
    assert [np.linalg.matrix_rank(P, tol=1e-8) for P in (P1, P7, P27)] == [1, 7, 27]
    for P in (P1, P7, P27):
        assert np.allclose(P @ P, P, atol=1e-10)
    assert np.allclose(P1 + P7 + P27, np.eye(35), atol=1e-10)


def test_star_derivative_special_inputs():
    assert star_derivative(S0, PHI0).allclose(4.0 / 3.0 * S0.star_phi, atol=1e-12)
    X = ex.interior(np.eye(7)[2], S0.star_phi)
    assert star_derivative(S0, X).allclose(ex.hodge_star(np.eye(7), X), atol=1e-12)


def test_l2_products():
    assert l2_inner(S0, PHI0, PHI0) == pytest.approx(7.0, abs=1e-12)
    rng = np.random.default_rng(1)
    A = random_orbit_matrix(rng)
    s = G2Structure(ex.pullback(A, PHI0))
    assert l2_inner(s, s.phi, s.phi) == pytest.approx(7 * np.linalg.det(A), rel=1e-12)
    sp = decompose(S0, rand3(rng))
    assert abs(l2_inner(S0, sp.x1, sp.x7)) < 1e-12


def test_metric_variation_values():
    assert np.allclose(metric_variation(S0, PHI0), 2.0 / 3.0 * np.eye(7), atol=1e-12)
    X = ex.interior(np.eye(7)[4], S0.star_phi)
    assert np.allclose(metric_variation(S0, X), 0, atol=1e-12)


def test_connection_pairing_on_phi0():
    # direct evaluation of the right-hand side with h = g/3, tr h = 7/3
    g = np.eye(7)
    hphi = (g / 3.0)
    hp = ex.derivation_matrix(hphi, 3) @ PHI0.coeffs  # = phi0
    ip = PHI0.coeffs @ PHI0.coeffs
    rhs = -2 * (2 * hp @ PHI0.coeffs) + 2 * (PHI0.coeffs @ hp) + (7 / 3) * ip
    assert connection_pairing(S0, PHI0, PHI0, PHI0) == pytest.approx(0.5 * rhs, rel=1e-12)
    assert 0.5 * rhs == pytest.approx(7.0 / 6.0)


def test_stabilizer_dimension():
    assert stabilizer_dimension() == 14
    rng = np.random.default_rng(2)
    assert stabilizer_dimension(ex.pullback(random_orbit_matrix(rng), PHI0)) == 14


def test_structure_is_frozen():
    with pytest.raises(Exception):
        S0.phi = PHI0
