import numpy as np
import pytest

from g2moduli.errors import DegeneracyError
from g2moduli.g2core import PHI0
from g2moduli.period_geometry import (
    eq21_residual,
    eq23_blocks,
    euler_x,
    euler_y,
    inertia,
    isotypic_pattern,
    lagrangian_residual,
    log_abs_det_p,
    m_matrix,
    p_matrix,
    p_matrix_fd,
    period_jet,
    point_with_coperiods,
    pullback_metric_signature,
    typed_orthonormal_basis,
)
from g2moduli.torus_moduli import coperiods, orbit_point, point_from_phi, random_orbit_matrix

M0 = point_from_phi(PHI0)


@pytest.fixture(scope="module")
def sample():
    return orbit_point(random_orbit_matrix(np.random.default_rng(11)))


def test_p_matches_finite_differences(sample):
    for m in (M0, sample):
        p = p_matrix(m)
        assert np.allclose(p, p_matrix_fd(m), atol=1e-8 * np.abs(p).max())


def test_p_is_symmetric(sample):
    p = p_matrix(sample)
    assert np.allclose(p, p.T, atol=1e-10 * np.abs(p).max())


def test_four_y_equals_three_p_x(sample):
    assert eq21_residual(M0) < 1e-12
    assert eq21_residual(sample) < 1e-10


def test_signature(sample):
    assert pullback_metric_signature(sample) == (8, 27)


def test_inertia_flags_zero_eigenvalue():
    with pytest.raises(DegeneracyError):
        inertia(np.diag([1.0, 0.0, -1.0]))
    assert inertia(np.diag([2.0, -1.0, 3.0])) == (2, 1)


def test_isotypic_pattern(sample):
    target = np.diag([4 / 3] + [1.0] * 7 + [-1.0] * 27)
    assert np.allclose(isotypic_pattern(sample), target, atol=1e-9)


def test_typed_basis_is_orthonormal(sample):
    E, labels = typed_orthonormal_basis(sample)
    assert np.allclose(E.T @ m_matrix(sample) @ E, np.eye(35), atol=1e-10)
    assert sorted(np.unique(labels, return_counts=True)[1].tolist()) == [1, 7, 27]


def test_residual_blocks(sample):
    b = eq23_blocks(sample)
    assert np.abs(b["one_27"]).max() < 1e-9
    assert np.allclose(b["seven"], 2 * np.eye(7), atol=1e-9)
    assert np.abs(b["cross"]).max() < 1e-9


def test_lagrangian_along_orbit_curve():
    rng = np.random.default_rng(12)
    W = 0.1 * rng.normal(size=(7, 7))
    curve = lambda t: orbit_point(np.eye(7) + t * W)  # noqa: E731
    assert lagrangian_residual(curve, [0.0, 0.3, -0.4]) < 1e-6


def test_period_jet_U(sample):
    jet = period_jet(sample)
    assert jet.U == pytest.approx(7 * sample.vol, rel=1e-12)


def test_det_p_sign_and_invariance():
    rng = np.random.default_rng(13)
    s0, l0 = log_abs_det_p(M0)
    s1, l1 = log_abs_det_p(orbit_point(random_orbit_matrix(rng, unimodular=True)))
    assert s0 == s1 == -1.0
    assert l1 == pytest.approx(l0, abs=1e-10)


def test_euler_relations(sample):
    assert euler_x(sample) == pytest.approx(35 / 3, rel=1e-6)
    assert euler_y(sample) == pytest.approx(35 / 4, rel=1e-6)


def test_point_with_coperiods_inverts(sample):
    y = coperiods(sample.structure)
    m = point_with_coperiods(1.01 * y, sample)
    assert np.allclose(coperiods(m.structure), 1.01 * y, rtol=1e-12)
