import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from g2moduli.exterior7 import Form, basis_tuples, evaluate, hodge_star, inner, interior, top_coefficient, wedge
from g2moduli.g2_point import (
    PHI0,
    THETA0,
    NotG2FormError,
    comass_sample,
    d_theta,
    d_theta_finite_difference,
    g2_point,
    is_positive,
    metric_and_density,
    positivity_form,
    random_positive_form,
    theta,
    type_decompose,
)

E = np.eye(7)


def pullback(phi: Form, A: np.ndarray) -> Form:
    """(A^* phi)(u, v, w) = phi(Au, Av, Aw), read off on basis triples."""
    coeffs = [evaluate(phi, A[:, list(idx)]) for idx in basis_tuples(3)]
    return Form(3, np.array(coeffs))


class TestPositivity:
    def test_reference_form(self):
        assert is_positive(PHI0)
        assert np.allclose(positivity_form(PHI0), 6 * np.eye(7))

    def test_negated(self):
        assert not is_positive(-PHI0)

    def test_degenerate(self):
        assert not is_positive(Form.basis((1, 2, 3)))

    def test_wrong_degree(self):
        with pytest.raises(ValueError):
            is_positive(Form.basis((1, 2)))

    def test_metric_of_nonpositive_rejected(self):
        with pytest.raises(NotG2FormError):
            metric_and_density(-PHI0)


class TestMetricAndDensity:
    def test_reference(self):
        g, vol = metric_and_density(PHI0)
        assert np.allclose(g, np.eye(7), atol=1e-14)
        assert vol == pytest.approx(1.0, rel=1e-14)

    def test_scaled_by_eight(self):
        g, vol = metric_and_density(8 * PHI0)
        assert np.allclose(g, 4 * np.eye(7), rtol=1e-13)
        assert vol == pytest.approx(128.0, rel=1e-13)

    def test_det_equals_density_squared(self, rng):
        phi = random_positive_form(rng)
        g, vol = metric_and_density(phi)
        assert np.linalg.det(g) == pytest.approx(vol**2, rel=1e-12)

    def test_diagonal_pullback(self):
        a = np.array([2.0, 1, 1, 1, 1, 1, 1])
        g, vol = metric_and_density(pullback(PHI0, np.diag(a)))
        assert np.allclose(g, np.diag(a**2), atol=1e-12)
        assert vol == pytest.approx(2.0, rel=1e-12)

    def test_general_linear_equivariance(self, rng):
        A = np.eye(7) + 0.2 * rng.standard_normal((7, 7))
        if np.linalg.det(A) < 0:
            A[:, 0] *= -1
        phi = random_positive_form(rng)
        g, vol = metric_and_density(phi)
        g2, vol2 = metric_and_density(pullback(phi, A))
        assert np.allclose(g2, A.T @ g @ A, atol=1e-9 * np.abs(g2).max())
        assert vol2 == pytest.approx(vol * np.linalg.det(A), rel=1e-9)

    def test_tiny_scale_does_not_underflow(self):
        g, vol = metric_and_density(1e-30 * PHI0)
        assert np.allclose(g, 1e-20 * np.eye(7), rtol=1e-12)
        assert vol == pytest.approx(1e-70, rel=1e-12)


class TestTheta:
    def test_reference_dual_form(self):
        assert theta(PHI0).allclose(THETA0, atol=1e-14)

    def test_scaling(self):
        assert theta(8 * PHI0).allclose(16 * THETA0, atol=1e-12)

    def test_is_star_of_phi(self, rng):
        phi = random_positive_form(rng)
        g, _ = metric_and_density(phi)
        assert theta(phi).allclose(hodge_star(phi, g), atol=1e-12)

    def test_norm_identity(self, rng):
        for _ in range(10):
            at = g2_point(random_positive_form(rng))
            assert top_coefficient(wedge(at.phi, at.theta)) == pytest.approx(7 * at.density, rel=1e-9)


class TestTypeDecomposition:
    def test_phi_is_type_one(self):
        at = g2_point(PHI0)
        split = type_decompose(PHI0, at)
        assert split.pi1.allclose(PHI0, atol=1e-12)
        assert split.pi7.allclose(Form.zero(3), atol=1e-12)
        assert split.pi27.allclose(Form.zero(3), atol=1e-12)

    def test_contraction_of_theta_is_type_seven(self):
        at = g2_point(PHI0)
        eta = interior(E[0], THETA0)
        split = type_decompose(eta, at)
        assert split.pi7.allclose(eta, atol=1e-12)
        assert split.pi1.norm() < 1e-12 and split.pi27.norm() < 1e-12

    def test_dimensions(self):
        at = g2_point(PHI0)
        assert np.linalg.matrix_rank(at.type7) == 7

    def test_random_split(self, rng):
        at = g2_point(random_positive_form(rng))
        eta = Form(3, rng.standard_normal(35))
        s = type_decompose(eta, at)
        assert (s.pi1 + s.pi7 + s.pi27).allclose(eta, atol=1e-10)
        for a, b in ((s.pi1, s.pi7), (s.pi1, s.pi27), (s.pi7, s.pi27)):
            assert abs(inner(a, b, at.metric)) < 1e-10
        # projections are idempotent
        again = type_decompose(s.pi7, at)
        assert again.pi7.allclose(s.pi7, atol=1e-10)
        assert type_decompose(s.pi27, at).pi27.allclose(s.pi27, atol=1e-10)


class TestDTheta:
    def test_scaling_direction(self):
        at = g2_point(PHI0)
        assert d_theta(at, PHI0).allclose(4 / 3 * THETA0, atol=1e-12)

    def test_type_27_direction(self, rng):
        at = g2_point(PHI0)
        eta = type_decompose(Form(3, rng.standard_normal(35)), at).pi27
        assert d_theta(at, eta).allclose(-hodge_star(eta, at.metric), atol=1e-12)

    def test_matches_finite_difference(self, rng):
        for _ in range(5):
            phi = random_positive_form(rng)
            eta = Form(3, rng.standard_normal(35))
            exact = d_theta(g2_point(phi), eta)
            fd = d_theta_finite_difference(phi, eta, 1e-4)
            assert np.linalg.norm((exact - fd).coefficients) <= 1e-6 * exact.norm()

    def test_linear(self, rng):
        at = g2_point(random_positive_form(rng))
        a, b = Form(3, rng.standard_normal(35)), Form(3, rng.standard_normal(35))
        assert d_theta(at, 2 * a - b).allclose(2 * d_theta(at, a) - d_theta(at, b), atol=1e-12)


class TestComass:
    def test_calibrated_plane(self):
        assert evaluate(THETA0, E[:, 3:7]) == pytest.approx(1.0)

    def test_plane_without_term(self):
        assert evaluate(THETA0, E[:, 0:4]) == pytest.approx(0.0)

    def test_deterministic_per_seed(self):
        at = g2_point(PHI0)
        assert comass_sample(at, 200, 3) == comass_sample(at, 200, 3)

    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError):
            comass_sample(g2_point(PHI0), 0, 1)

    def test_bounded_by_one(self, rng):
        for seed in range(5):
            at = g2_point(random_positive_form(rng))
            value = comass_sample(at, 2000, seed)
            assert 0.3 < value <= 1 + 1e-9


def test_point_json():
    obj = g2_point(PHI0).to_json()
    assert set(obj) == {"phi", "metric", "density", "theta"}
    assert len(obj["metric"]) == 49


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 2**32 - 1))
def test_scaling_covariance(c, seed):
    phi = random_positive_form(np.random.default_rng(seed))
    g, vol = metric_and_density(phi)
    gc, volc = metric_and_density(c * phi)
    assert np.allclose(gc, c ** (2 / 3) * g, rtol=1e-9, atol=0)
    assert volc == pytest.approx(c ** (7 / 3) * vol, rel=1e-9)
    th = theta(phi).coefficients
    assert np.allclose(theta(c * phi).coefficients, c ** (4 / 3) * th, rtol=1e-9, atol=1e-12 * np.abs(th).max())
