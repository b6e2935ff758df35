import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from g2moduli.exterior7 import (
    Form,
    InvalidMetricError,
    Metric7,
    evaluate,
    hodge_star,
    inner,
    interior,
    metric_from_json,
    metric_to_json,
    top_coefficient,
    volume_form,
    wedge,
)

e = Form.basis


def random_form(rng, k):
    return Form(k, rng.standard_normal(math.comb(7, k)))


def random_metric(rng):
    a = 0.3 * rng.standard_normal((7, 7))
    return np.eye(7) + a @ a.T


class TestForm:
    def test_coefficient_count_checked(self):
        with pytest.raises(ValueError):
            Form(3, np.zeros(34))

    def test_degree_range(self):
        with pytest.raises(ValueError):
            Form(8, np.zeros(1))

    def test_from_terms_reorders_with_sign(self):
        assert Form.from_terms(2, {(2, 1): 1.0}).allclose(-e((1, 2)))

    def test_json_round_trip(self, rng):
        a = random_form(rng, 4)
        back = Form.from_json(a.to_json())
        assert np.array_equal(back.coefficients, a.coefficients)

    def test_coefficients_are_immutable(self):
        a = e((1, 2, 3))
        with pytest.raises(ValueError):
            a.coefficients[0] = 5.0


class TestWedge:
    def test_basis_product(self):
        assert wedge(e((1,)), e((2,))).allclose(e((1, 2)))

    def test_anticommutes(self):
        assert wedge(e((2,)), e((1,))).allclose(-e((1, 2)))

    def test_disjoint_two_forms(self):
        assert wedge(e((1, 2)), e((3, 4))).allclose(e((1, 2, 3, 4)))

    def test_degree_overflow(self):
        with pytest.raises(ValueError):
            wedge(e((1, 2, 3, 4)), e((5, 6, 7, 1)))

    @pytest.mark.parametrize("k,l", [(1, 1), (1, 2), (2, 2), (2, 3), (3, 4), (3, 3)])
    def test_graded_commutativity_exact(self, rng, k, l):
        # integer coefficients keep every partial sum exact in floating point
        a = Form(k, rng.integers(-9, 10, math.comb(7, k)).astype(float))
        b = Form(l, rng.integers(-9, 10, math.comb(7, l)).astype(float))
        sign = (-1) ** (k * l)
        assert np.array_equal(wedge(a, b).coefficients, sign * wedge(b, a).coefficients)

    @pytest.mark.parametrize("k,l", [(2, 3), (3, 3), (3, 4)])
    def test_graded_commutativity_float(self, rng, k, l):
        a, b = random_form(rng, k), random_form(rng, l)
        assert wedge(a, b).allclose((-1) ** (k * l) * wedge(b, a), atol=1e-14 * a.norm() * b.norm())

    def test_associative(self, rng):
        a, b, c = random_form(rng, 1), random_form(rng, 2), random_form(rng, 3)
        assert wedge(wedge(a, b), c).allclose(wedge(a, wedge(b, c)), atol=1e-12)


class TestInterior:
    def test_first_slot(self):
        assert interior(np.eye(7)[0], e((1, 2, 3))).allclose(e((2, 3)))

    def test_second_slot_sign(self):
        assert interior(np.eye(7)[1], e((1, 2, 3))).allclose(-e((1, 3)))

    def test_absent_index(self):
        assert interior(np.eye(7)[3], e((1, 2, 3))).allclose(Form.zero(2))

    def test_degree_zero_rejected(self):
        with pytest.raises(ValueError):
            interior(np.ones(7), Form(0, np.array([1.0])))

    @pytest.mark.parametrize("k,l", [(1, 2), (2, 2), (3, 1), (2, 4)])
    def test_leibniz(self, rng, k, l):
        a, b, u = random_form(rng, k), random_form(rng, l), rng.standard_normal(7)
        lhs = interior(u, wedge(a, b))
        rhs = wedge(interior(u, a), b) + (-1) ** k * wedge(a, interior(u, b))
        assert lhs.allclose(rhs, atol=1e-12)


class TestMetric:
    def test_asymmetric_rejected(self):
        g = np.eye(7)
        g[0, 1] = 0.1
        with pytest.raises(InvalidMetricError):
            Metric7(g)

    def test_indefinite_rejected(self):
        g = np.eye(7)
        g[3, 3] = -1
        with pytest.raises(InvalidMetricError):
            hodge_star(e((1, 2, 3)), g)

    def test_json_row_major(self, rng):
        g = random_metric(rng)
        entries = metric_to_json(g)
        assert len(entries) == 49
        assert np.allclose(metric_from_json(entries).entries, g)


class TestInner:
    def test_unit_covector(self):
        assert inner(e((1,)), e((1,)), np.eye(7)) == 1.0

    def test_two_form_with_diagonal_metric(self):
        g = np.diag([4.0, 9.0, 1, 1, 1, 1, 1])
        assert inner(e((1, 2)), e((1, 2)), g) == pytest.approx(1 / 36, rel=1e-14)

    def test_orthogonal_basis_forms(self):
        assert inner(e((1, 2)), e((1, 3)), np.eye(7)) == 0.0

    def test_degree_mismatch(self):
        with pytest.raises(ValueError):
            inner(e((1,)), e((1, 2)), np.eye(7))


class TestHodgeStar:
    def test_of_one_is_volume_form(self):
        assert hodge_star(Form(0, np.array([1.0])), np.eye(7)).allclose(volume_form())

    def test_e123(self):
        assert hodge_star(e((1, 2, 3)), np.eye(7)).allclose(e((4, 5, 6, 7)), atol=1e-14)

    def test_scaled_identity(self):
        assert hodge_star(e((1, 2, 3)), 4 * np.eye(7)).allclose(2 * e((4, 5, 6, 7)), atol=1e-13)

    @pytest.mark.parametrize("k", range(8))
    def test_involution(self, rng, k):
        g = random_metric(rng)
        a = random_form(rng, k)
        back = hodge_star(hodge_star(a, g), g)
        assert back.allclose(a, atol=1e-12 * max(1.0, a.norm()))

    @pytest.mark.parametrize("k", range(8))
    def test_defining_relation(self, rng, k):
        g = random_metric(rng)
        a, b = random_form(rng, k), random_form(rng, k)
        lhs = wedge(a, hodge_star(b, g))
        rhs = inner(a, b, g) * math.sqrt(np.linalg.det(g)) * volume_form()
        assert lhs.allclose(rhs, atol=1e-12 * max(1.0, abs(top_coefficient(rhs))))


def test_evaluate_on_frames():
    frame = np.eye(7)[:, [3, 4, 5, 6]]
    assert evaluate(e((4, 5, 6, 7)), frame) == pytest.approx(1.0)
    assert evaluate(e((4, 5, 6, 7)), frame[:, [1, 0, 2, 3]]) == pytest.approx(-1.0)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=21, max_size=21),
    st.lists(st.floats(-3, 3), min_size=35, max_size=35),
)
def test_wedge_bilinear(xs, ys):
    a, b = Form(2, np.array(xs)), Form(3, np.array(ys))
    assert wedge(2.5 * a, b).allclose(2.5 * wedge(a, b), atol=1e-10)
    assert wedge(a, b + b).allclose(2 * wedge(a, b), atol=1e-10)
