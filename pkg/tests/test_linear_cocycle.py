"""Tests for operators, generators, bunching checks and Hölder fits."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from core.base_dynamics import TorusPoint, apply, make_toral_map, random_points, torus_grid, toral_rates
from core.errors import DimensionMismatch, InvalidParameter, SingularProduct
from core.linear_cocycle import (
    Operator,
    closed_form_generator,
    check_fiber_bunching,
    check_weak_fiber_bunching,
    constant_generator,
    estimate_holder,
    grid_generator,
    iterate,
    load_grid_generator,
    op_distance,
    quasiconformal_distortion,
    sample_pairs,
    spectral_norm,
)
from core.model_zoo import triangular_family

GOLDEN = (1 + math.sqrt(5)) / 2

entries = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@pytest.fixture
def cat():
    return make_toral_map([[2, 1], [1, 1]])


def _well_conditioned(mat: np.ndarray) -> bool:
    svals = np.linalg.svd(mat, compute_uv=False)
    return svals[-1] > 1e-3 * max(svals[0], 1.0)


class TestOperator:
    @given(arrays(np.float64, (2, 2), elements=entries))
    @settings(max_examples=200, deadline=None)
    def test_closed_form_norm_matches_svd(self, mat):
        assert spectral_norm(mat) == pytest.approx(np.linalg.norm(mat, 2), rel=1e-9, abs=1e-12)

    @given(arrays(np.float64, (2, 2), elements=entries), arrays(np.float64, (2, 2), elements=entries))
    @settings(max_examples=100, deadline=None)
    def test_distance_is_symmetric(self, m1, m2):
        if not (_well_conditioned(m1) and _well_conditioned(m2)):
            return
        a, b = Operator.from_matrix(m1), Operator.from_matrix(m2)
        assert op_distance(a, b) == pytest.approx(op_distance(b, a))
        assert op_distance(a, a) == 0.0

    @given(arrays(np.float64, (2, 2), elements=entries), arrays(np.float64, (2, 2), elements=entries))
    @settings(max_examples=500, deadline=None)
    def test_distance_of_inverses(self, m1, m2):
        assume(_well_conditioned(m1) and _well_conditioned(m2))
        a, b = Operator.from_matrix(m1), Operator.from_matrix(m2)
        assert op_distance(a.inverse(), b.inverse()) == pytest.approx(op_distance(a, b))

    @given(arrays(np.float64, (2, 2), elements=entries), arrays(np.float64, (2, 2), elements=entries))
    @settings(max_examples=500, deadline=None)
    def test_distance_sandwich(self, m1, m2):
        assume(_well_conditioned(m1) and _well_conditioned(m2))
        a, b = Operator.from_matrix(m1), Operator.from_matrix(m2)
        bound = max(a.norm, a.inv_norm, b.norm, b.inv_norm)
        diff = spectral_norm(a.mat - b.mat)
        relative = spectral_norm(a.inv @ b.mat - np.eye(2))
        chain = [
            relative / bound,
            diff,
            op_distance(a, b),
            (bound**2 + 1) * diff,
            bound * (bound**2 + 1) * relative,
        ]
        for low, high in zip(chain, chain[1:]):
            assert low <= high + 1e-9 * max(1.0, high)

    def test_inverse_is_cached(self):
        op = Operator.from_matrix([[2.0, 1.0], [0.0, 0.5]])
        assert_allclose(op.mat @ op.inv, np.eye(2), atol=1e-15)
        assert op.distortion == pytest.approx(spectral_norm(op.mat) * spectral_norm(op.inv))

    def test_singular_rejected(self):
        with pytest.raises(SingularProduct):
            Operator.from_matrix([[1.0, 2.0], [2.0, 4.0]])

    def test_nearly_singular_rejected(self):
        with pytest.raises(SingularProduct):
            Operator.from_matrix([[1.0, 0.0], [0.0, 1e-13]])

    def test_non_square_rejected(self):
        with pytest.raises(DimensionMismatch):
            Operator.from_matrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

    def test_three_dimensional_operator(self):
        op = Operator.from_matrix(np.diag([3.0, 1.0, 0.5]))
        assert op.norm == pytest.approx(3.0)
        assert op.inv_norm == pytest.approx(2.0)

    def test_compose_order(self):
        a = Operator.from_matrix([[1.0, 1.0], [0.0, 1.0]])
        b = Operator.from_matrix([[2.0, 0.0], [0.0, 1.0]])
        ab = a.compose(b)
        assert_allclose(ab.mat, a.mat @ b.mat)
        assert_allclose(ab.inv, np.linalg.inv(a.mat @ b.mat), atol=1e-15)

    def test_compose_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            Operator.identity(2).compose(Operator.identity(3))


class TestIterates:
    def test_constant_iterate_is_power(self, cat):
        a = constant_generator([[2.0, 1.0], [0.0, 1.0]])
        x = TorusPoint.of(0.2, 0.3)
        assert_allclose(iterate(a, cat, x, 4).mat, np.linalg.matrix_power(a(x).mat, 4))

    def test_negative_iterate_inverts(self, cat):
        a = closed_form_generator(lambda p: np.array([[2.0, math.sin(2 * math.pi * p.x1)], [0.0, 1.0]]), 2)
        x = TorusPoint.of(0.2, 0.3)
        forward = iterate(a, cat, x, 3)
        backward = iterate(a, cat, apply(cat, x, 3), -3)
        assert_allclose(backward.mat, forward.inv, atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_cocycle_identity(self, cat, seed):
        a = closed_form_generator(
            lambda p: np.array(
                [[2.0, math.sin(2 * math.pi * p.x1)], [0.3 * math.cos(2 * math.pi * p.x2), 1.0]]
            ),
            2,
        )
        x = random_points(np.random.default_rng(seed), 1)[0]
        for n in range(-10, 11):
            a_n = iterate(a, cat, x, n)
            f_n_x = apply(cat, x, n)
            for m in range(-10, 11):
                actual = iterate(a, cat, x, m + n).mat
                expected = iterate(a, cat, f_n_x, m).mat @ a_n.mat
                assert spectral_norm(actual - expected) <= 1e-9 * spectral_norm(actual)

    def test_triangular_iterate_closed_form(self, cat):
        pair = triangular_family(r=0.5, f=cat)
        x = TorusPoint.of(0.37, 0.81)
        for n in range(1, 11):
            orbit = [apply(cat, x, k) for k in range(n)]
            corner = sum(pair.mu ** (n - 1 - k) * pair.phi(p) for k, p in enumerate(orbit))
            expected = np.array([[pair.mu**n, corner], [0.0, 1.0]])
            assert_allclose(iterate(pair.A, cat, x, n).mat, expected, rtol=1e-12, atol=1e-12)

    def test_zero_iterate(self, cat):
        a = constant_generator(np.diag([2.0, 0.5]))
        assert_allclose(iterate(a, cat, TorusPoint(0.0, 0.0), 0).mat, np.eye(2))

    def test_conformal_distortion_is_one(self, cat):
        angle = 0.4
        rotation = [[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]]
        a = constant_generator(2.0 * np.array(rotation))
        assert quasiconformal_distortion(a, cat, TorusPoint.of(0.1, 0.9), 10) == pytest.approx(1.0)


class TestGridGenerator:
    def test_nodes_and_midpoint(self):
        values = np.zeros((2, 2, 2, 2))
        values[:, :] = np.eye(2)
        values[1, 0] = np.diag([3.0, 1.0])
        a = grid_generator(values)
        assert_allclose(a(TorusPoint(0.5, 0.0)).mat, np.diag([3.0, 1.0]))
        assert_allclose(a(TorusPoint(0.25, 0.0)).mat, np.diag([2.0, 1.0]))
        # wraps around to node (0, 0)
        assert_allclose(a(TorusPoint(0.75, 0.0)).mat, np.diag([2.0, 1.0]))

    def test_singular_grid_rejected(self):
        values = np.zeros((2, 2, 2, 2))
        values[:, :] = np.eye(2)
        values[1, 1] = -np.eye(2)
        with pytest.raises(SingularProduct):
            grid_generator(values)

    def test_load_grid_file(self, tmp_path):
        path = tmp_path / "grid.txt"
        path.write_text("2 2 1\n1 0 0 1\n2 0 0 1\n")
        a = load_grid_generator(path)
        assert a.dim == 2
        assert a.kind == "grid_sampled"
        assert_allclose(a(TorusPoint(0.5, 0.3)).mat, np.diag([2.0, 1.0]))

    def test_malformed_grid_file(self, tmp_path):
        path = tmp_path / "grid.txt"
        path.write_text("2 2 2\n1 0 0 1\n")
        with pytest.raises(InvalidParameter):
            load_grid_generator(path)


class TestBunching:
    def test_diagonal_worst_product(self, cat):
        a = constant_generator(np.diag([GOLDEN, 1.0]))
        report = check_fiber_bunching(a, toral_rates(cat), 1.0, torus_grid(4))
        assert report.pointwise_ok
        assert report.worst_product == pytest.approx(0.6180, abs=5e-5)

    def test_non_bunched_diagonal(self, cat):
        a = constant_generator(np.diag([cat.lam**2, 1.0]))
        report = check_fiber_bunching(a, toral_rates(cat), 1.0, torus_grid(2))
        assert not report.pointwise_ok
        assert report.worst_product == pytest.approx(cat.lam)

    def test_weak_bunching_rate_of_diagonal(self, cat):
        a = constant_generator(np.diag([GOLDEN, 1.0]))
        report = check_weak_fiber_bunching(a, cat, toral_rates(cat), 1.0, 10, torus_grid(3))
        assert report.pointwise_ok
        assert report.theta_hat == pytest.approx(1 / GOLDEN, rel=1e-9)
        assert report.L_hat == pytest.approx(1.0, rel=1e-9)

    def test_weak_bunching_needs_eight_iterates(self, cat):
        a = constant_generator(np.eye(2))
        with pytest.raises(InvalidParameter):
            check_weak_fiber_bunching(a, cat, toral_rates(cat), 1.0, 5, torus_grid(2))

    def test_beta_range(self, cat):
        with pytest.raises(InvalidParameter):
            check_fiber_bunching(constant_generator(np.eye(2)), toral_rates(cat), 1.5, torus_grid(2))

    def test_empty_grid_rejected(self, cat):
        a = constant_generator(np.eye(2))
        with pytest.raises(InvalidParameter, match="empty"):
            check_fiber_bunching(a, toral_rates(cat), 1.0, [])
        with pytest.raises(InvalidParameter, match="empty"):
            check_weak_fiber_bunching(a, cat, toral_rates(cat), 1.0, 8, [])


class TestHolderFit:
    def test_lipschitz_generator_slope_near_one(self):
        a = closed_form_generator(
            lambda p: np.array([[2.0, 0.1 * math.cos(2 * math.pi * p.x1)], [0.0, 1.0]]), 2
        )
        pairs = sample_pairs(np.random.default_rng(0), 300, 1e-5, 1e-1)
        fit = estimate_holder(a, pairs)
        assert not fit.degenerate
        assert 0.85 <= fit.beta_hat <= 1.15

    def test_constant_generator_is_degenerate(self):
        pairs = sample_pairs(np.random.default_rng(1), 150, 1e-5, 1e-1)
        fit = estimate_holder(constant_generator(np.eye(2)), pairs)
        assert fit.degenerate
        assert fit.beta_hat == math.inf

    def test_too_few_pairs(self):
        pairs = sample_pairs(np.random.default_rng(1), 20, 1e-5, 1e-1)
        with pytest.raises(InvalidParameter):
            estimate_holder(constant_generator(np.eye(2)), pairs)

    def test_too_few_decades(self):
        pairs = sample_pairs(np.random.default_rng(1), 150, 1e-2, 1e-1)
        with pytest.raises(InvalidParameter):
            estimate_holder(constant_generator(np.eye(2)), pairs)

    def test_pair_range_checked(self):
        with pytest.raises(InvalidParameter):
            sample_pairs(np.random.default_rng(0), 10, 1e-3, 0.7)
