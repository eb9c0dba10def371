"""Tests for the example families and their oracles."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.base_dynamics import STABLE, TorusPoint, random_points, torus_grid, toral_rates
from core.errors import InvalidParameter
from core.linear_cocycle import check_weak_fiber_bunching, sample_pairs
from core.model_zoo import (
    DEFAULT_PHI,
    FAMILIES,
    TrigPolynomial,
    build_family,
    cat_map,
    perturbed_constant,
    restricted_generator,
    sheared_family,
    splitting_holder,
    triangular_family,
    unstable_holder_of_c,
)


@pytest.fixture(scope="module")
def cat():
    return cat_map()


@pytest.fixture(scope="module")
def pair(cat):
    return triangular_family(r=0.5, f=cat)


@pytest.fixture(scope="module")
def perturbed(cat):
    return perturbed_constant(np.diag([2.0, 0.5]), eps=0.05, f=cat)


class TestTrigPolynomial:
    def test_default_phi(self):
        assert DEFAULT_PHI(TorusPoint(0.0, 0.7)) == pytest.approx(0.1)
        assert DEFAULT_PHI(TorusPoint(0.25, 0.0)) == pytest.approx(0.0, abs=1e-15)
        assert DEFAULT_PHI.lipschitz == pytest.approx(0.2 * math.pi)
        assert DEFAULT_PHI.sup_bound == pytest.approx(0.1)

    def test_constant_entry(self):
        poly = TrigPolynomial.from_entry(2.5)
        assert poly(TorusPoint.of(0.3, 0.9)) == pytest.approx(2.5)
        assert poly.lipschitz == 0.0

    def test_vectorized_evaluation(self):
        poly = TrigPolynomial.from_list([[1, 1, 0.0, 1.0]])
        xs = np.array([0.0, 0.125])
        assert_allclose(poly.at(xs, np.zeros(2)), [0.0, math.sin(math.pi / 4)])

    def test_round_trip_list(self):
        terms = [[1, 0, 0.1, 0.0], [0, 2, 0.0, 0.05]]
        assert TrigPolynomial.from_list(terms).to_list() == terms

    def test_malformed_term(self):
        with pytest.raises(InvalidParameter):
            TrigPolynomial.from_list([[1, 0, 0.1]])
        with pytest.raises(InvalidParameter):
            TrigPolynomial.from_list([[0.5, 0, 0.1, 0.0]])

    def test_zero(self):
        assert TrigPolynomial().is_zero
        assert not DEFAULT_PHI.is_zero


class TestTriangularPair:
    def test_parameters(self, cat, pair):
        assert pair.mu == pytest.approx(math.sqrt(cat.lam))
        assert_allclose(pair.B(TorusPoint(0.0, 0.0)).mat, np.diag([pair.mu, 1.0]))

    def test_coboundary_equation(self, pair):
        for x in torus_grid(4):
            assert pair.coboundary_defect(x) < 1e-10
        assert pair.tail_bound_c < 1e-10

    def test_coboundary_at_random_points(self, pair):
        for x in random_points(np.random.default_rng(32), 1000):
            assert pair.coboundary_defect(x) < pair.tail_bound_c + 1e-12

    def test_unstable_tail_bound(self, pair):
        assert pair.tail_bound_u(0.5) < 1e-10
        assert pair.tail_bound_u(-0.5) == pytest.approx(2 * pair.tail_bound_u(0.25))
        assert pair.tail_bound_u(0.0) == 0.0

    def test_rejects_r_outside_unit_interval(self, cat):
        with pytest.raises(InvalidParameter):
            triangular_family(r=1.5, f=cat)

    def test_rejects_large_phi(self, cat):
        with pytest.raises(InvalidParameter):
            triangular_family(phi=TrigPolynomial(((1, 0, 2.0, 0.0),)), f=cat)

    def test_oracles_vanish_on_trivial_leg(self, pair):
        x = TorusPoint.of(0.4, 0.2)
        assert pair.h_s(x, 0.0) == pytest.approx(0.0, abs=1e-15)
        assert pair.h_u(x, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_unstable_exponent_of_conjugacy(self, pair):
        xs = random_points(np.random.default_rng(30), 8)
        fit = unstable_holder_of_c(pair, xs)
        assert not fit.degenerate
        assert 0.4 <= fit.beta_hat <= 0.6

    def test_stable_slope_of_conjugacy(self, pair):
        xs = random_points(np.random.default_rng(31), 8)
        fit = unstable_holder_of_c(pair, xs, leg_type=STABLE)
        assert fit.beta_hat >= 0.9

    def test_holder_range_checked(self, pair):
        with pytest.raises(InvalidParameter):
            unstable_holder_of_c(pair, [TorusPoint(0.0, 0.0)], t_min=1e-3, t_max=1e-1)


class TestSheared:
    def test_generator_shape(self, cat):
        a = sheared_family(2.0, f=cat)
        mat = a(TorusPoint(0.0, 0.0)).mat
        assert mat[0, 0] == pytest.approx(cat.lam**2)
        assert mat[1, 0] == pytest.approx(0.1)
        assert mat[0, 1] == 0.0


class TestPerturbedConstant:
    def test_gap_and_invariance(self, perturbed):
        _, split = perturbed
        assert split.gap > 3
        assert split.invariance_residual(torus_grid(4)) < 1e-8

    def test_unperturbed_splitting_is_coordinate(self, cat):
        _, split = perturbed_constant(np.diag([2.0, 0.5]), eps=0.0, f=cat)
        x = TorusPoint.of(0.3, 0.3)
        assert abs(split.e_fast(x)[1]) < 1e-9
        assert abs(split.e_slow(x)[0]) < 1e-9
        assert split.gap == pytest.approx(4.0)

    def test_equal_moduli_rejected(self, cat):
        with pytest.raises(InvalidParameter):
            perturbed_constant(np.eye(2), f=cat)

    def test_direction_name_checked(self, perturbed):
        _, split = perturbed
        with pytest.raises(InvalidParameter):
            split.direction(TorusPoint(0.0, 0.0), "middle")

    def test_restrictions_are_one_dimensional(self, cat, perturbed):
        b, split = perturbed
        rates = toral_rates(cat)
        for which in ("fast", "slow"):
            restricted = restricted_generator(b, split, which)
            assert restricted.dim == 1
            report = check_weak_fiber_bunching(restricted, cat, rates, 1.0, 8, torus_grid(2))
            assert report.theta_hat == pytest.approx(1 / cat.lam, rel=1e-6)
            assert report.pointwise_ok

    def test_splitting_is_holder(self, perturbed):
        _, split = perturbed
        pairs = sample_pairs(np.random.default_rng(2), 40, 1e-5, 1e-1)
        fit = splitting_holder(split, pairs)
        assert not fit.degenerate
        assert fit.beta_hat > 0

    def test_constant_splitting_is_degenerate(self, cat):
        _, split = perturbed_constant(np.diag([2.0, 0.5]), eps=0.0, f=cat)
        pairs = sample_pairs(np.random.default_rng(2), 10, 1e-5, 1e-1)
        assert splitting_holder(split, pairs).degenerate


class TestBuildFamily:
    def test_every_family_builds(self, cat):
        for name in FAMILIES:
            bundle = build_family(name, {}, cat)
            assert bundle.name == name
            assert bundle.a.dim == 2

    def test_triangular_bundle(self, cat):
        bundle = build_family("triangular", {"r": 0.5, "phi": [[1, 0, 0.1, 0.0]]}, cat)
        assert bundle.pair is not None
        assert bundle.b is not None
        assert bundle.c is not None

    def test_smooth_pair_defaults(self, cat):
        bundle = build_family("smooth_pair", {"conjugacy": "shear"}, cat)
        assert_allclose(bundle.b(TorusPoint(0.0, 0.0)).mat, np.diag([cat.lam**0.25, 1.0]))

    def test_perturbed_bundle_has_splitting(self, cat):
        bundle = build_family("perturbed_constant", {"eps": 0.02}, cat)
        assert bundle.split is not None
        assert bundle.b is None

    def test_unknown_family(self, cat):
        with pytest.raises(InvalidParameter):
            build_family("spiral", {}, cat)

    def test_unknown_parameter(self, cat):
        with pytest.raises(InvalidParameter):
            build_family("sheared", {"eps": 0.1}, cat)

    def test_unknown_conjugacy_shape(self, cat):
        with pytest.raises(InvalidParameter):
            build_family("smooth_pair", {"conjugacy": "twist"}, cat)

    def test_sheared_exponent_parameter(self, cat):
        bundle = build_family("sheared", {"r": 1.5}, cat)
        assert bundle.a(TorusPoint(0.0, 0.0)).mat[0, 0] == pytest.approx(cat.lam**1.5)
