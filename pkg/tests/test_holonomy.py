"""Tests for holonomy limits, their axioms and the Hölder recipe."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.base_dynamics import STABLE, UNSTABLE, TorusPoint, make_leg, torus_grid, toral_rates
from core.errors import Diverged, InvalidParameter, NotBunched
from core.holonomy import (
    compute_alpha,
    estimate_global_holder,
    leg_holonomy,
    norm_comparison_along_leaf,
    sample_legs,
    sample_quadruples,
    stable_holonomy,
    tree_holonomy,
    unstable_holonomy,
    verify_axioms,
)
from core.linear_cocycle import constant_generator, spectral_norm
from core.model_zoo import cat_map, rotation_conjugacy, sheared_family, smooth_conjugate_pair, triangular_family


@pytest.fixture(scope="module")
def cat():
    return cat_map()


@pytest.fixture(scope="module")
def pair(cat):
    return triangular_family(r=0.5, f=cat)


class TestConstantCocycle:
    def test_identity_holonomy_at_first_step(self, cat):
        a = constant_generator(np.diag([2.0, 0.5]))
        result = stable_holonomy(a, cat, TorusPoint.of(0.3, 0.6), 0.2)
        assert result.n_used == 1
        assert result.converged
        assert_allclose(result.H.mat, np.eye(2), atol=0.0)

    def test_unstable_identity(self, cat):
        a = constant_generator(np.eye(2))
        result = unstable_holonomy(a, cat, TorusPoint.of(0.3, 0.6), -0.4)
        assert result.n_used == 1
        assert_allclose(result.H.mat, np.eye(2), atol=0.0)

    def test_non_bunched_constant_still_gives_identity(self, cat):
        a = constant_generator(np.diag([cat.lam**2, 1.0]))
        result = stable_holonomy(a, cat, TorusPoint.of(0.1, 0.2), 0.1, n_max=60)
        assert_allclose(result.H.mat, np.eye(2), atol=0.0)

    def test_tolerance_must_be_positive(self, cat):
        with pytest.raises(InvalidParameter):
            stable_holonomy(constant_generator(np.eye(2)), cat, TorusPoint(0.0, 0.0), 0.1, tol=0.0)


class TestTriangularOracles:
    def test_stable_holonomy_matches_series(self, cat, pair):
        legs = sample_legs(cat, np.random.default_rng(10), 100, 1e-3, 0.5, leg_types=(STABLE,))
        for leg in legs:
            result = leg_holonomy(pair.A, cat, leg)
            expected = np.array([[1.0, pair.h_s(leg.start, leg.t)], [0.0, 1.0]])
            assert result.converged
            assert spectral_norm(result.H.mat - expected) < 1e-8

    def test_unstable_holonomy_matches_series(self, cat, pair):
        legs = sample_legs(cat, np.random.default_rng(11), 100, 1e-3, 0.5, leg_types=(UNSTABLE,))
        for leg in legs:
            result = leg_holonomy(pair.A, cat, leg)
            expected = np.array([[1.0, pair.h_u(leg.start, leg.t)], [0.0, 1.0]])
            assert pair.tail_bound_u(leg.t) < 1e-10
            assert spectral_norm(result.H.mat - expected) < 1e-8 + pair.tail_bound_u(leg.t)

    def test_tree_product_agrees(self, cat, pair):
        leg = make_leg(cat, TorusPoint.of(0.21, 0.43), STABLE, 0.3)
        result = leg_holonomy(pair.A, cat, leg)
        tree = tree_holonomy(pair.A, cat, leg.start, leg.leg_type, leg.t, result.n_used)
        assert spectral_norm(tree.mat - result.H.mat) < 1e-12


class TestDivergence:
    def test_sheared_cocycle_diverges(self, cat):
        a = sheared_family(2.0, f=cat)
        with pytest.raises(Diverged) as info:
            stable_holonomy(a, cat, TorusPoint.of(0.1, 0.2), 0.1, n_max=60)
        assert info.value.n_used <= 60
        assert info.value.residuals[-1] > info.value.residuals[0]

    def test_at_leg_tags_index(self):
        error = Diverged("grew", 12, [1.0, 2.0]).at_leg(3)
        assert error.leg_index == 3
        assert error.n_used == 12
        assert "leg 3" in str(error)


class TestLimitConsistency:
    def test_tighter_limits_agree(self, cat, pair):
        tol = 1e-10
        legs = sample_legs(cat, np.random.default_rng(14), 30, 1e-3, 0.5)
        for leg in legs:
            loose = leg_holonomy(pair.A, cat, leg, tol, 200)
            tight = leg_holonomy(pair.A, cat, leg, tol / 2, 400)
            assert loose.converged
            assert spectral_norm(loose.H.mat - tight.H.mat) < 10 * tol


class TestAxioms:
    def test_triangular_axioms(self, cat, pair):
        legs = sample_legs(cat, np.random.default_rng(12), 100, 1e-3, 0.5)
        report = verify_axioms(pair.A, cat, legs, n_check=5)
        assert report.n_legs == 100
        assert report.h2_residual < 1e-8
        assert report.h3_residual < 1e-8
        assert 0.9 <= report.h4_exponent <= 1.1

    @pytest.mark.parametrize("leg_type", [STABLE, UNSTABLE])
    def test_triangular_exponent_per_leaf(self, cat, pair, leg_type):
        legs = sample_legs(cat, np.random.default_rng(15), 60, 1e-3, 0.5, leg_types=(leg_type,))
        report = verify_axioms(pair.A, cat, legs, n_check=1)
        assert 0.9 <= report.h4_exponent <= 1.1

    def test_smooth_pair_axioms(self, cat):
        b = constant_generator(np.diag([cat.lam**0.25, 1.0]))
        a, _ = smooth_conjugate_pair(b, rotation_conjugacy(0.3), cat)
        legs = sample_legs(cat, np.random.default_rng(16), 100, 1e-3, 0.5)
        report = verify_axioms(a, cat, legs, n_check=3)
        assert report.h2_residual < 1e-8
        assert report.h3_residual < 1e-8

    def test_constant_axioms_are_exact(self, cat):
        a = constant_generator(np.diag([2.0, 0.5]))
        legs = sample_legs(cat, np.random.default_rng(13), 4, 1e-3, 0.5)
        report = verify_axioms(a, cat, legs, n_check=2)
        assert report.h2_residual == 0.0
        assert report.h3_residual == 0.0
        assert report.h4_K is None

    def test_split_range(self, cat):
        legs = sample_legs(cat, np.random.default_rng(13), 2, 1e-3, 0.5)
        with pytest.raises(InvalidParameter):
            verify_axioms(constant_generator(np.eye(2)), cat, legs, 1, split=1.5)


class TestAlpha:
    def test_identity_cocycle_alpha(self, cat):
        recipe = compute_alpha(constant_generator(np.eye(2)), toral_rates(cat), 1.0, torus_grid(2))
        assert recipe.theta == pytest.approx(cat.lam**-0.6)
        assert recipe.alpha == pytest.approx(0.297, abs=1e-9)

    def test_not_bunched(self, cat):
        with pytest.raises(NotBunched):
            compute_alpha(sheared_family(2.0, f=cat), toral_rates(cat), 1.0, torus_grid(2))

    def test_empty_grid(self, cat):
        with pytest.raises(InvalidParameter, match="empty"):
            compute_alpha(constant_generator(np.eye(2)), toral_rates(cat), 1.0, [])

    def test_alpha_below_beta(self, cat, pair):
        recipe = compute_alpha(pair.A, toral_rates(cat), 1.0, torus_grid(4))
        assert 0 < recipe.alpha < 1.0
        assert recipe.theta < (cat.lam**-2) ** (recipe.alpha / recipe.safety) + 1e-12


class TestGlobalHolder:
    def test_constant_is_degenerate(self, cat):
        quads = sample_quadruples(cat, np.random.default_rng(5), 20, 1e-2, 0.5)
        report = estimate_global_holder(constant_generator(np.eye(2)), cat, quads)
        assert report.degenerate
        assert report.slope is None
        assert report.C_fit == 0.0

    def test_triangular_slope_above_alpha(self, cat, pair):
        alpha = compute_alpha(pair.A, toral_rates(cat), 1.0, torus_grid(16)).alpha
        quads = sample_quadruples(cat, np.random.default_rng(6), 200, 1e-2, 0.5)
        report = estimate_global_holder(pair.A, cat, quads)
        assert not report.degenerate
        assert report.slope >= alpha - 0.05
        assert report.decades >= 3

    def test_quadruple_parameters(self, cat):
        with pytest.raises(InvalidParameter):
            sample_quadruples(cat, np.random.default_rng(0), 5, 0.7, 0.5)


class TestNormComparison:
    def test_constant_ratio_is_one(self, cat):
        report = norm_comparison_along_leaf(constant_generator(np.diag([2.0, 0.5])), cat, TorusPoint.of(0.4, 0.1), 0.2, 10)
        assert report.max_ratio == pytest.approx(1.0)
        assert report.bound == pytest.approx(1.0)

    def test_triangular_ratio_is_finite(self, cat, pair):
        report = norm_comparison_along_leaf(pair.A, cat, TorusPoint.of(0.4, 0.1), 0.01, 10)
        assert 1.0 <= report.max_ratio < 1.1
        assert math.isfinite(report.bound)
