"""Tests for pre-flight config validation."""

from dataclasses import replace
from pathlib import Path

import pytest

from core.config import ExperimentConfig, GeneratorConfig, load_config
from core.validator import _NUMBER_HINT, ValidationIssue, validate_config

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _messages(issues, level=None):
    return [i.message for i in issues if level is None or i.level == level]


def _with_run(config: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(config, run=replace(config.run, **changes))


@pytest.fixture
def config():
    return load_config(CONFIG_DIR / "constant.yaml")


class TestValidationIssue:
    def test_blocking(self):
        assert ValidationIssue("bad").is_blocking()
        assert not ValidationIssue("meh", level="warning").is_blocking()

    def test_repr(self):
        assert repr(ValidationIssue("bad")) == "ValidationIssue(error: bad)"


class TestShippedConfigs:
    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
    def test_shipped_config_is_valid(self, path):
        is_valid, issues = validate_config(load_config(path))
        assert is_valid, _messages(issues, "error")


class TestBase:
    def test_non_hyperbolic_matrix(self, config):
        config = replace(config, base=replace(config.base, matrix=[[1, 1], [0, 1]]))
        is_valid, issues = validate_config(config)
        assert not is_valid
        assert any("base.matrix" in m for m in _messages(issues, "error"))

    def test_gamma_exponent_range(self, config):
        config = replace(config, base=replace(config.base, gamma_exponent=1.5))
        is_valid, _ = validate_config(config)
        assert not is_valid


class TestGenerators:
    def test_unknown_kind(self, config):
        config = replace(config, cocycle=GeneratorConfig(kind="spline"))
        is_valid, issues = validate_config(config)
        assert not is_valid
        assert any("cocycle.kind" in m for m in _messages(issues))

    def test_singular_constant(self, config):
        config = replace(config, cocycle=GeneratorConfig(kind="constant", matrix=[[1.0, 2.0], [2.0, 4.0]]))
        is_valid, issues = validate_config(config)
        assert not is_valid
        assert "cocycle.matrix is singular" in _messages(issues)

    def test_non_square_constant(self, config):
        config = replace(config, cocycle=GeneratorConfig(kind="constant", matrix=[[1.0, 0.0]]))
        assert not validate_config(config)[0]

    def test_text_entries_get_number_hint(self, config):
        config = replace(config, cocycle=GeneratorConfig(kind="constant", matrix=[["1e-10", 0.0], [0.0, 1.0]]))
        is_valid, issues = validate_config(config)
        assert not is_valid
        assert any(i.fix_hint == _NUMBER_HINT for i in issues)

    def test_missing_grid_file(self, config):
        config = replace(config, cocycle=GeneratorConfig(kind="grid_sampled", grid_file="nowhere.txt"))
        is_valid, issues = validate_config(config)
        assert not is_valid
        assert any("grid file not found" in m for m in _messages(issues))

    def test_unknown_family_parameter(self, config):
        spec = GeneratorConfig(kind="family", family="triangular", params={"mu": 2.0})
        is_valid, issues = validate_config(replace(config, cocycle=spec))
        assert not is_valid
        assert any("unknown parameters" in m for m in _messages(issues))

    def test_family_r_range(self, config):
        spec = GeneratorConfig(kind="family", family="smooth_pair", params={"r": 1.5})
        assert not validate_config(replace(config, cocycle=spec))[0]

    def test_large_eps_warns(self, config):
        spec = GeneratorConfig(kind="family", family="perturbed_constant", params={"eps": 0.4})
        is_valid, issues = validate_config(replace(config, cocycle=spec))
        assert is_valid
        assert any("dominated splitting" in m for m in _messages(issues, "warning"))

    def test_family_target_warns(self, config):
        target = GeneratorConfig(kind="family", family="triangular")
        is_valid, issues = validate_config(replace(config, target=target))
        assert is_valid
        assert any("target is ignored" in m for m in _messages(issues, "warning"))


class TestConjugacy:
    def test_family_conjugacy_needs_family_cocycle(self, config):
        config = replace(config, conjugacy=replace(config.conjugacy, kind="family"))
        is_valid, issues = validate_config(config)
        assert not is_valid
        assert any("needs a family cocycle" in m for m in _messages(issues))

    def test_zero_gauge(self, config):
        config = replace(config, conjugacy=replace(config.conjugacy, gauge=[1.0, 0.0]))
        assert not validate_config(config)[0]

    def test_envelope_exponent(self, config):
        config = replace(config, conjugacy=replace(config.conjugacy, envelope_exponent=0.0))
        assert not validate_config(config)[0]


class TestRates:
    def test_rate_out_of_range(self, config):
        config = replace(config, rates=replace(config.rates, nu=1.2))
        is_valid, issues = validate_config(config)
        assert not is_valid
        assert "rates.nu must lie in (0, 1), got 1.2" in _messages(issues)


class TestRun:
    def test_text_tolerance(self, config):
        is_valid, issues = validate_config(_with_run(config, tol="1e-10"))
        assert not is_valid
        flagged = [i for i in issues if "run.tol" in i.message]
        assert flagged[0].fix_hint == _NUMBER_HINT

    def test_negative_seed(self, config):
        assert not validate_config(_with_run(config, seed=-1))[0]

    def test_zero_legs(self, config):
        is_valid, issues = validate_config(_with_run(config, n_legs=0))
        assert not is_valid
        assert any("run.n_legs" in m for m in _messages(issues))

    def test_empty_grid(self, config):
        is_valid, issues = validate_config(_with_run(config, grid_n=0))
        assert not is_valid
        assert any("run.grid_n" in m for m in _messages(issues, "error"))

    def test_weak_bunching_iterates(self, config):
        is_valid, issues = validate_config(_with_run(config, weak_n_max=5))
        assert not is_valid
        assert any("weak_n_max" in m for m in _messages(issues))

    def test_beta_range(self, config):
        assert not validate_config(_with_run(config, beta=1.5))[0]

    def test_pair_range_must_be_ordered(self, config):
        assert not validate_config(_with_run(config, d_min=0.2, d_max=0.1))[0]

    def test_narrow_pair_range_warns(self, config):
        is_valid, issues = validate_config(_with_run(config, d_min=1e-3, d_max=1e-1))
        assert is_valid
        assert any("3 decades" in m for m in _messages(issues, "warning"))

    def test_few_pairs_warn(self, config):
        is_valid, issues = validate_config(_with_run(config, n_pairs=50))
        assert is_valid
        assert any("below 100" in m for m in _messages(issues, "warning"))

    def test_tiny_tolerance_warns(self, config):
        is_valid, issues = validate_config(_with_run(config, tol=1e-16))
        assert is_valid
        assert any("double precision" in m for m in _messages(issues, "warning"))

    def test_theta_without_eps_warns(self, config):
        is_valid, issues = validate_config(_with_run(config, theta=0.9))
        assert is_valid
        assert any("given together" in m for m in _messages(issues, "warning"))

    def test_bad_x0(self, config):
        assert not validate_config(_with_run(config, x0=[0.1]))[0]


class TestOutput:
    def test_unknown_format(self, config):
        config = replace(config, output=replace(config.output, format="xml"))
        is_valid, issues = validate_config(config)
        assert not is_valid
        assert any("output.format" in m for m in _messages(issues))
