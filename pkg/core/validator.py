"""
Configuration validation for experiments.
Performs pre-flight checks so a run fails before any computation starts.
"""

import math
from pathlib import Path
from typing import Any, List, Optional, Tuple

import numpy as np

from .base_dynamics import make_toral_map
from .config import (
    CONJUGACY_SPEC_KINDS,
    GENERATOR_SPEC_KINDS,
    OUTPUT_FORMATS,
    RATE_NAMES,
    ExperimentConfig,
    GeneratorConfig,
    entry_polynomial,
)
from .errors import LabError
from .model_zoo import FAMILIES, FAMILY_PARAMS


class ValidationIssue:
    """Represents a validation issue."""

    def __init__(self, message: str, level: str = "error", fix_hint: Optional[str] = None):
        """
        Initialize validation issue.

        Args:
            message: Description of the issue
            level: 'error' (blocking) or 'warning' (non-blocking)
            fix_hint: Optional suggestion for fixing the issue
        """
        self.message = message
        self.level = level
        self.fix_hint = fix_hint

    def is_blocking(self) -> bool:
        """Check if this issue prevents the run."""
        return self.level == "error"

    def __repr__(self) -> str:
        return f"ValidationIssue({self.level}: {self.message})"


def validate_config(config: ExperimentConfig) -> Tuple[bool, List[ValidationIssue]]:
    """
    Perform all validation checks.

    Args:
        config: Parsed experiment configuration

    Returns:
        tuple: (is_valid, list_of_issues)
    """
    issues = []

    issues.extend(_check_base(config))
    issues.extend(_check_generator(config.cocycle, "cocycle", config.source_dir))
    if config.target is not None:
        issues.extend(_check_generator(config.target, "target", config.source_dir))
    issues.extend(_check_conjugacy(config))
    issues.extend(_check_rates(config))
    issues.extend(_check_run(config))
    issues.extend(_check_output(config))

    # Valid only if there are no blocking errors
    has_errors = any(issue.is_blocking() for issue in issues)

    return not has_errors, issues


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


_NUMBER_HINT = "Write numbers with a decimal point (1.0e-10); YAML reads 1e-10 as text"


def _check_base(config: ExperimentConfig) -> List[ValidationIssue]:
    """Check that the base matrix is a hyperbolic automorphism."""
    issues = []
    try:
        make_toral_map(config.base.matrix)
    except LabError as e:
        issues.append(
            ValidationIssue(
                f"base.matrix is not usable: {e}",
                level="error",
                fix_hint="Use an integer matrix with |det| = 1 and |trace| > 2, e.g. [[2, 1], [1, 1]]",
            )
        )
    except (TypeError, ValueError) as e:
        issues.append(ValidationIssue(f"base.matrix is malformed: {e}", level="error"))

    gamma_exponent = config.base.gamma_exponent
    if not _is_number(gamma_exponent) or not 0 < gamma_exponent < 1:
        issues.append(
            ValidationIssue(
                f"base.gamma_exponent must lie in (0, 1), got {gamma_exponent!r}",
                level="error",
                fix_hint=_NUMBER_HINT,
            )
        )
    return issues


def _check_square(matrix: Any, where: str) -> List[ValidationIssue]:
    if not isinstance(matrix, list) or not matrix:
        return [ValidationIssue(f"{where} must be a non-empty square matrix", level="error")]
    size = len(matrix)
    for row in matrix:
        if not isinstance(row, list) or len(row) != size:
            return [ValidationIssue(f"{where} must be square ({size} x {size})", level="error")]
    return []


def _check_generator(spec: GeneratorConfig, section: str, source_dir: Optional[str]) -> List[ValidationIssue]:
    """Check a generator spec of the cocycle or target section."""
    issues: List[ValidationIssue] = []
    if spec.kind not in GENERATOR_SPEC_KINDS:
        issues.append(
            ValidationIssue(
                f"{section}.kind must be one of {', '.join(GENERATOR_SPEC_KINDS)}, got {spec.kind!r}",
                level="error",
            )
        )
        return issues

    if spec.kind == "constant":
        issues.extend(_check_square(spec.matrix, f"{section}.matrix"))
        if not issues:
            values = [v for row in spec.matrix for v in row]
            if not all(_is_number(v) for v in values):
                issues.append(
                    ValidationIssue(f"{section}.matrix has non-numeric entries", level="error", fix_hint=_NUMBER_HINT)
                )
            elif abs(np.linalg.det(np.array(spec.matrix, dtype=float))) == 0:
                issues.append(ValidationIssue(f"{section}.matrix is singular", level="error"))

    elif spec.kind == "closed_form":
        issues.extend(_check_square(spec.entries, f"{section}.entries"))
        if not issues:
            for row in spec.entries:
                for entry in row:
                    try:
                        entry_polynomial(entry)
                    except LabError as e:
                        issues.append(ValidationIssue(f"{section}.entries: {e}", level="error"))

    elif spec.kind == "grid_sampled":
        if not spec.grid_file:
            issues.append(ValidationIssue(f"{section}.grid_file is required for grid_sampled", level="error"))
        else:
            path = Path(spec.grid_file)
            if not path.is_absolute() and source_dir:
                path = Path(source_dir) / path
            if not path.exists():
                issues.append(
                    ValidationIssue(
                        f"grid file not found: {path}",
                        level="error",
                        fix_hint="Relative paths resolve against the config file's directory",
                    )
                )

    elif spec.kind == "family":
        if spec.family not in FAMILIES:
            issues.append(
                ValidationIssue(
                    f"{section}.family must be one of {', '.join(FAMILIES)}, got {spec.family!r}",
                    level="error",
                )
            )
        else:
            unknown = sorted(set(spec.params) - set(FAMILY_PARAMS[spec.family]))
            if unknown:
                issues.append(
                    ValidationIssue(
                        f"unknown parameters for family {spec.family}: {', '.join(unknown)}",
                        level="error",
                        fix_hint=f"Known parameters: {', '.join(FAMILY_PARAMS[spec.family])}",
                    )
                )
            r = spec.params.get("r")
            if spec.family in ("triangular", "smooth_pair") and r is not None and not (_is_number(r) and 0 < r < 1):
                issues.append(ValidationIssue(f"{section}.params.r must lie in (0, 1), got {r!r}", level="error"))
            eps = spec.params.get("eps")
            if eps is not None and not (_is_number(eps) and eps >= 0):
                issues.append(ValidationIssue(f"{section}.params.eps must be non-negative, got {eps!r}", level="error"))
            elif eps is not None and eps > 0.25:
                issues.append(
                    ValidationIssue(
                        f"{section}.params.eps = {eps} may destroy the dominated splitting",
                        level="warning",
                    )
                )
        if section == "target":
            issues.append(
                ValidationIssue(
                    "target is ignored when it names a family; the family supplies its own target",
                    level="warning",
                )
            )
    return issues


def _check_conjugacy(config: ExperimentConfig) -> List[ValidationIssue]:
    issues: List[ValidationIssue] = []
    conj = config.conjugacy
    if conj.kind not in CONJUGACY_SPEC_KINDS:
        issues.append(
            ValidationIssue(
                f"conjugacy.kind must be one of {', '.join(CONJUGACY_SPEC_KINDS)}, got {conj.kind!r}",
                level="error",
            )
        )
    if conj.kind == "closed_form":
        issues.extend(_check_square(conj.entries, "conjugacy.entries"))
    if conj.kind == "family" and config.cocycle.kind != "family":
        issues.append(
            ValidationIssue(
                "conjugacy.kind 'family' needs a family cocycle",
                level="error",
                fix_hint="Set cocycle.kind: family or give conjugacy entries",
            )
        )
    if not isinstance(conj.base_point, list) or len(conj.base_point) != 2:
        issues.append(ValidationIssue("conjugacy.base_point must be [x1, x2]", level="error"))
    if conj.base_value is not None:
        issues.extend(_check_square(conj.base_value, "conjugacy.base_value"))
    if conj.gauge is not None:
        if not isinstance(conj.gauge, list) or not all(_is_number(v) and v != 0 for v in conj.gauge):
            issues.append(ValidationIssue("conjugacy.gauge must list nonzero diagonal entries", level="error"))
    if not _is_number(conj.envelope_exponent) or not 0 < conj.envelope_exponent <= 1:
        issues.append(ValidationIssue("conjugacy.envelope_exponent must lie in (0, 1]", level="error"))
    if not isinstance(conj.envelope_grid, int) or conj.envelope_grid < 2:
        issues.append(ValidationIssue("conjugacy.envelope_grid must be an integer >= 2", level="error"))
    return issues


def _check_rates(config: ExperimentConfig) -> List[ValidationIssue]:
    """Overridden rates must lie in (0, 1)."""
    issues = []
    for name in RATE_NAMES:
        value = getattr(config.rates, name)
        if value is None:
            continue
        if not _is_number(value) or not 0 < value < 1:
            issues.append(
                ValidationIssue(f"rates.{name} must lie in (0, 1), got {value!r}", level="error", fix_hint=_NUMBER_HINT)
            )
    return issues


_POSITIVE_INTS = ("n_max", "threads", "grid_n", "n_legs", "n_check", "n_cycles", "n_pairs", "n_quadruples", "n_targets", "k_max")
_POSITIVE_FLOATS = ("tol", "t_min", "t_max", "leg_length", "max_leg", "d_min", "d_max", "delta", "leaf_radius", "premise_tol", "cycle_tol")


def _check_run(config: ExperimentConfig) -> List[ValidationIssue]:
    """Check numeric run parameters."""
    issues = []
    run = config.run

    if not isinstance(run.seed, int) or isinstance(run.seed, bool) or run.seed < 0:
        issues.append(ValidationIssue(f"run.seed must be a non-negative integer, got {run.seed!r}", level="error"))
    for name in _POSITIVE_INTS:
        value = getattr(run, name)
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            issues.append(ValidationIssue(f"run.{name} must be a positive integer, got {value!r}", level="error"))
    for name in _POSITIVE_FLOATS:
        value = getattr(run, name)
        if not _is_number(value) or value <= 0:
            issues.append(
                ValidationIssue(f"run.{name} must be a positive number, got {value!r}", level="error", fix_hint=_NUMBER_HINT)
            )
    if issues:
        return issues

    if not 0 < run.beta <= 1:
        issues.append(ValidationIssue(f"run.beta must lie in (0, 1], got {run.beta}", level="error"))
    if not 0 < run.safety < 1:
        issues.append(ValidationIssue(f"run.safety must lie in (0, 1), got {run.safety}", level="error"))
    if run.weak_n_max < 8:
        issues.append(
            ValidationIssue(
                f"run.weak_n_max must be at least 8, got {run.weak_n_max}",
                level="error",
                fix_hint="The weak bunching fit needs at least 8 iterates",
            )
        )
    if run.t_min > run.t_max:
        issues.append(ValidationIssue("run.t_min must not exceed run.t_max", level="error"))
    if not run.d_min < run.d_max <= 0.5:
        issues.append(ValidationIssue("need run.d_min < run.d_max <= 0.5", level="error"))
    elif math.log10(run.d_max / run.d_min) < 3:
        issues.append(
            ValidationIssue(
                "run.d_min and run.d_max span fewer than 3 decades",
                level="warning",
                fix_hint="holder-estimate needs pair distances over 3 decades",
            )
        )
    if run.delta >= 0.5:
        issues.append(ValidationIssue(f"run.delta must be below 0.5, got {run.delta}", level="error"))
    if run.n_pairs < 100:
        issues.append(
            ValidationIssue(
                f"run.n_pairs = {run.n_pairs} is below 100",
                level="warning",
                fix_hint="holder-estimate needs at least 100 pairs",
            )
        )
    if run.tol < 1e-14:
        issues.append(
            ValidationIssue(
                f"run.tol = {run.tol} is below double precision resolution",
                level="warning",
                fix_hint="Holonomies will stop at n_max without converging",
            )
        )
    if not isinstance(run.x0, list) or len(run.x0) != 2 or not all(_is_number(v) for v in run.x0):
        issues.append(ValidationIssue("run.x0 must be [x1, x2]", level="error"))
    if (run.theta is None) != (run.eps is None):
        issues.append(
            ValidationIssue(
                "run.theta and run.eps must be given together",
                level="warning",
                fix_hint="Strong center bunching is skipped unless both are set",
            )
        )
    return issues


def _check_output(config: ExperimentConfig) -> List[ValidationIssue]:
    issues = []
    if config.output.format not in OUTPUT_FORMATS:
        issues.append(
            ValidationIssue(
                f"output.format must be one of {', '.join(OUTPUT_FORMATS)}, got {config.output.format!r}",
                level="error",
            )
        )
    if not config.output.dir:
        issues.append(ValidationIssue("output.dir must not be empty", level="error"))
    return issues
