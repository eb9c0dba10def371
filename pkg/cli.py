"""
CLI interface for the cocycle lab.
Runs experiment subcommands and writes their machine-readable reports.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

# Try importing rich libraries with fallback
try:
    from rich.console import Console
    from rich.table import Table

    RICH_AVAILABLE = True
except ImportError:
    RICH_AVAILABLE = False

from core.base_dynamics import (
    STABLE,
    UNSTABLE,
    HyperbolicToralMap,
    RateData,
    TorusPoint,
    check_center_bunching,
    check_strong_center_bunching,
    make_toral_map,
    random_points,
    rate_chain_holds,
    torus_grid,
)
from core.config import (
    ExperimentConfig,
    apply_overrides,
    build_generator,
    build_rates,
    config_digest,
    entries_function,
    load_config,
)
from core.conjugacy import (
    ConjugacyField,
    closed_form_field,
    cohomology_residual,
    cycle_conjugation_residual,
    extend_from_base,
    field_distance,
    holder_envelope,
    identity_field,
    intertwining_residual,
    path_independence_residual,
    premise_residual,
)
from core.errors import ConfigError, Diverged, LabError, error_name
from core.findings import Finding, explain_error
from core.holonomy import (
    compute_alpha,
    estimate_global_holder,
    leg_holonomy,
    norm_comparison_along_leaf,
    sample_legs,
    sample_quadruples,
    tree_holonomy,
    verify_axioms,
)
from core.linear_cocycle import (
    CocycleGenerator,
    Operator,
    check_fiber_bunching,
    check_weak_fiber_bunching,
    estimate_holder,
    sample_pairs,
    spectral_norm,
)
from core.logging_setup import setup_logging
from core.model_zoo import (
    Splitting2D,
    TriangularPair,
    build_family,
    perturbed_constant,
    restricted_generator,
    splitting_holder,
    triangular_conjugacy_field,
    triangular_family,
    unstable_holder_of_c,
)
from core.report import LEG_TABLE_HEADER, Report, emit_report, write_table
from core.su_calculus import cycle_triviality_test
from core.validator import validate_config
from core.workers import parallel_map, set_default_threads

logger = logging.getLogger(__name__)

COMMANDS = (
    "check-bunching",
    "holonomy",
    "holder-estimate",
    "cycle-weights",
    "conjugacy-extend",
    "certify-conjugacy",
    "demo-triangular",
    "demo-perturbed",
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_COMPUTATION = 3

DEFAULT_GAUGE = (2.0, 0.5)
NUMERIC_ERRORS = (np.linalg.LinAlgError, FloatingPointError)

TableData = Tuple[Sequence[str], List[List[object]]]


@dataclass
class Experiment:
    """Objects a run computes with, assembled from the configuration."""

    config: ExperimentConfig
    f: HyperbolicToralMap
    rates: RateData
    a: CocycleGenerator
    b: Optional[CocycleGenerator]
    c: Optional[ConjugacyField]
    pair: Optional[TriangularPair]
    split: Optional[Splitting2D]
    rng: np.random.Generator


def run_cli(args) -> int:
    """
    Main CLI entry point.

    Args:
        args: Parsed command-line arguments from argparse

    Returns:
        int: exit code (0 ok, 2 config error, 3 computation error)
    """
    console = Console() if RICH_AVAILABLE else None
    setup_logging(getattr(args, "verbose", 0) or 0)

    handler = _HANDLERS.get(args.command)
    if handler is None:
        _print(console, f"[red]Unknown command: {args.command}[/red]")
        return EXIT_CONFIG

    # Step 1: Load and validate the configuration
    try:
        config = _load(args)
    except ConfigError as e:
        _print(console, f"[red]✗ {e}[/red]")
        return EXIT_CONFIG

    valid, issues = validate_config(config)
    if issues:
        _show_validation_issues(console, issues)
    if not valid:
        _print(console, "[red]✗ Configuration validation failed. Nothing was computed.[/red]")
        return EXIT_CONFIG

    set_default_threads(config.run.threads)
    run = config.run
    report = Report(
        experiment=args.command,
        config_digest=config_digest(config),
        seed=run.seed,
        tolerances={"tol": run.tol, "premise_tol": run.premise_tol, "cycle_tol": run.cycle_tol},
    )

    # Step 2: Compute
    code = EXIT_OK
    tables: Dict[str, TableData] = {}
    try:
        experiment = _assemble(config)
        tables = handler(experiment, report)
    except ConfigError as e:
        _record_failure(console, report, e)
        code = EXIT_CONFIG
    except (LabError, *NUMERIC_ERRORS) as e:
        _record_failure(console, report, e)
        code = EXIT_COMPUTATION

    # Step 3: Write tables and the report
    out_dir = Path(config.output.dir)
    try:
        if config.output.tables:
            for name, (header, rows) in tables.items():
                write_table(report, out_dir, name, header, rows)
        path = emit_report(report, out_dir, config.output.format)
    except OSError as e:
        _print(console, f"[red]✗ {e}[/red]")
        return EXIT_FAILURE

    _show_summary(console, report)
    _print(console, f"[dim]Report written to {path}[/dim]")
    return code


def _load(args) -> ExperimentConfig:
    config = load_config(args.config)
    return apply_overrides(
        config,
        seed=getattr(args, "seed", None),
        tol=getattr(args, "tol", None),
        threads=getattr(args, "threads", None),
        out_dir=getattr(args, "out", None),
        fmt=getattr(args, "format", None),
    )


def _assemble(config: ExperimentConfig) -> Experiment:
    """Build the base map, rates, generators and conjugacy named by the config."""
    f = make_toral_map(config.base.matrix)
    rates = build_rates(config.rates, f, config.base.gamma_exponent)
    pair = split = None
    family_c: Optional[ConjugacyField] = None
    b: Optional[CocycleGenerator] = None

    spec = config.cocycle
    if spec.kind == "family":
        bundle = build_family(spec.family or "", spec.params, f)
        a, b, family_c, pair, split = bundle.a, bundle.b, bundle.c, bundle.pair, bundle.split
    else:
        a = build_generator(spec, config.source_dir)
    if config.target is not None and config.target.kind != "family":
        b = build_generator(config.target, config.source_dir)

    conj = config.conjugacy
    base_point = TorusPoint.of(*conj.base_point)
    c: Optional[ConjugacyField]
    if conj.kind == "family":
        c = family_c
    elif conj.kind == "closed_form":
        matrix, _ = entries_function(conj.entries or [])
        c = closed_form_field(matrix, base_point, name="configured")
    else:
        c = identity_field(a.dim)
    if c is not None and conj.gauge:
        c = c.gauged(np.diag(conj.gauge))

    return Experiment(
        config=config,
        f=f,
        rates=rates,
        a=a,
        b=b,
        c=c,
        pair=pair,
        split=split,
        rng=np.random.default_rng(config.run.seed),
    )


def _require_target(experiment: Experiment, command: str) -> CocycleGenerator:
    if experiment.b is None:
        raise ConfigError(f"{command} needs a target cocycle (a family with a target or a target section)")
    return experiment.b


def _require_conjugacy(experiment: Experiment, command: str) -> ConjugacyField:
    if experiment.c is None:
        raise ConfigError(f"{command} needs a conjugacy (conjugacy.kind closed_form or family)")
    return experiment.c


def _sub_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


def _leg_rows(legs, results) -> List[List[object]]:
    return [
        [leg.leg_type, leg.start.x1, leg.start.x2, leg.t, result.n_used, result.cauchy_residual]
        for leg, result in zip(legs, results)
    ]


def run_check_bunching(experiment: Experiment, report: Report) -> Dict[str, TableData]:
    """Handle 'check-bunching' command."""
    run = experiment.config.run
    a, rates = experiment.a, experiment.rates
    grid = torus_grid(run.grid_n)
    summary = report.summary

    pointwise = check_fiber_bunching(a, rates, run.beta, grid)
    summary["beta"] = run.beta
    summary["worst_product"] = pointwise.worst_product
    summary["fiber_bunched"] = pointwise.pointwise_ok

    weak = check_weak_fiber_bunching(a, experiment.f, rates, run.beta, run.weak_n_max, grid)
    summary["theta_hat"] = weak.theta_hat
    summary["L_hat"] = weak.L_hat
    summary["weak_fiber_bunched"] = weak.pointwise_ok

    center = check_center_bunching(rates, grid)
    summary["center_bunched"] = center.holds
    summary["center_margin"] = center.worst_margin
    summary["rate_chain_holds"] = rate_chain_holds(rates, grid)
    if run.theta is not None and run.eps is not None:
        strong = check_strong_center_bunching(rates, run.theta, run.eps, grid)
        summary["strong_center_bunched"] = strong.holds
        summary["strong_center_margin"] = strong.worst_margin

    rows = []
    for p in grid:
        rate = max(rates.nu(p), rates.nu_hat(p)) ** run.beta
        rows.append([p.x1, p.x2, a(p).distortion * rate])
    return {"grid": (("x1", "x2", "product"), rows)}


def run_holonomy(experiment: Experiment, report: Report) -> Dict[str, TableData]:
    """Handle 'holonomy' command."""
    run = experiment.config.run
    a, f = experiment.a, experiment.f
    legs = sample_legs(f, experiment.rng, run.n_legs, run.t_min, run.t_max)

    def compute(indexed):
        index, leg = indexed
        try:
            return leg_holonomy(a, f, leg, run.tol, run.n_max)
        except Diverged as e:
            raise e.at_leg(index) from e

    results = parallel_map(compute, list(enumerate(legs)))
    summary = report.summary
    summary["n_legs"] = len(legs)
    summary["n_converged"] = sum(1 for r in results if r.converged)
    summary["max_n_used"] = max(r.n_used for r in results)
    summary["max_cauchy_residual"] = max(r.cauchy_residual for r in results)
    summary["uniqueness_defect"] = max(
        spectral_norm(tree_holonomy(a, f, leg.start, leg.leg_type, leg.t, r.n_used).mat - r.H.mat)
        for leg, r in zip(legs, results)
    )

    axioms = verify_axioms(a, f, legs, run.n_check, run.tol, run.n_max)
    summary["max_h2_residual"] = axioms.h2_residual
    summary["max_h3_residual"] = axioms.h3_residual
    summary["h4_K"] = axioms.h4_K
    summary["h4_exponent"] = axioms.h4_exponent

    stable_legs = [leg for leg in legs if leg.leg_type == STABLE]
    if stable_legs:
        leg = stable_legs[0]
        comparison = norm_comparison_along_leaf(a, f, leg.start, leg.t, run.k_max, run.tol, run.n_max)
        summary["norm_ratio"] = comparison.max_ratio
        summary["norm_ratio_bound"] = comparison.bound
    return {"legs": (LEG_TABLE_HEADER, _leg_rows(legs, results))}


def run_holder_estimate(experiment: Experiment, report: Report) -> Dict[str, TableData]:
    """Handle 'holder-estimate' command."""
    run = experiment.config.run
    a, f, rng = experiment.a, experiment.f, experiment.rng
    summary = report.summary

    fit = estimate_holder(a, sample_pairs(rng, run.n_pairs, run.d_min, run.d_max))
    summary["beta_hat"] = fit.beta_hat
    summary["const_hat"] = fit.const_hat
    summary["holder_degenerate"] = fit.degenerate

    recipe = compute_alpha(a, experiment.rates, run.beta, torus_grid(run.grid_n), run.safety)
    summary["theta"] = recipe.theta
    summary["alpha"] = recipe.alpha

    quadruples = sample_quadruples(f, rng, run.n_quadruples, run.delta, run.leaf_radius)
    envelope = estimate_global_holder(a, f, quadruples, run.tol, run.n_max)
    summary["global_slope"] = envelope.slope
    summary["global_C"] = envelope.C_fit
    summary["global_degenerate"] = envelope.degenerate
    summary["n_quadruples"] = envelope.n_quadruples
    summary["decades"] = envelope.decades
    if envelope.slope is not None:
        summary["slope_margin"] = envelope.slope - recipe.alpha
    return {}


def run_cycle_weights(experiment: Experiment, report: Report) -> Dict[str, TableData]:
    """Handle 'cycle-weights' command."""
    run = experiment.config.run
    x0 = TorusPoint.of(*run.x0)
    seed = _sub_seed(experiment.rng)
    cycles = cycle_triviality_test(
        experiment.a, experiment.f, x0, run.n_cycles, run.max_leg, run.tol, seed, run.n_max
    )
    summary = report.summary
    summary["x0"] = list(x0.coords)
    summary["n_cycles"] = cycles.n_cycles
    summary["max_defect"] = cycles.max_defect
    summary["mean_defect"] = float(np.mean(cycles.defects))
    summary["trivial"] = cycles.max_defect < run.cycle_tol

    if experiment.b is not None and experiment.c is not None:
        summary["conjugated_cycle_defect"] = cycle_conjugation_residual(
            experiment.a, experiment.b, experiment.c, experiment.f, x0, run.n_cycles, run.tol, seed, run.max_leg, run.n_max
        )
    rows = [[i, defect] for i, defect in enumerate(cycles.defects)]
    return {"cycles": (("index", "defect"), rows)}


def run_conjugacy_extend(experiment: Experiment, report: Report) -> Dict[str, TableData]:
    """Handle 'conjugacy-extend' command."""
    config, run = experiment.config, experiment.config.run
    a, f = experiment.a, experiment.f
    b = _require_target(experiment, "conjugacy-extend")
    x0 = TorusPoint.of(*config.conjugacy.base_point)
    if config.conjugacy.base_value is not None:
        c0 = Operator.from_matrix(config.conjugacy.base_value)
    elif experiment.c is not None:
        c0 = experiment.c(x0)
    else:
        c0 = Operator.identity(a.dim)
    summary = report.summary
    summary["x0"] = list(x0.coords)

    summary["premise_residual"] = premise_residual(a, b, f, x0, c0, run.tol, run.max_leg, run.n_max)
    field = extend_from_base(a, b, f, x0, c0, run.premise_tol, run.max_leg, run.tol, run.n_max)
    grid = torus_grid(run.grid_n)
    summary["cohomology_residual"] = cohomology_residual(a, b, field, f, grid)

    independence = path_independence_residual(
        a, b, f, x0, c0, run.n_targets, run.tol, _sub_seed(experiment.rng), run.max_leg, run.n_max
    )
    summary["path_independence_residual"] = independence
    summary["path_independent"] = independence < run.cycle_tol
    if experiment.c is not None and config.conjugacy.kind != "identity":
        summary["field_error"] = field_distance(field, experiment.c, grid)
    summary["holder_envelope"] = holder_envelope(
        field, config.conjugacy.envelope_grid, config.conjugacy.envelope_exponent
    )
    rows = [[p.x1, p.x2] + list(field(p).mat.ravel()) for p in grid]
    header = ["x1", "x2"] + [f"c{i}{j}" for i in range(a.dim) for j in range(a.dim)]
    return {"field": (header, rows)}


def run_certify_conjugacy(experiment: Experiment, report: Report) -> Dict[str, TableData]:
    """Handle 'certify-conjugacy' command."""
    config, run = experiment.config, experiment.config.run
    a, f = experiment.a, experiment.f
    b = _require_target(experiment, "certify-conjugacy")
    c = _require_conjugacy(experiment, "certify-conjugacy")
    summary = report.summary

    summary["cohomology_residual"] = cohomology_residual(a, b, c, f, torus_grid(run.grid_n))
    legs = sample_legs(f, experiment.rng, run.n_legs, run.t_min, run.t_max)
    intertwining = intertwining_residual(a, b, c, f, legs, run.tol, run.n_max)
    summary["stable_intertwine"] = intertwining.stable
    summary["unstable_intertwine"] = intertwining.unstable

    x0 = TorusPoint.of(*run.x0)
    summary["conjugated_cycle_defect"] = cycle_conjugation_residual(
        a, b, c, f, x0, run.n_cycles, run.tol, _sub_seed(experiment.rng), run.max_leg, run.n_max
    )
    summary["holder_envelope"] = holder_envelope(c, config.conjugacy.envelope_grid, config.conjugacy.envelope_exponent)
    return {}


def run_demo_triangular(experiment: Experiment, report: Report) -> Dict[str, TableData]:
    """Handle 'demo-triangular' command."""
    run = experiment.config.run
    f, rng = experiment.f, experiment.rng
    pair = experiment.pair or triangular_family(f=f)
    c = triangular_conjugacy_field(pair)
    summary = report.summary
    summary["mu"] = pair.mu
    summary["r"] = pair.r

    # Step 1: numeric holonomies against the series oracles
    legs = sample_legs(f, rng, run.n_legs, run.t_min, run.t_max)
    results = parallel_map(lambda leg: leg_holonomy(pair.A, f, leg, run.tol, run.n_max), legs)
    errors = []
    for leg, result in zip(legs, results):
        oracle = pair.h_s(leg.start, leg.t) if leg.leg_type == STABLE else pair.h_u(leg.start, leg.t)
        errors.append(spectral_norm(result.H.mat - np.array([[1.0, oracle], [0.0, 1.0]])))
    summary["oracle_error"] = max(errors)
    summary["unstable_tail_bound"] = max(
        (pair.tail_bound_u(leg.t) for leg in legs if leg.leg_type == UNSTABLE), default=0.0
    )

    # Step 2: the series conjugacy
    grid = torus_grid(run.grid_n)
    summary["cohomology_residual"] = cohomology_residual(pair.A, pair.B, c, f, grid)
    summary["coboundary_defect"] = max(pair.coboundary_defect(p) for p in grid)

    # Step 3: intertwining, cycles and gauge freedom
    fixed_legs = sample_legs(f, rng, run.n_legs, run.leg_length, run.leg_length)
    plain = intertwining_residual(pair.A, pair.B, c, f, fixed_legs, run.tol, run.n_max)
    gauge = experiment.config.conjugacy.gauge or list(DEFAULT_GAUGE)
    gauged_c = c.gauged(np.diag(gauge))
    gauged = intertwining_residual(pair.A, pair.B, gauged_c, f, fixed_legs, run.tol, run.n_max)
    summary["stable_intertwine"] = plain.stable
    summary["unstable_intertwine"] = plain.unstable
    summary["gauge_shift"] = max(
        abs(plain.stable - gauged.stable),
        abs(plain.unstable - gauged.unstable),
        abs(summary["cohomology_residual"] - cohomology_residual(pair.A, pair.B, gauged_c, f, grid)),
    )
    x0 = TorusPoint.of(*run.x0)
    cycles = cycle_triviality_test(pair.A, f, x0, run.n_cycles, run.max_leg, run.tol, _sub_seed(rng), run.n_max)
    summary["cycle_defect"] = cycles.max_defect

    # Step 4: regularity of the conjugacy along leaves
    xs = random_points(rng, 8)
    summary["r_hat_unstable"] = unstable_holder_of_c(pair, xs).beta_hat
    summary["slope_stable"] = unstable_holder_of_c(pair, xs, leg_type=STABLE).beta_hat
    summary["alpha"] = compute_alpha(pair.A, experiment.rates, run.beta, grid, run.safety).alpha
    return {"legs": (LEG_TABLE_HEADER, _leg_rows(legs, results))}


def run_demo_perturbed(experiment: Experiment, report: Report) -> Dict[str, TableData]:
    """Handle 'demo-perturbed' command."""
    run = experiment.config.run
    f, rates = experiment.f, experiment.rates
    if experiment.split is not None:
        b, split = experiment.a, experiment.split
    else:
        b, split = perturbed_constant(np.diag([2.0, 0.5]), f=f)
    grid = torus_grid(run.grid_n)
    summary = report.summary
    summary["gap"] = split.gap
    summary["invariance_residual"] = split.invariance_residual(grid)

    small_grid = torus_grid(min(run.grid_n, 4))
    for which in ("fast", "slow"):
        restricted = restricted_generator(b, split, which)
        weak = check_weak_fiber_bunching(restricted, f, rates, run.beta, run.weak_n_max, small_grid)
        summary[f"theta_hat_{which}"] = weak.theta_hat
        summary[f"weak_{which}_ok"] = weak.pointwise_ok

    fit = splitting_holder(split, sample_pairs(experiment.rng, run.n_pairs, run.d_min, run.d_max))
    summary["splitting_holder_exponent"] = fit.beta_hat
    summary["splitting_holder_degenerate"] = fit.degenerate
    rows = [[p.x1, p.x2] + list(split.e_fast(p)) + list(split.e_slow(p)) for p in grid]
    return {"splitting": (("x1", "x2", "fast1", "fast2", "slow1", "slow2"), rows)}


_HANDLERS: Dict[str, Callable[[Experiment, Report], Dict[str, TableData]]] = {
    "check-bunching": run_check_bunching,
    "holonomy": run_holonomy,
    "holder-estimate": run_holder_estimate,
    "cycle-weights": run_cycle_weights,
    "conjugacy-extend": run_conjugacy_extend,
    "certify-conjugacy": run_certify_conjugacy,
    "demo-triangular": run_demo_triangular,
    "demo-perturbed": run_demo_perturbed,
}


def _record_failure(console, report: Report, exc: Exception):
    """Put the error name and hint on the report and show the diagnosis."""
    report.error = error_name(exc)
    finding = explain_error(exc)
    report.hint = finding.recommendation if finding else None
    _print(console, f"[red]✗ {report.error}: {exc}[/red]")
    if finding:
        _show_finding(console, finding)


def _show_validation_issues(console, issues):
    """Display validation issues."""
    for issue in issues:
        symbol = "✗" if issue.is_blocking() else "⚠"
        color = "red" if issue.is_blocking() else "yellow"

        _print(console, f"[{color}]{symbol} {issue.message}[/{color}]")

        if issue.fix_hint:
            _print(console, f"  [dim]→ {issue.fix_hint}[/dim]")


def _show_finding(console, finding: Finding):
    color = "red" if finding.level == "error" else "yellow"
    symbol = "✗" if finding.level == "error" else "⚠"
    _print(console, f"[{color}]{symbol} {finding.title}[/{color}]")
    _print(console, f"  [dim]{finding.detail}[/dim]")
    for rec_line in finding.recommendation.splitlines():
        _print(console, f"  [cyan]→ {rec_line}[/cyan]")


def _format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}" if math.isfinite(value) else str(value)
    return str(value)


def _show_summary(console, report: Report):
    """Display the summary table."""
    if not RICH_AVAILABLE or console is None:
        print(f"\n{report.experiment}:")
        for key, value in report.summary.items():
            print(f"  {key}: {_format_value(value)}")
        return

    table = Table(title=f"{report.experiment} ({report.config_digest[:12]})")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="green")
    for key, value in report.summary.items():
        table.add_row(key, _format_value(value))
    console.print(table)


def _print(console, text: str):
    """Print with rich if available, plain otherwise."""
    if console:
        console.print(text)
    else:
        # Strip rich markup for plain printing
        import re

        plain_text = re.sub(r"\[.*?\]", "", text)
        print(plain_text)
