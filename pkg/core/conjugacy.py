"""
Conjugacies between cocycles.
Residual certification, intertwining checks and extension from a base point.
"""

import functools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .base_dynamics import (
    HyperbolicToralMap,
    SuLeg,
    SuPath,
    TorusPoint,
    apply,
    connect_su,
    torus_distance,
    torus_grid,
)
from .errors import CycleObstruction, InvalidParameter, PremiseViolated, SingularConjugacy, SingularProduct
from .holonomy import DEFAULT_N_MAX, DEFAULT_TOL, leg_holonomy
from .linear_cocycle import CocycleGenerator, Operator, constant_generator, spectral_norm
from .su_calculus import (
    DEFAULT_MAX_LEG,
    cycle_triviality_test,
    cycle_weight,
    path_weight,
    seeded_cycles,
    two_routes,
)
from .workers import parallel_map

logger = logging.getLogger(__name__)

PROVENANCES = ("closed_form", "extended_from_base", "grid")
DEFAULT_ENVELOPE_EXPONENT = 0.25
DEFAULT_CACHE_LIMIT = 4096


class ConjugacyField:
    """
    A field x -> C(x) of invertible operators.

    Memoized fields keep at most ``cache_limit`` values in a thread-safe LRU
    cache; the base value is always held.
    """

    def __init__(
        self,
        base_point: TorusPoint,
        base_value: Operator,
        func: Callable[[TorusPoint], Operator],
        provenance: str,
        name: str = "",
        memoize: bool = True,
        cache_limit: int = DEFAULT_CACHE_LIMIT,
    ):
        if provenance not in PROVENANCES:
            raise InvalidParameter(f"provenance must be one of {PROVENANCES}, got {provenance!r}")
        if cache_limit < 1:
            raise InvalidParameter(f"cache limit must be positive, got {cache_limit}")
        self.base_point = base_point
        self.base_value = base_value
        self.provenance = provenance
        self.name = name
        self.memoize = memoize
        self.cache_limit = cache_limit
        self._func = functools.lru_cache(maxsize=cache_limit)(func) if memoize else func

    @property
    def dim(self) -> int:
        return self.base_value.dim

    def eval(self, x: TorusPoint) -> Operator:
        if x == self.base_point:
            return self.base_value
        return self._func(x)

    __call__ = eval

    def cache_size(self) -> int:
        if not self.memoize:
            return 1
        return 1 + self._func.cache_info().currsize  # type: ignore[attr-defined]

    def gauged(self, mat) -> "ConjugacyField":
        """The field x -> C(x) D for a constant invertible D."""
        d = Operator.from_matrix(mat)
        return ConjugacyField(
            self.base_point,
            self.base_value.compose(d),
            lambda x: self.eval(x).compose(d),
            self.provenance,
            name=f"{self.name}*D",
            memoize=self.memoize,
            cache_limit=self.cache_limit,
        )


def closed_form_field(
    matrix_func: Callable[[TorusPoint], np.ndarray],
    base_point: Optional[TorusPoint] = None,
    name: str = "closed_form",
) -> ConjugacyField:
    """
    Field given by a formula.

    Raises:
        SingularConjugacy: if the formula is singular at an evaluated point
    """

    def evaluate(x: TorusPoint) -> Operator:
        try:
            return Operator.from_matrix(matrix_func(x))
        except SingularProduct as e:
            raise SingularConjugacy(f"conjugacy {name!r} is singular at {x.coords}: {e}") from e

    base = base_point or TorusPoint(0.0, 0.0)
    return ConjugacyField(base, evaluate(base), evaluate, "closed_form", name=name, memoize=False)


def identity_field(dim: int = 2) -> ConjugacyField:
    return closed_form_field(lambda _x: np.eye(dim), name="identity")


def cohomology_residual(
    a: CocycleGenerator,
    b: CocycleGenerator,
    c: Callable[[TorusPoint], Operator],
    f: HyperbolicToralMap,
    grid: Sequence[TorusPoint],
    threads: int = 0,
) -> float:
    """sup over the grid of |A(x) - C(fx) B(x) C(x)^-1|."""

    def residual(x: TorusPoint) -> float:
        return spectral_norm(a(x).mat - c(apply(f, x, 1)).mat @ b(x).mat @ c(x).inv)

    return max(parallel_map(residual, grid, threads), default=0.0)


@dataclass(frozen=True)
class IntertwiningReport:
    stable: float
    unstable: float
    n_legs: int


def intertwining_residual(
    a: CocycleGenerator,
    b: CocycleGenerator,
    c: Callable[[TorusPoint], Operator],
    f: HyperbolicToralMap,
    legs: Sequence[SuLeg],
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
    threads: int = 0,
) -> IntertwiningReport:
    """Largest |H^A_{x,y} - C(y) H^B_{x,y} C(x)^-1| over stable and over unstable legs."""

    def residual(leg: SuLeg) -> Tuple[str, float]:
        h_a = leg_holonomy(a, f, leg, tol, n_max).H
        h_b = leg_holonomy(b, f, leg, tol, n_max).H
        value = spectral_norm(h_a.mat - c(leg.end).mat @ h_b.mat @ c(leg.start).inv)
        return leg.leg_type, value

    results = parallel_map(residual, legs, threads)
    stable = max((v for kind, v in results if kind == "stable"), default=0.0)
    unstable = max((v for kind, v in results if kind == "unstable"), default=0.0)
    return IntertwiningReport(stable=stable, unstable=unstable, n_legs=len(legs))


def _propagate(
    a: CocycleGenerator,
    b: CocycleGenerator,
    f: HyperbolicToralMap,
    path: SuPath,
    c0: Operator,
    tol: float,
    n_max: int,
) -> Operator:
    # C(y) = W^A_P C0 (W^B_P)^-1
    w_a = path_weight(a, f, path, tol, n_max).W
    w_b = path_weight(b, f, path, tol, n_max).W
    return w_a.compose(c0).compose(w_b.inverse())


def premise_residual(
    a: CocycleGenerator,
    b: CocycleGenerator,
    f: HyperbolicToralMap,
    x0: TorusPoint,
    c0: Operator,
    tol: float = DEFAULT_TOL,
    max_leg: float = DEFAULT_MAX_LEG,
    n_max: int = DEFAULT_N_MAX,
) -> float:
    """|A(x0) - C(f x0) B(x0) C0^-1| with C(f x0) propagated along su-paths from x0."""
    fx0 = apply(f, x0, 1)
    c_fx0 = _propagate(a, b, f, connect_su(f, x0, fx0, max_leg), c0, tol, n_max)
    return spectral_norm(a(x0).mat - c_fx0.mat @ b(x0).mat @ c0.inv)


def extend_from_base(
    a: CocycleGenerator,
    b: CocycleGenerator,
    f: HyperbolicToralMap,
    x0: TorusPoint,
    c0,
    tol: float = 1e-8,
    max_leg: float = DEFAULT_MAX_LEG,
    holonomy_tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
) -> ConjugacyField:
    """
    Extend C0 at x0 to a field by propagating along the canonical su-path.

    Args:
        a: Cocycle conjugated to
        b: Cocycle conjugated from
        f: Base map
        x0: Base point
        c0: Value at x0 (Operator or matrix)
        tol: Bound on the premise residual at x0
        max_leg: Leg bound for connecting paths
        holonomy_tol: Cauchy tolerance of the leg holonomies
        n_max: Step bound of the leg holonomies

    Returns:
        ConjugacyField: field with provenance ``extended_from_base``

    Raises:
        PremiseViolated: if the conjugacy equation fails at x0 by tol or more
    """
    c0 = c0 if isinstance(c0, Operator) else Operator.from_matrix(c0)
    residual = premise_residual(a, b, f, x0, c0, holonomy_tol, max_leg, n_max)
    if residual >= tol:
        raise PremiseViolated(
            f"conjugacy equation fails at x0 = {x0.coords} by {residual:.3e} (tol {tol:.1e})", residual
        )

    def evaluate(y: TorusPoint) -> Operator:
        return _propagate(a, b, f, connect_su(f, x0, y, max_leg), c0, holonomy_tol, n_max)

    logger.debug("extended conjugacy from %s with premise residual %.3e", x0.coords, residual)
    return ConjugacyField(x0, c0, evaluate, "extended_from_base", name="extended")


def path_independence_residual(
    a: CocycleGenerator,
    b: CocycleGenerator,
    f: HyperbolicToralMap,
    x0: TorusPoint,
    c0,
    n_targets: int,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    max_leg: float = DEFAULT_MAX_LEG,
    n_max: int = DEFAULT_N_MAX,
    threads: int = 0,
) -> float:
    """Largest |C_P1(y) - C_P2(y)| over random targets y and two distinct routes x0 -> y."""
    if n_targets < 1:
        raise InvalidParameter(f"need at least one target, got {n_targets}")
    c0 = c0 if isinstance(c0, Operator) else Operator.from_matrix(c0)
    rng = np.random.default_rng(seed)
    pairs = [two_routes(f, x0, rng, max_leg) for _ in range(n_targets)]

    def residual(routes: Tuple[SuPath, SuPath]) -> float:
        first = _propagate(a, b, f, routes[0], c0, tol, n_max)
        second = _propagate(a, b, f, routes[1], c0, tol, n_max)
        return spectral_norm(first.mat - second.mat)

    return max(parallel_map(residual, pairs, threads))


def cycle_conjugation_residual(
    a: CocycleGenerator,
    b: CocycleGenerator,
    c: Callable[[TorusPoint], Operator],
    f: HyperbolicToralMap,
    x0: TorusPoint,
    n_cycles: int,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    max_leg: float = DEFAULT_MAX_LEG,
    n_max: int = DEFAULT_N_MAX,
    threads: int = 0,
) -> float:
    """Largest |W^A - C(x0) W^B C(x0)^-1| over seeded cycles at x0."""
    cycles = seeded_cycles(f, x0, np.random.default_rng(seed), n_cycles, max_leg)
    c_x0 = c(x0)

    def residual(cycle: SuPath) -> float:
        w_a = cycle_weight(a, f, cycle, tol, n_max)
        w_b = cycle_weight(b, f, cycle, tol, n_max)
        return spectral_norm(w_a.mat - c_x0.mat @ w_b.mat @ c_x0.inv)

    return max(parallel_map(residual, cycles, threads))


@dataclass(frozen=True)
class ConstantTargetReport:
    cycle_defect: float
    cohomology_residual: float
    field: ConjugacyField


def constant_target_from_holonomy(
    a: CocycleGenerator,
    f: HyperbolicToralMap,
    x0: TorusPoint,
    c0,
    tol: float = 1e-6,
    n_cycles: int = 20,
    seed: int = 0,
    grid_n: int = 8,
    max_leg: float = DEFAULT_MAX_LEG,
    holonomy_tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
) -> Tuple[Operator, ConstantTargetReport]:
    """
    Constant cocycle cohomologous to A when its cycle weights are trivial.

    B = C0^-1 (W^A_{x0, f x0})^-1 A(x0) C0 with the weight taken along the
    canonical path from x0 to f x0; the conjugacy is then extended from C0.

    Raises:
        CycleObstruction: if the seeded cycle weights at x0 are not trivial to tol
    """
    c0 = c0 if isinstance(c0, Operator) else Operator.from_matrix(c0)
    report = cycle_triviality_test(a, f, x0, n_cycles, max_leg, holonomy_tol, seed, n_max)
    if report.max_defect >= tol:
        raise CycleObstruction(
            f"cycle weights at {x0.coords} are not trivial: defect {report.max_defect:.3e}",
            report.max_defect,
        )
    fx0 = apply(f, x0, 1)
    w = path_weight(a, f, connect_su(f, x0, fx0, max_leg), holonomy_tol, n_max).W
    target = c0.inverse().compose(w.inverse()).compose(a(x0)).compose(c0)
    b = constant_generator(target.mat, name="constant_target")
    field = extend_from_base(a, b, f, x0, c0, tol, max_leg, holonomy_tol, n_max)
    residual = cohomology_residual(a, b, field, f, torus_grid(grid_n))
    return target, ConstantTargetReport(report.max_defect, residual, field)


def field_distance(
    first: Callable[[TorusPoint], Operator],
    second: Callable[[TorusPoint], Operator],
    grid: Sequence[TorusPoint],
    threads: int = 0,
) -> float:
    """sup over the grid of |C1(x) - C2(x)|."""
    return max(
        parallel_map(lambda x: spectral_norm(first(x).mat - second(x).mat), grid, threads),
        default=0.0,
    )


def holder_envelope(
    field: Callable[[TorusPoint], Operator],
    n: int,
    exponent: float = DEFAULT_ENVELOPE_EXPONENT,
    threads: int = 0,
) -> float:
    """
    Largest |C(p) - C(q)| / dist(p, q)^exponent over adjacent nodes of an n x n grid.

    Neighbours wrap around the torus.
    """
    if not 0 < exponent <= 1:
        raise InvalidParameter(f"envelope exponent must lie in (0, 1], got {exponent}")
    grid = torus_grid(n)
    values = parallel_map(field, grid, threads)
    by_index: Dict[Tuple[int, int], Operator] = {}
    for k, value in enumerate(values):
        by_index[(k // n, k % n)] = value
    step = torus_distance(grid[0], grid[1]) if n > 1 else 1.0
    ratios: List[float] = []
    for (i, j), value in by_index.items():
        for neighbour in (by_index[((i + 1) % n, j)], by_index[(i, (j + 1) % n)]):
            ratios.append(spectral_norm(value.mat - neighbour.mat) / step**exponent)
    envelope = max(ratios, default=0.0)
    if not math.isfinite(envelope):
        logger.warning("Hölder envelope is not finite on the %dx%d grid", n, n)
    return envelope
