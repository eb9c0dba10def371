"""
Weights of su-paths and su-cycles.
A weight is the ordered composition of the leg holonomies along a path.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .base_dynamics import (
    HyperbolicToralMap,
    SuLeg,
    SuPath,
    TorusPoint,
    candidate_routes,
    concat_paths,
    reverse_path,
)
from .errors import Diverged, InvalidParameter, NoPathWithinBound, NotACycle
from .holonomy import DEFAULT_N_MAX, DEFAULT_TOL, HolonomyResult, leg_holonomy
from .linear_cocycle import CocycleGenerator, Operator, spectral_norm
from .workers import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_MAX_LEG = 2.0
_ROUTE_ATTEMPTS = 64

FieldLike = Callable[[TorusPoint], Operator]


@dataclass(frozen=True)
class PathWeight:
    path: SuPath
    W: Operator
    per_leg: Tuple[Tuple[SuLeg, HolonomyResult], ...]

    @property
    def all_converged(self) -> bool:
        return all(result.converged for _, result in self.per_leg)


def path_weight(
    a: CocycleGenerator,
    f: HyperbolicToralMap,
    path: SuPath,
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
) -> PathWeight:
    """
    Weight of an su-path: H_k o ... o H_2 o H_1 with the first leg acting first.

    Raises:
        Diverged: tagged with the index of the first leg whose holonomy diverged
    """
    prod = np.eye(a.dim)
    prod_inv = np.eye(a.dim)
    per_leg = []
    for i, leg in enumerate(path.legs):
        try:
            result = leg_holonomy(a, f, leg, tol, n_max)
        except Diverged as e:
            raise e.at_leg(i) from e
        if not result.converged:
            logger.warning("leg %d of path from %s did not converge (%s)", i, path.start, result.stop_reason)
        prod = result.H.mat @ prod
        prod_inv = prod_inv @ result.H.inv
        per_leg.append((leg, result))
    return PathWeight(path=path, W=Operator.from_pair(prod, prod_inv), per_leg=tuple(per_leg))


def cycle_weight(
    a: CocycleGenerator,
    f: HyperbolicToralMap,
    cycle: SuPath,
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
) -> Operator:
    """
    Weight of an su-cycle.

    Raises:
        NotACycle: if the path does not return exactly to its start
    """
    if not cycle.is_closed:
        raise NotACycle(f"path starts at {cycle.start} but ends at {cycle.end}")
    return path_weight(a, f, cycle, tol, n_max).W


def two_routes(
    f: HyperbolicToralMap,
    x0: TorusPoint,
    rng: np.random.Generator,
    max_leg: float = DEFAULT_MAX_LEG,
) -> Tuple[SuPath, SuPath]:
    """Two distinct two-leg routes from x0 to a pseudo-random point."""
    for _ in range(_ROUTE_ATTEMPTS):
        y = TorusPoint.of(*rng.random(2))
        routes = candidate_routes(f, x0, y, max_leg, count=2)
        if len(routes) == 2:
            return routes[0], routes[1]
    raise NoPathWithinBound(f"could not find two su-routes from {x0.coords} with legs <= {max_leg}")


def seeded_cycles(
    f: HyperbolicToralMap,
    x0: TorusPoint,
    rng: np.random.Generator,
    count: int,
    max_leg: float = DEFAULT_MAX_LEG,
) -> List[SuPath]:
    """
    Four-leg cycles x0 -> z1 -> y -> z2 -> x0.

    Each cycle is the best route to a random y followed by the reverse of the
    second-best route.
    """
    if count < 1:
        raise InvalidParameter(f"need at least one cycle, got {count}")
    cycles = []
    for _ in range(count):
        first, second = two_routes(f, x0, rng, max_leg)
        cycles.append(concat_paths(first, reverse_path(second)))
    return cycles


@dataclass(frozen=True)
class CycleReport:
    max_defect: float
    defects: Tuple[float, ...]
    n_cycles: int


def cycle_triviality_test(
    a: CocycleGenerator,
    f: HyperbolicToralMap,
    x0: TorusPoint,
    n_cycles: int,
    max_leg: float = DEFAULT_MAX_LEG,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    n_max: int = DEFAULT_N_MAX,
    threads: int = 0,
) -> CycleReport:
    """Largest |W - Id| over seeded cycles at x0."""
    cycles = seeded_cycles(f, x0, np.random.default_rng(seed), n_cycles, max_leg)
    ident = np.eye(a.dim)

    def defect(cycle: SuPath) -> float:
        return spectral_norm(cycle_weight(a, f, cycle, tol, n_max).mat - ident)

    defects = parallel_map(defect, cycles, threads)
    logger.debug("cycle defects at %s: max %.3e", x0.coords, max(defects))
    return CycleReport(max_defect=max(defects), defects=tuple(defects), n_cycles=len(cycles))


def conjugated_weight_residual(
    a: CocycleGenerator,
    b: CocycleGenerator,
    c_field: FieldLike,
    f: HyperbolicToralMap,
    path: SuPath,
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
) -> float:
    """|W^A - C(y) W^B C(x)^-1| for a path from x to y."""
    w_a = path_weight(a, f, path, tol, n_max).W
    w_b = path_weight(b, f, path, tol, n_max).W
    c_x = c_field(path.start)
    c_y = c_field(path.end)
    return spectral_norm(w_a.mat - c_y.mat @ w_b.mat @ c_x.inv)


def weights_along(
    a: CocycleGenerator,
    f: HyperbolicToralMap,
    paths: Sequence[SuPath],
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
    threads: int = 0,
) -> List[PathWeight]:
    return parallel_map(lambda p: path_weight(a, f, p, tol, n_max), paths, threads)
