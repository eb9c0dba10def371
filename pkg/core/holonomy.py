"""
Standard stable and unstable holonomies as limits of matrix products.
Axiom checks, the alpha recipe and Hölder envelopes of holonomies.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .base_dynamics import (
    STABLE,
    UNSTABLE,
    HyperbolicToralMap,
    RateData,
    SuLeg,
    TorusPoint,
    iter_paired_orbit,
    leaf_point,
    make_leg,
    paired_orbit,
    push_leaf,
    torus_distance,
)
from .errors import Diverged, InvalidParameter, NotBunched
from .linear_cocycle import (
    DIFFERENCE_FLOOR,
    CocycleGenerator,
    Operator,
    decades,
    loglog_fit,
    op_distance,
    spectral_norm,
)
from .workers import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_N_MAX = 200
GROWTH_WINDOW = 5
GROWTH_STREAK = 10
DECAY_RATIO = 0.999


@dataclass(frozen=True)
class HolonomyResult:
    H: Operator
    n_used: int
    cauchy_residual: float
    converged: bool
    stop_reason: str = "converged"


def _leg_factors(
    a: CocycleGenerator, f: HyperbolicToralMap, x: TorusPoint, leg_type: str, t: float
) -> Iterator[Tuple[Operator, Operator]]:
    # stable: A(f^k x), A(f^k y); unstable: A(f^-k-1 x)^-1, A(f^-k-1 y)^-1
    if leg_type == STABLE:
        for p, q in iter_paired_orbit(f, x, STABLE, t):
            yield a(p), a(q)
    else:
        orbit = iter_paired_orbit(f, x, UNSTABLE, t, backward=True)
        next(orbit)
        for p, q in orbit:
            yield a(p).inverse(), a(q).inverse()


def _decaying(residuals: List[float]) -> bool:
    if len(residuals) <= GROWTH_WINDOW:
        return True
    old, new = residuals[-1 - GROWTH_WINDOW], residuals[-1]
    if old == 0:
        return new == 0
    return (new / old) ** (1.0 / GROWTH_WINDOW) < DECAY_RATIO


def _limit_product(
    factors: Iterator[Tuple[Operator, Operator]], dim: int, tol: float, n_max: int
) -> HolonomyResult:
    """
    Limit of (F^n_y)^-1 F^n_x for paired factor sequences.

    The partial products are accumulated as H_n = H_{n-1} + D_n with
    D_n = (F^{n-1}_y)^-1 F_y^-1 (F_x - F_y) F^{n-1}_x, so equal factors add
    an exact zero.
    """
    if tol <= 0:
        raise InvalidParameter(f"tol must be positive, got {tol}")
    if n_max < 1:
        raise InvalidParameter(f"n_max must be at least 1, got {n_max}")
    h = np.eye(dim)
    px = np.eye(dim)
    py_inv = np.eye(dim)
    residuals: List[float] = []
    streak = 0
    for n, (fx, fy) in enumerate(factors, start=1):
        if fx is fy or np.array_equal(fx.mat, fy.mat):
            residual = 0.0
        else:
            delta = py_inv @ (fy.inv @ (fx.mat - fy.mat)) @ px
            h = h + delta
            residual = spectral_norm(delta)
        px = fx.mat @ px
        py_inv = py_inv @ fy.inv
        residuals.append(residual)

        if not math.isfinite(residual) or not np.all(np.isfinite(h)):
            raise Diverged(f"holonomy product overflowed at n={n}", n, residuals)
        if residual == 0 and all(r == 0 for r in residuals):
            return HolonomyResult(Operator.from_pair(h, np.eye(dim)), n, 0.0, True)
        recent = residuals[-2:]
        if len(recent) == 2 and max(recent) < tol and _decaying(residuals):
            return HolonomyResult(Operator.from_pair(h, np.linalg.inv(h)), n, residual, True)

        if n > GROWTH_WINDOW and residual > residuals[-1 - GROWTH_WINDOW]:
            streak += 1
        else:
            streak = 0
        if streak >= GROWTH_STREAK:
            if residual > residuals[0]:
                raise Diverged(
                    f"holonomy residuals grew for {GROWTH_STREAK} steps (n={n}); "
                    "the cocycle is not fiber bunched along this leaf",
                    n,
                    residuals,
                )
            logger.warning("holonomy stalled at n=%d with residual %.3e above tol", n, residual)
            return HolonomyResult(
                Operator.from_pair(h, np.linalg.inv(h)), n, residual, False, "stalled"
            )
        if n >= n_max:
            break
    logger.warning("holonomy did not converge within n_max=%d (residual %.3e)", n_max, residuals[-1])
    return HolonomyResult(
        Operator.from_pair(h, np.linalg.inv(h)), len(residuals), residuals[-1], False, "n_max"
    )


def stable_holonomy(
    a: CocycleGenerator,
    f: HyperbolicToralMap,
    x: TorusPoint,
    t: float,
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
) -> HolonomyResult:
    """
    H^s_{x,y} = lim (A^n_y)^-1 A^n_x for y = leaf_point(x, stable, t).

    Raises:
        Diverged: if the residuals keep growing past their starting size
    """
    result = _limit_product(_leg_factors(a, f, x, STABLE, t), a.dim, tol, n_max)
    logger.debug("stable holonomy at %s t=%g: n=%d %s", x.coords, t, result.n_used, result.stop_reason)
    return result


def unstable_holonomy(
    a: CocycleGenerator,
    f: HyperbolicToralMap,
    x: TorusPoint,
    t: float,
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
) -> HolonomyResult:
    """H^u_{x,y} = lim (A^-n_y)^-1 A^-n_x for y = leaf_point(x, unstable, t)."""
    result = _limit_product(_leg_factors(a, f, x, UNSTABLE, t), a.dim, tol, n_max)
    logger.debug("unstable holonomy at %s t=%g: n=%d %s", x.coords, t, result.n_used, result.stop_reason)
    return result


def leg_holonomy(
    a: CocycleGenerator,
    f: HyperbolicToralMap,
    leg: SuLeg,
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
) -> HolonomyResult:
    if leg.leg_type == STABLE:
        return stable_holonomy(a, f, leg.start, leg.t, tol, n_max)
    return unstable_holonomy(a, f, leg.start, leg.t, tol, n_max)


def _tree_product(mats: Sequence[np.ndarray]) -> np.ndarray:
    if len(mats) == 1:
        return mats[0]
    mid = len(mats) // 2
    return _tree_product(mats[:mid]) @ _tree_product(mats[mid:])


def tree_holonomy(
    a: CocycleGenerator, f: HyperbolicToralMap, x: TorusPoint, leg_type: str, t: float, n: int
) -> Operator:
    """Partial product at step n with both products grouped as balanced trees."""
    if n < 1:
        raise InvalidParameter(f"n must be at least 1, got {n}")
    fxs, fys = [], []
    for _, (fx, fy) in zip(range(n), _leg_factors(a, f, x, leg_type, t)):
        fxs.append(fx)
        fys.append(fy)
    px = _tree_product([op.mat for op in reversed(fxs)])
    py_inv = _tree_product([op.inv for op in fys])
    h = py_inv @ px
    return Operator.from_pair(h, np.linalg.inv(h))


def sample_legs(
    f: HyperbolicToralMap,
    rng: np.random.Generator,
    count: int,
    t_min: float,
    t_max: float,
    leg_types: Sequence[str] = (STABLE, UNSTABLE),
) -> List[SuLeg]:
    """Legs at uniform base points with log-uniform |t| and random sign."""
    if not 0 < t_min <= t_max:
        raise InvalidParameter(f"need 0 < t_min <= t_max, got {t_min}, {t_max}")
    legs = []
    for i in range(count):
        x = TorusPoint.of(*rng.random(2))
        t = math.exp(rng.uniform(math.log(t_min), math.log(t_max)))
        if rng.random() < 0.5:
            t = -t
        legs.append(make_leg(f, x, leg_types[i % len(leg_types)], t))
    return legs


@dataclass(frozen=True)
class AxiomReport:
    h2_residual: float
    h3_residual: float
    h4_K: Optional[float]
    h4_exponent: Optional[float]
    n_legs: int


def _conjugated_shift(
    a: CocycleGenerator,
    f: HyperbolicToralMap,
    leg: SuLeg,
    n: int,
    tol: float,
    n_max: int,
) -> np.ndarray:
    # (A^n_y)^-1 H_{f^n x, f^n y} A^n_x, or the backward version for unstable legs
    backward = leg.leg_type == UNSTABLE
    xs, ys = paired_orbit(f, leg.start, leg.leg_type, leg.t, n, backward=backward)
    px, py_inv = np.eye(a.dim), np.eye(a.dim)
    for p, q in zip(xs[1:] if backward else xs[:-1], ys[1:] if backward else ys[:-1]):
        fx, fy = a(p), a(q)
        if backward:
            fx, fy = fx.inverse(), fy.inverse()
        px = fx.mat @ px
        py_inv = py_inv @ fy.inv
    x_n, t_n = push_leaf(f, leg.start, leg.leg_type, leg.t, -n if backward else n)
    shifted = leg_holonomy(a, f, make_leg(f, x_n, leg.leg_type, t_n), tol, n_max)
    return py_inv @ shifted.H.mat @ px


def verify_axioms(
    a: CocycleGenerator,
    f: HyperbolicToralMap,
    legs: Sequence[SuLeg],
    n_check: int,
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
    split: float = 0.4,
    threads: int = 0,
) -> AxiomReport:
    """
    Measure the holonomy axioms on sample legs.

    For a leg from x to z at parameter t, the split point y sits at
    ``split * t``; (H2) compares H_{y,z} H_{x,y} with H_{x,z}. (H3) / (H3')
    compare H_{x,z} with its conjugated shift for 1 <= n <= n_check. (H4) is
    a log-log fit of |H_{x,z} - Id| against |t|.

    Returns:
        AxiomReport: largest residuals and the (H4) fit
    """
    if not 0 < split < 1:
        raise InvalidParameter(f"split must lie in (0, 1), got {split}")

    def measure(leg: SuLeg) -> Tuple[float, float, float]:
        h_xz = leg_holonomy(a, f, leg, tol, n_max).H.mat
        y = leaf_point(f, leg.start, leg.leg_type, split * leg.t)
        first = make_leg(f, leg.start, leg.leg_type, split * leg.t, end=y)
        second = make_leg(f, y, leg.leg_type, (1 - split) * leg.t)
        h_xy = leg_holonomy(a, f, first, tol, n_max).H.mat
        h_yz = leg_holonomy(a, f, second, tol, n_max).H.mat
        h2 = spectral_norm(h_yz @ h_xy - h_xz)
        h3 = 0.0
        for n in range(1, n_check + 1):
            h3 = max(h3, spectral_norm(h_xz - _conjugated_shift(a, f, leg, n, tol, n_max)))
        return h2, h3, spectral_norm(h_xz - np.eye(a.dim))

    results = parallel_map(measure, legs, threads)
    h2 = max((r[0] for r in results), default=0.0)
    h3 = max((r[1] for r in results), default=0.0)
    scales = [abs(leg.t) for leg, r in zip(legs, results) if r[2] >= DIFFERENCE_FLOOR]
    values = [r[2] for r in results if r[2] >= DIFFERENCE_FLOOR]
    h4_k: Optional[float] = None
    h4_exp: Optional[float] = None
    if len(set(scales)) >= 2:
        h4_exp, intercept = loglog_fit(scales, values)
        h4_k = math.exp(intercept)
    return AxiomReport(h2_residual=h2, h3_residual=h3, h4_K=h4_k, h4_exponent=h4_exp, n_legs=len(legs))


@dataclass(frozen=True)
class AlphaRecipe:
    theta: float
    alpha: float
    beta: float
    safety: float


def compute_alpha(
    a: CocycleGenerator,
    rates: RateData,
    beta: float,
    grid: Sequence[TorusPoint],
    safety: float = 0.99,
) -> AlphaRecipe:
    """
    Hölder exponent of the holonomies from the bunching rates.

    theta is the largest of |A||A^-1| nu^beta, |A||A^-1| nu_hat^beta and
    (nu/gamma)^beta over the grid; alpha = safety * min(beta, ln theta /
    ln(mu_hat nu)) with the ratio minimized over the grid, so that
    theta < (mu_hat nu)^alpha holds at every grid point.

    Raises:
        NotBunched: if theta >= 1
    """
    if not 0 < safety < 1:
        raise InvalidParameter(f"safety must lie in (0, 1), got {safety}")
    if not 0 < beta <= 1:
        raise InvalidParameter(f"beta must lie in (0, 1], got {beta}")
    if len(grid) == 0:
        raise InvalidParameter("evaluation grid is empty")
    theta = 0.0
    for p in grid:
        k = a(p).distortion
        theta = max(
            theta,
            k * rates.nu(p) ** beta,
            k * rates.nu_hat(p) ** beta,
            (rates.nu(p) / rates.gamma(p)) ** beta,
        )
    if theta >= 1:
        raise NotBunched(f"theta = {theta:.6f} >= 1; the cocycle is not fiber bunched")
    ratio = min(math.log(theta) / math.log(rates.mu_hat(p) * rates.nu(p)) for p in grid)
    return AlphaRecipe(theta=theta, alpha=safety * min(beta, ratio), beta=beta, safety=safety)


@dataclass(frozen=True)
class Quadruple:
    """Stable leaves (x, y) and (x2, y2) with the same leaf parameter t."""

    x: TorusPoint
    x2: TorusPoint
    t: float

    def separation(self, f: HyperbolicToralMap) -> float:
        y = leaf_point(f, self.x, STABLE, self.t)
        y2 = leaf_point(f, self.x2, STABLE, self.t)
        return max(torus_distance(self.x, self.x2), torus_distance(y, y2))


def sample_quadruples(
    f: HyperbolicToralMap,
    rng: np.random.Generator,
    count: int,
    delta: float,
    leaf_radius: float,
    span_decades: float = 4.0,
) -> List[Quadruple]:
    """Quadruples displaced along the unstable direction by log-uniform amounts below delta."""
    if not 0 < delta < 0.5 or leaf_radius <= 0:
        raise InvalidParameter("need 0 < delta < 0.5 and a positive leaf radius")
    low = math.log(delta * 10.0 ** (-span_decades))
    quads = []
    for _ in range(count):
        x = TorusPoint.of(*rng.random(2))
        t = rng.uniform(-leaf_radius, leaf_radius)
        shift = math.exp(rng.uniform(low, math.log(delta)))
        quads.append(Quadruple(x=x, x2=leaf_point(f, x, UNSTABLE, shift), t=t))
    return quads


@dataclass(frozen=True)
class GlobalHolderReport:
    slope: Optional[float]
    C_fit: float
    n_quadruples: int
    decades: float
    degenerate: bool


def estimate_global_holder(
    a: CocycleGenerator,
    f: HyperbolicToralMap,
    quadruples: Sequence[Quadruple],
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
    threads: int = 0,
) -> GlobalHolderReport:
    """
    Regress log d(H_{x,y}, H_{x2,y2}) on log max(dist(x,x2), dist(y,y2)).

    Zero distances (below 1e-14) are dropped; with nothing left the report is
    degenerate with no slope and a zero envelope.
    """

    def measure(q: Quadruple) -> Tuple[float, float]:
        h1 = stable_holonomy(a, f, q.x, q.t, tol, n_max).H
        h2 = stable_holonomy(a, f, q.x2, q.t, tol, n_max).H
        return q.separation(f), op_distance(h1, h2)

    samples = [s for s in parallel_map(measure, quadruples, threads) if s[1] >= DIFFERENCE_FLOOR and s[0] > 0]
    if len(samples) < 2:
        return GlobalHolderReport(None, 0.0, len(samples), 0.0, True)
    scales = [s[0] for s in samples]
    values = [s[1] for s in samples]
    slope, _ = loglog_fit(scales, values)
    envelope = max(v / r**slope for r, v in samples)
    return GlobalHolderReport(slope, envelope, len(samples), decades(scales), False)


@dataclass(frozen=True)
class NormComparison:
    max_ratio: float
    bound: float


def norm_comparison_along_leaf(
    a: CocycleGenerator,
    f: HyperbolicToralMap,
    z: TorusPoint,
    t: float,
    k_max: int,
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
) -> NormComparison:
    """
    Compare iterate norms at z and at w = leaf_point(z, stable, t).

    Returns the largest of |A^k_w| / |A^k_z| and |(A^k_w)^-1| / |(A^k_z)^-1|
    over 1 <= k <= k_max, with the holonomy bound (1 + |H - Id|)(1 + |H^-1 - Id|).
    """
    h = stable_holonomy(a, f, z, t, tol, n_max).H
    ident = np.eye(a.dim)
    bound = (1 + spectral_norm(h.mat - ident)) * (1 + spectral_norm(h.inv - ident))
    zs, ws = paired_orbit(f, z, STABLE, t, k_max - 1)
    pz, pz_inv = np.eye(a.dim), np.eye(a.dim)
    pw, pw_inv = np.eye(a.dim), np.eye(a.dim)
    ratio = 1.0
    for p, q in zip(zs, ws):
        fz, fw = a(p), a(q)
        pz, pz_inv = fz.mat @ pz, pz_inv @ fz.inv
        pw, pw_inv = fw.mat @ pw, pw_inv @ fw.inv
        ratio = max(
            ratio,
            spectral_norm(pw) / spectral_norm(pz),
            spectral_norm(pw_inv) / spectral_norm(pz_inv),
        )
    return NormComparison(max_ratio=ratio, bound=bound)
