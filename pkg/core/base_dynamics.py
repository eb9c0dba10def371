"""
Base dynamics: hyperbolic automorphisms of the 2-torus.
Orbits, straight stable/unstable leaves, su-paths and rate-inequality checks.
"""

import logging
import math
from dataclasses import dataclass
from itertools import islice
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidParameter, InvalidTheta, NoPathWithinBound, NotHyperbolic, NotUnimodular

logger = logging.getLogger(__name__)

STABLE = "stable"
UNSTABLE = "unstable"
LEG_TYPES = (STABLE, UNSTABLE)

EIGEN_TOLERANCE = 1e-12
LIFT_RADIUS = 3
_MAX_LIFT_RADIUS = 1024
_ENDPOINT_TOLERANCE = 1e-9


def _wrap(value: float) -> float:
    r = value % 1.0
    # tiny negatives round up to 1.0
    if r >= 1.0:
        return 0.0
    return r + 0.0


@dataclass(frozen=True)
class TorusPoint:
    """A point of T^2 stored by its representative in [0,1)^2."""

    x1: float
    x2: float

    @classmethod
    def of(cls, x1: float, x2: float) -> "TorusPoint":
        return cls(_wrap(float(x1)), _wrap(float(x2)))

    @property
    def coords(self) -> Tuple[float, float]:
        return (self.x1, self.x2)


def reduce_point(p: TorusPoint) -> TorusPoint:
    """Canonical reduction mod 1."""
    return TorusPoint.of(p.x1, p.x2)


def torus_distance(p: TorusPoint, q: TorusPoint) -> float:
    """Flat distance on T^2, the minimum over adjacent lifts."""
    d1 = p.x1 - q.x1
    d2 = p.x2 - q.x2
    d1 -= round(d1)
    d2 -= round(d2)
    return math.hypot(d1, d2)


def torus_grid(n: int) -> List[TorusPoint]:
    """Regular n x n grid with node (i, j) at (i/n, j/n)."""
    if n < 1:
        raise InvalidParameter(f"grid size must be positive, got {n}")
    return [TorusPoint(i / n, j / n) for i in range(n) for j in range(n)]


def random_points(rng: np.random.Generator, count: int) -> List[TorusPoint]:
    """Uniform sample of the torus drawn from ``rng``."""
    coords = rng.random((count, 2))
    return [TorusPoint.of(a, b) for a, b in coords]


@dataclass(frozen=True)
class HyperbolicToralMap:
    """A linear Anosov automorphism of T^2 with its eigen-structure."""

    matrix: Tuple[Tuple[int, int], Tuple[int, int]]
    det: int
    lam: float
    v_u: Tuple[float, float]
    v_s: Tuple[float, float]
    eig_u: float
    eig_s: float

    @property
    def inverse_matrix(self) -> Tuple[Tuple[int, int], Tuple[int, int]]:
        (a, b), (c, d) = self.matrix
        k = self.det
        return ((k * d, -k * b), (-k * c, k * a))

    def direction(self, leg_type: str) -> Tuple[float, float]:
        _check_leg_type(leg_type)
        return self.v_s if leg_type == STABLE else self.v_u

    def leaf_factor(self, leg_type: str) -> float:
        """Signed eigenvalue by which f scales the leaf parameter."""
        _check_leg_type(leg_type)
        return self.eig_s if leg_type == STABLE else self.eig_u


def _check_leg_type(leg_type: str) -> None:
    if leg_type not in LEG_TYPES:
        raise InvalidParameter(f"leg type must be one of {LEG_TYPES}, got {leg_type!r}")


def _unit_eigenvector(matrix: Tuple[Tuple[int, int], Tuple[int, int]], eig: float) -> Tuple[float, float]:
    (a, b), (c, d) = matrix
    if b != 0:
        vec = (float(b), eig - a)
    else:
        vec = (eig - d, float(c))
    norm = math.hypot(*vec)
    u1, u2 = vec[0] / norm, vec[1] / norm
    if u1 < 0 or (u1 == 0 and u2 < 0):
        u1, u2 = -u1, -u2
    return (u1 + 0.0, u2 + 0.0)


def make_toral_map(matrix: Sequence[Sequence[int]]) -> HyperbolicToralMap:
    """
    Build a hyperbolic toral automorphism from a 2x2 integer matrix.

    Args:
        matrix: Integer entries [[a, b], [c, d]]

    Returns:
        HyperbolicToralMap: map with unstable/stable eigen-data

    Raises:
        NotUnimodular: if |det| != 1
        NotHyperbolic: if an eigenvalue lies on the unit circle
    """
    rows = [list(row) for row in matrix]
    if len(rows) != 2 or any(len(row) != 2 for row in rows):
        raise InvalidParameter("toral map matrix must be 2x2")
    if any(float(v) != int(v) for row in rows for v in row):
        raise InvalidParameter(f"toral map matrix must have integer entries, got {rows}")
    (a, b), (c, d) = ((int(rows[0][0]), int(rows[0][1])), (int(rows[1][0]), int(rows[1][1])))
    det = a * d - b * c
    if abs(det) != 1:
        raise NotUnimodular(f"|det| must be 1, got det = {det}")

    trace = a + d
    disc = trace * trace - 4 * det
    if disc <= 0:
        raise NotHyperbolic(f"eigenvalues of trace {trace} lie on the unit circle")
    eig_u = (trace + math.copysign(math.sqrt(disc), trace)) / 2.0
    if abs(abs(eig_u) - 1.0) < EIGEN_TOLERANCE:
        raise NotHyperbolic(f"eigenvalue {eig_u} has modulus 1")
    eig_s = det / eig_u

    mat = ((a, b), (c, d))
    v_u = _unit_eigenvector(mat, eig_u)
    v_s = _unit_eigenvector(mat, eig_s)
    return HyperbolicToralMap(
        matrix=mat,
        det=det,
        lam=abs(eig_u),
        v_u=v_u,
        v_s=v_s,
        eig_u=eig_u,
        eig_s=eig_s,
    )


def eigen_residual(f: HyperbolicToralMap) -> float:
    """Largest residual of the two eigen-equations."""
    m = np.array(f.matrix, dtype=float)
    res_u = np.linalg.norm(m @ np.array(f.v_u) - f.eig_u * np.array(f.v_u))
    res_s = np.linalg.norm(m @ np.array(f.v_s) - f.eig_s * np.array(f.v_s))
    return float(max(res_u, res_s))


def _step(m: Tuple[Tuple[int, int], Tuple[int, int]], p: TorusPoint) -> TorusPoint:
    (a, b), (c, d) = m
    return TorusPoint(_wrap(a * p.x1 + b * p.x2), _wrap(c * p.x1 + d * p.x2))


def apply(f: HyperbolicToralMap, p: TorusPoint, n: int) -> TorusPoint:
    """Return f^n(p), reduced after every step."""
    m = f.matrix if n >= 0 else f.inverse_matrix
    q = p
    for _ in range(abs(n)):
        q = _step(m, q)
    return q


def forward_orbit(f: HyperbolicToralMap, p: TorusPoint, n: int) -> List[TorusPoint]:
    """Points p, f(p), ..., f^n(p)."""
    points = [p]
    for _ in range(n):
        points.append(_step(f.matrix, points[-1]))
    return points


def backward_orbit(f: HyperbolicToralMap, p: TorusPoint, n: int) -> List[TorusPoint]:
    """Points p, f^-1(p), ..., f^-n(p)."""
    inv = f.inverse_matrix
    points = [p]
    for _ in range(n):
        points.append(_step(inv, points[-1]))
    return points


def leaf_point(f: HyperbolicToralMap, x: TorusPoint, leg_type: str, t: float) -> TorusPoint:
    """Point at signed leaf parameter t on the stable or unstable leaf of x."""
    v1, v2 = f.direction(leg_type)
    if t == 0:
        return x
    return TorusPoint.of(x.x1 + t * v1, x.x2 + t * v2)


def push_leaf(
    f: HyperbolicToralMap, x: TorusPoint, leg_type: str, t: float, n: int
) -> Tuple[TorusPoint, float]:
    """Return (f^n x, parameter of f^n y) for y at parameter t on the leaf of x."""
    return apply(f, x, n), t * f.leaf_factor(leg_type) ** n


def paired_orbit(
    f: HyperbolicToralMap, x: TorusPoint, leg_type: str, t: float, n: int, backward: bool = False
) -> Tuple[List[TorusPoint], List[TorusPoint]]:
    """
    Orbits of x and of its leaf neighbour at parameter t.

    The neighbour orbit is carried along the base orbit of x through the exact
    leaf contraction, so both orbits share one pseudo-orbit.

    Args:
        f: Base map
        x: Base point
        leg_type: Leaf carrying the neighbour
        t: Leaf parameter of the neighbour
        n: Number of steps
        backward: Iterate f^-1 instead of f

    Returns:
        tuple: (xs, ys) with n+1 points each
    """
    xs, ys = [], []
    for p, q in islice(iter_paired_orbit(f, x, leg_type, t, backward), n + 1):
        xs.append(p)
        ys.append(q)
    return xs, ys


def iter_paired_orbit(
    f: HyperbolicToralMap, x: TorusPoint, leg_type: str, t: float, backward: bool = False
) -> Iterator[Tuple[TorusPoint, TorusPoint]]:
    """Endless version of ``paired_orbit`` yielding (f^k x, f^k y)."""
    m = f.inverse_matrix if backward else f.matrix
    factor = f.leaf_factor(leg_type)
    if backward:
        factor = 1.0 / factor
    v1, v2 = f.direction(leg_type)
    p, s = x, t
    while True:
        yield p, (p if s == 0 else TorusPoint.of(p.x1 + s * v1, p.x2 + s * v2))
        p = _step(m, p)
        s *= factor


@dataclass(frozen=True)
class SuLeg:
    """A segment of a single stable or unstable leaf."""

    start: TorusPoint
    leg_type: str
    t: float
    end: TorusPoint

    def reversed(self) -> "SuLeg":
        return SuLeg(start=self.end, leg_type=self.leg_type, t=-self.t, end=self.start)


def make_leg(
    f: HyperbolicToralMap,
    start: TorusPoint,
    leg_type: str,
    t: float,
    end: Optional[TorusPoint] = None,
) -> SuLeg:
    """Build a leg; a supplied end point must agree with the leaf formula."""
    start = reduce_point(start)
    computed = leaf_point(f, start, leg_type, t)
    if end is None:
        end = computed
    elif torus_distance(end, computed) > _ENDPOINT_TOLERANCE:
        raise InvalidParameter(
            f"leg end {end.coords} is not on the {leg_type} leaf of {start.coords} at t={t}"
        )
    else:
        end = reduce_point(end)
    return SuLeg(start=start, leg_type=leg_type, t=float(t), end=end)


@dataclass(frozen=True)
class SuPath:
    """Concatenation of legs; an empty path is the trivial path at ``anchor``."""

    legs: Tuple[SuLeg, ...] = ()
    anchor: Optional[TorusPoint] = None

    def __post_init__(self):
        for i in range(len(self.legs) - 1):
            if self.legs[i].end != self.legs[i + 1].start:
                raise InvalidParameter(f"legs {i} and {i + 1} do not chain")

    @property
    def start(self) -> Optional[TorusPoint]:
        return self.legs[0].start if self.legs else self.anchor

    @property
    def end(self) -> Optional[TorusPoint]:
        return self.legs[-1].end if self.legs else self.anchor

    @property
    def is_closed(self) -> bool:
        return self.start == self.end


def reverse_path(path: SuPath) -> SuPath:
    return SuPath(legs=tuple(leg.reversed() for leg in reversed(path.legs)), anchor=path.end)


def concat_paths(first: SuPath, second: SuPath) -> SuPath:
    if first.end != second.start:
        raise InvalidParameter("paths do not chain: first.end != second.start")
    return SuPath(legs=first.legs + second.legs, anchor=first.start)


def _lift_solutions(
    f: HyperbolicToralMap, x: TorusPoint, y: TorusPoint, radius: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    ks = np.array(
        [(k1, k2) for k1 in range(-radius, radius + 1) for k2 in range(-radius, radius + 1)],
        dtype=float,
    )
    system = np.column_stack([np.array(f.v_u), -np.array(f.v_s)])
    rhs = ks + np.array([y.x1 - x.x1, y.x2 - x.x2])
    st = np.linalg.solve(system, rhs.T).T
    cost = np.max(np.abs(st), axis=1)
    order = np.lexsort((ks[:, 1], ks[:, 0], cost))
    return ks[order], st[order], cost[order]


def candidate_routes(
    f: HyperbolicToralMap, x: TorusPoint, y: TorusPoint, max_leg: float, count: int = 1
) -> List[SuPath]:
    """
    Ranked two-leg su-routes from x to y (unstable leg, then stable leg).

    Routes come from lift solutions x + s*v_u = y + k + t*v_s, sorted by
    max(|s|, |t|) with lexicographic k as tie-break.

    Args:
        f: Base map
        x: Start point
        y: End point
        max_leg: Bound on every leg parameter
        count: Number of routes wanted

    Returns:
        list: Up to ``count`` routes, best first
    """
    if max_leg <= 0:
        raise InvalidParameter(f"max_leg must be positive, got {max_leg}")
    system_norm = float(np.linalg.norm(np.column_stack([f.v_u, f.v_s]), 2))
    radius = LIFT_RADIUS
    while True:
        ks, st, cost = _lift_solutions(f, x, y, radius)
        within = np.nonzero(cost <= max_leg)[0]
        # solutions beyond the box have max(|s|,|t|) >= radius / (sqrt(2) * |M|)
        exhausted = radius / (math.sqrt(2.0) * system_norm) > max_leg
        if len(within) >= count or exhausted or radius >= _MAX_LIFT_RADIUS:
            break
        radius *= 2
        logger.debug("widening lift search to radius %d", radius)

    routes = []
    for idx in within[:count]:
        s, t = float(st[idx, 0]), float(st[idx, 1])
        z = leaf_point(f, x, UNSTABLE, s)
        first = SuLeg(start=x, leg_type=UNSTABLE, t=s, end=z)
        second = make_leg(f, z, STABLE, -t, end=y)
        routes.append(SuPath(legs=(first, second), anchor=x))
    return routes


def connect_su(f: HyperbolicToralMap, x: TorusPoint, y: TorusPoint, max_leg: float) -> SuPath:
    """
    Shortest two-leg su-path from x to y.

    Raises:
        NoPathWithinBound: if every lift solution has a leg longer than max_leg
    """
    if max_leg <= 0:
        raise InvalidParameter(f"max_leg must be positive, got {max_leg}")
    if x == y:
        return SuPath(legs=(), anchor=x)
    routes = candidate_routes(f, x, y, max_leg, count=1)
    if not routes:
        raise NoPathWithinBound(
            f"no su-path from {x.coords} to {y.coords} with legs <= {max_leg}"
        )
    return routes[0]


# Rate functions ------------------------------------------------------------

RateFunction = Callable[[TorusPoint], float]


@dataclass(frozen=True)
class RateData:
    """Rate functions bounding the base contraction and expansion."""

    nu: RateFunction
    nu_hat: RateFunction
    gamma: RateFunction
    gamma_hat: RateFunction
    mu: RateFunction
    mu_hat: RateFunction


def constant_rates(
    nu: float, nu_hat: float, gamma: float, gamma_hat: float, mu: float, mu_hat: float
) -> RateData:
    for name, value in (
        ("nu", nu),
        ("nu_hat", nu_hat),
        ("gamma", gamma),
        ("gamma_hat", gamma_hat),
        ("mu", mu),
        ("mu_hat", mu_hat),
    ):
        if not 0 < value < 1:
            raise InvalidParameter(f"rate {name} must lie in (0, 1), got {value}")
    return RateData(
        nu=lambda _p: nu,
        nu_hat=lambda _p: nu_hat,
        gamma=lambda _p: gamma,
        gamma_hat=lambda _p: gamma_hat,
        mu=lambda _p: mu,
        mu_hat=lambda _p: mu_hat,
    )


def toral_rates(f: HyperbolicToralMap, gamma_exponent: float = 0.4) -> RateData:
    """Constant rates of a toral automorphism; gamma = gamma_hat = lambda^-gamma_exponent."""
    if not 0 < gamma_exponent < 1:
        raise InvalidParameter(f"gamma exponent must lie in (0, 1), got {gamma_exponent}")
    inv = 1.0 / f.lam
    gamma = f.lam ** (-gamma_exponent)
    return constant_rates(inv, inv, gamma, gamma, inv, inv)


@dataclass(frozen=True)
class RateCheck:
    holds: bool
    worst_margin: float


def rate_chain_holds(rates: RateData, grid: Sequence[TorusPoint]) -> bool:
    """mu <= nu < gamma < gamma_hat^-1 < nu_hat^-1 <= mu_hat^-1 at every grid point."""
    for p in grid:
        chain = (
            rates.mu(p),
            rates.nu(p),
            rates.gamma(p),
            1.0 / rates.gamma_hat(p),
            1.0 / rates.nu_hat(p),
            1.0 / rates.mu_hat(p),
        )
        if not (
            chain[0] <= chain[1] < chain[2] < chain[3] < chain[4] <= chain[5]
        ):
            return False
    return True


def check_center_bunching(rates: RateData, grid: Sequence[TorusPoint]) -> RateCheck:
    """nu < gamma*gamma_hat and nu_hat < gamma*gamma_hat on the grid."""
    worst = math.inf
    for p in grid:
        margin = rates.gamma(p) * rates.gamma_hat(p) - max(rates.nu(p), rates.nu_hat(p))
        worst = min(worst, margin)
    return RateCheck(holds=worst > 0, worst_margin=worst)


def check_strong_center_bunching(
    rates: RateData, theta: float, eps: float, grid: Sequence[TorusPoint]
) -> RateCheck:
    """
    Strong center bunching with exponent theta.

    Checks nu^theta < gamma*gamma_hat, nu_hat^theta < gamma*gamma_hat,
    nu/gamma < mu^theta and nu_hat/gamma_hat < mu_hat^theta at every grid point.

    Raises:
        InvalidTheta: unless 0 < theta < eps < 1
    """
    if not 0 < eps < 1:
        raise InvalidTheta(f"eps must lie in (0, 1), got {eps}")
    if not 0 < theta < eps:
        raise InvalidTheta(f"theta must lie in (0, {eps}), got {theta}")
    worst = math.inf
    for p in grid:
        nu, nu_hat = rates.nu(p), rates.nu_hat(p)
        gamma, gamma_hat = rates.gamma(p), rates.gamma_hat(p)
        margins = (
            gamma * gamma_hat - nu**theta,
            gamma * gamma_hat - nu_hat**theta,
            rates.mu(p) ** theta - nu / gamma,
            rates.mu_hat(p) ** theta - nu_hat / gamma_hat,
        )
        worst = min(worst, *margins)
    return RateCheck(holds=worst > 0, worst_margin=worst)
