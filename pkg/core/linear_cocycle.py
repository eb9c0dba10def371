"""
Linear cocycles over the toral base.
Operators with cached inverses, generators, iterates and bunching diagnostics.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .base_dynamics import (
    HyperbolicToralMap,
    RateData,
    TorusPoint,
    backward_orbit,
    forward_orbit,
    torus_distance,
)
from .errors import DegenerateSample, DimensionMismatch, InvalidParameter, SingularProduct

logger = logging.getLogger(__name__)

INVERTIBILITY_TOLERANCE = 1e-12
DIFFERENCE_FLOOR = 1e-14
MIN_HOLDER_PAIRS = 100
MIN_DECADES = 3.0
VALIDATION_GRID = 512

GENERATOR_KINDS = ("constant", "closed_form", "grid_sampled")


def spectral_norm(mat: np.ndarray) -> float:
    """Largest singular value; closed form for 2x2."""
    if mat.shape == (2, 2):
        a, b = mat[0, 0], mat[0, 1]
        c, d = mat[1, 0], mat[1, 1]
        return float(math.hypot((a + d) / 2, (c - b) / 2) + math.hypot((a - d) / 2, (c + b) / 2))
    if mat.shape == (1, 1):
        return float(abs(mat[0, 0]))
    return float(np.linalg.norm(mat, 2))


def _inverse(mat: np.ndarray) -> np.ndarray:
    if mat.shape == (2, 2):
        a, b = mat[0, 0], mat[0, 1]
        c, d = mat[1, 0], mat[1, 1]
        det = a * d - b * c
        if det == 0:
            raise SingularProduct(f"matrix {mat.tolist()} is singular")
        return np.array([[d / det, -b / det], [-c / det, a / det]])
    if mat.shape == (1, 1):
        if mat[0, 0] == 0:
            raise SingularProduct("1x1 operator is zero")
        return np.array([[1.0 / mat[0, 0]]])
    try:
        return np.linalg.inv(mat)
    except np.linalg.LinAlgError as e:
        raise SingularProduct(f"matrix is singular: {e}") from e


def _frozen(mat: np.ndarray) -> np.ndarray:
    mat.setflags(write=False)
    return mat


@dataclass(frozen=True, eq=False)
class Operator:
    """Invertible d x d real matrix with its cached inverse and spectral norms."""

    mat: np.ndarray
    inv: np.ndarray
    norm: float
    inv_norm: float

    @classmethod
    def from_matrix(cls, mat) -> "Operator":
        """
        Build an operator, checking invertibility.

        Raises:
            SingularProduct: if the smallest singular value is not above
                1e-12 times the largest
        """
        arr = np.array(mat, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatch(f"operator must be square, got shape {arr.shape}")
        inv = _inverse(arr)
        norm = spectral_norm(arr)
        inv_norm = spectral_norm(inv)
        if not math.isfinite(norm * inv_norm) or norm * inv_norm >= 1.0 / INVERTIBILITY_TOLERANCE:
            raise SingularProduct(f"operator {arr.tolist()} fails the invertibility tolerance")
        return cls(_frozen(arr), _frozen(inv), norm, inv_norm)

    @classmethod
    def from_pair(cls, mat: np.ndarray, inv: np.ndarray) -> "Operator":
        """Wrap a product already carried with its inverse; no tolerance check."""
        mat = np.array(mat, dtype=float)
        inv = np.array(inv, dtype=float)
        return cls(_frozen(mat), _frozen(inv), spectral_norm(mat), spectral_norm(inv))

    @classmethod
    def identity(cls, dim: int) -> "Operator":
        return cls(_frozen(np.eye(dim)), _frozen(np.eye(dim)), 1.0, 1.0)

    @property
    def dim(self) -> int:
        return int(self.mat.shape[0])

    @property
    def distortion(self) -> float:
        return self.norm * self.inv_norm

    def compose(self, other: "Operator") -> "Operator":
        """self o other."""
        if self.dim != other.dim:
            raise DimensionMismatch(f"cannot compose {self.dim}x{self.dim} with {other.dim}x{other.dim}")
        return Operator.from_pair(self.mat @ other.mat, other.inv @ self.inv)

    def inverse(self) -> "Operator":
        return Operator(self.inv, self.mat, self.inv_norm, self.norm)


def op_distance(a: Operator, b: Operator) -> float:
    """d(A, B) = |A - B| + |A^-1 - B^-1| in the spectral norm."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"operators of dimension {a.dim} and {b.dim}")
    return spectral_norm(a.mat - b.mat) + spectral_norm(a.inv - b.inv)


@dataclass(frozen=True)
class HolderData:
    beta: float
    constant: float


@dataclass(frozen=True)
class CocycleGenerator:
    """A map x -> A(x) in GL(d) with optional declared Hölder data."""

    dim: int
    func: Callable[[TorusPoint], Operator]
    kind: str
    holder: Optional[HolderData] = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise InvalidParameter(f"generator kind must be one of {GENERATOR_KINDS}")

    def eval(self, x: TorusPoint) -> Operator:
        op = self.func(x)
        if op.dim != self.dim:
            raise DimensionMismatch(f"generator {self.name!r} returned dimension {op.dim}")
        return op

    __call__ = eval


def constant_generator(mat, name: str = "constant") -> CocycleGenerator:
    op = Operator.from_matrix(mat)
    return CocycleGenerator(
        dim=op.dim, func=lambda _x: op, kind="constant", holder=HolderData(1.0, 0.0), name=name
    )


def closed_form_generator(
    matrix_func: Callable[[TorusPoint], np.ndarray],
    dim: int,
    holder: Optional[HolderData] = None,
    name: str = "closed_form",
) -> CocycleGenerator:
    return CocycleGenerator(
        dim=dim,
        func=lambda x: Operator.from_matrix(matrix_func(x)),
        kind="closed_form",
        holder=holder,
        name=name,
    )


def _bilinear(values: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    n1, n2 = values.shape[0], values.shape[1]
    s1, s2 = u1 * n1, u2 * n2
    f1, f2 = np.floor(s1), np.floor(s2)
    w1, w2 = (s1 - f1)[..., None, None], (s2 - f2)[..., None, None]
    i0 = f1.astype(int) % n1
    j0 = f2.astype(int) % n2
    i1 = (i0 + 1) % n1
    j1 = (j0 + 1) % n2
    return (
        (1 - w1) * (1 - w2) * values[i0, j0]
        + w1 * (1 - w2) * values[i1, j0]
        + (1 - w1) * w2 * values[i0, j1]
        + w1 * w2 * values[i1, j1]
    )


def grid_generator(values: np.ndarray, name: str = "grid", validate: bool = True) -> CocycleGenerator:
    """
    Generator interpolated bilinearly from nodes (i/n1, j/n2) with wraparound.

    Args:
        values: Array of shape (n1, n2, d, d)
        name: Label used in reports
        validate: Check invertibility on a 512 x 512 validation grid

    Returns:
        CocycleGenerator: grid-sampled generator
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 4 or values.shape[2] != values.shape[3]:
        raise DimensionMismatch(f"grid values must have shape (n1, n2, d, d), got {values.shape}")
    if validate:
        ticks = np.arange(VALIDATION_GRID) / VALIDATION_GRID
        u1, u2 = np.meshgrid(ticks, ticks, indexing="ij")
        mats = _bilinear(values, u1.ravel(), u2.ravel())
        svals = np.linalg.svd(mats, compute_uv=False)
        if np.any(svals[:, -1] <= INVERTIBILITY_TOLERANCE * svals[:, 0]):
            raise SingularProduct(f"grid generator {name!r} is not invertible on the validation grid")
    dim = values.shape[2]

    def evaluate(x: TorusPoint) -> Operator:
        mat = _bilinear(values, np.array(x.x1), np.array(x.x2))
        return Operator.from_matrix(mat)

    return CocycleGenerator(dim=dim, func=evaluate, kind="grid_sampled", holder=None, name=name)


def load_grid_generator(path: Path) -> CocycleGenerator:
    """
    Read a grid-sampled generator file.

    First line ``d n1 n2``, then n1*n2 rows of d*d entries in row-major order;
    row i*n2 + j holds node (i/n1, j/n2).
    """
    path = Path(path)
    try:
        with open(path) as f:
            header = f.readline().split()
            body = np.loadtxt(f, ndmin=2)
    except OSError as e:
        raise InvalidParameter(f"cannot read grid file {path}: {e}") from e
    except ValueError as e:
        raise InvalidParameter(f"malformed grid file {path}: {e}") from e
    if len(header) != 3:
        raise InvalidParameter(f"grid file {path}: header must be 'd n1 n2'")
    d, n1, n2 = (int(v) for v in header)
    if body.shape != (n1 * n2, d * d):
        raise InvalidParameter(
            f"grid file {path}: expected {n1 * n2} rows of {d * d} entries, got {body.shape}"
        )
    return grid_generator(body.reshape(n1, n2, d, d), name=path.stem)


def iterate(a: CocycleGenerator, f: HyperbolicToralMap, x: TorusPoint, n: int) -> Operator:
    """
    Cocycle iterate A^n_x for any integer n.

    A^n_x = A(f^{n-1}x) ... A(x) for n > 0, A^0_x = Id and
    A^{-n}_x = (A^n_{f^{-n}x})^{-1}. The product is carried with its inverse
    factor by factor.
    """
    if n == 0:
        return Operator.identity(a.dim)
    prod = np.eye(a.dim)
    prod_inv = np.eye(a.dim)
    if n > 0:
        for p in forward_orbit(f, x, n - 1):
            factor = a(p)
            prod = factor.mat @ prod
            prod_inv = prod_inv @ factor.inv
    else:
        for p in backward_orbit(f, x, -n)[1:]:
            factor = a(p)
            prod = factor.inv @ prod
            prod_inv = prod_inv @ factor.mat
    return Operator.from_pair(prod, prod_inv)


def quasiconformal_distortion(a: CocycleGenerator, f: HyperbolicToralMap, x: TorusPoint, n: int) -> float:
    """K(x, n) = |A^n_x| |(A^n_x)^-1|."""
    return iterate(a, f, x, n).distortion


@dataclass(frozen=True)
class BunchingReport:
    pointwise_ok: bool
    worst_product: float
    theta_hat: float
    L_hat: float
    n_used: int


def _require_grid(grid: Sequence[TorusPoint]) -> None:
    if len(grid) == 0:
        raise InvalidParameter("evaluation grid is empty")


def _pointwise_products(
    a: CocycleGenerator, rates: RateData, beta: float, grid: Sequence[TorusPoint]
) -> List[float]:
    products = []
    for p in grid:
        k = a(p).distortion
        products.append(k * max(rates.nu(p), rates.nu_hat(p)) ** beta)
    return products


def check_fiber_bunching(
    a: CocycleGenerator, rates: RateData, beta: float, grid: Sequence[TorusPoint]
) -> BunchingReport:
    """Pointwise check of |A(x)| |A(x)^-1| nu(x)^beta < 1 (and with nu_hat)."""
    _require_grid(grid)
    if not 0 < beta <= 1:
        raise InvalidParameter(f"beta must lie in (0, 1], got {beta}")
    worst = max(_pointwise_products(a, rates, beta, grid))
    return BunchingReport(
        pointwise_ok=worst < 1.0, worst_product=worst, theta_hat=worst, L_hat=1.0, n_used=1
    )


def _envelope_fit(log_sup: np.ndarray) -> Tuple[float, float]:
    ns = np.arange(1, len(log_sup) + 1, dtype=float)
    slope, _ = np.polyfit(ns, log_sup, 1)
    log_l = float(np.max(log_sup - slope * ns))
    return math.exp(slope), math.exp(log_l)


def check_weak_fiber_bunching(
    a: CocycleGenerator,
    f: HyperbolicToralMap,
    rates: RateData,
    beta: float,
    n_max: int,
    grid: Sequence[TorusPoint],
    margin: float = 0.02,
) -> BunchingReport:
    """
    Fit |A^n_x| |(A^n_x)^-1| (nu^n_x)^beta < L theta^n over the grid.

    The forward side uses nu along forward orbits, the backward side uses
    A^{-n}_x with nu_hat along backward orbits. Each side is fitted on the
    supremum over the grid at every n; the larger rate is reported.

    Args:
        a: Cocycle generator
        f: Base map
        rates: Rate functions
        beta: Hölder exponent in (0, 1]
        n_max: Largest iterate, at least 8
        grid: Sample points
        margin: Confidence margin below 1 required of theta_hat

    Returns:
        BunchingReport: fitted theta_hat and L_hat
    """
    if n_max < 8:
        raise InvalidParameter(f"n_max must be at least 8, got {n_max}")
    if not 0 < beta <= 1:
        raise InvalidParameter(f"beta must lie in (0, 1], got {beta}")
    _require_grid(grid)
    forward = np.full(n_max, -np.inf)
    backward = np.full(n_max, -np.inf)
    for x in grid:
        prod, prod_inv, log_rate = np.eye(a.dim), np.eye(a.dim), 0.0
        for k, p in enumerate(forward_orbit(f, x, n_max - 1)):
            factor = a(p)
            prod = factor.mat @ prod
            prod_inv = prod_inv @ factor.inv
            log_rate += beta * math.log(rates.nu(p))
            value = math.log(spectral_norm(prod) * spectral_norm(prod_inv)) + log_rate
            forward[k] = max(forward[k], value)
        prod, prod_inv, log_rate = np.eye(a.dim), np.eye(a.dim), 0.0
        for k, p in enumerate(backward_orbit(f, x, n_max)[1:]):
            factor = a(p)
            prod = factor.inv @ prod
            prod_inv = prod_inv @ factor.mat
            log_rate += beta * math.log(rates.nu_hat(p))
            value = math.log(spectral_norm(prod) * spectral_norm(prod_inv)) + log_rate
            backward[k] = max(backward[k], value)

    theta_f, l_f = _envelope_fit(forward)
    theta_b, l_b = _envelope_fit(backward)
    theta_hat = max(theta_f, theta_b)
    worst = max(_pointwise_products(a, rates, beta, grid))
    logger.debug("weak bunching fit: forward %.6f backward %.6f", theta_f, theta_b)
    return BunchingReport(
        pointwise_ok=theta_hat < 1.0 - margin,
        worst_product=worst,
        theta_hat=theta_hat,
        L_hat=max(l_f, l_b),
        n_used=n_max,
    )


def loglog_fit(scales: Sequence[float], values: Sequence[float]) -> Tuple[float, float]:
    """Least-squares line through (log scale, log value); returns (slope, intercept)."""
    xs = np.log(np.asarray(scales, dtype=float))
    ys = np.log(np.asarray(values, dtype=float))
    slope, intercept = np.polyfit(xs, ys, 1)
    return float(slope), float(intercept)


def decades(scales: Sequence[float]) -> float:
    arr = np.asarray(scales, dtype=float)
    return float(np.log10(arr.max() / arr.min())) if len(arr) else 0.0


def sample_pairs(
    rng: np.random.Generator, count: int, d_min: float, d_max: float
) -> List[Tuple[TorusPoint, TorusPoint]]:
    """Random pairs with log-uniform separation in [d_min, d_max] and random direction."""
    if not 0 < d_min < d_max <= 0.5:
        raise InvalidParameter(f"need 0 < d_min < d_max <= 0.5, got {d_min}, {d_max}")
    pairs = []
    for _ in range(count):
        x = TorusPoint.of(*rng.random(2))
        r = math.exp(rng.uniform(math.log(d_min), math.log(d_max)))
        angle = rng.uniform(0.0, 2 * math.pi)
        y = TorusPoint.of(x.x1 + r * math.cos(angle), x.x2 + r * math.sin(angle))
        pairs.append((x, y))
    return pairs


@dataclass(frozen=True)
class HolderFit:
    beta_hat: float
    const_hat: float
    n_pairs: int
    degenerate: bool = False


def estimate_holder(a: CocycleGenerator, pairs: Sequence[Tuple[TorusPoint, TorusPoint]]) -> HolderFit:
    """
    Fit |A(x) - A(y)| <= c dist(x, y)^beta by log-log least squares.

    Pairs whose difference is below 1e-14 are dropped. When every difference
    vanishes the fit is degenerate and beta_hat is +inf.

    Raises:
        InvalidParameter: fewer than 100 pairs or less than 3 decades of distance
        DegenerateSample: too few nonzero differences to fit a line
    """
    if len(pairs) < MIN_HOLDER_PAIRS:
        raise InvalidParameter(f"need at least {MIN_HOLDER_PAIRS} pairs, got {len(pairs)}")
    dists = [torus_distance(x, y) for x, y in pairs]
    if min(dists) <= 0 or decades(dists) < MIN_DECADES:
        raise InvalidParameter(f"pair distances must span {MIN_DECADES} decades")
    scales, diffs = [], []
    for (x, y), dist in zip(pairs, dists):
        diff = spectral_norm(a(x).mat - a(y).mat)
        if diff >= DIFFERENCE_FLOOR:
            scales.append(dist)
            diffs.append(diff)
    if not diffs:
        logger.warning("all generator differences vanish; Hölder fit is degenerate")
        return HolderFit(beta_hat=math.inf, const_hat=0.0, n_pairs=0, degenerate=True)
    if len(set(scales)) < 2:
        raise DegenerateSample(f"only {len(diffs)} usable pairs for the Hölder fit")
    slope, intercept = loglog_fit(scales, diffs)
    return HolderFit(beta_hat=slope, const_hat=math.exp(intercept), n_pairs=len(diffs))
