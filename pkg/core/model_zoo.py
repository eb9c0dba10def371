"""
Closed-form example families with analytic oracles.
Triangular pairs, smooth conjugate pairs, perturbed constant cocycles and shears.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .base_dynamics import (
    STABLE,
    UNSTABLE,
    HyperbolicToralMap,
    TorusPoint,
    apply,
    backward_orbit,
    forward_orbit,
    make_toral_map,
    paired_orbit,
    torus_distance,
    torus_grid,
)
from .conjugacy import ConjugacyField, closed_form_field
from .errors import (
    DegenerateSample,
    InvalidParameter,
    NoDominatedSplitting,
    SingularConjugacy,
    SingularProduct,
)
from .linear_cocycle import (
    DIFFERENCE_FLOOR,
    CocycleGenerator,
    HolderData,
    HolderFit,
    Operator,
    closed_form_generator,
    constant_generator,
    decades,
    loglog_fit,
)

logger = logging.getLogger(__name__)

CAT_MAP = ((2, 1), (1, 1))
FAMILIES = ("triangular", "smooth_pair", "perturbed_constant", "sheared")

DEFAULT_N_TRUNC = 60
DEFAULT_N_TRUNC_U = 80
SPLITTING_TOL = 1e-10
SPLITTING_N_MAX = 200
# generic starting line for projective iteration
_SEED_LINE = np.array([math.cos(0.7), math.sin(0.7)])


def cat_map() -> HyperbolicToralMap:
    return make_toral_map(CAT_MAP)


@dataclass(frozen=True)
class TrigPolynomial:
    """sum of a_k cos(2 pi k.x) + b_k sin(2 pi k.x) over terms (k1, k2, a_k, b_k)."""

    terms: Tuple[Tuple[int, int, float, float], ...] = ()
    lipschitz: float = field(init=False)
    sup_bound: float = field(init=False)

    def __post_init__(self):
        terms = tuple((int(k1), int(k2), float(a), float(b)) for k1, k2, a, b in self.terms)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(
            self,
            "lipschitz",
            2 * math.pi * sum(math.hypot(k1, k2) * (abs(a) + abs(b)) for k1, k2, a, b in terms),
        )
        object.__setattr__(self, "sup_bound", sum(abs(a) + abs(b) for _, _, a, b in terms))

    @classmethod
    def from_list(cls, terms: Sequence[Sequence[float]]) -> "TrigPolynomial":
        parsed = []
        for term in terms:
            if len(term) != 4:
                raise InvalidParameter(f"trig term must be [k1, k2, a, b], got {list(term)}")
            k1, k2, a, b = term
            if float(k1) != int(k1) or float(k2) != int(k2):
                raise InvalidParameter(f"trig frequencies must be integers, got {k1}, {k2}")
            parsed.append((int(k1), int(k2), float(a), float(b)))
        return cls(tuple(parsed))

    @classmethod
    def from_entry(cls, entry) -> "TrigPolynomial":
        """A number (constant term) or a list of [k1, k2, a, b] terms."""
        if isinstance(entry, (int, float)) and not isinstance(entry, bool):
            return cls(((0, 0, float(entry), 0.0),))
        if isinstance(entry, (list, tuple)):
            return cls.from_list(entry)
        raise InvalidParameter(f"entry must be a number or a term list, got {entry!r}")

    def to_list(self) -> List[List[float]]:
        return [[k1, k2, a, b] for k1, k2, a, b in self.terms]

    def at(self, x1, x2):
        """Evaluate at coordinates; accepts floats or numpy arrays."""
        total = 0.0 * np.asarray(x1, dtype=float)
        for k1, k2, a, b in self.terms:
            angle = 2 * math.pi * (k1 * np.asarray(x1) + k2 * np.asarray(x2))
            total = total + a * np.cos(angle) + b * np.sin(angle)
        return total

    def __call__(self, p: TorusPoint) -> float:
        total = 0.0
        for k1, k2, a, b in self.terms:
            angle = 2 * math.pi * (k1 * p.x1 + k2 * p.x2)
            total += a * math.cos(angle) + b * math.sin(angle)
        return total

    @property
    def is_zero(self) -> bool:
        return self.sup_bound == 0


DEFAULT_PHI = TrigPolynomial(((1, 0, 0.1, 0.0),))


@dataclass(frozen=True)
class TriangularPair:
    """
    A(x) = [[mu, phi(x)], [0, 1]] and B = diag(mu, 1) with mu = lambda^r.

    The conjugacy C(x) = [[1, c(x)], [0, 1]] solves the twisted coboundary
    equation c(fx) = mu c(x) + phi(x).
    """

    f: HyperbolicToralMap
    r: float
    mu: float
    phi: TrigPolynomial
    A: CocycleGenerator
    B: CocycleGenerator
    n_trunc: int = DEFAULT_N_TRUNC
    n_trunc_u: int = DEFAULT_N_TRUNC_U

    def c(self, x: TorusPoint) -> float:
        """c(x) = -sum_{k=0}^{N} mu^-k-1 phi(f^k x)."""
        total = 0.0
        weight = 1.0 / self.mu
        for p in forward_orbit(self.f, x, self.n_trunc):
            total -= weight * self.phi(p)
            weight /= self.mu
        return total

    def c_along_leaf(self, x: TorusPoint, leg_type: str, t: float) -> Tuple[float, float]:
        """(c(x), c(y)) for y at parameter t on a leaf of x, summed over one paired orbit."""
        cx = cy = 0.0
        weight = 1.0 / self.mu
        xs, ys = paired_orbit(self.f, x, leg_type, t, self.n_trunc)
        for p, q in zip(xs, ys):
            cx -= weight * self.phi(p)
            cy -= weight * self.phi(q)
            weight /= self.mu
        return cx, cy

    def h_s(self, x: TorusPoint, t: float) -> float:
        """sum_{k=0}^{N} mu^-k-1 (phi(f^k x) - phi(f^k y)) for y on the stable leaf."""
        total = 0.0
        weight = 1.0 / self.mu
        xs, ys = paired_orbit(self.f, x, STABLE, t, self.n_trunc)
        for p, q in zip(xs, ys):
            total += weight * (self.phi(p) - self.phi(q))
            weight /= self.mu
        return total

    def h_u(self, x: TorusPoint, t: float) -> float:
        """sum_{j=1}^{N} mu^j-1 (phi(f^-j y) - phi(f^-j x)) for y on the unstable leaf."""
        total = 0.0
        weight = 1.0
        xs, ys = paired_orbit(self.f, x, UNSTABLE, t, self.n_trunc_u, backward=True)
        for p, q in zip(xs[1:], ys[1:]):
            total += weight * (self.phi(q) - self.phi(p))
            weight *= self.mu
        return total

    def coboundary_defect(self, x: TorusPoint) -> float:
        """|c(fx) - mu c(x) - phi(x)|."""
        return abs(self.c(apply(self.f, x, 1)) - self.mu * self.c(x) - self.phi(x))

    @property
    def tail_bound_c(self) -> float:
        return self.phi.sup_bound * self.mu ** (-self.n_trunc) / (self.mu - 1.0)

    def tail_bound_u(self, t: float) -> float:
        """Bound on the terms of ``h_u`` dropped after ``n_trunc_u``."""
        ratio = self.mu / self.f.lam
        return self.phi.lipschitz * abs(t) * ratio**self.n_trunc_u / (self.mu * (1.0 - ratio))

    def conjugacy_matrix(self, x: TorusPoint) -> np.ndarray:
        return np.array([[1.0, self.c(x)], [0.0, 1.0]])


def triangular_family(
    r: float = 0.5,
    phi: TrigPolynomial = DEFAULT_PHI,
    n_trunc: int = DEFAULT_N_TRUNC,
    n_trunc_u: int = DEFAULT_N_TRUNC_U,
    f: Optional[HyperbolicToralMap] = None,
) -> TriangularPair:
    """
    Build the triangular pair over f (the cat map by default).

    Raises:
        InvalidParameter: unless 0 < r < 1 and sup |phi| <= 1
    """
    if not 0 < r < 1:
        raise InvalidParameter(f"r must lie in (0, 1), got {r}")
    if phi.sup_bound > 1:
        raise InvalidParameter(f"sup |phi| must be at most 1, got bound {phi.sup_bound}")
    if n_trunc < 1 or n_trunc_u < 1:
        raise InvalidParameter("truncation orders must be positive")
    f = f or cat_map()
    mu = f.lam**r

    def matrix(x: TorusPoint) -> np.ndarray:
        return np.array([[mu, phi(x)], [0.0, 1.0]])

    a = closed_form_generator(matrix, 2, holder=HolderData(1.0, phi.lipschitz), name="triangular")
    b = constant_generator(np.diag([mu, 1.0]), name="diag")
    return TriangularPair(f=f, r=r, mu=mu, phi=phi, A=a, B=b, n_trunc=n_trunc, n_trunc_u=n_trunc_u)


def triangular_conjugacy_field(pair: TriangularPair) -> ConjugacyField:
    return closed_form_field(pair.conjugacy_matrix, name="triangular_c")


def sheared_family(
    r: float = 2.0, phi: TrigPolynomial = DEFAULT_PHI, f: Optional[HyperbolicToralMap] = None
) -> CocycleGenerator:
    """[[lambda^r, 0], [phi(x), 1]]; for r > 1 the cocycle is not fiber bunched."""
    f = f or cat_map()
    top = f.lam**r

    def matrix(x: TorusPoint) -> np.ndarray:
        return np.array([[top, 0.0], [phi(x), 1.0]])

    return closed_form_generator(matrix, 2, holder=HolderData(1.0, phi.lipschitz), name="sheared")


def rotation_conjugacy(amplitude: float = 0.3) -> Callable[[TorusPoint], np.ndarray]:
    """x -> rotation by amplitude * sin(2 pi x1)."""

    def matrix(x: TorusPoint) -> np.ndarray:
        angle = amplitude * math.sin(2 * math.pi * x.x1)
        cos, sin = math.cos(angle), math.sin(angle)
        return np.array([[cos, -sin], [sin, cos]])

    return matrix


def shear_conjugacy(amplitude: float = 0.2) -> Callable[[TorusPoint], np.ndarray]:
    """x -> [[1, amplitude * cos(2 pi x2)], [0, 1]]."""

    def matrix(x: TorusPoint) -> np.ndarray:
        return np.array([[1.0, amplitude * math.cos(2 * math.pi * x.x2)], [0.0, 1.0]])

    return matrix


def smooth_conjugate_pair(
    b: CocycleGenerator,
    c_spec: Callable[[TorusPoint], np.ndarray],
    f: HyperbolicToralMap,
    name: str = "smooth_pair",
) -> Tuple[CocycleGenerator, ConjugacyField]:
    """
    A(x) = C(fx) B(x) C(x)^-1 for a closed-form C.

    Raises:
        SingularConjugacy: if C is singular at a checked point
    """
    c = closed_form_field(c_spec, name=f"{name}_c")
    for p in torus_grid(8):
        c(p)

    def matrix(x: TorusPoint) -> np.ndarray:
        return c(apply(f, x, 1)).mat @ b(x).mat @ c(x).inv

    def evaluate(x: TorusPoint) -> Operator:
        try:
            return Operator.from_matrix(matrix(x))
        except SingularProduct as e:
            raise SingularConjugacy(f"conjugated generator is singular at {x.coords}") from e

    a = CocycleGenerator(dim=b.dim, func=evaluate, kind="closed_form", holder=None, name=name)
    return a, c


def _projective_gap(u: np.ndarray, v: np.ndarray) -> float:
    return abs(u[0] * v[1] - u[1] * v[0])


def _normalized(v: np.ndarray) -> np.ndarray:
    v = v / np.hypot(v[0], v[1])
    # sign convention: larger component positive
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v


@dataclass
class Splitting2D:
    """Invariant splitting R^2 = E_fast + E_slow of a perturbed constant cocycle."""

    b: CocycleGenerator
    f: HyperbolicToralMap
    tol: float = SPLITTING_TOL
    n_max: int = SPLITTING_N_MAX
    gap: float = 0.0

    def _iterate(self, x: TorusPoint, fast: bool) -> np.ndarray:
        # fast: B^n_{f^-n x} applied to a line; slow: (B^n_x)^-1 applied to a line
        orbit = backward_orbit(self.f, x, self.n_max) if fast else forward_orbit(self.f, x, self.n_max)
        points = orbit[1:] if fast else orbit[:-1]
        prod = np.eye(2)
        previous = _SEED_LINE
        calm = 0
        for n, p in enumerate(points, start=1):
            op = self.b(p)
            prod = prod @ (op.mat if fast else op.inv)
            prod = prod / np.max(np.abs(prod))
            line = _normalized(prod @ _SEED_LINE)
            calm = calm + 1 if _projective_gap(line, previous) < self.tol else 0
            if calm >= 2:
                logger.debug("splitting at %s converged after %d steps", x.coords, n)
                return line
            previous = line
        raise NoDominatedSplitting(
            f"projective iteration at {x.coords} did not settle within {self.n_max} steps"
        )

    def e_fast(self, x: TorusPoint) -> np.ndarray:
        return self._iterate(x, fast=True)

    def e_slow(self, x: TorusPoint) -> np.ndarray:
        return self._iterate(x, fast=False)

    def direction(self, x: TorusPoint, which: str) -> np.ndarray:
        if which not in ("fast", "slow"):
            raise InvalidParameter(f"bundle must be 'fast' or 'slow', got {which!r}")
        return self.e_fast(x) if which == "fast" else self.e_slow(x)

    def invariance_residual(self, grid: Sequence[TorusPoint]) -> float:
        """Largest |sin angle(B(x) E(x), E(fx))| over both bundles."""
        worst = 0.0
        for x in grid:
            fx = apply(self.f, x, 1)
            op = self.b(x)
            for which in ("fast", "slow"):
                image = _normalized(op.mat @ self.direction(x, which))
                worst = max(worst, _projective_gap(image, self.direction(fx, which)))
        return worst

    def measure_gap(self, grid: Sequence[TorusPoint]) -> float:
        """min over the grid of |B E_fast| / |B E_slow|."""
        ratios = []
        for x in grid:
            op = self.b(x)
            fast = np.linalg.norm(op.mat @ self.e_fast(x))
            slow = np.linalg.norm(op.mat @ self.e_slow(x))
            ratios.append(float(fast / slow))
        return min(ratios)


def perturbation_field(
    entries: Sequence[Sequence[TrigPolynomial]],
) -> Callable[[TorusPoint], np.ndarray]:
    """2x2 matrix field whose entries are trig polynomials."""

    def matrix(x: TorusPoint) -> np.ndarray:
        return np.array([[entry(x) for entry in row] for row in entries])

    return matrix


DEFAULT_PERTURBATION = perturbation_field(
    (
        (TrigPolynomial(), TrigPolynomial(((1, 0, 1.0, 0.0),))),
        (TrigPolynomial(((0, 1, 0.0, 1.0),)), TrigPolynomial()),
    )
)


def perturbed_constant(
    a0,
    p: Callable[[TorusPoint], np.ndarray] = DEFAULT_PERTURBATION,
    eps: float = 0.05,
    f: Optional[HyperbolicToralMap] = None,
    grid_n: int = 8,
) -> Tuple[CocycleGenerator, Splitting2D]:
    """
    B(x) = A0 + eps P(x) with its dominated splitting.

    Raises:
        InvalidParameter: unless A0 is 2x2 with eigenvalues of distinct modulus
        NoDominatedSplitting: if projective iteration does not settle on the grid
    """
    a0 = np.asarray(a0, dtype=float)
    if a0.shape != (2, 2):
        raise InvalidParameter(f"A0 must be 2x2, got shape {a0.shape}")
    moduli = sorted(abs(np.linalg.eigvals(a0)))
    if math.isclose(moduli[0], moduli[1], rel_tol=1e-9):
        raise InvalidParameter(f"A0 eigenvalue moduli must be distinct, got {moduli}")
    if eps < 0:
        raise InvalidParameter(f"eps must be non-negative, got {eps}")
    f = f or cat_map()

    def matrix(x: TorusPoint) -> np.ndarray:
        return a0 + eps * np.asarray(p(x), dtype=float)

    b = closed_form_generator(matrix, 2, name="perturbed_constant")
    split = Splitting2D(b=b, f=f)
    split.gap = split.measure_gap(torus_grid(grid_n))
    if split.gap <= 1:
        raise NoDominatedSplitting(f"measured gap {split.gap:.4f} does not exceed 1")
    logger.debug("perturbed constant eps=%g: gap %.4f", eps, split.gap)
    return b, split


def restricted_generator(b: CocycleGenerator, split: Splitting2D, which: str) -> CocycleGenerator:
    """The 1-dimensional cocycle x -> B(x)|E(x) written in the unit bases of E."""

    def matrix(x: TorusPoint) -> np.ndarray:
        image = b(x).mat @ split.direction(x, which)
        return np.array([[float(np.dot(image, split.direction(apply(split.f, x, 1), which)))]])

    return closed_form_generator(matrix, 1, name=f"{b.name}|{which}")


def splitting_holder(
    split: Splitting2D, pairs: Sequence[Tuple[TorusPoint, TorusPoint]], which: str = "fast"
) -> HolderFit:
    """Log-log fit of the projective distance between E(x) and E(y) against dist(x, y)."""
    scales, diffs = [], []
    for x, y in pairs:
        gap = _projective_gap(split.direction(x, which), split.direction(y, which))
        if gap >= DIFFERENCE_FLOOR:
            scales.append(torus_distance(x, y))
            diffs.append(gap)
    if not diffs:
        return HolderFit(beta_hat=math.inf, const_hat=0.0, n_pairs=0, degenerate=True)
    if len(set(scales)) < 2:
        raise DegenerateSample("too few usable pairs for the splitting fit")
    slope, intercept = loglog_fit(scales, diffs)
    return HolderFit(beta_hat=slope, const_hat=math.exp(intercept), n_pairs=len(diffs))


def unstable_holder_of_c(
    pair: TriangularPair,
    xs: Sequence[TorusPoint],
    t_min: float = 1e-6,
    t_max: float = 1e-1,
    n_t: int = 25,
    leg_type: str = UNSTABLE,
) -> HolderFit:
    """
    Median over base points of the slope of log|c(y) - c(x)| against log|t|.

    Raises:
        InvalidParameter: if the t range spans fewer than 3 decades inside [1e-6, 1e-1]
    """
    if not 1e-6 <= t_min < t_max <= 1e-1 or decades([t_min, t_max]) < 3.0:
        raise InvalidParameter(f"t range [{t_min}, {t_max}] must span 3 decades within [1e-6, 1e-1]")
    ts = np.geomspace(t_min, t_max, n_t)
    slopes, consts = [], []
    for x in xs:
        scales, diffs = [], []
        for t in ts:
            cx, cy = pair.c_along_leaf(x, leg_type, float(t))
            if abs(cy - cx) >= DIFFERENCE_FLOOR:
                scales.append(float(t))
                diffs.append(abs(cy - cx))
        if len(scales) >= 2:
            slope, intercept = loglog_fit(scales, diffs)
            slopes.append(slope)
            consts.append(math.exp(intercept))
    if not slopes:
        logger.warning("all conjugacy differences vanish along %s leaves", leg_type)
        return HolderFit(beta_hat=math.inf, const_hat=0.0, n_pairs=0, degenerate=True)
    return HolderFit(beta_hat=float(np.median(slopes)), const_hat=float(np.median(consts)), n_pairs=len(slopes))


FAMILY_PARAMS = {
    "triangular": ("r", "phi", "n_trunc", "n_trunc_u"),
    "smooth_pair": ("r", "conjugacy", "amplitude"),
    "perturbed_constant": ("a0", "eps", "perturbation", "grid_n"),
    "sheared": ("r", "phi"),
}

_CONJUGACY_SHAPES = {"rotation": (rotation_conjugacy, 0.3), "shear": (shear_conjugacy, 0.2)}


@dataclass
class FamilyBundle:
    """Objects a named family contributes to an experiment."""

    name: str
    a: CocycleGenerator
    b: Optional[CocycleGenerator] = None
    c: Optional[ConjugacyField] = None
    pair: Optional[TriangularPair] = None
    split: Optional[Splitting2D] = None


def _phi(params: dict) -> TrigPolynomial:
    terms = params.get("phi")
    return DEFAULT_PHI if terms is None else TrigPolynomial.from_list(terms)


def build_family(name: str, params: dict, f: HyperbolicToralMap) -> FamilyBundle:
    """
    Build a named example family from config parameters.

    Raises:
        InvalidParameter: for an unknown family, parameter or conjugacy shape
    """
    if name not in FAMILIES:
        raise InvalidParameter(f"family must be one of {FAMILIES}, got {name!r}")
    unknown = sorted(set(params) - set(FAMILY_PARAMS[name]))
    if unknown:
        raise InvalidParameter(f"unknown parameters for family {name}: {unknown}")

    if name == "triangular":
        pair = triangular_family(
            r=float(params.get("r", 0.5)),
            phi=_phi(params),
            n_trunc=int(params.get("n_trunc", DEFAULT_N_TRUNC)),
            n_trunc_u=int(params.get("n_trunc_u", DEFAULT_N_TRUNC_U)),
            f=f,
        )
        return FamilyBundle(name, pair.A, pair.B, triangular_conjugacy_field(pair), pair=pair)

    if name == "smooth_pair":
        r = float(params.get("r", 0.25))
        if not 0 < r < 1:
            raise InvalidParameter(f"r must lie in (0, 1), got {r}")
        shape = params.get("conjugacy", "rotation")
        if shape not in _CONJUGACY_SHAPES:
            raise InvalidParameter(f"conjugacy must be one of {sorted(_CONJUGACY_SHAPES)}, got {shape!r}")
        factory, amplitude = _CONJUGACY_SHAPES[shape]
        b = constant_generator(np.diag([f.lam**r, 1.0]), name="diag")
        a, c = smooth_conjugate_pair(b, factory(float(params.get("amplitude", amplitude))), f)
        return FamilyBundle(name, a, b, c)

    if name == "perturbed_constant":
        perturbation = DEFAULT_PERTURBATION
        if params.get("perturbation") is not None:
            perturbation = perturbation_field(
                [[TrigPolynomial.from_entry(e) for e in row] for row in params["perturbation"]]
            )
        b, split = perturbed_constant(
            params.get("a0", [[2.0, 0.0], [0.0, 0.5]]),
            perturbation,
            float(params.get("eps", 0.05)),
            f,
            grid_n=int(params.get("grid_n", 8)),
        )
        return FamilyBundle(name, b, split=split)

    return FamilyBundle(name, sheared_family(float(params.get("r", 2.0)), _phi(params), f))
