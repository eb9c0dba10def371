"""Pattern-based diagnosis of failed computations with recommendations."""

import re
from dataclasses import dataclass
from typing import List, Optional

from .errors import error_name


@dataclass
class Finding:
    level: str  # "error" or "warning"
    title: str
    detail: str
    recommendation: str


# (compiled_regex, level, title, detail, recommendation)
_PATTERNS = [
    # Holonomies
    (
        re.compile(r"\bDiverged\b"),
        "error",
        "Holonomy product diverged",
        "The partial products kept growing, so the standard holonomy does not exist along this leaf.",
        "Run check-bunching on the same config; a worst product above 1 explains the divergence.",
    ),
    (
        re.compile(r"did not converge|holonomy stalled", re.I),
        "warning",
        "Holonomy not converged",
        "A holonomy stopped at n_max or at a precision floor above the requested tolerance.",
        "Raise run.n_max or loosen run.tol (--tol).",
    ),
    (
        re.compile(r"\bNotBunched\b"),
        "error",
        "Cocycle is not fiber bunched",
        "theta >= 1, so no Hölder exponent for the holonomies can be derived.",
        "Lower run.beta or use a generator with smaller distortion |A||A^-1|.",
    ),
    # Cycles and conjugacies
    (
        re.compile(r"\bCycleObstruction\b"),
        "error",
        "Cycle weights are not trivial",
        "Some su-cycle weight at x0 differs from the identity, so no constant cocycle is cohomologous via these holonomies.",
        "Inspect cycle-weights for the defect per cycle.",
    ),
    (
        re.compile(r"\bPremiseViolated\b"),
        "error",
        "Conjugacy equation fails at the base point",
        "The supplied base value does not conjugate A(x0) to B(x0) along the path to f(x0).",
        "Check conjugacy.base_value and conjugacy.base_point.",
    ),
    (
        re.compile(r"\bNotACycle\b"),
        "error",
        "Path is not closed",
        "The su-path does not return to its start point.",
        "Build cycles with seeded_cycles or close the path explicitly.",
    ),
    (
        re.compile(r"\bNoPathWithinBound\b"),
        "error",
        "No su-path within the leg bound",
        "Every lift solution needs a leg longer than run.max_leg.",
        "Raise run.max_leg.",
    ),
    (
        re.compile(r"\bSingularConjugacy\b"),
        "error",
        "Conjugacy is singular",
        "The conjugacy formula is not invertible at some point.",
        "Check the conjugacy entries; det C(x) must not vanish.",
    ),
    # Linear algebra and base map
    (
        re.compile(r"\bSingularProduct\b"),
        "error",
        "Singular operator",
        "A generator value or product failed the invertibility tolerance.",
        "Check the generator entries; the smallest singular value must exceed 1e-12 times the largest.",
    ),
    (
        re.compile(r"\b(LinAlgError|FloatingPointError)\b"),
        "error",
        "Numerical failure",
        "A matrix product became singular or overflowed during the computation.",
        "Lower run.n_max or check the generator for near-singular values.",
    ),
    (
        re.compile(r"\bNoDominatedSplitting\b"),
        "error",
        "No dominated splitting",
        "Projective iteration did not settle, usually because eps is too large.",
        "Lower cocycle.params.eps.",
    ),
    (
        re.compile(r"\b(NotHyperbolic|NotUnimodular)\b"),
        "error",
        "Base map is not a hyperbolic automorphism",
        "The integer matrix must have |det| = 1 and no eigenvalue of modulus 1.",
        "Use a matrix such as [[2, 1], [1, 1]].",
    ),
    (
        re.compile(r"\bDimensionMismatch\b"),
        "error",
        "Dimension mismatch",
        "Operators of different dimensions were combined.",
        "Make every generator and conjugacy entry the same size.",
    ),
    # Samples
    (
        re.compile(r"\bDegenerateSample\b|fit is degenerate", re.I),
        "warning",
        "Degenerate regression sample",
        "Too few nonzero differences to fit a Hölder exponent.",
        "For a constant generator this is expected; otherwise widen the sample range.",
    ),
    (
        re.compile(r"\b(InvalidParameter|InvalidTheta)\b"),
        "error",
        "Invalid parameter",
        "A numeric argument is outside its allowed range.",
        "Compare the run section against the README table of parameters.",
    ),
]


def analyze_lines(lines: List[str]) -> List[Finding]:
    """Scan message lines for known failure patterns. Returns deduplicated findings."""
    findings: List[Finding] = []
    seen: set = set()

    for line in lines:
        for pattern, level, title, detail, recommendation in _PATTERNS:
            if title in seen:
                continue
            if pattern.search(line):
                findings.append(Finding(level=level, title=title, detail=detail, recommendation=recommendation))
                seen.add(title)

    return findings


def explain_error(exc: BaseException) -> Optional[Finding]:
    """First finding for an exception, matched on its error name and message."""
    findings = analyze_lines([f"{error_name(exc)}: {exc}"])
    return findings[0] if findings else None
