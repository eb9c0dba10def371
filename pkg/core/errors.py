"""
Typed errors raised by the cocycle lab.
Each class carries a machine-readable code used in reports.
"""

from typing import List, Optional, Sequence


class LabError(Exception):
    """Base class for every computation error of the lab."""

    code = "LabError"


class NotHyperbolic(LabError):
    code = "NotHyperbolic"


class NotUnimodular(LabError):
    code = "NotUnimodular"


class NoPathWithinBound(LabError):
    code = "NoPathWithinBound"


class InvalidTheta(LabError):
    code = "InvalidTheta"


class InvalidParameter(LabError, ValueError):
    code = "InvalidParameter"


class DimensionMismatch(LabError):
    code = "DimensionMismatch"


class SingularProduct(LabError):
    code = "SingularProduct"


class DegenerateSample(LabError):
    code = "DegenerateSample"


class Diverged(LabError):
    """Raised when a holonomy limit keeps growing instead of settling."""

    code = "Diverged"

    def __init__(
        self,
        message: str,
        n_used: int = 0,
        residuals: Sequence[float] = (),
        leg_index: Optional[int] = None,
    ):
        super().__init__(message)
        self.n_used = n_used
        self.residuals = list(residuals)
        self.leg_index = leg_index

    def at_leg(self, leg_index: int) -> "Diverged":
        """Return a copy tagged with the index of the offending path leg."""
        return Diverged(
            f"leg {leg_index}: {self}", self.n_used, self.residuals, leg_index=leg_index
        )


class NotBunched(LabError):
    code = "NotBunched"


class NotACycle(LabError):
    code = "NotACycle"


class PremiseViolated(LabError):
    code = "PremiseViolated"

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class CycleObstruction(LabError):
    code = "CycleObstruction"

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


class SingularConjugacy(LabError):
    code = "SingularConjugacy"


class NoDominatedSplitting(LabError):
    code = "NoDominatedSplitting"


class ConfigError(LabError):
    """Configuration could not be loaded or failed validation."""

    code = "ConfigError"

    def __init__(self, message: str, issues: Optional[List[object]] = None):
        super().__init__(message)
        self.issues = list(issues or [])


def error_name(exc: BaseException) -> str:
    """Machine-readable name of an exception for reports."""
    if isinstance(exc, LabError):
        return exc.code
    return type(exc).__name__
