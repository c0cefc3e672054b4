"""
Exception and warning types shared by the numerics tools and the agents.
"""
from typing import List, Optional, Sequence, Tuple


class AcdfError(Exception):
    """Base class for every error raised by the estimation toolkit."""


class DomainError(AcdfError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedKindError(DomainError):
    """The requested kernel or estimator has no formula for this operation."""


class EstimationError(AcdfError):
    """A parametric fit could not be carried out (for example a degenerate sample)."""


class SelectionError(AcdfError):
    """A bandwidth could not be selected."""


class QuadratureError(AcdfError):
    """Numerical integration did not reach the requested tolerance."""

    def __init__(self, message: str, best_estimate: float = float("nan"), error_estimate: float = float("nan")):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate


class ConfigError(AcdfError):
    """Invalid simulation configuration."""


class PartialSummaryError(AcdfError):
    """Some (distribution, estimator, n) cells have no usable records."""

    def __init__(self, gaps: Sequence[Tuple[int, int, int]]):
        self.gaps: List[Tuple[int, int, int]] = list(gaps)
        preview = ", ".join(str(g) for g in self.gaps[:5])
        more = "" if len(self.gaps) <= 5 else f" (+{len(self.gaps) - 5} more)"
        super().__init__(f"Missing cells (dist, estimator, n): {preview}{more}")


class ReportError(AcdfError):
    """Writing or reading an output file failed."""

    def __init__(self, path: str, cause: Optional[BaseException] = None):
        self.path = path
        super().__init__(f"I/O failure on {path}: {cause}")


class NonUnimodalObjectiveWarning(UserWarning):
    """A bandwidth objective had more than one local minimum on the search grid."""


class QuadratureFallbackWarning(UserWarning):
    """The primary quadrature rule failed and the fallback rule was used."""
