"""Exception and warning types shared across the package."""

from __future__ import annotations


class MeshInsightError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class ParseError(MeshInsightError):
    """A document (JSON/CSV) is malformed or violates its schema.

    ``path`` points at the offending field, e.g. ``entries[3].latency.base_us``.
    """

    code = "parse_error"

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class GraphValidationError(MeshInsightError):
    """A call graph (or ensemble) violates a structural invariant."""

    code = "validation_error"

    def __init__(self, violations):
        self.violations = tuple(violations)
        details = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid call graph: {details}")


class InsufficientSamples(MeshInsightError):
    """Too few measurement samples to fit a profile."""

    code = "insufficient_samples"


class DegenerateFit(InsufficientSamples):
    """All samples share one message size, so no slope can be fitted."""

    code = "degenerate_fit"


class ZeroRate(MeshInsightError):
    """A CPU sample has request rate 0; per-message CPU is undefined."""

    code = "zero_rate"


class MismatchedSampleGrid(MeshInsightError):
    """Filter subtraction requires identical (size, rate) grids on both sides."""

    code = "mismatched_sample_grid"


class MissingProfile(MeshInsightError):
    """The profile DB has no entry for a (component, proxy mode) pair."""

    code = "missing_profile"

    def __init__(self, component: str, mode: str):
        self.component = component
        self.mode = mode
        super().__init__(f"no profile for component {component!r} in {mode} mode")


class UnknownPlatform(MeshInsightError):
    """A service references a platform id with no loaded profile DB."""

    code = "unknown_platform"

    def __init__(self, platform_id: str):
        self.platform_id = platform_id
        super().__init__(f"no profile database for platform {platform_id!r}")


class UnknownComponent(MeshInsightError):
    """A speedup edit targets a (component, mode) absent from the DB."""

    code = "unknown_component"


class EmptyTrace(MeshInsightError):
    """A trace file contains no RPC rows."""

    code = "empty_trace"


class TooLarge(MeshInsightError):
    """Input exceeds a brute-force oracle's safe size bound."""

    code = "too_large"


class ModelWarning(UserWarning):
    """Base class for model-quality warnings emitted during fitting/ingestion."""


class ClampedCoefficientWarning(ModelWarning):
    """A fitted coefficient was negative and clamped to 0."""


class RateProportionalityWarning(ModelWarning):
    """Per-message CPU varies with request rate beyond the accepted spread."""


class DuplicateSampleWarning(ModelWarning):
    """Repeated (component, mode, size, rate) rows were averaged."""


class AmbiguousNestingWarning(ModelWarning):
    """Multiple trace rows qualify as parent of an invocation."""
