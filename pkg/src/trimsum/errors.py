"""Exception taxonomy shared by all trimsum modules.

Every raisable condition maps to one class so the CLI can translate
failures into its exit-code contract (1 usage/config, 3 numerical).
"""


class TrimsumError(Exception):
    """Base class for all package errors."""


class DomainError(TrimsumError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ConfigError(TrimsumError, ValueError):
    """Unknown model id, malformed configuration, or unknown config keys."""


class NumericalError(TrimsumError, RuntimeError):
    """A numerical routine failed to reach its tolerance.

    Carries the achieved error estimate when available.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class DegenerateScaleError(TrimsumError):
    """Winsorizing window has zero width or a plug-in variance is not positive."""


class ScheduleError(TrimsumError):
    """Trimming schedule infeasible for the requested sample size."""


class TrimError(TrimsumError):
    """Trim counts violate 0 <= k < n - m <= n for a concrete sample."""


class ConditionError(TrimsumError):
    """A density vanishes (or is undefined) at a trimming quantile."""


class UnsupportedRegionError(TrimsumError):
    """Evaluation requested where the model is not defined (log-Pareto mid-range)."""


class TooSmallNError(TrimsumError):
    """A probability window escapes (0,1); n is too small for the construction."""


class InversionError(TrimsumError):
    """Expansion inversion found no sign change on the bracket."""


class EmptyBatchError(TrimsumError):
    """A batch summary was requested for zero replications."""


class IngestionError(TrimsumError):
    """A data file contains non-numeric rows; carries the offending line numbers."""

    def __init__(self, message, lines=()):
        super().__init__(message)
        self.lines = tuple(lines)


class SimulationError(TrimsumError):
    """Too many flagged replications; the simulation aborted."""
