"""Exception hierarchy for the obsmatch package."""


class ObsmatchError(Exception):
    """Base class for all package errors."""


class DivergedOrbitError(ObsmatchError):
    """An orbit left the admissible region or produced non-finite values."""

    def __init__(self, message, state=None, index=None):
        super().__init__(message)
        self.state = state
        self.index = index


class BasinConfigError(ObsmatchError):
    """Too many initial draws escaped; the configured basin box is wrong."""


class EvaluationError(ObsmatchError):
    """An observable produced a non-finite or undefined value."""


class BreakpointError(ObsmatchError):
    """Derivative requested exactly at a branch boundary."""

    def __init__(self, message, breakpoint=None):
        super().__init__(message)
        self.breakpoint = breakpoint


class CatalogError(ObsmatchError, KeyError):
    """Unknown observable name."""


class DataQualityError(ObsmatchError):
    """Evaluation-error rate along a series exceeded the tolerated fraction."""


class InsufficientTailError(ObsmatchError):
    """Not enough samples (or exceedances) to resolve the requested tail."""


class DegenerateSampleError(ObsmatchError):
    """Sample has zero variance; no spread-parameter fit is possible."""


class FitFailureError(ObsmatchError):
    """Iterative fit did not converge; carries the iteration trace."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)


class ModelError(ObsmatchError):
    """An interval model violates the hypotheses it is declared under."""


class UnsupportedOrderError(ObsmatchError):
    """Moment order q at which the requested quantity is undefined."""


class InfiniteIndexError(ObsmatchError):
    """theta = 1 makes the hyperbolicity index diverge (all p-terms vanished)."""


class ConfigError(ObsmatchError):
    """Experiment configuration failed validation; message carries field paths."""
