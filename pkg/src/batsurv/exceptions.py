"""Exception types raised across the package."""

from sklearn.exceptions import NotFittedError


class BatsurvError(Exception):
    """Base class for all batsurv errors."""


# --- data loading -----------------------------------------------------------

class MissingFileError(BatsurvError, FileNotFoundError):
    """A required input file does not exist."""


class MalformedRowError(BatsurvError, ValueError):
    """A delimited-text row could not be parsed.

    Carries the offending file and 1-based row number.
    """

    def __init__(self, path, row, message):
        self.path = path
        self.row = row
        super().__init__(f"{path}:{row}: {message}")


class EmptySampleError(BatsurvError, ValueError):
    """A declared cell or cycle contains no usable data."""


class EmptyTraceError(BatsurvError, ValueError):
    """A capacity trace has no entries."""


# --- feature extraction -----------------------------------------------------

class DegeneratePathError(BatsurvError, ValueError):
    """Path has no usable time span (fewer than two points or zero span)."""


class DepthTooLargeError(BatsurvError, ValueError):
    """Requested signature depth would exceed the feature-size cap."""


# --- survival data ----------------------------------------------------------

class TooFewRecordsError(BatsurvError, ValueError):
    """Not enough records to satisfy a split or subsample request."""


class DegenerateDurationsError(BatsurvError, ValueError):
    """All durations identical; no grid can be built."""


# --- model fitting ----------------------------------------------------------

class NoEventsError(BatsurvError, ValueError):
    """Dataset contains no uncensored records."""


class NonConvergenceError(BatsurvError, RuntimeError):
    """Iterative optimization failed to reach its tolerance."""


class NonFiniteLossError(BatsurvError, FloatingPointError):
    """A training loss evaluated to NaN or infinity."""


class ShapeMismatchError(BatsurvError, ValueError):
    """Input array shape is inconsistent with the model or network."""


class GridMismatchError(BatsurvError, ValueError):
    """Time grid does not cover the training durations."""


class UnfittedModelError(BatsurvError, NotFittedError):
    """Prediction was requested from a model that has not been fitted."""


# --- metrics ----------------------------------------------------------------

class NoComparablePairsError(BatsurvError, ValueError):
    """No (event, later-survivor) pairs exist; rank metrics undefined."""


class DegenerateTimeError(BatsurvError, ValueError):
    """No evaluation time had both cases and controls."""


# --- cli --------------------------------------------------------------------

class ConfigError(BatsurvError, ValueError):
    """Experiment configuration is invalid."""
