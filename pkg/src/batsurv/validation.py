"""Input validation helpers shared by the estimators and metric functions."""

import numpy as np

from .exceptions import ShapeMismatchError


def check_feature_matrix(X, n_features=None):
    """Coerce ``X`` to a finite 2-D float64 array.

    Raises ShapeMismatchError when the column count disagrees with
    ``n_features``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D feature matrix, got ndim={X.ndim}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite values")
    if n_features is not None and X.shape[1] != n_features:
        raise ShapeMismatchError(
            f"expected {n_features} features, got {X.shape[1]}"
        )
    return X


def check_survival_y(y):
    """Normalize a survival target into ``(durations, events)`` float/int arrays.

    Accepts either a structured array with fields ``('event', 'time')`` in
    either order (scikit-survival convention) or a plain (n, 2) array whose
    columns are ``(duration, event)``.
    """
    if hasattr(y, "dtype") and y.dtype.names:
        names = set(y.dtype.names)
        if not {"event", "time"} <= names:
            raise ValueError(f"structured y must have fields 'event' and 'time', got {y.dtype.names}")
        durations = np.asarray(y["time"], dtype=np.float64)
        events = np.asarray(y["event"]).astype(np.int64)
    else:
        arr = np.asarray(y, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("y must be structured ('event','time') or an (n, 2) array of (duration, event)")
        durations = arr[:, 0].copy()
        events = arr[:, 1].astype(np.int64)
    if durations.ndim != 1:
        raise ValueError("durations must be 1-D")
    if not np.all(np.isfinite(durations)) or np.any(durations <= 0):
        raise ValueError("durations must be finite and > 0")
    if not np.all((events == 0) | (events == 1)):
        raise ValueError("event indicators must be 0 or 1")
    return durations, events


def make_survival_y(durations, events):
    """Pack durations and event indicators into the structured-array target."""
    durations = np.asarray(durations, dtype=np.float64)
    events = np.asarray(events)
    if durations.shape != events.shape:
        raise ValueError("durations and events must have the same shape")
    y = np.empty(durations.shape[0], dtype=[("event", "?"), ("time", "<f8")])
    y["event"] = events.astype(bool)
    y["time"] = durations
    return y


def check_eval_times(times):
    """Coerce evaluation times to a strictly increasing 1-D float array."""
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("evaluation times must be a non-empty 1-D sequence")
    if np.any(np.diff(times) <= 0):
        raise ValueError("evaluation times must be strictly increasing")
    if not np.all(np.isfinite(times)):
        raise ValueError("evaluation times must be finite")
    return times
