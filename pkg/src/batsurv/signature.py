"""Truncated path signatures of time-augmented voltage trajectories.

A trajectory is viewed as a piecewise-linear path in R^d (here d=2:
normalized time and voltage).  Its depth-k truncated signature is the
vector of iterated integrals up to order k, laid out level by level with
lexicographic multi-index order inside each level.  For a single linear
segment the signature is the tensor exponential of the increment; segments
are combined with Chen's identity, so the result is exact for
piecewise-linear paths rather than a cumulative-sum approximation.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import DegeneratePathError, DepthTooLargeError

DEFAULT_FEATURE_CAP = 10_000


def signature_dim(depth, dim=2):
    """Length of a depth-``depth`` signature of a ``dim``-dimensional path.

    Equals sum_{j=1..depth} dim**j; for dim=2 this is 2**(depth+1) - 2.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return sum(dim ** j for j in range(1, depth + 1))


def augment_time(path):
    """Turn a voltage path into a 2-D array of (normalized time, voltage).

    ``path`` is either an object with a ``points`` attribute (sequence of
    (t, v) pairs) or an (n, 2) array-like of (t, v) rows.  Time is affinely
    rescaled to [0, 1] over the path's span; voltage is left untouched.

    Raises DegeneratePathError when fewer than two points are given or the
    time span is zero.
    """
    pts = getattr(path, "points", path)
    arr = np.asarray(pts, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("expected (n, 2) points of (t, v)")
    if arr.shape[0] < 2:
        raise DegeneratePathError("path needs at least two points")
    t = arr[:, 0]
    span = t[-1] - t[0]
    if span <= 0:
        raise DegeneratePathError("path has zero time span")
    out = arr.copy()
    out[:, 0] = (t - t[0]) / span
    return out


def _tensor_exp(delta, depth):
    """Signature levels of a single linear segment with increment ``delta``.

    Level j is delta^{tensor j} / j!, returned flattened (length d**j).
    """
    levels = []
    cur = np.asarray(delta, dtype=np.float64)
    levels.append(cur)
    for j in range(2, depth + 1):
        cur = np.outer(cur, delta).ravel() / j
        levels.append(cur)
    return levels


def chen_product(a_levels, b_levels, depth):
    """Combine two signatures with Chen's identity, truncated at ``depth``.

    Inputs and output are lists of flattened level arrays (level j has
    d**j entries); the implicit level-0 scalar is 1.
    """
    out = []
    for j in range(1, depth + 1):
        acc = a_levels[j - 1] + b_levels[j - 1]
        for split in range(1, j):
            acc = acc + np.outer(a_levels[split - 1], b_levels[j - split - 1]).ravel()
        out.append(acc)
    return out


def _signature_levels(points, depth):
    increments = np.diff(points, axis=0)
    levels = _tensor_exp(increments[0], depth)
    for delta in increments[1:]:
        levels = chen_product(levels, _tensor_exp(delta, depth), depth)
    return levels


def signature(points, depth, feature_cap=DEFAULT_FEATURE_CAP):
    """Depth-``depth`` truncated signature of a piecewise-linear path.

    ``points`` is an (n, d) array with n >= 2.  Returns a flat float64
    vector of length ``signature_dim(depth, d)``, levels concatenated in
    order, each level in lexicographic multi-index order.

    Raises DepthTooLargeError when the output would exceed ``feature_cap``
    entries, DegeneratePathError for paths with fewer than two points.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("expected an (n, d) array of points")
    if pts.shape[0] < 2:
        raise DegeneratePathError("path needs at least two points")
    dim = pts.shape[1]
    total = signature_dim(depth, dim)
    if total > feature_cap:
        raise DepthTooLargeError(
            f"signature would have {total} entries, above the cap of {feature_cap}"
        )
    return np.concatenate(_signature_levels(pts, depth))


def featurize(charge=None, discharge=None, depth=3, phase=None,
              feature_cap=DEFAULT_FEATURE_CAP):
    """Signature feature vector for one sample from its augmented path(s).

    Exactly one phase is used: pass ``phase`` ('charge' or 'discharge') to
    select it, or leave it None when only one path is supplied.  The result
    has length 2**(depth+1) - 2.
    """
    paths = {"charge": charge, "discharge": discharge}
    if phase is None:
        present = [name for name, p in paths.items() if p is not None]
        if len(present) != 1:
            raise ValueError(
                "pass exactly one path, or set phase= to pick between the two"
            )
        phase = present[0]
    if phase not in paths:
        raise ValueError(f"unknown phase {phase!r}")
    selected = paths[phase]
    if selected is None:
        raise ValueError(f"no {phase} path supplied")
    return signature(selected, depth, feature_cap=feature_cap)


class SignatureFeaturizer(BaseEstimator, TransformerMixin):
    """Transformer mapping raw (t, v) trajectories to signature features.

    Each input sample is a path accepted by :func:`augment_time` (an
    (n, 2) array of (t, v) or an object with ``.points``).  ``transform``
    time-normalizes each path and computes its depth-``depth`` signature,
    giving a feature matrix of width 2**(depth+1) - 2.  Stateless apart
    from parameter checks, so ``fit`` only records the output width;
    standardization is left to a downstream scaler fitted on the training
    split.
    """

    def __init__(self, depth=3, feature_cap=DEFAULT_FEATURE_CAP):
        self.depth = depth
        self.feature_cap = feature_cap

    def fit(self, X, y=None):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        self.n_features_out_ = signature_dim(self.depth, 2)
        if self.n_features_out_ > self.feature_cap:
            raise DepthTooLargeError(
                f"depth {self.depth} gives {self.n_features_out_} features, above the cap"
            )
        return self

    def transform(self, X):
        if not hasattr(self, "n_features_out_"):
            self.fit(X)
        rows = [signature(augment_time(p), self.depth, self.feature_cap) for p in X]
        if not rows:
            return np.empty((0, self.n_features_out_))
        return np.vstack(rows)
