"""Censored time-to-failure records and the estimators built on them.

Holds the dataset container used throughout the pipeline, stratified
splitting, risk sets, equidistant time grids, the Kaplan-Meier
product-limit estimator (for both the event and the censoring
distribution), inverse-probability-of-censoring weights, a seeded
synthetic-data generator, and a delimited-text snapshot format.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateDurationsError,
    TooFewRecordsError,
)
from .validation import check_feature_matrix

IPCW_CAP = 100.0


@dataclass(frozen=True)
class SurvivalRecord:
    """One sample: feature vector, observed duration, event indicator."""

    x: np.ndarray
    tau: float
    zeta: int
    sample_id: str

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError(f"{self.sample_id}: non-finite features")
        if not self.tau > 0:
            raise ValueError(f"{self.sample_id}: tau must be > 0, got {self.tau}")
        if self.zeta not in (0, 1):
            raise ValueError(f"{self.sample_id}: zeta must be 0 or 1")
        object.__setattr__(self, "x", x)


@dataclass
class SurvivalDataset:
    """A list of records sharing one feature dimension and duration unit."""

    records: list
    duration_unit: str = "cycles"
    group_labels: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.records:
            raise ValueError("dataset needs at least one record")
        dims = {r.x.shape[0] for r in self.records}
        if len(dims) != 1:
            raise ValueError(f"records disagree on feature dimension: {sorted(dims)}")

    def __len__(self):
        return len(self.records)

    @property
    def feature_dim(self):
        return self.records[0].x.shape[0]

    @property
    def X(self):
        return np.vstack([r.x for r in self.records])

    @property
    def durations(self):
        return np.array([r.tau for r in self.records], dtype=np.float64)

    @property
    def events(self):
        return np.array([r.zeta for r in self.records], dtype=np.int64)

    @property
    def sample_ids(self):
        return [r.sample_id for r in self.records]

    def subset(self, indices):
        return SurvivalDataset(
            records=[self.records[i] for i in indices],
            duration_unit=self.duration_unit,
            group_labels={
                r.sample_id: self.group_labels[r.sample_id]
                for i in indices
                for r in (self.records[i],)
                if r.sample_id in self.group_labels
            },
        )

    @classmethod
    def from_arrays(cls, X, durations, events, sample_ids=None,
                    duration_unit="cycles", group_labels=None):
        X = check_feature_matrix(X)
        durations = np.asarray(durations, dtype=np.float64)
        events = np.asarray(events, dtype=np.int64)
        n = X.shape[0]
        if sample_ids is None:
            sample_ids = [f"s{i:04d}" for i in range(n)]
        records = [
            SurvivalRecord(X[i], float(durations[i]), int(events[i]), sample_ids[i])
            for i in range(n)
        ]
        return cls(records=records, duration_unit=duration_unit,
                   group_labels=dict(group_labels or {}))


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing cut points t_1 < ... < t_K."""

    cut_points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.cut_points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two cut points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("cut points must be strictly increasing")
        object.__setattr__(self, "cut_points", pts)

    def __len__(self):
        return self.cut_points.size


def make_grid(dataset_or_durations, n_points):
    """Equidistant grid from min to max duration, inclusive.

    Raises DegenerateDurationsError when all durations coincide.
    """
    if n_points < 2:
        raise ValueError("grid needs at least two points")
    durations = getattr(dataset_or_durations, "durations", dataset_or_durations)
    durations = np.asarray(durations, dtype=np.float64)
    lo, hi = durations.min(), durations.max()
    if not hi > lo:
        raise DegenerateDurationsError(f"all durations equal {lo}")
    return TimeGrid(np.linspace(lo, hi, n_points))


def risk_set(dataset_or_durations, t):
    """Indices of records still at risk at time ``t`` (tau_j >= t)."""
    durations = getattr(dataset_or_durations, "durations", dataset_or_durations)
    durations = np.asarray(durations, dtype=np.float64)
    return np.nonzero(durations >= t)[0]


@dataclass(frozen=True)
class KmCurve:
    """Right-continuous product-limit step curve.

    ``event_times`` are the distinct times where the curve drops and
    ``survival`` the value at (and after) each drop.  The curve is 1
    before the first drop.
    """

    event_times: np.ndarray
    survival: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.event_times, dtype=np.float64)
        surv = np.asarray(self.survival, dtype=np.float64)
        if times.shape != surv.shape:
            raise ValueError("event_times and survival must align")
        if times.size and np.any(np.diff(times) <= 0):
            raise ValueError("event times must be strictly increasing")
        if np.any(surv < -1e-12) or np.any(surv > 1 + 1e-12):
            raise ValueError("survival values must lie in [0, 1]")
        if times.size and np.any(np.diff(surv) > 1e-12):
            raise ValueError("survival must be non-increasing")
        object.__setattr__(self, "event_times", times)
        object.__setattr__(self, "survival", surv)

    def evaluate(self, t):
        """Survival at time ``t`` (right-continuous lookup)."""
        return self._lookup(t, side="right")

    def left_limit(self, t):
        """Survival just before ``t`` (left limit)."""
        return self._lookup(t, side="left")

    def _lookup(self, t, side):
        t = np.asarray(t, dtype=np.float64)
        if self.event_times.size == 0:
            vals = np.ones_like(t)
            return vals if vals.ndim else 1.0
        idx = np.searchsorted(self.event_times, t, side=side) - 1
        vals = np.where(idx < 0, 1.0, self.survival[np.maximum(idx, 0)])
        return vals if vals.ndim else float(vals)


def km_estimate(dataset, censoring_distribution=False):
    """Kaplan-Meier product-limit curve of the event distribution.

    With ``censoring_distribution`` set, events and censorings swap roles
    and the result estimates the censoring survival function used for
    IPCW.  At each distinct time the curve is multiplied by (1 - d/n)
    where d counts the occurrences of interest at that time and n the
    records still at risk.
    """
    durations = dataset.durations
    events = dataset.events
    if censoring_distribution:
        events = 1 - events
    order = np.argsort(durations, kind="stable")
    durations = durations[order]
    events = events[order]
    n = durations.size
    times, counts, survival = [], [], []
    prod = 1.0
    i = 0
    while i < n:
        t = durations[i]
        j = i
        d = 0
        while j < n and durations[j] == t:
            d += int(events[j])
            j += 1
        if d > 0:
            at_risk = n - i
            prod *= 1.0 - d / at_risk
            times.append(t)
            survival.append(prod)
        i = j
    return KmCurve(np.array(times), np.array(survival))


def ipcw_weight(km_censor, t, cap=IPCW_CAP):
    """Inverse-probability-of-censoring weight 1 / KM_censor(t-).

    Uses the left limit of the censoring curve and clamps the weight at
    ``cap`` so heavily censored tails cannot blow up a metric.
    """
    denom = km_censor.left_limit(t)
    denom = np.asarray(denom, dtype=np.float64)
    with np.errstate(divide="ignore"):
        w = np.where(denom > 0, 1.0 / np.maximum(denom, 1e-300), np.inf)
    w = np.minimum(w, cap)
    return w if w.ndim else float(w)


def split(dataset, fractions, seed):
    """Deterministic (train, val, test) split stratified on the event flag.

    ``fractions`` must be positive and sum to 1.  Within each stratum the
    records are shuffled with the seeded generator and dealt out by
    largest-remainder quotas, so the event proportion of every split stays
    within one sample of the global proportion.  Raises
    TooFewRecordsError when a stratum has fewer records than splits.
    """
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.size != 3 or np.any(fractions <= 0):
        raise ValueError("need three positive fractions")
    if abs(fractions.sum() - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions.sum()}")
    rng = np.random.default_rng(seed)
    events = dataset.events
    assignments = [[] for _ in range(3)]
    for flag in (1, 0):
        stratum = np.nonzero(events == flag)[0]
        if stratum.size == 0:
            continue
        if stratum.size < 3:
            raise TooFewRecordsError(
                f"stratum zeta={flag} has {stratum.size} records, cannot populate 3 splits"
            )
        shuffled = rng.permutation(stratum)
        counts = _largest_remainder(fractions, stratum.size)
        start = 0
        for k, c in enumerate(counts):
            assignments[k].extend(shuffled[start:start + c].tolist())
            start += c
    parts = []
    for idx in assignments:
        idx = sorted(idx)
        parts.append(dataset.subset(idx))
    return tuple(parts)


def _largest_remainder(fractions, total):
    """Integer quotas summing to ``total``, each at least 1."""
    quotas = fractions * total
    counts = np.floor(quotas).astype(int)
    remainders = quotas - counts
    for k in np.argsort(-remainders, kind="stable")[: total - counts.sum()]:
        counts[k] += 1
    # every split must receive something; borrow from the largest
    while np.any(counts == 0):
        counts[np.argmax(counts)] -= 1
        counts[np.argmin(counts)] += 1
    return counts


def subsample_fraction(dataset, fraction, seed):
    """Seeded subsample keeping ``fraction`` of the records, stratified on zeta.

    Raises TooFewRecordsError when the result would contain no events.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    if fraction == 1.0:
        return dataset
    rng = np.random.default_rng(seed)
    events = dataset.events
    keep = []
    for flag in (1, 0):
        stratum = np.nonzero(events == flag)[0]
        if stratum.size == 0:
            continue
        k = int(round(fraction * stratum.size))
        keep.extend(rng.permutation(stratum)[:k].tolist())
    keep = sorted(keep)
    if not keep or not any(events[i] == 1 for i in keep):
        raise TooFewRecordsError(f"fraction {fraction} leaves no events")
    return dataset.subset(keep)


def generate_synthetic(n, feature_dim, true_beta, censor_rate, seed):
    """Synthetic proportional-hazards dataset for tests and demos.

    Features are standard normal; event times are exponential with hazard
    exp(beta . x); censoring times are independent exponentials whose rate
    is calibrated by bisection so the expected censored fraction matches
    ``censor_rate``.  Fully deterministic for a fixed seed.
    """
    if not 0 <= censor_rate < 1:
        raise ValueError("censor_rate must be in [0, 1)")
    beta = np.asarray(true_beta, dtype=np.float64)
    if beta.shape != (feature_dim,):
        raise ValueError(f"true_beta must have shape ({feature_dim},)")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, feature_dim))
    hazard = np.exp(X @ beta)
    T = rng.exponential(1.0 / hazard)
    if censor_rate == 0.0:
        durations, events = T, np.ones(n, dtype=np.int64)
    else:
        # P(censored | x) = c / (c + hazard); solve the mean for c
        lo, hi = 1e-12, 1e12
        for _ in range(200):
            mid = np.sqrt(lo * hi)
            if np.mean(mid / (mid + hazard)) < censor_rate:
                lo = mid
            else:
                hi = mid
        c_rate = np.sqrt(lo * hi)
        C = rng.exponential(1.0 / c_rate, size=n)
        durations = np.minimum(T, C)
        events = (T <= C).astype(np.int64)
    ids = [f"syn-{i:05d}" for i in range(n)]
    return SurvivalDataset.from_arrays(
        X, durations, events, sample_ids=ids, duration_unit="time"
    )


# --- snapshot serialization ---------------------------------------------------

def write_snapshot(dataset, path, depth=None):
    """Write the dataset as delimited text with a metadata header."""
    lines = [f"# duration_unit={dataset.duration_unit}",
             f"# feature_dim={dataset.feature_dim}"]
    if depth is not None:
        lines.append(f"# depth={depth}")
    cols = ["sample_id", "tau", "zeta"] + [
        f"x_{i + 1}" for i in range(dataset.feature_dim)
    ]
    lines.append(",".join(cols))
    for r in dataset.records:
        vals = [r.sample_id, repr(float(r.tau)), str(int(r.zeta))]
        vals += [repr(float(v)) for v in r.x]
        lines.append(",".join(vals))
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def read_snapshot(path):
    """Read a dataset snapshot written by :func:`write_snapshot`."""
    if hasattr(path, "read"):
        fh = io.StringIO(path.read())
    else:
        fh = open(path)
    try:
        meta = {}
        header = None
        rows = []
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(line.split(","))
    finally:
        fh.close()
    if header is None or not rows:
        raise ValueError("snapshot contains no records")
    dim = len(header) - 3
    X = np.array([[float(v) for v in row[3:]] for row in rows])
    durations = np.array([float(row[1]) for row in rows])
    events = np.array([int(row[2]) for row in rows])
    ids = [row[0] for row in rows]
    if dim != X.shape[1]:
        raise ValueError("header and rows disagree on feature count")
    return SurvivalDataset.from_arrays(
        X, durations, events, sample_ids=ids,
        duration_unit=meta.get("duration_unit", "cycles"),
    )
