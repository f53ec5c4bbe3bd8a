"""Loading and labeling of raw battery cycle series.

Two on-disk layouts are supported, both comma-separated text with a
header row, one file set per cell or battery, listed by a manifest:

* ``manifest.csv`` — columns ``sample_id,group``.
* series files ``<id>_charge.csv`` / ``<id>_discharge.csv`` — columns
  ``cycle,t_seconds,voltage``.
* capacity files ``<id>_capacity.csv`` — columns ``cycle,capacity_ah``.

The Toyota layout has one cell per manifest row with both phases plus a
capacity trace; the first ``max_cycles_used`` cycles are concatenated
into a single path per phase, each cycle's clock shifted to follow the
previous one so global time stays strictly increasing.  The NASA layout
has one battery per manifest row whose discharge file holds many cycles,
each treated as an independent sample; a cycle ends in failure when the
discharge completes before the truncation time, otherwise it is censored
there.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    EmptySampleError,
    EmptyTraceError,
    MalformedRowError,
    MissingFileError,
)

PHASE_CHARGE = "charge"
PHASE_DISCHARGE = "discharge"
CYCLE_GAP_S = 1.0


@dataclass(frozen=True)
class VoltagePath:
    """One phase's (time, voltage) trajectory for one sample."""

    sample_id: str
    phase: str
    points: np.ndarray  # (n, 2) of (t_seconds, volts)
    cycle_index: int = 0

    def __post_init__(self):
        if self.phase not in (PHASE_CHARGE, PHASE_DISCHARGE):
            raise ValueError(f"unknown phase {self.phase!r}")
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"{self.sample_id}: points must be (n, 2)")
        if pts.shape[0] < 2:
            raise ValueError(f"{self.sample_id}: needs at least two points")
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise ValueError(f"{self.sample_id}: time must be strictly increasing")
        if np.any(pts[:, 0] < 0):
            raise ValueError(f"{self.sample_id}: time must be non-negative")
        if not np.all(np.isfinite(pts)):
            raise ValueError(f"{self.sample_id}: non-finite values")
        object.__setattr__(self, "points", pts)

    @property
    def duration(self):
        return float(self.points[-1, 0] - self.points[0, 0])


@dataclass(frozen=True)
class CapacityTrace:
    """Per-cycle capacity readings for one sample."""

    sample_id: str
    per_cycle_capacity: tuple  # of (cycle:int, capacity_ah:float)

    def __post_init__(self):
        entries = tuple((int(c), float(cap)) for c, cap in self.per_cycle_capacity)
        if any(cap <= 0 or not np.isfinite(cap) for _, cap in entries):
            raise ValueError(f"{self.sample_id}: capacities must be positive and finite")
        object.__setattr__(self, "per_cycle_capacity", entries)

    @classmethod
    def from_capacities(cls, sample_id, capacities, start_cycle=0):
        return cls(sample_id, tuple(enumerate(capacities, start=start_cycle)))


@dataclass(frozen=True)
class RawDatasetConfig:
    """Format selector plus the cleaning and labeling thresholds."""

    format: str  # 'toyota' | 'nasa'
    failure_threshold_fraction: float = 0.8
    max_cycles_used: int = 50
    truncation_time_s: float | None = None

    def __post_init__(self):
        if self.format not in ("toyota", "nasa"):
            raise ValueError(f"unknown dataset format {self.format!r}")
        if not 0 < self.failure_threshold_fraction < 1:
            raise ValueError("failure_threshold_fraction must be in (0, 1)")


@dataclass
class LoadedSample:
    """One physical cell (Toyota) or one discharge cycle (NASA)."""

    sample_id: str
    group: str | None
    paths: dict = field(default_factory=dict)  # phase -> VoltagePath
    capacity: CapacityTrace | None = None


def _read_rows(path, n_cols):
    """Parse a comma-separated file with header into float tuples.

    Reports the 1-based file line of any malformed row.
    """
    if not os.path.exists(path):
        raise MissingFileError(path)
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if lineno == 1:
                continue  # header
            parts = line.split(",")
            if len(parts) != n_cols:
                raise MalformedRowError(path, lineno,
                                        f"expected {n_cols} columns, got {len(parts)}")
            try:
                rows.append(tuple(float(v) for v in parts))
            except ValueError:
                raise MalformedRowError(path, lineno,
                                        f"non-numeric value in {parts!r}") from None
    return rows


def _group_cycles(rows):
    """Split (cycle, t, v) rows into per-cycle point arrays, ascending cycle.

    Within a cycle points are stably sorted by time; duplicate timestamps
    keep the value appearing last in the file.
    """
    cycles = {}
    for cycle, t, v in rows:
        cycles.setdefault(int(cycle), []).append((t, v))
    out = []
    for cycle in sorted(cycles):
        pts = cycles[cycle]
        order = sorted(range(len(pts)), key=lambda i: pts[i][0])
        dedup = {}
        for i in order:
            dedup[pts[i][0]] = pts[i][1]  # later rows overwrite earlier ones
        arr = np.array(sorted(dedup.items()), dtype=np.float64)
        out.append((cycle, arr))
    return out


def _concatenate_cycles(cycles, max_cycles):
    """Join per-cycle point arrays into one globally monotone path."""
    parts = []
    offset = None
    for _, pts in cycles[:max_cycles]:
        if offset is None:
            parts.append(pts)
            offset = pts[-1, 0]
        else:
            shifted = pts.copy()
            shifted[:, 0] += offset + CYCLE_GAP_S - pts[0, 0]
            parts.append(shifted)
            offset = shifted[-1, 0]
    return np.vstack(parts)


def _read_capacity(path, sample_id):
    rows = _read_rows(path, 2)
    if not rows:
        raise EmptySampleError(f"{path}: no capacity rows")
    return CapacityTrace(sample_id, tuple((int(c), cap) for c, cap in rows))


def _read_manifest(root):
    path = os.path.join(root, "manifest.csv")
    if not os.path.exists(path):
        raise MissingFileError(path)
    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or lineno == 1:
                continue
            parts = line.split(",")
            if len(parts) < 1 or not parts[0]:
                raise MalformedRowError(path, lineno, "missing sample_id")
            entries.append((parts[0], parts[1] if len(parts) > 1 else None))
    if not entries:
        raise EmptySampleError(f"{path}: manifest lists no samples")
    return entries


def load_cycle_series(root_path, config):
    """Load every sample declared by the manifest under ``root_path``.

    Returns a list of :class:`LoadedSample`: one per cell for the Toyota
    format (charge and discharge phases concatenated over the first
    ``max_cycles_used`` cycles), one per discharge cycle for the NASA
    format.
    """
    if not os.path.isdir(root_path):
        raise MissingFileError(root_path)
    manifest = _read_manifest(root_path)
    samples = []
    if config.format == "toyota":
        for sample_id, group in manifest:
            paths = {}
            for phase in (PHASE_CHARGE, PHASE_DISCHARGE):
                fname = os.path.join(root_path, f"{sample_id}_{phase}.csv")
                rows = _read_rows(fname, 3)
                cycles = _group_cycles(rows)
                if not cycles:
                    raise EmptySampleError(f"{fname}: no data rows")
                pts = _concatenate_cycles(cycles, config.max_cycles_used)
                paths[phase] = VoltagePath(sample_id, phase, pts, cycle_index=0)
            capacity = _read_capacity(
                os.path.join(root_path, f"{sample_id}_capacity.csv"), sample_id
            )
            samples.append(LoadedSample(sample_id, group, paths, capacity))
    else:
        for battery_id, group in manifest:
            fname = os.path.join(root_path, f"{battery_id}_discharge.csv")
            rows = _read_rows(fname, 3)
            cycles = _group_cycles(rows)
            if not cycles:
                raise EmptySampleError(f"{fname}: no data rows")
            cap_file = os.path.join(root_path, f"{battery_id}_capacity.csv")
            cap_by_cycle = {}
            if os.path.exists(cap_file):
                trace = _read_capacity(cap_file, battery_id)
                cap_by_cycle = dict(trace.per_cycle_capacity)
            for cycle, pts in cycles:
                cid = f"{battery_id}_c{cycle:04d}"
                if pts.shape[0] < 2:
                    raise EmptySampleError(f"{fname}: cycle {cycle} has <2 points")
                path = VoltagePath(cid, PHASE_DISCHARGE, pts, cycle_index=cycle)
                capacity = None
                if cycle in cap_by_cycle:
                    capacity = CapacityTrace(cid, ((cycle, cap_by_cycle[cycle]),))
                samples.append(
                    LoadedSample(cid, group, {PHASE_DISCHARGE: path}, capacity)
                )
    return samples


def clean_nasa(paths, config):
    """Apply the NASA cleaning rules to a list of discharge paths.

    Paths whose first voltage is zero (|v| <= 1e-9) are removed; the rest
    are truncated to t <= ``truncation_time_s``.  Paths left with fewer
    than two points are dropped.  Input order is preserved and the
    operation is idempotent.
    """
    out = []
    for path in paths:
        if abs(path.points[0, 1]) <= 1e-9:
            continue
        pts = path.points
        if config.truncation_time_s is not None:
            pts = pts[pts[:, 0] <= config.truncation_time_s]
        if pts.shape[0] < 2:
            continue
        if pts.shape[0] == path.points.shape[0]:
            out.append(path)
        else:
            out.append(VoltagePath(path.sample_id, path.phase, pts,
                                   cycle_index=path.cycle_index))
    return out


def label_failure(trace, threshold_fraction):
    """Failure label from a capacity trace.

    The initial capacity is the earliest recorded cycle's.  Returns
    ``(tau, zeta)``: the first cycle whose capacity fell to
    ``threshold_fraction`` of initial (zeta=1), or the last observed
    cycle when the threshold was never crossed (zeta=0).
    """
    if not trace.per_cycle_capacity:
        raise EmptyTraceError(f"{trace.sample_id}: empty capacity trace")
    if not 0 < threshold_fraction < 1:
        raise ValueError("threshold_fraction must be in (0, 1)")
    entries = sorted(trace.per_cycle_capacity)
    threshold = threshold_fraction * entries[0][1]
    for cycle, capacity in entries:
        if capacity <= threshold:
            return cycle, 1
    return entries[-1][0], 0


def label_nasa_cycle(path, truncation_time_s):
    """Failure label for one raw (pre-cleaning) NASA discharge cycle.

    A cycle whose discharge completed before the truncation time failed
    (the battery's capacity is below the failure-equivalent threshold);
    one still discharging at the cutoff is censored there.
    """
    last_t = float(path.points[-1, 0])
    if last_t < truncation_time_s:
        return last_t, 1
    return float(truncation_time_s), 0


# --- writers (round-trip support and demo data) -----------------------------------

def write_manifest(root, entries):
    with open(os.path.join(root, "manifest.csv"), "w") as fh:
        fh.write("sample_id,group\n")
        for sample_id, group in entries:
            fh.write(f"{sample_id},{group if group is not None else ''}\n")


def write_series_file(path, rows):
    """Write (cycle, t_seconds, voltage) rows with full float precision."""
    with open(path, "w") as fh:
        fh.write("cycle,t_seconds,voltage\n")
        for cycle, t, v in rows:
            fh.write(f"{int(cycle)},{float(t)!r},{float(v)!r}\n")


def write_capacity_file(path, rows):
    with open(path, "w") as fh:
        fh.write("cycle,capacity_ah\n")
        for cycle, cap in rows:
            fh.write(f"{int(cycle)},{float(cap)!r}\n")


def path_to_rows(path):
    """Rows for :func:`write_series_file` reproducing this path exactly."""
    return [(path.cycle_index, t, v) for t, v in path.points]
