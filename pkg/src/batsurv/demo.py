"""Deterministic demo datasets in the on-disk formats ``ingest`` reads.

The generated cells have heterogeneous degradation rates that show up in
both the voltage-curve shapes and the failure times, so the full
pipeline (signatures, model fitting, evaluation, sweeps) is exercisable
without the original measurement campaigns.
"""

import os

import numpy as np

from .ingest import write_capacity_file, write_manifest, write_series_file


def write_demo_toyota(root, n_cells=24, n_cycles=50, seed=7):
    """Toyota-layout demo: per-cell charge/discharge series and capacity.

    Cells in groups G2/G3 are cycling-limited (censored); the rest run
    until the capacity threshold.  Returns the manifest entries.
    """
    os.makedirs(root, exist_ok=True)
    rng = np.random.default_rng(seed)
    groups = ["G1", "G2", "G3", "G4"]
    entries = []
    for c in range(n_cells):
        cell_id = f"cell{c:03d}"
        group = groups[c % 4]
        rate = float(rng.uniform(0.05, 0.45))
        fail_cycle = int(60 + 400 * (0.5 - rate) ** 2 + rng.uniform(0, 40))
        limit = 120 if group in ("G2", "G3") else 10_000
        last_cycle = min(fail_cycle + 5, limit)
        capacities = []
        for cycle in range(1, last_cycle + 1):
            frac = 1.0 - 0.25 * (cycle / fail_cycle) ** 1.4
            capacities.append((cycle, max(1.1 * frac, 0.3)))
        write_capacity_file(os.path.join(root, f"{cell_id}_capacity.csv"), capacities)

        discharge_rows, charge_rows = [], []
        for cycle in range(1, n_cycles + 1):
            span = 900.0 * (1.0 - 0.001 * rate * cycle)
            ts = np.linspace(0.0, span, 12)
            shape = 1.0 + 0.8 * rate + 0.002 * cycle * rate
            v_dis = 3.3 - 1.3 * (ts / span) ** shape
            v_chg = 2.0 + 1.6 * (ts / span) ** (1.0 / shape)
            discharge_rows += [(cycle, t, v) for t, v in zip(ts, v_dis)]
            charge_rows += [(cycle, t, v) for t, v in zip(ts, v_chg)]
        write_series_file(os.path.join(root, f"{cell_id}_discharge.csv"),
                          discharge_rows)
        write_series_file(os.path.join(root, f"{cell_id}_charge.csv"), charge_rows)
        entries.append((cell_id, group))
    write_manifest(root, entries)
    return entries


def write_demo_nasa(root, n_batteries=3, n_cycles=60, seed=11,
                    truncation_time_s=2520.0):
    """NASA-layout demo: one discharge file per battery, many cycles.

    Capacity fades per cycle; discharge duration shrinks with it, so late
    cycles finish before the truncation time (observed failures) while
    early cycles are censored there.  One all-zero-start glitch cycle per
    battery exercises the cleaning rule.
    """
    os.makedirs(root, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for b in range(n_batteries):
        battery_id = f"B{b:04d}"
        fade = float(rng.uniform(0.25, 0.45))
        rows = []
        capacities = []
        for cycle in range(1, n_cycles + 1):
            cap = 2.0 * (1.0 - fade * (cycle / n_cycles) ** 1.2)
            capacities.append((cycle, max(cap, 0.5)))
            duration = 1800.0 * cap  # 2 A constant current
            ts = np.arange(0.0, duration + 1e-9, 60.0)
            if ts[-1] < duration:
                ts = np.append(ts, duration)
            curve = 4.2 - 1.5 * (ts / duration) ** (1.0 + 0.5 * cap)
            rows += [(cycle, t, v) for t, v in zip(ts, curve)]
        if n_cycles >= 10:
            # glitch cycle: starts at zero volts, removed by cleaning
            glitch = n_cycles + 1
            ts = np.arange(0.0, 600.0 + 1e-9, 60.0)
            rows += [(glitch, t, 0.0 if t == 0.0 else 3.0) for t in ts]
            capacities.append((glitch, 1.0))
        write_series_file(os.path.join(root, f"{battery_id}_discharge.csv"), rows)
        write_capacity_file(os.path.join(root, f"{battery_id}_capacity.csv"),
                            capacities)
        entries.append((battery_id, battery_id))
    write_manifest(root, entries)
    return entries
