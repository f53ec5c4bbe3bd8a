"""Censoring-aware evaluation: time-dependent AUC, C-Index, integrated Brier.

All three metrics consume per-record survival curves rather than scalar
risk scores: the rank metrics compare predicted failure-free
probabilities at specific times, and the Brier score integrates squared
probability errors.  Censoring is corrected with inverse probability of
censoring weights 1/KM_censor(t-), clamped so vanishing censoring
survival cannot dominate (clamp occurrences are reported in the notes).
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateDurationsError,
    DegenerateTimeError,
    NoComparablePairsError,
)
from .survdata import IPCW_CAP, TimeGrid, ipcw_weight, km_estimate


@dataclass
class MetricsReport:
    """Evaluation summary for one model on one dataset split."""

    t_auc: float
    c_index: float
    ibs: float
    eval_grid: TimeGrid
    n_test: int
    notes: list = field(default_factory=list)

    def as_text(self, **context):
        lines = [f"{k}: {v}" for k, v in context.items()]
        lines += [
            f"t_auc: {self.t_auc:.6f}",
            f"c_index: {self.c_index:.6f}",
            f"ibs: {self.ibs:.6f}",
            f"n_test: {self.n_test}",
        ]
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"


def c_index(test, curves):
    """Concordance: mean over events of the per-event concordant fraction.

    For every event i, each record j with T_i < T_j is checked for
    Pr(T_i | x_i) < Pr(T_i | x_j); prediction ties credit 0.5.  Events
    with no later record are excluded from the outer mean.  Raises
    NoComparablePairsError when nothing is comparable.
    """
    durations = test.durations
    events = test.events
    n = len(durations)
    if len(curves) != n:
        raise ValueError("need one curve per record")
    # values[r, i] = predicted survival of record r at time T_i
    values = np.vstack([c.evaluate(durations) for c in curves])
    fractions = []
    for i in np.nonzero(events == 1)[0]:
        later = durations > durations[i]
        if not later.any():
            continue
        own = values[i, i]
        others = values[later, i]
        credit = np.where(others > own, 1.0, np.where(others == own, 0.5, 0.0))
        fractions.append(credit.mean())
    if not fractions:
        raise NoComparablePairsError("no (event, later-survivor) pairs in the data")
    return float(np.mean(fractions))


def t_auc(test, curves, grid, km_censor, average="event_density",
          ipcw_cap=IPCW_CAP, notes=None):
    """IPCW cumulative/dynamic AUC averaged over the evaluation grid.

    At each grid time t, cases are events with T_i <= t (weighted by
    1/KM_censor(T_i-)) and controls are records with T_j > t; the AUC is
    the weighted fraction of (case, control) pairs whose case has the
    lower predicted survival at t (ties credit 0.5).  Grid times lacking
    cases or controls are skipped; the grid average is weighted by the
    Kaplan-Meier event mass per interval (``average='event_density'``) or
    uniformly (``average='uniform'``).
    """
    if average not in ("event_density", "uniform"):
        raise ValueError(f"unknown averaging mode {average!r}")
    durations = test.durations
    events = test.events
    cuts = grid.cut_points if isinstance(grid, TimeGrid) else np.asarray(grid)
    values = np.vstack([c.evaluate(cuts) for c in curves])
    case_weights = np.array(
        [ipcw_weight(km_censor, t, cap=ipcw_cap) for t in durations]
    )
    n_clamped = int(np.sum(case_weights >= ipcw_cap))
    aucs = np.full(len(cuts), np.nan)
    for g, t in enumerate(cuts):
        is_case = (events == 1) & (durations <= t)
        is_control = durations > t
        if not is_case.any() or not is_control.any():
            continue
        v_case = values[is_case, g]
        v_ctrl = values[is_control, g]
        w = case_weights[is_case]
        credit = np.where(
            v_case[:, None] < v_ctrl[None, :],
            1.0,
            np.where(v_case[:, None] == v_ctrl[None, :], 0.5, 0.0),
        )
        aucs[g] = float((w @ credit).sum() / (w.sum() * v_ctrl.size))
    valid = np.isfinite(aucs)
    if not valid.any():
        raise DegenerateTimeError("no grid time had both cases and controls")
    if average == "uniform":
        weights = valid.astype(float)
    else:
        km_event = km_estimate(test)
        surv = np.concatenate([[1.0], km_event.evaluate(cuts)])
        weights = (surv[:-1] - surv[1:]) * valid
        if weights.sum() <= 0:
            weights = valid.astype(float)
    if notes is not None:
        if n_clamped:
            notes.append(f"t_auc: {n_clamped} IPCW weights clamped at {ipcw_cap}")
        skipped = int((~valid).sum())
        if skipped:
            notes.append(f"t_auc: {skipped} grid times skipped (no cases or controls)")
    return float(np.nansum(aucs * weights) / weights.sum())


def ibs(test, curves, grid, km_censor, ipcw_cap=IPCW_CAP, notes=None):
    """Integrated Brier score: censoring-weighted squared error over time.

    At time t, a record failed by t (event) contributes its squared
    predicted survival weighted by 1/KM_censor(T_i-); a record still under
    observation contributes the squared complement weighted by
    1/KM_censor(t-); records censored by t contribute nothing.  The
    per-time means are trapezoid-averaged over the grid and normalized by
    its span.
    """
    durations = test.durations
    events = test.events
    n = len(durations)
    cuts = grid.cut_points if isinstance(grid, TimeGrid) else np.asarray(grid)
    if len(cuts) < 2:
        raise DegenerateTimeError("IBS needs at least two grid times")
    values = np.vstack([c.evaluate(cuts) for c in curves])
    w_event = np.array([ipcw_weight(km_censor, t, cap=ipcw_cap) for t in durations])
    n_clamped = int(np.sum(w_event >= ipcw_cap))
    scores = np.empty(len(cuts))
    for g, t in enumerate(cuts):
        failed = (events == 1) & (durations <= t)
        alive = durations > t
        w_t = ipcw_weight(km_censor, t, cap=ipcw_cap)
        if w_t >= ipcw_cap:
            n_clamped += 1
        contrib = np.zeros(n)
        contrib[failed] = values[failed, g] ** 2 * w_event[failed]
        contrib[alive] = (1.0 - values[alive, g]) ** 2 * w_t
        scores[g] = contrib.mean()
    span = cuts[-1] - cuts[0]
    if span <= 0:
        raise DegenerateTimeError("grid span is zero")
    if notes is not None and n_clamped:
        notes.append(f"ibs: {n_clamped} IPCW weights clamped at {ipcw_cap}")
    return float(np.trapezoid(scores, cuts) / span)


def default_eval_grid(test, n_points=50, lower_pct=5.0, upper_pct=95.0):
    """Equidistant grid between duration percentiles of the test split.

    Extreme tails are excluded because the censoring survival estimate
    approaches zero there and IPCW weights lose meaning.
    """
    durations = test.durations
    lo = float(np.percentile(durations, lower_pct))
    hi = float(np.percentile(durations, upper_pct))
    if hi <= lo:
        lo, hi = float(durations.min()), float(durations.max())
    if hi <= lo:
        raise DegenerateDurationsError("all test durations identical")
    return TimeGrid(np.linspace(lo, hi, n_points))


def evaluate_model(model, test, n_grid=50, average="event_density",
                   ipcw_cap=IPCW_CAP):
    """Fit-free evaluation: compute all three metrics for one model.

    Curves are sampled at the union of the evaluation grid and the test
    durations so every metric reads exact sampled values.
    """
    grid = default_eval_grid(test, n_points=n_grid)
    km_censor = km_estimate(test, censoring_distribution=True)
    sample_times = np.unique(np.concatenate([grid.cut_points, test.durations]))
    curves = model.predict_survival_curves(test.X, sample_times)
    notes = []
    auc = t_auc(test, curves, grid, km_censor, average=average,
                ipcw_cap=ipcw_cap, notes=notes)
    ci = c_index(test, curves)
    brier = ibs(test, curves, grid, km_censor, ipcw_cap=ipcw_cap, notes=notes)
    return MetricsReport(
        t_auc=auc, c_index=ci, ibs=brier, eval_grid=grid,
        n_test=len(test), notes=notes,
    )
