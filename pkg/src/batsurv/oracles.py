"""Independent brute-force twins of the fast implementations.

Everything here is deliberately naive: nested numerical integration for
signature entries, per-time-point loops for the Kaplan-Meier estimator,
and O(n^2) pair enumeration for the rank metrics.  None of it shares
code with the implementations it checks; the test suite and the CLI
``selftest`` subcommand compare the two routes.
"""

import itertools

import numpy as np


def refine_path(points, n_sub=400):
    """Piecewise-linear resampling with ``n_sub`` steps per segment."""
    pts = np.asarray(points, dtype=np.float64)
    chunks = []
    for seg in range(len(pts) - 1):
        frac = np.linspace(0.0, 1.0, n_sub + 1)
        if seg < len(pts) - 2:
            frac = frac[:-1]  # avoid duplicating interior junctions
        chunks.append(pts[seg] + frac[:, None] * (pts[seg + 1] - pts[seg]))
    return np.vstack(chunks)


def signature_entry_quadrature(points, word, n_sub=400):
    """One iterated integral by repeated cumulative trapezoid quadrature."""
    gamma = refine_path(points, n_sub)
    dgamma = np.diff(gamma, axis=0)
    f = np.ones(gamma.shape[0])
    for channel in word:
        steps = 0.5 * (f[:-1] + f[1:]) * dgamma[:, channel]
        f = np.concatenate([[0.0], np.cumsum(steps)])
    return float(f[-1])


def signature_by_quadrature(points, depth, n_sub=400, richardson=True):
    """Full truncated signature via quadrature, canonical entry order.

    With ``richardson`` set (default) each entry combines the trapezoid
    results at step h and h/2 as (4*I_fine - I_coarse)/3, cancelling the
    leading error term.
    """
    dim = np.asarray(points).shape[1]
    entries = []
    for level in range(1, depth + 1):
        for word in itertools.product(range(dim), repeat=level):
            coarse = signature_entry_quadrature(points, word, n_sub)
            if richardson:
                fine = signature_entry_quadrature(points, word, 2 * n_sub)
                entries.append((4.0 * fine - coarse) / 3.0)
            else:
                entries.append(coarse)
    return np.array(entries)


def naive_km_value(durations, events, t, left=False, flip=False):
    """Product-limit survival at ``t`` by an explicit per-time loop."""
    durations = np.asarray(durations, dtype=np.float64)
    marks = np.asarray(events, dtype=np.int64)
    if flip:
        marks = 1 - marks
    prod = 1.0
    for s in sorted(set(durations)):
        if (s >= t) if left else (s > t):
            break
        d = sum(1 for dur, m in zip(durations, marks) if dur == s and m == 1)
        n = sum(1 for dur in durations if dur >= s)
        if d > 0:
            prod *= 1.0 - d / n
    return prod


def naive_ipcw(durations, events, t, cap=100.0):
    g = naive_km_value(durations, events, t, left=True, flip=True)
    if g <= 0:
        return cap
    return min(1.0 / g, cap)


def naive_c_index(durations, events, curves):
    """Two-level concordance by explicit double loop."""
    n = len(durations)
    fractions = []
    for i in range(n):
        if events[i] != 1:
            continue
        credits = []
        for j in range(n):
            if durations[j] <= durations[i]:
                continue
            own = curves[i].evaluate(durations[i])
            other = curves[j].evaluate(durations[i])
            if own < other:
                credits.append(1.0)
            elif own == other:
                credits.append(0.5)
            else:
                credits.append(0.0)
        if credits:
            fractions.append(sum(credits) / len(credits))
    if not fractions:
        raise ValueError("no comparable pairs")
    return sum(fractions) / len(fractions)


def naive_t_auc(durations, events, curves, cut_points, average="event_density",
                cap=100.0):
    """IPCW cumulative/dynamic AUC by explicit pair enumeration."""
    durations = np.asarray(durations, dtype=np.float64)
    aucs = []
    valid = []
    for t in cut_points:
        cases = [i for i in range(len(durations))
                 if events[i] == 1 and durations[i] <= t]
        controls = [j for j in range(len(durations)) if durations[j] > t]
        if not cases or not controls:
            aucs.append(np.nan)
            valid.append(False)
            continue
        num = 0.0
        wsum = 0.0
        for i in cases:
            w = naive_ipcw(durations, events, durations[i], cap=cap)
            wsum += w
            vi = curves[i].evaluate(t)
            for j in controls:
                vj = curves[j].evaluate(t)
                if vi < vj:
                    num += w
                elif vi == vj:
                    num += 0.5 * w
        aucs.append(num / (wsum * len(controls)))
        valid.append(True)
    if not any(valid):
        raise ValueError("no valid grid time")
    if average == "uniform":
        weights = [1.0 if v else 0.0 for v in valid]
    else:
        surv = [naive_km_value(durations, events, t) for t in cut_points]
        surv = [1.0] + surv
        weights = [(surv[g] - surv[g + 1]) if valid[g] else 0.0
                   for g in range(len(cut_points))]
        if sum(weights) <= 0:
            weights = [1.0 if v else 0.0 for v in valid]
    total = sum(w for w in weights)
    acc = 0.0
    for a, w in zip(aucs, weights):
        if w > 0:
            acc += a * w
    return acc / total


def naive_ibs(durations, events, curves, cut_points, cap=100.0):
    """Censoring-weighted Brier score, trapezoid-averaged, by loops."""
    durations = np.asarray(durations, dtype=np.float64)
    n = len(durations)
    per_time = []
    for t in cut_points:
        w_t = naive_ipcw(durations, events, t, cap=cap)
        total = 0.0
        for i in range(n):
            v = curves[i].evaluate(t)
            if events[i] == 1 and durations[i] <= t:
                w_i = naive_ipcw(durations, events, durations[i], cap=cap)
                total += v * v * w_i
            elif durations[i] > t:
                total += (1.0 - v) * (1.0 - v) * w_t
        per_time.append(total / n)
    acc = 0.0
    for g in range(len(cut_points) - 1):
        acc += 0.5 * (per_time[g] + per_time[g + 1]) * (
            cut_points[g + 1] - cut_points[g]
        )
    return acc / (cut_points[-1] - cut_points[0])
