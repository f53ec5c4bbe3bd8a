import numpy as np
import pytest

from batsurv.exceptions import DegenerateTimeError, NoComparablePairsError
from batsurv.metrics import c_index, default_eval_grid, evaluate_model, ibs, t_auc
from batsurv.models import SurvivalCurve
from batsurv.oracles import naive_c_index, naive_ibs, naive_t_auc
from batsurv.survdata import SurvivalDataset, TimeGrid, km_estimate
from conftest import random_monotone_curves


def dataset_from(durations, events):
    n = len(durations)
    return SurvivalDataset.from_arrays(np.zeros((n, 1)), durations, events)


def proportional_curves(times, risks):
    """One exponential-decay curve per risk value (higher risk dies faster)."""
    times = np.asarray(times, dtype=float)
    return [SurvivalCurve(times, np.exp(-r * times)) for r in risks]


def censored_fixture(rng, n):
    durations = rng.uniform(1.0, 10.0, size=n).round(1) + 0.5
    events = (rng.random(n) < 0.6).astype(int)
    events[int(rng.integers(0, n))] = 1
    data = dataset_from(durations, events)
    mesh = np.unique(np.concatenate([durations, np.linspace(0.5, 11.0, 12)]))
    curves = random_monotone_curves(rng, mesh, n)
    grid = TimeGrid(np.linspace(durations.min() + 0.01, durations.max() - 0.01, 7))
    return data, curves, grid


# --- C-Index --------------------------------------------------------------------


def test_c_index_perfect_ordering():
    durations = np.array([1.0, 2.0, 3.0])
    data = dataset_from(durations, [1, 1, 1])
    curves = proportional_curves(durations, [3.0, 2.0, 1.0])
    assert c_index(data, curves) == 1.0


def test_c_index_reversed_ordering():
    durations = np.array([1.0, 2.0, 3.0])
    data = dataset_from(durations, [1, 1, 1])
    curves = proportional_curves(durations, [1.0, 2.0, 3.0])
    assert c_index(data, curves) == 0.0


def test_c_index_ties_get_half_credit():
    durations = np.array([1.0, 2.0])
    data = dataset_from(durations, [1, 1])
    curves = proportional_curves(durations, [1.0, 1.0])
    assert c_index(data, curves) == 0.5


def test_c_index_matches_brute_force(rng):
    for _ in range(10):
        n = int(rng.integers(5, 60))
        data, curves, _ = censored_fixture(rng, n)
        try:
            fast = c_index(data, curves)
        except NoComparablePairsError:
            continue
        slow = naive_c_index(data.durations, data.events, curves)
        assert fast == pytest.approx(slow, abs=1e-12)


def test_c_index_no_comparable_pairs():
    data = dataset_from([5.0, 5.0], [1, 1])  # tied times: no later survivor
    curves = proportional_curves([5.0], [1.0, 2.0])
    with pytest.raises(NoComparablePairsError):
        c_index(data, curves)


# --- T-AUC ----------------------------------------------------------------------


def test_t_auc_perfect_separation():
    durations = np.array([1.0, 2.0, 8.0, 9.0])
    data = dataset_from(durations, [1, 1, 0, 0])
    km_c = km_estimate(data, censoring_distribution=True)
    grid = TimeGrid(np.array([3.0, 5.0, 7.0]))
    curves = proportional_curves(np.linspace(0.5, 9.0, 10), [4.0, 3.0, 0.1, 0.05])
    assert t_auc(data, curves, grid, km_c) == 1.0


def test_t_auc_uninformative_predictor_is_half():
    durations = np.array([1.0, 2.0, 8.0, 9.0])
    data = dataset_from(durations, [1, 1, 1, 1])
    km_c = km_estimate(data, censoring_distribution=True)
    grid = TimeGrid(np.array([3.0, 5.0]))
    curves = proportional_curves(np.linspace(0.5, 9.0, 10), [1.0, 1.0, 1.0, 1.0])
    assert t_auc(data, curves, grid, km_c) == 0.5


@pytest.mark.parametrize("average", ["event_density", "uniform"])
def test_t_auc_matches_brute_force(rng, average):
    for _ in range(8):
        n = int(rng.integers(6, 50))
        data, curves, grid = censored_fixture(rng, n)
        km_c = km_estimate(data, censoring_distribution=True)
        try:
            fast = t_auc(data, curves, grid, km_c, average=average)
        except DegenerateTimeError:
            continue
        slow = naive_t_auc(data.durations, data.events, curves,
                           grid.cut_points, average=average)
        assert fast == pytest.approx(slow, abs=1e-12)


def test_t_auc_degenerate_grid():
    data = dataset_from([5.0, 6.0], [1, 1])
    km_c = km_estimate(data, censoring_distribution=True)
    curves = proportional_curves([5.0, 6.0], [1.0, 2.0])
    with pytest.raises(DegenerateTimeError):
        t_auc(data, curves, TimeGrid(np.array([20.0, 30.0])), km_c)


# --- IBS ------------------------------------------------------------------------


def test_ibs_oracle_predictor_zero_error():
    durations = np.array([2.0, 4.0, 6.0, 8.0])
    data = dataset_from(durations, [1, 1, 1, 1])
    km_c = km_estimate(data, censoring_distribution=True)
    times = np.linspace(0.0, 9.0, 200)
    curves = [SurvivalCurve(times, (times < t).astype(float)) for t in durations]
    grid = TimeGrid(np.linspace(2.0, 8.0, 9))
    # grid points must avoid the jump locations for exactness
    grid = TimeGrid(np.array([2.5, 3.5, 5.5, 7.5]))
    assert ibs(data, curves, grid, km_c) == 0.0


def test_ibs_constant_half_predictor():
    durations = np.array([2.0, 4.0, 6.0, 8.0])
    data = dataset_from(durations, [1, 1, 1, 1])
    km_c = km_estimate(data, censoring_distribution=True)
    times = np.linspace(0.0, 9.0, 5)
    curves = [SurvivalCurve(times, np.full(5, 0.5)) for _ in durations]
    grid = TimeGrid(np.array([2.5, 4.5, 7.5]))
    assert ibs(data, curves, grid, km_c) == pytest.approx(0.25, abs=1e-15)


def test_ibs_matches_brute_force(rng):
    for _ in range(8):
        n = int(rng.integers(6, 50))
        data, curves, grid = censored_fixture(rng, n)
        km_c = km_estimate(data, censoring_distribution=True)
        fast = ibs(data, curves, grid, km_c)
        slow = naive_ibs(data.durations, data.events, curves, grid.cut_points)
        assert fast == pytest.approx(slow, abs=1e-12)


def test_ibs_no_censoring_equals_plain_brier(rng):
    n = 20
    durations = rng.uniform(1, 10, size=n)
    data = dataset_from(durations, np.ones(n, dtype=int))
    km_c = km_estimate(data, censoring_distribution=True)
    mesh = np.linspace(0.5, 10.5, 30)
    curves = random_monotone_curves(rng, mesh, n)
    grid = TimeGrid(np.linspace(durations.min(), durations.max() - 0.01, 10))
    fast = ibs(data, curves, grid, km_c)

    # censoring-unaware reference: mean squared error of 1{T_i > t}
    def plain_brier(t):
        errs = [(float(c.evaluate(t)) - (1.0 if ti > t else 0.0)) ** 2
                for c, ti in zip(curves, durations)]
        return float(np.mean(errs))

    per_time = np.array([plain_brier(t) for t in grid.cut_points])
    ref = np.trapezoid(per_time, grid.cut_points) / (
        grid.cut_points[-1] - grid.cut_points[0]
    )
    assert fast == pytest.approx(ref, abs=1e-12)


# --- rank invariance ---------------------------------------------------------------


def test_rank_metrics_invariant_to_order_preserving_transform(rng):
    data, curves, grid = censored_fixture(rng, 30)
    km_c = km_estimate(data, censoring_distribution=True)
    transformed = [
        SurvivalCurve(c.times, c.probabilities ** 2) for c in curves
    ]  # strictly increasing map on [0, 1]: order and ties preserved
    assert c_index(data, curves) == c_index(data, transformed)
    assert t_auc(data, curves, grid, km_c) == t_auc(data, transformed, grid, km_c)


# --- report plumbing ---------------------------------------------------------------


def test_default_eval_grid_percentiles():
    durations = np.linspace(10.0, 110.0, 101)
    data = dataset_from(durations, np.ones(101, dtype=int))
    grid = default_eval_grid(data, n_points=50)
    assert len(grid) == 50
    assert grid.cut_points[0] == pytest.approx(np.percentile(durations, 5))
    assert grid.cut_points[-1] == pytest.approx(np.percentile(durations, 95))


def test_evaluate_model_report_fields():
    from batsurv.models import CoxRegression
    from batsurv.survdata import generate_synthetic
    from batsurv.validation import make_survival_y

    data = generate_synthetic(120, 3, np.array([1.0, 0.0, -0.5]), 0.3, seed=8)
    model = CoxRegression(ridge=1e-3).fit(
        data.X, make_survival_y(data.durations, data.events)
    )
    report = evaluate_model(model, data, n_grid=25)
    assert 0.0 <= report.t_auc <= 1.0
    assert 0.0 <= report.c_index <= 1.0
    assert report.ibs >= 0.0
    assert report.n_test == 120
    text = report.as_text(model="cox", phase="discharge", seed=10)
    assert "c_index:" in text and "model: cox" in text
