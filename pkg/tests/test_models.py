import itertools

import numpy as np
import pytest
from scipy.stats import kendalltau

from batsurv.exceptions import (
    GridMismatchError,
    NoEventsError,
    UnfittedModelError,
)
from batsurv.models import (
    CoxRegression,
    CoxTime,
    DeepHit,
    Mtlr,
    NeuralCoxPH,
    SurvivalCurve,
    _grouped_partial_loss,
    cox_partial_loss,
    deephit_loss,
    deephit_survival_from_pmf,
    integrated_risk,
    load_model,
    mtlr_loss,
    save_model,
)
from batsurv.nncore import grad_check
from batsurv.survdata import SurvivalDataset, TimeGrid, generate_synthetic, split
from batsurv.validation import make_survival_y
from conftest import make_ph_data, quantile_grid


def as_y(ds):
    return make_survival_y(ds.durations, ds.events)


# --- linear Cox -----------------------------------------------------------------


def test_linear_cox_zero_features_gives_zero_beta():
    X = np.zeros((6, 2))
    y = make_survival_y([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], [1, 1, 0, 1, 0, 1])
    model = CoxRegression(ridge=0.5).fit(X, y)
    assert np.array_equal(model.coef_, np.zeros(2))


def test_linear_cox_two_record_fixture_matches_1d_solve():
    # penalized 1-D objective: beta - log(1 + exp(beta)) - 0.1 beta^2,
    # maximized by a fine grid scan as the independent route
    X = np.array([[1.0], [0.0]])
    y = make_survival_y([1.0, 2.0], [1, 1])
    model = CoxRegression(ridge=0.1).fit(X, y)
    grid = np.linspace(-5, 5, 2_000_001)
    objective = grid - np.logaddexp(0.0, grid) - 0.1 * grid ** 2
    best = grid[np.argmax(objective)]
    assert model.coef_[0] > 0
    assert model.coef_[0] == pytest.approx(best, abs=1e-5)


def test_linear_cox_recovers_ordering():
    data = generate_synthetic(800, 2, np.array([2.0, 0.0]), 0.2, seed=11)
    model = CoxRegression(ridge=1e-4).fit(data.X, as_y(data))
    assert model.coef_[0] > model.coef_[1] + 1.0


def test_linear_cox_requires_events():
    X = np.ones((4, 1))
    y = make_survival_y([1.0, 2.0, 3.0, 4.0], [0, 0, 0, 0])
    with pytest.raises(NoEventsError):
        CoxRegression().fit(X, y)


def test_linear_cox_hazard_ratio_constant():
    data = generate_synthetic(300, 3, np.array([1.0, -0.5, 0.2]), 0.25, seed=4)
    model = CoxRegression(ridge=1e-4).fit(data.X, as_y(data))
    times = np.linspace(model.baseline_times_[0], model.baseline_times_[-1], 50)
    x1, x2 = data.X[0], data.X[1]
    H = model.predict_cumulative_hazard(np.vstack([x1, x2]), times)
    ratios = H[0] / H[1]
    expected = np.exp(model.coef_ @ (x1 - x2))
    assert np.all(np.abs(ratios / expected - 1.0) < 1e-9)


def test_linear_cox_null_covariates_identical_curves():
    X = np.zeros((8, 2))
    y = make_survival_y(np.arange(1.0, 9.0), np.ones(8, dtype=int))
    model = CoxRegression(ridge=0.1).fit(X, y)
    times = np.linspace(0.5, 8.0, 12)
    surv = model.predict_survival(np.array([[5.0, -3.0], [0.0, 0.0]]), times)
    # beta is 0, so covariates cannot matter
    assert np.array_equal(surv[0], surv[1])
    h0 = model.predict_cumulative_hazard(np.zeros((1, 2)), times)[0]
    assert np.allclose(surv[1], np.exp(-h0), atol=0, rtol=0)


# --- partial-likelihood losses -----------------------------------------------------


def test_constant_scores_loss_is_log_risk_set_size():
    durations = np.array([1.0, 2.0, 3.0, 4.0])
    events = np.array([1, 1, 0, 1])
    loss, _ = cox_partial_loss(np.zeros(4), durations, events)
    sizes = [4, 3, 1]  # risk sets of the events at t=1, 2, 4
    assert loss == pytest.approx(np.mean(np.log(sizes)), abs=1e-14)


def test_grouped_loss_self_only_risk_set_contributes_zero():
    scores = np.array([0.7])
    loss, dscores = _grouped_partial_loss(scores, np.array([0, 1]), np.array([0]))
    assert loss == 0.0
    assert np.allclose(dscores, [0.0], atol=1e-15)


def test_neural_coxph_linear_matches_linear_cox_ordering():
    data = make_ph_data(250, [1.5, -1.0, 0.5], seed=21)
    y = as_y(data)
    linear = CoxRegression(ridge=1e-4).fit(data.X, y)
    net_model = NeuralCoxPH(hidden_layers=(), batch_norm=False,
                            dropout_rate=0.0, learning_rate=0.02,
                            max_epochs=200, patience=200, seed=0)
    net_model.fit(data.X, y)
    tau = kendalltau(linear.predict_log_risk(data.X),
                     net_model.predict_log_risk(data.X)).statistic
    assert tau >= 0.95


def test_coxtime_ignores_time_matches_coxph_ordering():
    data = make_ph_data(150, [1.5, -1.0], seed=22)
    train, val, test = split(data, (0.7, 0.15, 0.15), seed=1)
    common = dict(hidden_layers=(16,), batch_norm=False, dropout_rate=0.0,
                  learning_rate=0.01, max_epochs=60, patience=60, seed=0)
    ph = NeuralCoxPH(**common).fit(train.X, as_y(train), X_val=val.X,
                                   y_val=as_y(val))
    ct = CoxTime(**common).fit(train.X, as_y(train), X_val=val.X,
                               y_val=as_y(val))
    horizon = float(np.quantile(train.durations, 0.9))
    r1 = ph.predict_risk(test.X, horizon)
    r2 = ct.predict_risk(test.X, horizon)
    assert kendalltau(r1, r2).statistic >= 0.9


# --- DeepHit --------------------------------------------------------------------


def test_deephit_pmf_normalized():
    data = make_ph_data(60, [1.0, -1.0], seed=30)
    grid = quantile_grid(data.durations, 8)
    model = DeepHit(hidden_layers=(8,), max_epochs=5, seed=0)
    model.fit(data.X, as_y(data), time_grid=grid)
    pmf = model.predict_pmf(data.X)
    assert pmf.shape == (60, len(grid) + 1)
    assert np.allclose(pmf.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(pmf >= 0)


def test_deephit_alpha_one_degenerate_optimum():
    # a single uncensored record in bin b: pure likelihood loss drives the
    # PMF mass at that bin toward 1
    X = np.array([[0.5, -0.2]])
    y = make_survival_y([3.0], [1])
    grid = TimeGrid(np.array([2.0, 4.0, 6.0]))
    model = DeepHit(hidden_layers=(8,), batch_norm=False, dropout_rate=0.0,
                    alpha=1.0, learning_rate=0.05, max_epochs=300,
                    patience=300, seed=1)
    model.fit(X, y, time_grid=grid)
    pmf = model.predict_pmf(X)[0]
    assert pmf[1] > 0.95  # bin of tau=3 on grid (2, 4, 6)


def test_deephit_rank_term_decreases_on_separable_data():
    data = make_ph_data(80, [2.0, -2.0], seed=31)
    grid = quantile_grid(data.durations, 6)
    bins = np.minimum(
        np.searchsorted(grid.cut_points, data.durations, side="left"),
        len(grid) - 1,
    )
    model = DeepHit(hidden_layers=(16,), batch_norm=False, dropout_rate=0.0,
                    alpha=0.2, sigma=0.1, learning_rate=0.02, max_epochs=60,
                    patience=60, seed=2)

    def rank_part(net):
        logits = net.forward(data.X)
        return deephit_loss(logits, bins, data.events, 0.0, 0.1,
                            data.durations)[0]

    model.fit(data.X, as_y(data), time_grid=grid)
    trained = rank_part(model.net_)
    from batsurv.nncore import Mlp
    fresh = Mlp(model.net_.spec, seed=2)
    assert trained <= rank_part(fresh)


def test_deephit_interpolation_fixture():
    pmf = np.array([[0.5, 0.5, 0.0]])
    grid = TimeGrid(np.array([10.0, 20.0]))
    times = np.array([5.0, 10.0, 15.0, 20.0, 25.0])
    surv = deephit_survival_from_pmf(pmf, grid, times)[0]
    assert np.allclose(surv, [0.75, 0.5, 0.25, 0.0, 0.0], atol=1e-15)


def test_deephit_grid_must_cover_training():
    data = make_ph_data(30, [1.0], seed=33)
    bad = TimeGrid(np.array([data.durations.min(),
                             float(np.median(data.durations))]))
    model = DeepHit(hidden_layers=(4,), max_epochs=2, seed=0)
    with pytest.raises(GridMismatchError):
        model.fit(data.X, as_y(data), time_grid=bad)


# --- MTLR -----------------------------------------------------------------------


def test_mtlr_zero_theta_uniform_over_monotone_sequences():
    k = 4
    grid = TimeGrid(np.array([1.0, 2.0, 3.0, 4.0]))
    model = Mtlr(grid_size=k)
    model.theta_ = np.zeros((k, 3))
    model.grid_ = grid
    model.n_features_in_ = 3
    X = np.random.default_rng(0).standard_normal((3, 3))
    surv = model.predict_survival(X, grid.cut_points)
    # independent enumeration of the k+1 admissible monotone sequences
    seqs = [s for s in itertools.product([0, 1], repeat=k)
            if all(a <= b for a, b in zip(s, s[1:]))]
    assert len(seqs) == k + 1
    expected = np.array([sum(1 for s in seqs if s[j] == 0) / len(seqs)
                         for j in range(k)])
    assert np.allclose(surv, expected[None, :], atol=1e-15)
    probs = model.predict_sequence_probabilities(X)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_mtlr_large_smoothness_penalty_ties_rows():
    # small learning rate: adaptive-moment steps bounce around the penalty
    # valley with amplitude on the order of the step size
    data = make_ph_data(50, [1.0, -0.5], seed=40)
    grid = quantile_grid(data.durations, 6)
    model = Mtlr(lambda1=0.0, lambda2=1e6, learning_rate=3e-4,
                 max_epochs=600, patience=600, seed=0)
    model.fit(data.X, as_y(data), time_grid=grid)
    rows = model.theta_
    spread = max(
        np.linalg.norm(a - b) for a in rows for b in rows
    )
    assert spread < 1e-3


def test_mtlr_sequence_probabilities_sum_to_one():
    data = make_ph_data(40, [1.0, 0.5], censor_rate=0.3, seed=41)
    grid = quantile_grid(data.durations, 5)
    model = Mtlr(max_epochs=50, seed=0).fit(data.X, as_y(data), time_grid=grid)
    p = model.predict_sequence_probabilities(data.X)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)


# --- gradient checks through the losses ---------------------------------------------


def test_all_losses_pass_grad_check():
    data = generate_synthetic(25, 3, np.array([1.0, -0.5, 0.0]), 0.3, seed=50)
    X, durations, events = data.X, data.durations, data.events
    rng = np.random.default_rng(1)

    g = rng.standard_normal(25) * 0.4
    assert grad_check([g], lambda: _wrap_cox(g, durations, events)) < 1e-4

    grid = quantile_grid(durations, 5)
    bins = np.minimum(np.searchsorted(grid.cut_points, durations, "left"), 4)
    logits = rng.standard_normal((25, 6)) * 0.4
    assert grad_check(
        [logits],
        lambda: _wrap_deephit(logits, bins, events, durations),
    ) < 1e-4

    theta = rng.standard_normal((5, 3)) * 0.3
    assert grad_check(
        [theta],
        lambda: _wrap_mtlr(theta, X, durations, events, grid),
    ) < 1e-4

    scores = rng.standard_normal(12) * 0.5
    starts = np.array([0, 5, 12])
    self_rows = np.array([2, 7])
    assert grad_check(
        [scores],
        lambda: _wrap_grouped(scores, starts, self_rows),
    ) < 1e-4


def _wrap_cox(g, durations, events):
    loss, dg = cox_partial_loss(g, durations, events)
    return loss, [dg]


def _wrap_deephit(logits, bins, events, durations):
    loss, dl = deephit_loss(logits, bins, events, 0.4, 0.15, durations)
    return loss, [dl]


def _wrap_mtlr(theta, X, durations, events, grid):
    loss, dt = mtlr_loss(theta, X, durations, events, grid, 0.01, 0.02)
    return loss, [dt]


def _wrap_grouped(scores, starts, self_rows):
    loss, ds = _grouped_partial_loss(scores, starts, self_rows)
    return loss, [ds]


# --- prediction contracts ------------------------------------------------------------


def fitted_models(data, seed=0):
    train, val, _ = split(data, (0.7, 0.15, 0.15), seed=seed)
    y, y_val = as_y(train), as_y(val)
    grid = quantile_grid(train.durations, 8)
    fast = dict(hidden_layers=(8,), max_epochs=10, patience=10, seed=seed)
    models = {
        "cox": CoxRegression(ridge=1e-3).fit(train.X, y),
        "coxph": NeuralCoxPH(**fast).fit(train.X, y, X_val=val.X, y_val=y_val),
        "coxtime": CoxTime(**fast).fit(train.X, y, X_val=val.X, y_val=y_val),
        "deephit": DeepHit(**fast).fit(train.X, y, X_val=val.X, y_val=y_val,
                                       time_grid=grid),
        "mtlr": Mtlr(max_epochs=20, seed=seed).fit(train.X, y, X_val=val.X,
                                                   y_val=y_val, time_grid=grid),
    }
    return models, train


@pytest.fixture(scope="module")
def small_fitted():
    data = make_ph_data(60, [1.0, -0.5], seed=60)
    return fitted_models(data)


def test_survival_one_at_time_zero(small_fitted):
    models, train = small_fitted
    x = train.X[:3]
    times = np.concatenate([[1e-12], np.quantile(train.durations, [0.3, 0.9])])
    for name, model in models.items():
        surv = model.predict_survival(x, times)
        assert np.allclose(surv[:, 0], 1.0, atol=1e-12), name


def test_survival_curves_monotone_in_unit_interval(small_fitted):
    models, train = small_fitted
    times = np.linspace(1e-6, train.durations.max() * 1.2, 40)
    for name, model in models.items():
        surv = model.predict_survival(train.X[:5], times)
        assert np.all(surv >= 0) and np.all(surv <= 1), name
        assert np.all(np.diff(surv, axis=1) <= 1e-12), name


def test_unfitted_raises(small_fitted):
    for cls in (CoxRegression, NeuralCoxPH, CoxTime, DeepHit, Mtlr):
        with pytest.raises(UnfittedModelError):
            cls().predict_survival(np.zeros((1, 2)), [1.0])


def test_persistence_round_trip_exact(small_fitted, tmp_path):
    models, train = small_fitted
    times = np.linspace(0.05, train.durations.max(), 25)
    for name, model in models.items():
        path = tmp_path / f"{name}.npz"
        save_model(model, path)
        back = load_model(path)
        a = model.predict_survival(train.X[:4], times)
        b = back.predict_survival(train.X[:4], times)
        assert np.array_equal(a, b), name


# --- risk scores -----------------------------------------------------------------


def test_integrated_risk_fixtures():
    h = 4.0
    ones = SurvivalCurve(np.array([0.0, h]), np.array([1.0, 1.0]))
    assert integrated_risk(ones, h) == 0.0
    zeros = SurvivalCurve(np.array([0.0, h]), np.array([0.0, 0.0]))
    assert integrated_risk(zeros, h) == h
    wedge = SurvivalCurve(np.array([0.0, h]), np.array([1.0, 0.0]))
    assert integrated_risk(wedge, h) == pytest.approx(h / 2, abs=1e-14)


def test_predict_risk_orders_by_hazard(small_fitted):
    models, train = small_fitted
    horizon = float(np.quantile(train.durations, 0.8))
    risks = models["cox"].predict_risk(train.X, horizon)
    # the riskiest record by linear score gets the largest integral
    scores = models["cox"].predict_log_risk(train.X)
    assert kendalltau(risks, scores).statistic > 0.99


# --- the five-model sanity separation ------------------------------------------------


@pytest.mark.slow
def test_all_five_models_beat_permuted_control():
    from batsurv.metrics import evaluate_model

    data = make_ph_data(500, [2.0, -2.0, 1.0, 0.0], seed=70)
    train, val, test = split(data, (0.7, 0.15, 0.15), seed=10)
    from sklearn.preprocessing import StandardScaler

    scaler = StandardScaler().fit(train.X)

    def scaled(part):
        return SurvivalDataset.from_arrays(
            scaler.transform(part.X), part.durations, part.events,
            sample_ids=part.sample_ids,
        )

    train, val, test = scaled(train), scaled(val), scaled(test)
    y, y_val = as_y(train), as_y(val)
    grid = quantile_grid(train.durations, 10)
    shared = dict(learning_rate=0.005, seed=0)
    models = {
        "cox": CoxRegression(ridge=1e-3).fit(train.X, y),
        "coxph": NeuralCoxPH(max_epochs=60, **shared).fit(
            train.X, y, X_val=val.X, y_val=y_val),
        "coxtime": CoxTime(max_epochs=25, **shared).fit(
            train.X, y, X_val=val.X, y_val=y_val),
        "deephit": DeepHit(max_epochs=50, **shared).fit(
            train.X, y, X_val=val.X, y_val=y_val, time_grid=grid),
        "mtlr": Mtlr(max_epochs=300, seed=0).fit(
            train.X, y, X_val=val.X, y_val=y_val, time_grid=grid),
    }
    rng = np.random.default_rng(3)
    permuted = SurvivalDataset.from_arrays(
        test.X[rng.permutation(len(test))], test.durations, test.events,
    )
    for name, model in models.items():
        c = evaluate_model(model, test).c_index
        assert c >= 0.75, f"{name}: c_index {c:.3f}"
    c_perm = evaluate_model(models["cox"], permuted).c_index
    assert 0.45 <= c_perm <= 0.55
