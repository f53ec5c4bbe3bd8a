"""The five survival models: linear Cox, neural Cox, CoxTime, DeepHit, MTLR.

Every estimator follows the scikit-learn protocol: hyperparameters in
``__init__``, ``fit(X, y)`` returning ``self`` (``y`` per
``validation.check_survival_y``), learned state in trailing-underscore
attributes.  All models predict failure-free probability curves through
``predict_survival`` and a scalar ranking risk through ``predict_risk``.

The Cox-family models pair a log-risk function with a Breslow-type
cumulative baseline hazard (increment d/sum over the risk set of exp(risk)
at each distinct event time), so survival is exp(-H0(t) * exp(risk)).
DeepHit and MTLR are discrete-time models over an equidistant grid.
"""

import json

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import (
    GridMismatchError,
    NoEventsError,
    NonConvergenceError,
    UnfittedModelError,
)
from .nncore import Mlp, MlpSpec, TrainConfig, fit_network
from .survdata import TimeGrid, make_grid
from .validation import check_eval_times, check_feature_matrix, check_survival_y


class SurvivalCurve:
    """Failure-free probability sampled on an increasing time mesh.

    Between samples the curve is linearly interpolated; before the first
    sample it is anchored at (0, 1); after the last it is held constant.
    """

    def __init__(self, times, probabilities):
        times = np.asarray(times, dtype=np.float64)
        probs = np.asarray(probabilities, dtype=np.float64)
        if times.shape != probs.shape or times.ndim != 1:
            raise ValueError("times and probabilities must be matching 1-D arrays")
        if times.size and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(probs < -1e-12) or np.any(probs > 1 + 1e-12):
            raise ValueError("probabilities must lie in [0, 1]")
        if not np.all(np.isfinite(probs)):
            raise ValueError("probabilities must be finite")
        self.times = times
        self.probabilities = np.clip(probs, 0.0, 1.0)

    def evaluate(self, t):
        """Interpolated survival probability at time(s) ``t``."""
        t = np.asarray(t, dtype=np.float64)
        xs, ys = self.times, self.probabilities
        if xs[0] > 0:
            xs = np.concatenate([[0.0], xs])
            ys = np.concatenate([[1.0], ys])
        vals = np.interp(t, xs, ys)
        return vals if vals.ndim else float(vals)


def integrated_risk(curve, horizon):
    """Trapezoidal integral of (1 - survival) over [0, horizon]."""
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    inner = curve.times[(curve.times > 0) & (curve.times < horizon)]
    mesh = np.concatenate([[0.0], inner, [horizon]])
    vals = curve.evaluate(mesh)
    return float(np.trapezoid(1.0 - vals, mesh))


def _clamp_curve_matrix(mat):
    mat = np.clip(mat, 0.0, 1.0)
    return np.minimum.accumulate(mat, axis=1)


# --- shared loss machinery ------------------------------------------------------


def cox_partial_loss(scores, durations, events, batch_events=None):
    """Average negative log partial likelihood and its score gradient.

    ``scores`` are log-risk values for all records; risk sets always span
    the full record set.  ``batch_events`` restricts which events are
    averaged over (defaults to all).  Returns ``(loss, dloss/dscores)``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if batch_events is None:
        batch_events = np.nonzero(events == 1)[0]
    batch_events = np.asarray(batch_events, dtype=np.intp)
    if batch_events.size == 0:
        raise NoEventsError("no events to form the partial likelihood")
    mask = durations[None, :] >= durations[batch_events, None]
    z = np.where(mask, scores[None, :], -np.inf)
    zmax = z.max(axis=1)
    expz = np.exp(z - zmax[:, None])
    lse = zmax + np.log(expz.sum(axis=1))
    b = batch_events.size
    loss = float(np.mean(lse - scores[batch_events]))
    dscores = (expz / expz.sum(axis=1, keepdims=True)).sum(axis=0)
    np.subtract.at(dscores, batch_events, 1.0)
    return loss, dscores / b


def _grouped_partial_loss(scores, starts, self_rows):
    """Partial-likelihood loss over pre-stacked risk-set rows.

    ``scores`` holds f-values for rows grouped by event (group ``a`` spans
    ``starts[a]:starts[a+1]``); ``self_rows[a]`` is the row of the event's
    own record.  Returns ``(loss, dloss/dscores)``.
    """
    n_groups = len(starts) - 1
    maxes = np.maximum.reduceat(scores, starts[:-1])
    group_of = np.repeat(np.arange(n_groups), np.diff(starts))
    exps = np.exp(scores - maxes[group_of])
    sums = np.add.reduceat(exps, starts[:-1])
    lse = maxes + np.log(sums)
    loss = float(np.mean(lse - scores[self_rows]))
    dscores = exps / sums[group_of]
    dscores[self_rows] -= 1.0
    return loss, dscores / n_groups


def deephit_loss(logits, bin_idx, events, alpha, sigma, durations=None):
    """Combined likelihood + ranking loss on (n, K+1) logits.

    ``bin_idx`` maps each record to its grid bin (the beyond-horizon bin is
    index K).  Events contribute the negative log PMF mass at their bin,
    censored records the negative log mass strictly past their bin.  The
    ranking term averages exp((F_j(T_i) - F_i(T_i)) / sigma) over pairs
    with an observed earlier failure (i event and T_i < T_j, falling back
    to bin order when durations are not given), F being the discrete CDF.
    Returns ``(loss, dloss/dlogits)``.
    """
    z = np.asarray(logits, dtype=np.float64)
    n, n_bins = z.shape
    zmax = z.max(axis=1, keepdims=True)
    expz = np.exp(z - zmax)
    denom = expz.sum(axis=1, keepdims=True)
    pmf = expz / denom
    rows = np.arange(n)

    # likelihood part
    ll_grad = np.zeros_like(z)
    is_event = events == 1
    loss_terms = np.empty(n)
    if np.any(is_event):
        pe = np.maximum(pmf[rows[is_event], bin_idx[is_event]], 1e-300)
        loss_terms[is_event] = -np.log(pe)
        g = pmf[is_event].copy()
        g[np.arange(g.shape[0]), bin_idx[is_event]] -= 1.0
        ll_grad[is_event] = g
    if np.any(~is_event):
        c_rows = rows[~is_event]
        tail_mask = np.arange(n_bins)[None, :] > bin_idx[c_rows, None]
        tail = np.maximum((pmf[c_rows] * tail_mask).sum(axis=1), 1e-300)
        loss_terms[c_rows] = -np.log(tail)
        g = pmf[c_rows] * (1.0 - tail_mask / tail[:, None])
        ll_grad[c_rows] = g
    l_pmf = float(np.mean(loss_terms))
    ll_grad /= n

    # ranking part
    cdf = np.cumsum(pmf, axis=1)
    order = np.asarray(durations) if durations is not None else np.asarray(bin_idx)
    pair = (events[:, None] == 1) & (order[:, None] < order[None, :])
    n_pairs = int(pair.sum())
    if n_pairs == 0:
        l_rank = 0.0
        rank_grad = np.zeros_like(z)
    else:
        f_at_i = cdf[:, bin_idx]          # f_at_i[r, i] = F_r(T_i)
        diff = f_at_i.T - np.diag(f_at_i)[:, None]   # diff[i, j] = F_j(T_i) - F_i(T_i)
        eta = np.where(pair, np.exp(diff / sigma), 0.0)
        l_rank = float(eta.sum() / n_pairs)
        coef = eta / (sigma * n_pairs)
        # q[r, b] = d l_rank / d F_r(t_b): pair (i, j) touches F_i and F_j at bin b_i
        q = np.zeros_like(z)
        np.add.at(q, (np.arange(n), bin_idx), -coef.sum(axis=1))
        np.add.at(q.T, bin_idx, coef)  # q[:, b_i] += coef[i, :] accumulated over i
        rev = np.cumsum(q[:, ::-1], axis=1)[:, ::-1]
        rank_grad = pmf * (rev - (q * cdf).sum(axis=1, keepdims=True))
    loss = alpha * l_pmf + (1.0 - alpha) * l_rank
    dlogits = alpha * ll_grad + (1.0 - alpha) * rank_grad
    return loss, dlogits


def mtlr_outcome_scores(theta, X):
    """Scores of the K+1 monotone failure sequences for each record.

    Outcome kappa (0-based) means failure strictly after cut point kappa,
    i.e. the binary sequence with kappa leading zeros; its score is the
    suffix sum of theta_k . x over k > kappa (empty sum for kappa = K).
    """
    u = X @ theta.T
    n, k = u.shape
    s = np.zeros((n, k + 1))
    s[:, :k] = np.cumsum(u[:, ::-1], axis=1)[:, ::-1]
    return s


def mtlr_loss(theta, X, durations, events, grid, lambda1, lambda2):
    """Negative log likelihood of the sequence encoding plus smoothing.

    Uncensored records contribute their exact monotone sequence; censored
    records marginalize over every sequence with no failure at or before
    their censoring time.  Returns ``(loss, dloss/dtheta)``.
    """
    cuts = grid.cut_points
    k = len(cuts)
    s = mtlr_outcome_scores(theta, X)
    smax = s.max(axis=1, keepdims=True)
    exps = np.exp(s - smax)
    z = exps.sum(axis=1)
    logz = smax[:, 0] + np.log(z)
    p = exps / z[:, None]
    n = X.shape[0]
    rows = np.arange(n)

    kappa_event = np.searchsorted(cuts, durations, side="left")
    kappa_cens = np.searchsorted(cuts, durations, side="right")
    is_event = events == 1

    loglik = np.empty(n)
    q = p.copy()  # q[i] = d(-loglik_i)/ds[i]
    if np.any(is_event):
        ke = kappa_event[is_event]
        loglik[is_event] = s[rows[is_event], ke] - logz[is_event]
        q[rows[is_event], ke] -= 1.0
    if np.any(~is_event):
        c_rows = rows[~is_event]
        kc = kappa_cens[c_rows]
        allowed = np.arange(k + 1)[None, :] >= kc[:, None]
        mass = (p[c_rows] * allowed).sum(axis=1)
        loglik[c_rows] = np.log(np.maximum(mass, 1e-300)) + 0.0
        q[c_rows] -= np.where(allowed, p[c_rows], 0.0) / mass[:, None]

    du = np.cumsum(q[:, :k], axis=1)  # d(-loglik)/du[:, j] = sum_{kappa<=j} q
    dtheta = du.T @ X

    loss = -float(loglik.sum())
    loss += lambda1 * float(np.sum(theta * theta))
    dtheta += 2.0 * lambda1 * theta
    if k > 1:
        diffs = theta[1:] - theta[:-1]
        loss += lambda2 * float(np.sum(diffs * diffs))
        dtheta[1:] += 2.0 * lambda2 * diffs
        dtheta[:-1] -= 2.0 * lambda2 * diffs
    return loss, dtheta


# --- estimator base ---------------------------------------------------------------


class _SurvivalEstimator(BaseEstimator):
    """Shared prediction plumbing for the five model families."""

    def _check_fitted(self):
        if not hasattr(self, "n_features_in_"):
            raise UnfittedModelError(
                f"{type(self).__name__} must be fitted before prediction"
            )

    def _native_times(self):
        raise NotImplementedError

    def predict_survival(self, X, times):
        """Failure-free probability matrix of shape (n_samples, n_times)."""
        self._check_fitted()
        X = check_feature_matrix(X, self.n_features_in_)
        times = check_eval_times(times)
        mat = self._survival_matrix(X, times)
        return _clamp_curve_matrix(mat)

    def predict_survival_curves(self, X, times):
        mat = self.predict_survival(X, times)
        times = np.asarray(times, dtype=np.float64)
        return [SurvivalCurve(times, row) for row in mat]

    def predict_risk(self, X, horizon):
        """Trapezoidal integral of (1 - survival) over [0, horizon]."""
        self._check_fitted()
        if horizon <= 0:
            raise ValueError("horizon must be > 0")
        native = self._native_times()
        inner = np.unique(native[(native > 0) & (native < horizon)])
        mesh = np.concatenate([inner, [horizon]])
        surv = self.predict_survival(X, mesh)
        mesh = np.concatenate([[0.0], mesh])
        surv = np.hstack([np.ones((surv.shape[0], 1)), surv])
        return np.trapezoid(1.0 - surv, mesh, axis=1)

    @staticmethod
    def _split_y(X, y):
        X = check_feature_matrix(X)
        durations, events = check_survival_y(y)
        if durations.shape[0] != X.shape[0]:
            raise ValueError("X and y disagree on sample count")
        return X, durations, events


def _breslow_baseline(scores, durations, events):
    """Cumulative baseline hazard at each distinct event time (Breslow).

    Increment at event time s is d_s / sum_{j in R(s)} exp(scores_j);
    scores are centered internally for overflow safety, which cancels when
    survival multiplies by exp(score - center).
    """
    center = float(np.max(scores))
    w = np.exp(scores - center)
    order = np.argsort(durations, kind="stable")
    d_sorted = durations[order]
    e_sorted = events[order]
    w_sorted = w[order]
    # at-risk weight just before each position, scanning ascending times
    suffix = np.concatenate([np.cumsum(w_sorted[::-1])[::-1], [0.0]])
    times, increments = [], []
    i, n = 0, len(d_sorted)
    while i < n:
        j = i
        d = 0
        while j < n and d_sorted[j] == d_sorted[i]:
            d += int(e_sorted[j])
            j += 1
        if d > 0:
            times.append(d_sorted[i])
            increments.append(d / suffix[i])
        i = j
    return np.asarray(times), np.cumsum(increments), center


def _step_lookup(step_times, step_values, t):
    idx = np.searchsorted(step_times, t, side="right") - 1
    out = np.where(idx < 0, 0.0, step_values[np.maximum(idx, 0)])
    return out


# --- linear Cox --------------------------------------------------------------------


class CoxRegression(_SurvivalEstimator):
    """Linear proportional-hazards model fit by penalized Newton iteration.

    Maximizes the Breslow-tie log partial likelihood minus
    ``ridge * ||beta||^2`` until the gradient norm falls below ``tol``.
    Survival curves come from the Breslow baseline:
    S(t|x) = exp(-H0(t) * exp(beta . x)).
    """

    def __init__(self, ridge=0.0, tol=1e-8, max_iter=100):
        self.ridge = ridge
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, durations, events = self._split_y(X, y)
        if events.sum() == 0:
            raise NoEventsError("linear Cox needs at least one event")
        n, d = X.shape
        beta = np.zeros(d)
        value, grad, hess = self._objective(beta, X, durations, events)
        n_iter = 0
        while np.linalg.norm(grad) >= self.tol:
            if n_iter >= self.max_iter:
                raise NonConvergenceError(
                    f"Newton stalled at gradient norm {np.linalg.norm(grad):.3e} "
                    f"after {self.max_iter} iterations"
                )
            try:
                step = np.linalg.solve(hess, grad)  # hess is negative definite
            except np.linalg.LinAlgError as exc:
                raise NonConvergenceError(
                    "singular Hessian; add ridge regularization"
                ) from exc
            if np.linalg.norm(grad) > 1e-2:
                # globalization: halve until the objective improves
                scale, improved = 1.0, False
                for _ in range(60):
                    cand = beta - scale * step
                    cand_value, cand_grad, cand_hess = self._objective(
                        cand, X, durations, events
                    )
                    if cand_value > value:
                        beta, value, grad, hess = (cand, cand_value, cand_grad,
                                                   cand_hess)
                        improved = True
                        break
                    scale *= 0.5
                if not improved:
                    raise NonConvergenceError(
                        "Newton line search could not improve the partial likelihood"
                    )
            else:
                # local phase: pure Newton steps; objective improvements are
                # below float resolution here but the gradient still contracts
                beta = beta - step
                value, grad, hess = self._objective(beta, X, durations, events)
            n_iter += 1
        self.coef_ = beta
        self.n_features_in_ = d
        times, cumhaz, center = _breslow_baseline(X @ beta, durations, events)
        self.baseline_times_ = times
        self.baseline_cumhaz_ = cumhaz * np.exp(-center)
        return self

    def _objective(self, beta, X, durations, events):
        """Penalized log partial likelihood with gradient and Hessian."""
        eta = X @ beta
        center = eta.max()
        w = np.exp(eta - center)
        order = np.argsort(-durations, kind="stable")
        d_desc = durations[order]
        e_desc = events[order]
        w_desc = w[order]
        x_desc = X[order]
        wx = w_desc[:, None] * x_desc
        cum_w = np.cumsum(w_desc)
        cum_wx = np.cumsum(wx, axis=0)
        cum_wxx = np.cumsum(wx[:, :, None] * x_desc[:, None, :], axis=0)
        value = 0.0
        grad = np.zeros_like(beta)
        hess = np.zeros((beta.size, beta.size))
        i, n = 0, len(d_desc)
        while i < n:
            j = i
            while j < n and d_desc[j] == d_desc[i]:
                j += 1
            dead = np.nonzero(e_desc[i:j] == 1)[0] + i
            if dead.size:
                s0 = cum_w[j - 1]
                s1 = cum_wx[j - 1]
                s2 = cum_wxx[j - 1]
                xbar = s1 / s0
                value += float((x_desc[dead] @ beta).sum()) - dead.size * (
                    np.log(s0) + center
                )
                grad += x_desc[dead].sum(axis=0) - dead.size * xbar
                hess -= dead.size * (s2 / s0 - np.outer(xbar, xbar))
            i = j
        value -= self.ridge * float(beta @ beta)
        grad -= 2.0 * self.ridge * beta
        hess -= 2.0 * self.ridge * np.eye(beta.size)
        return value, grad, hess

    def _native_times(self):
        return self.baseline_times_

    def predict_log_risk(self, X):
        self._check_fitted()
        X = check_feature_matrix(X, self.n_features_in_)
        return X @ self.coef_

    def predict_cumulative_hazard(self, X, times):
        self._check_fitted()
        X = check_feature_matrix(X, self.n_features_in_)
        times = check_eval_times(times)
        h0 = _step_lookup(self.baseline_times_, self.baseline_cumhaz_, times)
        return np.exp(X @ self.coef_)[:, None] * h0[None, :]

    def _survival_matrix(self, X, times):
        return np.exp(-self.predict_cumulative_hazard(X, times))


# --- neural Cox (proportional hazards) ----------------------------------------------


class _NeuralEstimator(_SurvivalEstimator):
    """Common constructor surface for the network-backed models."""

    def __init__(self, hidden_layers=(64, 64), batch_norm=True, dropout_rate=0.1,
                 learning_rate=0.005, batch_size=128, max_epochs=500, patience=10,
                 l2_penalty=0.0, seed=0):
        self.hidden_layers = hidden_layers
        self.batch_norm = batch_norm
        self.dropout_rate = dropout_rate
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.l2_penalty = l2_penalty
        self.seed = seed

    def _train_config(self):
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=self.seed,
            l2_penalty=self.l2_penalty,
        )

    def _build_net(self, input_dim, output_dim):
        spec = MlpSpec(
            input_dim=input_dim,
            hidden_layers=tuple(self.hidden_layers),
            output_dim=output_dim,
            batch_norm=self.batch_norm,
            dropout_rate=self.dropout_rate,
        )
        return Mlp(spec, seed=self.seed)

    def _penalized(self, loss, grads):
        value, pgrads = self.net_.l2_value_and_grads(self.l2_penalty)
        if pgrads is None:
            return loss, grads
        return loss + value, [g + pg for g, pg in zip(grads, pgrads)]


class NeuralCoxPH(_NeuralEstimator):
    """Cox partial likelihood with a network-parameterized log-risk.

    The network maps features to a single log-risk score; per training
    step the loss averages ``log sum_{j in R(T_i)} exp g_j - g_i`` over the
    mini-batch's events with risk sets spanning the full training set.
    """

    def fit(self, X, y, X_val=None, y_val=None):
        X, durations, events = self._split_y(X, y)
        event_idx = np.nonzero(events == 1)[0]
        if event_idx.size == 0:
            raise NoEventsError("training data has no events")
        if X_val is None:
            X_val, dur_val, ev_val = X, durations, events
        else:
            X_val, dur_val, ev_val = self._split_y(X_val, y_val)
        if ev_val.sum() == 0:
            raise NoEventsError("validation data has no events")
        self.net_ = self._build_net(X.shape[1], 1)
        config = self._train_config()

        def train_step(batch, rng):
            g = self.net_.forward(X, training=True, rng=rng, update_stats=True).ravel()
            loss, dg = cox_partial_loss(g, durations, events, event_idx[batch])
            self.net_.backward(dg.reshape(-1, 1))
            return self._penalized(loss, self.net_.grads())

        def val_loss():
            g = self.net_.forward(X_val).ravel()
            return cox_partial_loss(g, dur_val, ev_val)[0]

        self.fit_result_ = fit_network(
            self.net_.parameters(), config, train_step, val_loss, event_idx.size
        )
        scores = self.net_.forward(X).ravel()
        times, cumhaz, center = _breslow_baseline(scores, durations, events)
        self.baseline_times_ = times
        self.baseline_cumhaz_ = cumhaz * np.exp(-center)
        self.n_features_in_ = X.shape[1]
        return self

    def _native_times(self):
        return self.baseline_times_

    def predict_log_risk(self, X):
        self._check_fitted()
        X = check_feature_matrix(X, self.n_features_in_)
        return self.net_.forward(X).ravel()

    def _survival_matrix(self, X, times):
        h0 = _step_lookup(self.baseline_times_, self.baseline_cumhaz_, times)
        risk = np.exp(self.net_.forward(X).ravel())
        return np.exp(-risk[:, None] * h0[None, :])


class _RiskSetRows:
    """Pre-stacked (event time, risk-set member) rows for the CoxTime loss.

    All rows are built once; a mini-batch of events gathers its blocks by
    index, avoiding per-step risk-set reconstruction.
    """

    def __init__(self, X, durations, t_norm, event_idx):
        blocks, starts, self_rows = [], [0], []
        for a in event_idx:
            members = np.nonzero(durations >= durations[a])[0]
            block = np.hstack([np.full((members.size, 1), t_norm[a]), X[members]])
            self_rows.append(starts[-1] + int(np.nonzero(members == a)[0][0]))
            blocks.append(block)
            starts.append(starts[-1] + members.size)
        self.stacked = np.vstack(blocks) if blocks else np.empty((0, X.shape[1] + 1))
        self.starts = np.asarray(starts)
        self.self_rows = np.asarray(self_rows)

    def gather(self, batch):
        lengths = self.starts[1:] - self.starts[:-1]
        row_idx = np.concatenate(
            [np.arange(self.starts[a], self.starts[a + 1]) for a in batch]
        )
        starts = np.concatenate([[0], np.cumsum(lengths[batch])])
        offsets = self.self_rows[batch] - self.starts[batch] + starts[:-1]
        return self.stacked[row_idx], starts, offsets

    def gather_all(self):
        return self.stacked, self.starts, self.self_rows


class CoxTime(_NeuralEstimator):
    """Relative-risk model whose score depends jointly on time and features.

    The network sees (normalized time, x); the loss is the partial
    likelihood with the score of every risk-set member evaluated at the
    event's time, so hazards need not stay proportional.  Survival curves
    accumulate a Breslow-type baseline onto a K-point grid with the
    time-local risk exp(f(t_k, x)).
    """

    def __init__(self, hidden_layers=(64, 64), batch_norm=True, dropout_rate=0.1,
                 learning_rate=0.005, batch_size=128, max_epochs=500, patience=10,
                 l2_penalty=0.0, seed=0, grid_size=10):
        super().__init__(hidden_layers, batch_norm, dropout_rate, learning_rate,
                         batch_size, max_epochs, patience, l2_penalty, seed)
        self.grid_size = grid_size

    def _time_norm(self, t):
        return (np.asarray(t, dtype=np.float64) - self.t_lo_) / (self.t_hi_ - self.t_lo_)

    def _stack(self, t_scalar_norm, X):
        return np.hstack([np.full((X.shape[0], 1), t_scalar_norm), X])

    def fit(self, X, y, X_val=None, y_val=None):
        X, durations, events = self._split_y(X, y)
        event_idx = np.nonzero(events == 1)[0]
        if event_idx.size == 0:
            raise NoEventsError("training data has no events")
        if X_val is None:
            X_val, dur_val, ev_val = X, durations, events
        else:
            X_val, dur_val, ev_val = self._split_y(X_val, y_val)
        if ev_val.sum() == 0:
            raise NoEventsError("validation data has no events")
        self.t_lo_ = float(durations.min())
        self.t_hi_ = float(durations.max())
        if self.t_hi_ <= self.t_lo_:
            self.t_hi_ = self.t_lo_ + 1.0
        self.net_ = self._build_net(X.shape[1] + 1, 1)
        config = self._train_config()
        t_norm = self._time_norm(durations)
        t_norm_val = self._time_norm(dur_val)

        train_rows = _RiskSetRows(X, durations, t_norm, event_idx)
        val_rows = _RiskSetRows(X_val, dur_val, t_norm_val,
                                np.nonzero(ev_val == 1)[0])

        def train_step(batch, rng):
            stacked, starts, self_rows = train_rows.gather(batch)
            scores = self.net_.forward(
                stacked, training=True, rng=rng, update_stats=True
            ).ravel()
            loss, dscores = _grouped_partial_loss(scores, starts, self_rows)
            self.net_.backward(dscores.reshape(-1, 1))
            return self._penalized(loss, self.net_.grads())

        def val_loss():
            stacked, starts, self_rows = val_rows.gather_all()
            scores = self.net_.forward(stacked).ravel()
            return _grouped_partial_loss(scores, starts, self_rows)[0]

        self.fit_result_ = fit_network(
            self.net_.parameters(), config, train_step, val_loss, event_idx.size
        )
        self.grid_ = make_grid(durations, self.grid_size)
        self._fit_baseline(X, durations, events, t_norm)
        self.n_features_in_ = X.shape[1]
        return self

    def _fit_baseline(self, X, durations, events, t_norm):
        """Breslow increments at event times, aggregated onto the grid."""
        order = np.argsort(durations, kind="stable")
        cuts = self.grid_.cut_points
        increments = np.zeros(len(cuts))
        blocks, meta, starts = [], [], [0]
        i, n = 0, len(order)
        while i < n:
            j = i
            d = 0
            t = durations[order[i]]
            while j < n and durations[order[j]] == t:
                d += int(events[order[j]])
                j += 1
            if d > 0:
                members = np.nonzero(durations >= t)[0]
                blocks.append(np.hstack(
                    [np.full((members.size, 1), t_norm[order[i]]), X[members]]
                ))
                starts.append(starts[-1] + members.size)
                meta.append((t, d))
            i = j
        scores = self.net_.forward(np.vstack(blocks)).ravel()
        center = scores.max()
        sums = np.add.reduceat(np.exp(scores - center), np.asarray(starts[:-1]))
        for (t, d), denom in zip(meta, sums * np.exp(center)):
            k = int(np.searchsorted(cuts, t, side="left"))
            increments[min(k, len(cuts) - 1)] += d / denom
        self.baseline_increments_ = increments

    def _native_times(self):
        return self.grid_.cut_points

    def _survival_matrix(self, X, times):
        cuts = self.grid_.cut_points
        risks = np.empty((X.shape[0], len(cuts)))
        for k, t in enumerate(cuts):
            rows = self._stack(self._time_norm(t), X)
            risks[:, k] = np.exp(self.net_.forward(rows).ravel())
        cum = np.cumsum(self.baseline_increments_[None, :] * risks, axis=1)
        idx = np.searchsorted(cuts, times, side="right") - 1
        h = np.where(idx[None, :] < 0, 0.0, cum[:, np.maximum(idx, 0)])
        return np.exp(-h)


class DeepHit(_NeuralEstimator):
    """Discrete-time PMF model with a likelihood plus ranking objective.

    The network emits K+1 logits (K grid bins and a beyond-horizon bin)
    turned into a PMF by softmax.  The loss is
    ``alpha * L_pmf + (1 - alpha) * L_rank`` per :func:`deephit_loss`.
    Survival interpolates the discrete CDF with constant density inside
    each bin.
    """

    def __init__(self, hidden_layers=(64, 64), batch_norm=True, dropout_rate=0.1,
                 learning_rate=0.005, batch_size=128, max_epochs=50, patience=10,
                 l2_penalty=0.0, seed=0, grid_size=10, alpha=0.2, sigma=0.1):
        super().__init__(hidden_layers, batch_norm, dropout_rate, learning_rate,
                         batch_size, max_epochs, patience, l2_penalty, seed)
        self.grid_size = grid_size
        self.alpha = alpha
        self.sigma = sigma

    def _bin_index(self, durations, events=None):
        """Grid bin per duration; censored records clamp to the last bin."""
        cuts = self.grid_.cut_points
        idx = np.searchsorted(cuts, durations, side="left")
        if events is not None:
            idx = np.where((events == 0) & (idx >= len(cuts)), len(cuts) - 1, idx)
            idx = np.minimum(idx, len(cuts))
        return idx

    def fit(self, X, y, X_val=None, y_val=None, time_grid=None):
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must be in [0, 1]")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        X, durations, events = self._split_y(X, y)
        if events.sum() == 0:
            raise NoEventsError("training data has no events")
        if X_val is None:
            X_val, dur_val, ev_val = X, durations, events
        else:
            X_val, dur_val, ev_val = self._split_y(X_val, y_val)
        self.grid_ = time_grid if time_grid is not None else make_grid(
            durations, self.grid_size
        )
        if durations.max() > self.grid_.cut_points[-1]:
            raise GridMismatchError(
                "grid does not cover the largest training duration"
            )
        k = len(self.grid_)
        bin_idx = self._bin_index(durations)
        bin_val = self._bin_index(dur_val, ev_val)
        self.net_ = self._build_net(X.shape[1], k + 1)
        config = self._train_config()

        def train_step(batch, rng):
            logits = self.net_.forward(X[batch], training=True, rng=rng,
                                       update_stats=True)
            loss, dlogits = deephit_loss(
                logits, bin_idx[batch], events[batch], self.alpha, self.sigma,
                durations[batch],
            )
            self.net_.backward(dlogits)
            return self._penalized(loss, self.net_.grads())

        def val_loss():
            logits = self.net_.forward(X_val)
            return deephit_loss(
                logits, bin_val, ev_val, self.alpha, self.sigma, dur_val
            )[0]

        self.fit_result_ = fit_network(
            self.net_.parameters(), config, train_step, val_loss, X.shape[0]
        )
        self.n_features_in_ = X.shape[1]
        return self

    def _native_times(self):
        return self.grid_.cut_points

    def predict_pmf(self, X):
        self._check_fitted()
        X = check_feature_matrix(X, self.n_features_in_)
        logits = self.net_.forward(X)
        logits = logits - logits.max(axis=1, keepdims=True)
        expz = np.exp(logits)
        return expz / expz.sum(axis=1, keepdims=True)

    def _survival_matrix(self, X, times):
        return deephit_survival_from_pmf(self.predict_pmf(X), self.grid_, times)


def deephit_survival_from_pmf(pmf, grid, times):
    """Survival values from a (n, K+1) PMF via in-bin constant density.

    Bin k spans (left_k, cut_k] with left_0 = 0; the beyond-horizon mass
    keeps survival constant past the last cut point.
    """
    pmf = np.asarray(pmf, dtype=np.float64)
    cuts = np.asarray(grid.cut_points if isinstance(grid, TimeGrid) else grid)
    k = len(cuts)
    if pmf.ndim != 2 or pmf.shape[1] != k + 1:
        raise GridMismatchError(
            f"PMF has {pmf.shape[1]} bins but the grid implies {k + 1}"
        )
    lefts = np.concatenate([[0.0], cuts[:-1]])
    cdf_full = np.cumsum(pmf[:, :k], axis=1)
    cdf_before = np.hstack([np.zeros((pmf.shape[0], 1)), cdf_full[:, :-1]])
    out = np.empty((pmf.shape[0], len(times)))
    for col, t in enumerate(np.asarray(times, dtype=np.float64)):
        b = int(np.searchsorted(cuts, t, side="left"))
        if t <= 0:
            out[:, col] = 1.0
        elif b >= k:
            out[:, col] = 1.0 - cdf_full[:, -1]
        else:
            frac = (t - lefts[b]) / (cuts[b] - lefts[b])
            out[:, col] = 1.0 - (cdf_before[:, b] + pmf[:, b] * frac)
    return out


class Mtlr(_SurvivalEstimator):
    """Multi-task logistic regression over monotone failure sequences.

    A K x d coefficient matrix scores the K+1 admissible monotone binary
    sequences (failure bin per outcome); fitting minimizes the censored
    sequence likelihood plus quadratic magnitude and smoothness penalties
    by full-batch adaptive-moment descent.  Survival is the probability
    that no failure occurred by each cut point, stepped between points.
    """

    def __init__(self, grid_size=10, lambda1=1e-3, lambda2=1e-3,
                 learning_rate=0.005, max_epochs=300, patience=10, seed=0):
        self.grid_size = grid_size
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    def fit(self, X, y, X_val=None, y_val=None, time_grid=None):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("penalties must be >= 0")
        X, durations, events = self._split_y(X, y)
        if X_val is None:
            X_val, dur_val, ev_val = X, durations, events
        else:
            X_val, dur_val, ev_val = self._split_y(X_val, y_val)
        self.grid_ = time_grid if time_grid is not None else make_grid(
            durations, self.grid_size
        )
        if durations.max() > self.grid_.cut_points[-1]:
            raise GridMismatchError(
                "grid does not cover the largest training duration"
            )
        k = len(self.grid_)
        theta = np.zeros((k, X.shape[1]))
        config = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=1,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=self.seed,
        )

        def train_step(batch, rng):
            loss, dtheta = mtlr_loss(
                theta, X, durations, events, self.grid_, self.lambda1, self.lambda2
            )
            return loss, [dtheta]

        def val_loss():
            loss, _ = mtlr_loss(
                theta, X_val, dur_val, ev_val, self.grid_, 0.0, 0.0
            )
            return loss / X_val.shape[0]

        self.fit_result_ = fit_network([theta], config, train_step, val_loss, 1)
        self.theta_ = theta
        self.n_features_in_ = X.shape[1]
        return self

    def _native_times(self):
        return self.grid_.cut_points

    def predict_sequence_probabilities(self, X):
        """Probabilities of the K+1 monotone outcomes for each record."""
        self._check_fitted()
        X = check_feature_matrix(X, self.n_features_in_)
        s = mtlr_outcome_scores(self.theta_, X)
        s = s - s.max(axis=1, keepdims=True)
        expz = np.exp(s)
        return expz / expz.sum(axis=1, keepdims=True)

    def _survival_matrix(self, X, times):
        p = self.predict_sequence_probabilities(X)
        # survival past cut k = mass of outcomes failing strictly later
        tail = np.cumsum(p[:, ::-1], axis=1)[:, ::-1]
        surv_at_cut = tail[:, 1:]
        cuts = self.grid_.cut_points
        idx = np.searchsorted(cuts, times, side="right") - 1
        return np.where(idx[None, :] < 0, 1.0, surv_at_cut[:, np.maximum(idx, 0)])


# --- persistence -------------------------------------------------------------------

_MODEL_TAGS = {
    "linear_cox": "CoxRegression",
    "neural_coxph": "NeuralCoxPH",
    "coxtime": "CoxTime",
    "deephit": "DeepHit",
    "mtlr": "Mtlr",
}
_CLASS_TO_TAG = {v: k for k, v in _MODEL_TAGS.items()}

MODEL_BLOB_VERSION = 1


def save_model(model, path):
    """Persist a fitted model to a versioned npz file (bit-exact arrays)."""
    model._check_fitted()
    tag = _CLASS_TO_TAG[type(model).__name__]
    meta = {
        "version": MODEL_BLOB_VERSION,
        "tag": tag,
        "params": model.get_params(),
        "n_features_in": int(model.n_features_in_),
    }
    arrays = {}
    if isinstance(model, CoxRegression):
        arrays["coef"] = model.coef_
        arrays["baseline_times"] = model.baseline_times_
        arrays["baseline_cumhaz"] = model.baseline_cumhaz_
    elif isinstance(model, Mtlr):
        arrays["theta"] = model.theta_
        arrays["grid"] = model.grid_.cut_points
    else:
        for name, arr in zip(model.net_.parameter_names(), model.net_.parameters()):
            arrays[f"net.p.{name}"] = arr
        for name, arr in model.net_.buffers():
            arrays[f"net.b.{name}"] = arr
        meta["net_spec"] = {
            "input_dim": model.net_.spec.input_dim,
            "hidden_layers": list(model.net_.spec.hidden_layers),
            "output_dim": model.net_.spec.output_dim,
            "batch_norm": model.net_.spec.batch_norm,
            "dropout_rate": model.net_.spec.dropout_rate,
        }
        if isinstance(model, NeuralCoxPH):
            arrays["baseline_times"] = model.baseline_times_
            arrays["baseline_cumhaz"] = model.baseline_cumhaz_
        elif isinstance(model, CoxTime):
            arrays["grid"] = model.grid_.cut_points
            arrays["baseline_increments"] = model.baseline_increments_
            meta["time_range"] = [model.t_lo_, model.t_hi_]
        elif isinstance(model, DeepHit):
            arrays["grid"] = model.grid_.cut_points
    np.savez(path, meta=json.dumps(meta), **arrays)


def load_model(path):
    """Rebuild a fitted model saved by :func:`save_model`."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta["version"] != MODEL_BLOB_VERSION:
            raise ValueError(f"unsupported model blob version {meta['version']}")
        arrays = {k: data[k] for k in data.files if k != "meta"}
    cls = {
        "CoxRegression": CoxRegression,
        "NeuralCoxPH": NeuralCoxPH,
        "CoxTime": CoxTime,
        "DeepHit": DeepHit,
        "Mtlr": Mtlr,
    }[_MODEL_TAGS[meta["tag"]]]
    model = cls(**meta["params"])
    model.n_features_in_ = meta["n_features_in"]
    if cls is CoxRegression:
        model.coef_ = arrays["coef"]
        model.baseline_times_ = arrays["baseline_times"]
        model.baseline_cumhaz_ = arrays["baseline_cumhaz"]
        return model
    if cls is Mtlr:
        model.theta_ = arrays["theta"]
        model.grid_ = TimeGrid(arrays["grid"])
        return model
    spec = MlpSpec(
        input_dim=meta["net_spec"]["input_dim"],
        hidden_layers=tuple(meta["net_spec"]["hidden_layers"]),
        output_dim=meta["net_spec"]["output_dim"],
        batch_norm=meta["net_spec"]["batch_norm"],
        dropout_rate=meta["net_spec"]["dropout_rate"],
    )
    net = Mlp(spec, seed=0)
    for arr, name in zip(net.parameters(), net.parameter_names()):
        arr[...] = arrays[f"net.p.{name}"]
    net.set_buffers(
        (name, arrays[f"net.b.{name}"])
        for name, _ in net.buffers()
    )
    model.net_ = net
    if cls is NeuralCoxPH:
        model.baseline_times_ = arrays["baseline_times"]
        model.baseline_cumhaz_ = arrays["baseline_cumhaz"]
    elif cls is CoxTime:
        model.grid_ = TimeGrid(arrays["grid"])
        model.baseline_increments_ = arrays["baseline_increments"]
        model.t_lo_, model.t_hi_ = meta["time_range"]
    elif cls is DeepHit:
        model.grid_ = TimeGrid(arrays["grid"])
    return model
