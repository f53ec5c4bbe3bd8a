import numpy as np
import pytest

from batsurv.exceptions import NonFiniteLossError, ShapeMismatchError
from batsurv.models import cox_partial_loss
from batsurv.nncore import (
    Adam,
    Mlp,
    MlpSpec,
    TrainConfig,
    fit_network,
    grad_check,
    mlp_from_blob,
    mlp_to_blob,
)
from batsurv.survdata import generate_synthetic


def small_net(**overrides):
    kwargs = dict(input_dim=4, hidden_layers=(8, 8), output_dim=1,
                  batch_norm=True, dropout_rate=0.1)
    kwargs.update(overrides)
    return Mlp(MlpSpec(**kwargs), seed=3)


def test_zero_final_layer_outputs_zero(rng):
    net = small_net()
    net.layers[-1].W[...] = 0.0
    net.layers[-1].b[...] = 0.0
    out = net.forward(rng.standard_normal((6, 4)))
    assert np.array_equal(out, np.zeros((6, 1)))


def test_eval_mode_deterministic(rng):
    net = small_net()
    x = rng.standard_normal((5, 4))
    assert np.array_equal(net.forward(x), net.forward(x))


def test_shape_mismatch(rng):
    net = small_net()
    with pytest.raises(ShapeMismatchError):
        net.forward(rng.standard_normal((5, 3)))


def test_no_norm_no_dropout_is_affine_relu_chain(rng):
    net = small_net(batch_norm=False, dropout_rate=0.0)
    x = rng.standard_normal((7, 4))
    h = x
    for layer in (0, 1):
        W, b = net.layers[2 * layer].W, net.layers[2 * layer].b
        h = np.maximum(h @ W + b, 0.0)
    expected = h @ net.layers[-1].W + net.layers[-1].b
    assert np.allclose(net.forward(x), expected, atol=0, rtol=0)


def test_quadratic_toy_convergence():
    w_star = np.array([1.5, -2.0, 0.5])
    w = np.zeros(3)
    config = TrainConfig(learning_rate=0.05, batch_size=1, max_epochs=2000,
                         patience=2000, seed=0)

    def train_step(batch, rng):
        return float(np.sum((w - w_star) ** 2)), [2.0 * (w - w_star)]

    def val_loss():
        return float(np.sum((w - w_star) ** 2))

    result = fit_network([w], config, train_step, val_loss, 1)
    assert result.n_epochs <= 2000
    assert np.abs(w - w_star).max() < 1e-3


def test_early_stopping_returns_best_epoch_params():
    # loss worsens every epoch: training should stop after patience runs out
    # and hand back the parameters from the first (best) epoch
    w = np.array([0.0])
    counter = {"epoch": 0}

    def train_step(batch, rng):
        counter["epoch"] += 1
        return 1.0, [np.array([-1.0])]  # w grows by ~lr each step

    def val_loss():
        return float(counter["epoch"])

    config = TrainConfig(learning_rate=0.5, batch_size=1, max_epochs=50,
                         patience=1, seed=0)
    result = fit_network([w], config, train_step, val_loss, 1)
    assert result.n_epochs == 2
    assert result.best_epoch == 0
    # restored to the value right after the first epoch's single step
    # (one Adam step of size lr, up to the epsilon in the denominator)
    assert w[0] == pytest.approx(0.5, abs=1e-6)


def test_non_finite_loss_raises():
    w = np.zeros(2)

    def train_step(batch, rng):
        return float("nan"), [np.zeros(2)]

    config = TrainConfig(learning_rate=0.1, batch_size=1, max_epochs=5,
                         patience=2, seed=0)
    with pytest.raises(NonFiniteLossError):
        fit_network([w], config, train_step, lambda: 0.0, 1)


def test_grad_check_linear_squared_error(rng):
    net = small_net(batch_norm=False, dropout_rate=0.0, hidden_layers=())
    x = rng.standard_normal((10, 4))
    y = rng.standard_normal((10, 1))

    def loss_fn():
        out = net.forward(x)
        diff = out - y
        net.backward(2.0 * diff / diff.size)
        return float(np.mean(diff ** 2)), net.grads()

    assert grad_check(net.parameters(), loss_fn) < 1e-6


def test_grad_check_full_net_batchnorm_train_mode(rng):
    # batch statistics depend deterministically on the fixed batch, so the
    # train-mode backward is finite-difference checkable with dropout off
    net = small_net(dropout_rate=0.0)
    x = rng.standard_normal((12, 4))

    def loss_fn():
        out = net.forward(x, training=True, rng=None, update_stats=False)
        net.backward(2.0 * out / out.size)
        return float(np.mean(out ** 2)), net.grads()

    assert grad_check(net.parameters(), loss_fn) < 1e-4


def test_grad_check_coxph_loss_through_net():
    data = generate_synthetic(20, 4, np.array([1.0, -0.5, 0.0, 0.2]), 0.3, seed=6)
    X, durations, events = data.X, data.durations, data.events
    net = small_net(batch_norm=False, dropout_rate=0.0)

    def loss_fn():
        g = net.forward(X).ravel()
        loss, dg = cox_partial_loss(g, durations, events)
        net.backward(dg.reshape(-1, 1))
        return loss, net.grads()

    assert grad_check(net.parameters(), loss_fn) < 1e-4


def test_dropout_grad_check_runs_in_eval_mode(rng):
    # documented contract: the check itself disables dropout
    net = small_net(dropout_rate=0.5)
    x = rng.standard_normal((6, 4))

    def loss_fn():
        out = net.forward(x)  # eval mode: dropout off
        net.backward(np.ones_like(out))
        return float(out.sum()), net.grads()

    assert grad_check(net.parameters(), loss_fn) < 1e-4


def test_training_bit_reproducible():
    data = generate_synthetic(30, 3, np.array([1.0, 0.0, -0.3]), 0.2, seed=2)
    X, durations, events = data.X, data.durations, data.events
    event_idx = np.nonzero(events == 1)[0]

    def fit_once():
        net = Mlp(MlpSpec(input_dim=3, hidden_layers=(8,), output_dim=1),
                  seed=7)
        config = TrainConfig(learning_rate=0.01, batch_size=8, max_epochs=5,
                             patience=5, seed=7)

        def train_step(batch, rng):
            g = net.forward(X, training=True, rng=rng, update_stats=True).ravel()
            loss, dg = cox_partial_loss(g, durations, events, event_idx[batch])
            net.backward(dg.reshape(-1, 1))
            return loss, net.grads()

        def val_loss():
            g = net.forward(X).ravel()
            return cox_partial_loss(g, durations, events)[0]

        fit_network(net.parameters(), config, train_step, val_loss,
                    event_idx.size)
        return net

    a, b = fit_once(), fit_once()
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert np.array_equal(pa, pb)


def test_adam_moment_arithmetic():
    # single step from zero moments: update = lr * g/|g| elementwise
    p = np.array([1.0, -1.0])
    opt = Adam([p], learning_rate=0.1)
    opt.step([np.array([2.0, -4.0])])
    assert np.allclose(p, [1.0 - 0.1 * (2.0 / (2.0 + 1e-8)),
                           -1.0 + 0.1 * (4.0 / (4.0 + 1e-8))], rtol=1e-12)


def test_blob_round_trip_bit_exact(rng):
    net = small_net()
    net.forward(rng.standard_normal((32, 4)), training=True,
                rng=np.random.default_rng(0), update_stats=True)
    blob = mlp_to_blob(net)
    back = mlp_from_blob(blob)
    for pa, pb in zip(net.parameters(), back.parameters()):
        assert np.array_equal(pa, pb)
    for (na, ba), (nb, bb) in zip(net.buffers(), back.buffers()):
        assert na == nb and np.array_equal(ba, bb)
    x = rng.standard_normal((5, 4))
    assert np.array_equal(net.forward(x), back.forward(x))
