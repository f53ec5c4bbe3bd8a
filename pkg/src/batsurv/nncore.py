"""Minimal dense feedforward network with manual backward passes.

Everything runs in float64 numpy: dense layers, batch normalization,
inverted dropout, ReLU, an adaptive-moment optimizer, a generic
mini-batch training loop with patience-based early stopping, and a
central-finite-difference gradient checker.  The survival losses in
``models`` supply their own gradients with respect to the network output
and backpropagate through these layers.
"""

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NonFiniteLossError, ShapeMismatchError

BN_MOMENTUM = 0.9
BN_EPS = 1e-5


@dataclass
class MlpSpec:
    """Architecture description for :class:`Mlp`."""

    input_dim: int
    hidden_layers: tuple = (64, 64)
    output_dim: int = 1
    batch_norm: bool = True
    dropout_rate: float = 0.1

    def __post_init__(self):
        self.hidden_layers = tuple(int(w) for w in self.hidden_layers)
        if any(w <= 0 for w in self.hidden_layers):
            raise ValueError("hidden widths must be positive")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")


@dataclass
class TrainConfig:
    """Optimizer and early-stopping settings."""

    learning_rate: float = 0.005
    batch_size: int = 128
    max_epochs: int = 500
    patience: int = 10
    seed: int = 0
    l2_penalty: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be >= 0")


class _Dense:
    def __init__(self, n_in, n_out, rng):
        bound = 1.0 / np.sqrt(n_in)
        self.W = rng.uniform(-bound, bound, size=(n_in, n_out))
        self.b = np.zeros(n_out)

    def forward(self, x, training, rng, update_stats):
        return x @ self.W + self.b, x

    def backward(self, dout, cache):
        x = cache
        self.dW = x.T @ dout
        self.db = dout.sum(axis=0)
        return dout @ self.W.T

    def params(self):
        return [("W", self.W), ("b", self.b)]

    def grads(self):
        return [self.dW, self.db]


class _BatchNorm:
    def __init__(self, width):
        self.gamma = np.ones(width)
        self.beta = np.zeros(width)
        self.running_mean = np.zeros(width)
        self.running_var = np.ones(width)

    def forward(self, x, training, rng, update_stats):
        batch_stats = training and x.shape[0] > 1
        if batch_stats:
            mu = x.mean(axis=0)
            xhat = x - mu
            var = np.einsum("ij,ij->j", xhat, xhat) / x.shape[0]
            if update_stats:
                self.running_mean = BN_MOMENTUM * self.running_mean + (1 - BN_MOMENTUM) * mu
                self.running_var = BN_MOMENTUM * self.running_var + (1 - BN_MOMENTUM) * var
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            xhat *= inv_std
        else:
            inv_std = 1.0 / np.sqrt(self.running_var + BN_EPS)
            xhat = (x - self.running_mean) * inv_std
        out = self.gamma * xhat + self.beta
        return out, (xhat, inv_std, batch_stats)

    def backward(self, dout, cache):
        xhat, inv_std, batch_stats = cache
        self.dgamma = np.einsum("ij,ij->j", dout, xhat)
        self.dbeta = dout.sum(axis=0)
        dxhat = dout * self.gamma
        if not batch_stats:
            dxhat *= inv_std
            return dxhat
        n = dout.shape[0]
        s1 = dxhat.sum(axis=0)
        s2 = np.einsum("ij,ij->j", dxhat, xhat)
        dx = dxhat
        dx -= s1 / n
        dx -= xhat * (s2 / n)
        dx *= inv_std
        return dx

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def grads(self):
        return [self.dgamma, self.dbeta]

    def buffers(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]


class _Relu:
    def forward(self, x, training, rng, update_stats):
        mask = x > 0
        return x * mask, mask

    def backward(self, dout, cache):
        return dout * cache

    def params(self):
        return []

    def grads(self):
        return []


class _Dropout:
    def __init__(self, rate):
        self.rate = rate

    def forward(self, x, training, rng, update_stats):
        if not training or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("training-mode dropout needs the run's random stream")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, dout, cache):
        if cache is None:
            return dout
        return dout * cache

    def params(self):
        return []

    def grads(self):
        return []


class Mlp:
    """Dense feedforward network described by an :class:`MlpSpec`.

    ``forward`` is pure unless ``update_stats`` is set (batch-norm running
    statistics); in eval mode dropout is disabled and running statistics
    are used, so outputs are deterministic.
    """

    def __init__(self, spec, seed=0):
        self.spec = spec
        rng = np.random.default_rng(seed)
        self.layers = []
        n_in = spec.input_dim
        for width in spec.hidden_layers:
            self.layers.append(_Dense(n_in, width, rng))
            if spec.batch_norm:
                self.layers.append(_BatchNorm(width))
            self.layers.append(_Relu())
            if spec.dropout_rate > 0:
                self.layers.append(_Dropout(spec.dropout_rate))
            n_in = width
        self.layers.append(_Dense(n_in, spec.output_dim, rng))

    def forward(self, x, training=False, rng=None, update_stats=False):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ShapeMismatchError(
                f"expected (n, {self.spec.input_dim}) inputs, got {x.shape}"
            )
        self._caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, training, rng, update_stats)
            self._caches.append(cache)
        return x

    def backward(self, dout):
        """Backpropagate ``dout`` (gradient at the output) through the last
        forward pass; parameter gradients are accessible via :meth:`grads`."""
        for layer, cache in zip(reversed(self.layers), reversed(self._caches)):
            dout = layer.backward(dout, cache)
        return dout

    def parameters(self):
        """Flat list of parameter arrays, updated in place by the optimizer."""
        return [p for layer in self.layers for _, p in layer.params()]

    def parameter_names(self):
        return [
            f"layer{i}.{name}"
            for i, layer in enumerate(self.layers)
            for name, _ in layer.params()
        ]

    def grads(self):
        return [g for layer in self.layers for g in layer.grads()]

    def buffers(self):
        out = []
        for i, layer in enumerate(self.layers):
            if isinstance(layer, _BatchNorm):
                for name, buf in layer.buffers():
                    out.append((f"layer{i}.{name}", buf))
        return out

    def l2_value_and_grads(self, penalty):
        """Quadratic penalty on dense weights (not biases or norm params)."""
        if penalty == 0.0:
            return 0.0, None
        value = 0.0
        grads = []
        for layer in self.layers:
            for name, p in layer.params():
                if isinstance(layer, _Dense) and name == "W":
                    value += penalty * float(np.sum(p * p))
                    grads.append(2.0 * penalty * p)
                else:
                    grads.append(np.zeros_like(p))
        return value, grads

    def set_buffers(self, named):
        lookup = dict(named)
        for i, layer in enumerate(self.layers):
            if isinstance(layer, _BatchNorm):
                layer.running_mean = lookup[f"layer{i}.running_mean"].copy()
                layer.running_var = lookup[f"layer{i}.running_var"].copy()


class Adam:
    """Adaptive-moment estimation over a list of parameter arrays."""

    def __init__(self, params, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


@dataclass
class FitResult:
    best_epoch: int
    best_val_loss: float
    n_epochs: int
    train_history: list = field(default_factory=list)
    val_history: list = field(default_factory=list)


def fit_network(params, config, train_step, val_loss, n_items):
    """Mini-batch training with patience-based early stopping.

    ``params`` are the arrays the optimizer updates in place.
    ``train_step(batch_indices, rng) -> (loss, grads)`` computes one
    mini-batch loss and its parameter gradients; ``val_loss() -> float``
    scores the current parameters.  Items (whatever the caller batches
    over) are reshuffled every epoch from the run's seeded stream.  The
    parameters from the best validation epoch are restored before
    returning.  Raises NonFiniteLossError as soon as any loss is NaN or
    infinite.
    """
    rng = np.random.default_rng(config.seed)
    opt = Adam(params, config.learning_rate)
    best_val = np.inf
    best_state = [p.copy() for p in params]
    best_epoch = -1
    bad_epochs = 0
    result = FitResult(best_epoch=-1, best_val_loss=np.inf, n_epochs=0)
    for epoch in range(config.max_epochs):
        order = rng.permutation(n_items)
        epoch_losses = []
        for start in range(0, n_items, config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grads = train_step(batch, rng)
            if not np.isfinite(loss):
                raise NonFiniteLossError(
                    f"training loss became {loss} at epoch {epoch}"
                )
            opt.step(grads)
            epoch_losses.append(float(loss))
        vloss = float(val_loss())
        if not np.isfinite(vloss):
            raise NonFiniteLossError(f"validation loss became {vloss} at epoch {epoch}")
        result.train_history.append(float(np.mean(epoch_losses)))
        result.val_history.append(vloss)
        result.n_epochs = epoch + 1
        if vloss < best_val:
            best_val = vloss
            best_state = [p.copy() for p in params]
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break
    for p, saved in zip(params, best_state):
        p[...] = saved
    result.best_epoch = best_epoch
    result.best_val_loss = best_val
    return result


def grad_check(params, loss_fn, epsilon=1e-5, max_entries=5000, seed=0):
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn() -> (loss, grads)`` must be deterministic (eval mode or a
    fixed dropout mask) and its gradients aligned with ``params``.  Above
    ``max_entries`` total parameters a seeded random subsample is checked.
    """
    if not 0 < epsilon <= 1e-2:
        raise ValueError("epsilon must be in (0, 1e-2]")
    _, analytic = loss_fn()
    flat_params = []
    flat_analytic = []
    for p, g in zip(params, analytic):
        flat_params.extend((p, i) for i in range(p.size))
        flat_analytic.extend(np.asarray(g).ravel())
    flat_analytic = np.asarray(flat_analytic)
    n_total = len(flat_params)
    idx = np.arange(n_total)
    if n_total > max_entries:
        idx = np.random.default_rng(seed).choice(n_total, size=max_entries, replace=False)
    fd = np.empty(idx.size)
    for out_pos, k in enumerate(idx):
        p, i = flat_params[k]
        flat = p.reshape(-1)
        orig = flat[i]
        h = epsilon * max(1.0, abs(orig))
        flat[i] = orig + h
        up = loss_fn()[0]
        flat[i] = orig - h
        down = loss_fn()[0]
        flat[i] = orig
        fd[out_pos] = (up - down) / (2.0 * h)
    an = flat_analytic[idx]
    scale = max(np.abs(an).max(initial=0.0), np.abs(fd).max(initial=0.0), 1e-8)
    denom = np.maximum(np.maximum(np.abs(an), np.abs(fd)), 1e-4 * scale)
    return float(np.max(np.abs(fd - an) / denom))


# --- parameter serialization ---------------------------------------------------

BLOB_VERSION = 1


def save_params(fh_or_path, spec, params_named, buffers_named=()):
    """Write named parameter arrays (and buffers) to a versioned npz blob."""
    meta = {
        "version": BLOB_VERSION,
        "spec": {
            "input_dim": spec.input_dim,
            "hidden_layers": list(spec.hidden_layers),
            "output_dim": spec.output_dim,
            "batch_norm": spec.batch_norm,
            "dropout_rate": spec.dropout_rate,
        },
        "param_names": [name for name, _ in params_named],
        "buffer_names": [name for name, _ in buffers_named],
    }
    arrays = {f"p:{name}": arr for name, arr in params_named}
    arrays.update({f"b:{name}": arr for name, arr in buffers_named})
    np.savez(fh_or_path, meta=json.dumps(meta), **arrays)


def load_params(fh_or_path):
    """Read a blob written by :func:`save_params`.

    Returns (spec, params dict, buffers dict); arrays come back bit-exact.
    """
    with np.load(fh_or_path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta["version"] != BLOB_VERSION:
            raise ValueError(f"unsupported blob version {meta['version']}")
        spec = MlpSpec(
            input_dim=meta["spec"]["input_dim"],
            hidden_layers=tuple(meta["spec"]["hidden_layers"]),
            output_dim=meta["spec"]["output_dim"],
            batch_norm=meta["spec"]["batch_norm"],
            dropout_rate=meta["spec"]["dropout_rate"],
        )
        params = {name: data[f"p:{name}"] for name in meta["param_names"]}
        buffers = {name: data[f"b:{name}"] for name in meta["buffer_names"]}
    return spec, params, buffers


def mlp_to_blob(net):
    buf = io.BytesIO()
    save_params(buf, net.spec, list(zip(net.parameter_names(), net.parameters())),
                net.buffers())
    return buf.getvalue()


def mlp_from_blob(blob, seed=0):
    spec, params, buffers = load_params(io.BytesIO(blob))
    net = Mlp(spec, seed=seed)
    for arr, name in zip(net.parameters(), net.parameter_names()):
        arr[...] = params[name]
    if buffers:
        net.set_buffers(buffers.items())
    return net
