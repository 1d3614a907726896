"""Single-hidden-layer denoising autoencoder, trained with Adam and dropout.

The network maps a degraded subpattern ``x`` (length ``n_in = N^2``) to

    h = relu(W x + b)            (hidden, ``n_hidden`` units)
    o = relu(W_out h + b_out)    (output, ``n_in`` units)

and is fit to clean targets under the per-sample squared error
``e = |target - o|^2``. Everything is plain numpy; inputs may be a single
vector or a ``(K, n_in)`` batch.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from holorestore.tiling import tile, untile

log = logging.getLogger(__name__)

PARAM_NAMES = ("W", "b", "W_out", "b_out")

MODEL_MAGIC = b"HRAE"
MODEL_VERSION = 1


class DivergenceError(ArithmeticError):
    """Training produced a non-finite loss or gradient."""


@dataclass
class AeParams:
    W: np.ndarray  # (n_hidden, n_in)
    b: np.ndarray  # (n_hidden,)
    W_out: np.ndarray  # (n_in, n_hidden)
    b_out: np.ndarray  # (n_in,)

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        m, n = self.W.shape
        expected = {"b": (m,), "W_out": (n, m), "b_out": (n,)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.W.shape[0]

    @classmethod
    def zeros(cls, n_in: int, n_hidden: int) -> "AeParams":
        return cls(
            np.zeros((n_hidden, n_in)), np.zeros(n_hidden), np.zeros((n_in, n_hidden)), np.zeros(n_in)
        )

    def arrays(self):
        return [getattr(self, name) for name in PARAM_NAMES]

    def copy(self) -> "AeParams":
        return AeParams(*(a.copy() for a in self.arrays()))

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass(frozen=True)
class AdamConfig:
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass
class AdamState:
    m: AeParams
    v: AeParams
    t: int = 0

    @classmethod
    def zeros_like(cls, params: AeParams) -> "AdamState":
        return cls(AeParams.zeros(params.n_in, params.n_hidden), AeParams.zeros(params.n_in, params.n_hidden))


@dataclass(frozen=True)
class TrainConfig:
    """Minibatch training settings.

    ``dropout_rate`` is the fraction of hidden units dropped per sample;
    ``epochs`` counts full passes over the data.
    """

    n_hidden: int = 50
    batch_size: int = 100
    dropout_rate: float = 0.8
    epochs: int = 40
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0

    def __post_init__(self):
        if self.n_hidden < 1:
            raise ValueError("n_hidden must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def relu(a):
    return np.maximum(a, 0.0)


def init_params(n_in: int, n_hidden: int, seed) -> AeParams:
    """He-normal weights (std ``sqrt(2 / fan_in)``), zero biases."""
    if n_in < 1 or n_hidden < 1:
        raise ValueError("layer sizes must be >= 1")
    rng = np.random.default_rng(seed)
    W = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_hidden, n_in))
    W_out = rng.normal(0.0, np.sqrt(2.0 / n_hidden), size=(n_in, n_hidden))
    return AeParams(W, np.zeros(n_hidden), W_out, np.zeros(n_in))


def _as_batch(params: AeParams, x, mask):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.ndim != 2 or X.shape[1] != params.n_in:
        raise ValueError(f"input has shape {x.shape}, expected (..., {params.n_in})")
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        mask = np.broadcast_to(mask, (X.shape[0], params.n_hidden)) if mask.ndim == 1 else mask
        if mask.shape != (X.shape[0], params.n_hidden):
            raise ValueError(f"mask has shape {mask.shape}, expected ({X.shape[0]}, {params.n_hidden})")
    return X, mask, single


def _forward_batch(params, X, mask, dropout_rate):
    a1 = X @ params.W.T + params.b
    h = relu(a1)
    gate = None
    if mask is not None:
        gate = mask / (1.0 - dropout_rate)
        h = h * gate
    a2 = h @ params.W_out.T + params.b_out
    return a1, gate, h, a2, relu(a2)


def forward(params: AeParams, x, mask=None, dropout_rate: float = 0.0):
    """Return ``(h, o)``.

    When ``mask`` (0/1 over hidden units) is given, hidden activations are
    masked and scaled by ``1 / (1 - dropout_rate)``; without a mask the
    network runs in inference mode.
    """
    X, mask, single = _as_batch(params, x, mask)
    _, _, h, _, o = _forward_batch(params, X, mask, dropout_rate)
    return (h[0], o[0]) if single else (h, o)


def loss(o, x_target):
    """Squared error ``sum((target - o)^2)``; one value per sample for batches."""
    o = np.asarray(o, dtype=np.float64)
    t = np.asarray(x_target, dtype=np.float64)
    if o.shape != t.shape:
        raise ValueError(f"dimension mismatch: {o.shape} vs {t.shape}")
    return np.sum((t - o) ** 2, axis=-1)


def backward(params: AeParams, x, x_target, mask=None, dropout_rate: float = 0.0):
    """Analytic gradient of the loss, averaged over the batch.

    Returns ``(grads, per_sample_loss)``. ReLU has derivative 0 at 0.
    """
    X, mask, single = _as_batch(params, x, mask)
    T = np.atleast_2d(np.asarray(x_target, dtype=np.float64))
    if T.shape != X.shape:
        raise ValueError(f"target has shape {np.shape(x_target)}, expected {np.shape(x)}")
    k = X.shape[0]
    a1, gate, h, a2, o = _forward_batch(params, X, mask, dropout_rate)

    d_a2 = 2.0 * (o - T) * (a2 > 0)
    d_h = d_a2 @ params.W_out
    if gate is not None:
        d_h = d_h * gate
    d_a1 = d_h * (a1 > 0)

    grads = AeParams(
        W=d_a1.T @ X / k,
        b=d_a1.sum(axis=0) / k,
        W_out=d_a2.T @ h / k,
        b_out=d_a2.sum(axis=0) / k,
    )
    losses = loss(o, T)
    return grads, (losses[0] if single else losses)


def adam_step(params: AeParams, grads: AeParams, state: AdamState, hyper: AdamConfig = AdamConfig()):
    """One bias-corrected Adam update. Returns new ``(params, state)``."""
    if not grads.all_finite():
        raise DivergenceError("non-finite gradient")
    t = state.t + 1
    b1, b2 = hyper.beta1, hyper.beta2
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_p.append(p - hyper.alpha * m_hat / (np.sqrt(v_hat) + hyper.epsilon))
        new_m.append(m)
        new_v.append(v)
    return AeParams(*new_p), AdamState(AeParams(*new_m), AeParams(*new_v), t)


def train(inputs, targets, config: TrainConfig, params: AeParams | None = None):
    """Fit the autoencoder to aligned ``(K, n_in)`` input/target arrays.

    Each epoch shuffles the samples, walks them in minibatches (the last
    one may be short), draws a fresh dropout mask per sample and takes one
    Adam step on the batch-mean gradient. Returns ``(params, history)``
    where ``history[e]`` is the mean per-sample training loss of epoch ``e``.
    """
    X = np.asarray(inputs, dtype=np.float64)
    T = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training set is empty")
    if X.shape != T.shape:
        raise ValueError(f"inputs {X.shape} and targets {T.shape} differ in shape")

    rng = np.random.default_rng(config.seed)
    if params is None:
        params = init_params(X.shape[1], config.n_hidden, rng)
    elif params.n_in != X.shape[1]:
        raise ValueError(f"params expect {params.n_in} inputs, data has {X.shape[1]}")
    state = AdamState.zeros_like(params)
    rate = config.dropout_rate
    k = X.shape[0]

    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(k)
        total = 0.0
        for start in range(0, k, config.batch_size):
            idx = order[start:start + config.batch_size]
            mask = None
            if rate > 0:
                mask = (rng.random((idx.size, params.n_hidden)) >= rate).astype(np.float64)
            grads, losses = backward(params, X[idx], T[idx], mask, rate)
            batch_loss = float(np.sum(losses))
            if not np.isfinite(batch_loss):
                raise DivergenceError(f"non-finite loss in epoch {epoch + 1}")
            total += batch_loss
            params, state = adam_step(params, grads, state, config.adam)
        history.append(total / k)
        log.debug("epoch %d mean loss %.6g", epoch + 1, history[-1])
    return params, history


def restore(params: AeParams, image, tile_px: int) -> np.ndarray:
    """Run every ``tile_px`` subpattern of ``image`` through the network, clamp to [0, 1]."""
    if tile_px * tile_px != params.n_in:
        raise ValueError(f"tile size {tile_px} does not match model input size {params.n_in}")
    batch = tile(np.asarray(image, dtype=np.float64), tile_px)
    _, out = forward(params, batch.vectors)
    batch.vectors = np.clip(out, 0.0, 1.0)
    return untile(batch)


# -- serialization ---------------------------------------------------------

_HEADER = struct.Struct("<4sIII")


def save_params(params: AeParams, path) -> None:
    """Write the little-endian ``HRAE`` model file."""
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, params.n_in, params.n_hidden))
        for a in params.arrays():
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_params(path) -> AeParams:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated model file")
    magic, version, n_in, n_hidden = _HEADER.unpack_from(raw)
    if magic != MODEL_MAGIC:
        raise ValueError(f"{path}: not a model file (bad magic {magic!r})")
    if version != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {version}")
    shapes = [(n_hidden, n_in), (n_hidden,), (n_in, n_hidden), (n_in,)]
    expected = _HEADER.size + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    arrays, offset = [], _HEADER.size
    for shape in shapes:
        count = int(np.prod(shape))
        arrays.append(np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64))
        offset += 8 * count
    params = AeParams(*arrays)
    if not params.all_finite():
        raise ValueError(f"{path}: model contains non-finite values")
    return params
