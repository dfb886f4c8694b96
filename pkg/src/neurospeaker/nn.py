"""The sequence classifier: causal TCN, GRU, dense softmax, trained with Adam.

Forward and backward passes are written out explicitly over numpy arrays.
Batches are padded to the longest sequence with a per-sequence valid length;
the GRU state is read at each sequence's last valid step, so padded frames
contribute nothing to predictions or gradients.

Gate math (per time step, row-major batches)::

    z_t = sigmoid(x_t Wz^T + h_{t-1} Uz^T + bz)          update gate
    r_t = sigmoid(x_t Wr^T + h_{t-1} Ur^T + br)          reset gate
    c_t = tanh   (x_t Wc^T + (r_t * h_{t-1}) Uc^T + bc)  candidate
    h_t = z_t * h_{t-1} + (1 - z_t) * c_t

Wg and Ug are stored jointly as one (hidden x (input + hidden)) matrix per
gate and split into views where needed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import DimensionError, InputError, NumericError


@dataclass
class TcnLayerParams:
    """Causal 1-D convolution bank: tap k of ``kernels[f, k, :]`` multiplies
    the input ``width - 1 - k`` steps in the past."""

    kernels: np.ndarray  # (filters, width, input_dim)
    biases: np.ndarray  # (filters,)

    @property
    def n_filters(self) -> int:
        return self.kernels.shape[0]

    @property
    def width(self) -> int:
        return self.kernels.shape[1]

    @property
    def input_dim(self) -> int:
        return self.kernels.shape[2]


@dataclass
class GruLayerParams:
    """One weight matrix per gate, shaped (hidden, input + hidden), plus biases."""

    w_update: np.ndarray
    w_reset: np.ndarray
    w_cand: np.ndarray
    b_update: np.ndarray
    b_reset: np.ndarray
    b_cand: np.ndarray

    @property
    def hidden(self) -> int:
        return self.w_update.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_update.shape[1] - self.hidden


@dataclass
class DenseParams:
    weights: np.ndarray  # (n_out, hidden)
    biases: np.ndarray  # (n_out,)

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


@dataclass
class ClassifierParams:
    tcn: TcnLayerParams
    gru: GruLayerParams
    dense: DenseParams

    @property
    def input_dim(self) -> int:
        return self.tcn.input_dim

    @property
    def n_speakers(self) -> int:
        return self.dense.n_out

    def named_arrays(self) -> Iterator[tuple[str, np.ndarray]]:
        yield "tcn.kernels", self.tcn.kernels
        yield "tcn.biases", self.tcn.biases
        yield "gru.w_update", self.gru.w_update
        yield "gru.w_reset", self.gru.w_reset
        yield "gru.w_cand", self.gru.w_cand
        yield "gru.b_update", self.gru.b_update
        yield "gru.b_reset", self.gru.b_reset
        yield "gru.b_cand", self.gru.b_cand
        yield "dense.weights", self.dense.weights
        yield "dense.biases", self.dense.biases


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], dtype) -> np.ndarray:
    fan_out, fan_in = shape[0], int(np.prod(shape[1:]))
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def init_classifier(
    input_dim: int,
    n_speakers: int,
    rng: np.random.Generator,
    tcn_filters: int = 128,
    tcn_width: int = 3,
    gru_hidden: int = 128,
    dtype=np.float32,
) -> ClassifierParams:
    """Seeded Glorot-uniform weights, zero biases. Draw order is fixed."""
    if n_speakers < 2:
        raise InputError(f"need at least 2 speakers, got {n_speakers}")
    tcn = TcnLayerParams(
        kernels=_glorot(rng, (tcn_filters, tcn_width, input_dim), dtype),
        biases=np.zeros(tcn_filters, dtype=dtype),
    )
    gru = GruLayerParams(
        w_update=_glorot(rng, (gru_hidden, tcn_filters + gru_hidden), dtype),
        w_reset=_glorot(rng, (gru_hidden, tcn_filters + gru_hidden), dtype),
        w_cand=_glorot(rng, (gru_hidden, tcn_filters + gru_hidden), dtype),
        b_update=np.zeros(gru_hidden, dtype=dtype),
        b_reset=np.zeros(gru_hidden, dtype=dtype),
        b_cand=np.zeros(gru_hidden, dtype=dtype),
    )
    dense = DenseParams(
        weights=_glorot(rng, (n_speakers, gru_hidden), dtype),
        biases=np.zeros(n_speakers, dtype=dtype),
    )
    return ClassifierParams(tcn=tcn, gru=gru, dense=dense)


def zero_grads(params: ClassifierParams) -> ClassifierParams:
    return ClassifierParams(
        tcn=TcnLayerParams(np.zeros_like(params.tcn.kernels), np.zeros_like(params.tcn.biases)),
        gru=GruLayerParams(
            *(np.zeros_like(a) for a in (
                params.gru.w_update, params.gru.w_reset, params.gru.w_cand,
                params.gru.b_update, params.gru.b_reset, params.gru.b_cand,
            ))
        ),
        dense=DenseParams(np.zeros_like(params.dense.weights), np.zeros_like(params.dense.biases)),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _im2col(x: np.ndarray, width: int) -> np.ndarray:
    """(B, T, D) -> (B, T, width*D) with causal left zero-padding."""
    b, t, d = x.shape
    padded = np.concatenate([np.zeros((b, width - 1, d), dtype=x.dtype), x], axis=1)
    cols = np.empty((b, t, width * d), dtype=x.dtype)
    for k in range(width):
        cols[:, :, k * d : (k + 1) * d] = padded[:, k : k + t, :]
    return cols


def tcn_forward_batch(x: np.ndarray, params: TcnLayerParams):
    """Causal convolution + ReLU over a (B, T, D) batch; returns output and cache."""
    if x.shape[2] != params.input_dim:
        raise DimensionError(f"TCN expects {params.input_dim} input dims, got {x.shape[2]}")
    cols = _im2col(x, params.width)
    flat_w = params.kernels.reshape(params.n_filters, -1)
    pre = cols @ flat_w.T + params.biases
    out = np.maximum(pre, 0.0)
    return out, (cols, pre > 0)


def tcn_forward(x: np.ndarray, params: TcnLayerParams) -> np.ndarray:
    """Single-sequence (T, D) -> (T, filters) convenience wrapper."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise InputError("tcn_forward expects a (T, D) sequence")
    out, _ = tcn_forward_batch(x[None], params)
    return out[0]


def tcn_backward_batch(d_out, cache, params: TcnLayerParams):
    cols, active = cache
    d_pre = d_out * active
    b, t, _ = d_pre.shape
    flat_w = params.kernels.reshape(params.n_filters, -1)
    d_flat = d_pre.reshape(b * t, -1).T @ cols.reshape(b * t, -1)
    d_cols = d_pre @ flat_w
    d_in = np.zeros((b, t + params.width - 1, params.input_dim), dtype=d_out.dtype)
    d = params.input_dim
    for k in range(params.width):
        d_in[:, k : k + t, :] += d_cols[:, :, k * d : (k + 1) * d]
    grads = TcnLayerParams(
        kernels=d_flat.reshape(params.kernels.shape),
        biases=d_pre.sum(axis=(0, 1)),
    )
    return d_in[:, params.width - 1 :, :], grads


def gru_forward_batch(x: np.ndarray, params: GruLayerParams, lengths: np.ndarray):
    """Run the recurrence over a padded (B, T, F) batch.

    Returns the per-sequence state at its last valid step plus the cache for
    backpropagation through time.
    """
    b, t, f = x.shape
    h_dim = params.hidden
    if f != params.input_dim:
        raise DimensionError(f"GRU expects {params.input_dim} input dims, got {f}")
    wx = np.concatenate(
        [params.w_update[:, :f], params.w_reset[:, :f], params.w_cand[:, :f]], axis=0
    )
    uu = np.ascontiguousarray(params.w_update[:, f:])
    ur = np.ascontiguousarray(params.w_reset[:, f:])
    uc = np.ascontiguousarray(params.w_cand[:, f:])
    u_zr = np.concatenate([uu, ur], axis=0)

    x_proj = x.reshape(b * t, f) @ wx.T
    x_proj = x_proj.reshape(b, t, 3 * h_dim)
    x_proj[:, :, :h_dim] += params.b_update
    x_proj[:, :, h_dim : 2 * h_dim] += params.b_reset
    x_proj[:, :, 2 * h_dim :] += params.b_cand

    h_all = np.zeros((b, t + 1, h_dim), dtype=x.dtype)
    z_all = np.empty((b, t, h_dim), dtype=x.dtype)
    r_all = np.empty((b, t, h_dim), dtype=x.dtype)
    c_all = np.empty((b, t, h_dim), dtype=x.dtype)
    h = h_all[:, 0, :]
    for step in range(t):
        rec_zr = h @ u_zr.T
        z = _sigmoid(x_proj[:, step, :h_dim] + rec_zr[:, :h_dim])
        r = _sigmoid(x_proj[:, step, h_dim : 2 * h_dim] + rec_zr[:, h_dim:])
        c = np.tanh(x_proj[:, step, 2 * h_dim :] + (r * h) @ uc.T)
        h = z * h + (1.0 - z) * c
        z_all[:, step] = z
        r_all[:, step] = r
        c_all[:, step] = c
        h_all[:, step + 1] = h

    last = h_all[np.arange(b), lengths, :]
    cache = (x, h_all, z_all, r_all, c_all, lengths, (uu, ur, uc, u_zr))
    return last, cache


def gru_forward(h_seq: np.ndarray, params: GruLayerParams) -> np.ndarray:
    """Single sequence (T, F) -> final hidden state (hidden,), h0 = 0."""
    h_seq = np.asarray(h_seq)
    if h_seq.ndim != 2:
        raise InputError("gru_forward expects a (T, F) sequence")
    lengths = np.array([h_seq.shape[0]])
    last, _ = gru_forward_batch(h_seq[None], params, lengths)
    return last[0]


def gru_backward_batch(d_last, cache, params: GruLayerParams):
    x, h_all, z_all, r_all, c_all, lengths, mats = cache
    uu, ur, uc, u_zr = mats
    b, t, f = x.shape
    h_dim = params.hidden

    if np.any(lengths == 0):
        raise InputError("sequences must have at least one valid step")

    da_z = np.zeros((b, t, h_dim), dtype=x.dtype)
    da_r = np.zeros((b, t, h_dim), dtype=x.dtype)
    da_c = np.zeros((b, t, h_dim), dtype=x.dtype)
    dh = np.zeros((b, h_dim), dtype=x.dtype)
    for step in range(t - 1, -1, -1):
        ending = lengths == step + 1
        if np.any(ending):
            dh = dh + np.where(ending[:, None], d_last, 0.0)
        z = z_all[:, step]
        r = r_all[:, step]
        c = c_all[:, step]
        h_prev = h_all[:, step]
        dz = dh * (h_prev - c)
        dc = dh * (1.0 - z)
        dh_next = dh * z
        az = dz * z * (1.0 - z)
        ac = dc * (1.0 - c * c)
        d_rh = ac @ uc
        dr = d_rh * h_prev
        ar = dr * r * (1.0 - r)
        da_z[:, step] = az
        da_r[:, step] = ar
        da_c[:, step] = ac
        dh = dh_next + d_rh * r + np.concatenate([az, ar], axis=1) @ u_zr

    h_prev_all = h_all[:, :t, :].reshape(b * t, h_dim)
    rh_all = (r_all * h_all[:, :t, :]).reshape(b * t, h_dim)
    x_flat = x.reshape(b * t, f)
    az_flat = da_z.reshape(b * t, h_dim)
    ar_flat = da_r.reshape(b * t, h_dim)
    ac_flat = da_c.reshape(b * t, h_dim)

    grads = GruLayerParams(
        w_update=np.concatenate([az_flat.T @ x_flat, az_flat.T @ h_prev_all], axis=1),
        w_reset=np.concatenate([ar_flat.T @ x_flat, ar_flat.T @ h_prev_all], axis=1),
        w_cand=np.concatenate([ac_flat.T @ x_flat, ac_flat.T @ rh_all], axis=1),
        b_update=az_flat.sum(axis=0),
        b_reset=ar_flat.sum(axis=0),
        b_cand=ac_flat.sum(axis=0),
    )
    wx = np.concatenate([params.w_update[:, :f], params.w_reset[:, :f], params.w_cand[:, :f]], axis=0)
    d_x = np.concatenate([az_flat, ar_flat, ac_flat], axis=1) @ wx
    return d_x.reshape(b, t, f), grads


def dense_softmax(state: np.ndarray, params: DenseParams) -> np.ndarray:
    """Linear layer then softmax with max subtraction; rows sum to 1."""
    state = np.asarray(state)
    squeeze = state.ndim == 1
    logits = np.atleast_2d(state) @ params.weights.T + params.biases
    logits = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(logits)
    probs = expd / expd.sum(axis=1, keepdims=True)
    return probs[0] if squeeze else probs


PROB_FLOOR = 1e-12


def cross_entropy(probs: np.ndarray, one_hot_label: np.ndarray) -> float:
    """Negative log probability of the labelled class, floored at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    label = int(np.argmax(one_hot_label))
    return float(-np.log(max(probs[label], PROB_FLOOR)))


@dataclass
class ForwardCache:
    x: np.ndarray
    lengths: np.ndarray
    labels: np.ndarray
    tcn_cache: tuple
    gru_cache: tuple
    last_state: np.ndarray
    probs: np.ndarray


def forward_batch(
    params: ClassifierParams, x: np.ndarray, lengths: np.ndarray, labels: np.ndarray | None = None
) -> tuple[np.ndarray, float | None, ForwardCache]:
    """Full forward pass over a padded batch.

    Returns (probs, mean loss or None when unlabelled, cache for backward).
    """
    x = np.asarray(x)
    lengths = np.asarray(lengths, dtype=np.int64)
    if x.ndim != 3:
        raise InputError("forward_batch expects (B, T, D) input")
    if np.any(lengths < 1) or np.any(lengths > x.shape[1]):
        raise InputError("lengths must lie in 1..T")
    tcn_out, tcn_cache = tcn_forward_batch(x, params.tcn)
    last, gru_cache = gru_forward_batch(tcn_out, params.gru, lengths)
    probs = dense_softmax(last, params.dense)
    loss = None
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        picked = np.maximum(probs[np.arange(len(labels)), labels], PROB_FLOOR)
        loss = float(np.mean(-np.log(picked)))
    cache = ForwardCache(x, lengths, labels, tcn_cache, gru_cache, last, probs)
    return probs, loss, cache


def backward(cache: ForwardCache, params: ClassifierParams) -> ClassifierParams:
    """Exact gradients of the mean batch loss for every parameter."""
    if cache.labels is None:
        raise InputError("backward needs a labelled forward pass")
    b = cache.probs.shape[0]
    d_logits = cache.probs.astype(cache.x.dtype, copy=True)
    d_logits[np.arange(b), cache.labels] -= 1.0
    d_logits /= b
    dense_grads = DenseParams(
        weights=d_logits.T @ cache.last_state,
        biases=d_logits.sum(axis=0),
    )
    d_last = d_logits @ params.dense.weights
    d_tcn_out, gru_grads = gru_backward_batch(d_last, cache.gru_cache, params.gru)
    _, tcn_grads = tcn_backward_batch(d_tcn_out, cache.tcn_cache, params.tcn)
    grads = ClassifierParams(tcn=tcn_grads, gru=gru_grads, dense=dense_grads)
    for name, arr in grads.named_arrays():
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite gradient in {name}")
    return grads


@dataclass
class AdamState:
    """Bias-corrected Adam moments keyed by parameter name."""

    lr: float
    beta1: float
    beta2: float
    epsilon: float
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]


def adam_init(
    params: ClassifierParams,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> AdamState:
    m = {name: np.zeros_like(arr) for name, arr in params.named_arrays()}
    v = {name: np.zeros_like(arr) for name, arr in params.named_arrays()}
    return AdamState(lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon, step=0, m=m, v=v)


def adam_step(
    params: ClassifierParams, grads: ClassifierParams, state: AdamState
) -> ClassifierParams:
    """In-place bias-corrected update; returns ``params`` for chaining."""
    state.step += 1
    b1c = 1.0 - state.beta1**state.step
    b2c = 1.0 - state.beta2**state.step
    grad_map = dict(grads.named_arrays())
    for name, arr in params.named_arrays():
        g = grad_map[name]
        if g.shape != arr.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter shape {arr.shape} for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        update = (m / b1c) / (np.sqrt(v / b2c) + state.epsilon)
        arr -= state.lr * update.astype(arr.dtype)
    return params


def classify(params: ClassifierParams, frames: np.ndarray) -> np.ndarray:
    """Probabilities for one (T, D) sequence."""
    frames = np.asarray(frames, dtype=params.tcn.kernels.dtype)
    probs, _, _ = forward_batch(params, frames[None], np.array([frames.shape[0]]))
    return probs[0]


def pad_batch(sequences: list[np.ndarray], dtype=None) -> tuple[np.ndarray, np.ndarray]:
    """Stack variable-length (T_i, D) arrays into (B, T_max, D) plus lengths."""
    if not sequences:
        raise InputError("cannot pad an empty batch")
    dims = {s.shape[1] for s in sequences}
    if len(dims) != 1:
        raise DimensionError(f"inconsistent feature dims in batch: {sorted(dims)}")
    if dtype is None:
        dtype = sequences[0].dtype
    lengths = np.array([s.shape[0] for s in sequences], dtype=np.int64)
    out = np.zeros((len(sequences), int(lengths.max()), dims.pop()), dtype=dtype)
    for i, s in enumerate(sequences):
        out[i, : s.shape[0], :] = s
    return out, lengths
