"""Minimal numerical engine: dense and LSTM layers with exact analytic
gradients, masked softmax cross-entropy, Adam, Glorot initialization, and
finite-difference gradient verification.

Everything runs in float64 numpy. A ParamStore is a plain dict[str, ndarray];
every consumer iterates it in sorted-key (lexicographic) order so behaviour is
deterministic. Gate order inside the stacked 4h dimension is fixed as
[input i, forget f, cell g, output o].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ParamStore = dict  # name -> np.ndarray, iterated via sorted(keys)


class ShapeMismatch(ValueError):
    pass


class AllMasked(ValueError):
    pass


class NameMismatch(ValueError):
    pass


def sigmoid(x):
    # piecewise form avoids overflow in exp for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmParams:
    """One LSTM cell: W (4h x in), U (4h x h), b (4h)."""

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    @property
    def hidden(self) -> int:
        return self.U.shape[1]

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    def check(self):
        h = self.hidden
        if self.W.shape[0] != 4 * h or self.U.shape != (4 * h, h) or self.b.shape != (4 * h,):
            raise ShapeMismatch(
                f"inconsistent LSTM shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}"
            )
        return self


def lstm_cell_forward(x, h, c, p: LstmParams):
    """One LSTM step over a batch of rows.

    x: [B, in], h: [B, h], c: [B, h] -> (h', c', cache).
    i, f, o are logistic gates, g the tanh cell candidate;
    c' = f*c + i*g, h' = o*tanh(c').
    """
    p.check()
    H = p.hidden
    if x.shape[1] != p.input_dim or h.shape[1] != H or c.shape[1] != H:
        raise ShapeMismatch(
            f"x{x.shape} h{h.shape} c{c.shape} vs in={p.input_dim} hidden={H}"
        )
    pre = x @ p.W.T + h @ p.U.T + p.b
    return lstm_cell_from_pre(pre, h, c, p)


def lstm_cell_from_pre(pre, h, c, p: LstmParams):
    """LSTM step given precomputed gate pre-activations (pre = Wx + Uh + b)."""
    H = p.hidden
    i = sigmoid(pre[:, 0:H])
    f = sigmoid(pre[:, H : 2 * H])
    g = np.tanh(pre[:, 2 * H : 3 * H])
    o = sigmoid(pre[:, 3 * H :])
    c_new = f * c + i * g
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c
    cache = (i, f, g, o, c, tanh_c)
    return h_new, c_new, cache


def lstm_cell_backward(d_h, d_c, cache, x, h, p: LstmParams):
    """Exact gradients of one LSTM step.

    d_h, d_c: upstream gradients on (h', c'). Returns
    (d_x, d_h_prev, d_c_prev, dW, dU, db).
    """
    i, f, g, o, c_prev, tanh_c = cache
    d_o = d_h * tanh_c
    d_cn = d_c + d_h * o * (1.0 - tanh_c * tanh_c)
    d_i = d_cn * g
    d_f = d_cn * c_prev
    d_g = d_cn * i
    d_c_prev = d_cn * f
    d_pre = np.concatenate(
        [
            d_i * i * (1.0 - i),
            d_f * f * (1.0 - f),
            d_g * (1.0 - g * g),
            d_o * o * (1.0 - o),
        ],
        axis=1,
    )
    dW = d_pre.T @ x
    dU = d_pre.T @ h
    db = d_pre.sum(axis=0)
    d_x = d_pre @ p.W
    d_h_prev = d_pre @ p.U
    return d_x, d_h_prev, d_c_prev, dW, dU, db


def lstm_cell_backward_from_pre(d_h, d_c, cache, h, p: LstmParams):
    """Like lstm_cell_backward but stops at the pre-activation gradient,
    for callers that projected inputs up front. Returns
    (d_pre, d_h_prev, d_c_prev, dU contribution pieces are left to the caller).
    """
    i, f, g, o, c_prev, tanh_c = cache
    d_o = d_h * tanh_c
    d_cn = d_c + d_h * o * (1.0 - tanh_c * tanh_c)
    d_i = d_cn * g
    d_f = d_cn * c_prev
    d_g = d_cn * i
    d_c_prev = d_cn * f
    d_pre = np.concatenate(
        [
            d_i * i * (1.0 - i),
            d_f * f * (1.0 - f),
            d_g * (1.0 - g * g),
            d_o * o * (1.0 - o),
        ],
        axis=1,
    )
    d_h_prev = d_pre @ p.U
    return d_pre, d_h_prev, d_c_prev


def dense_forward(x, W, b):
    """y = x W^T + b for a batch of row vectors."""
    if x.shape[-1] != W.shape[1] or b.shape != (W.shape[0],):
        raise ShapeMismatch(f"x{x.shape} W{W.shape} b{b.shape}")
    return x @ W.T + b


def dense_backward(d_y, x, W):
    """Gradients of dense_forward: returns (d_x, dW, db)."""
    d_x = d_y @ W
    dW = d_y.T @ x
    db = d_y.sum(axis=0)
    return d_x, dW, db


def softmax(logits):
    """Row-wise softmax with max-subtraction overflow guard."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits, targets, mask):
    """Mean masked cross-entropy and its gradient w.r.t. logits.

    logits [n, k], targets [n] int, mask [n] in {0, 1}. Loss averages
    -log softmax(logits)[target] over masked rows; gradient is zero at
    masked-out rows.
    """
    n, k = logits.shape
    if k < 2:
        raise ShapeMismatch("need at least two classes")
    mask = np.asarray(mask, dtype=np.float64)
    total = mask.sum()
    if total == 0:
        raise AllMasked("every row is masked out")
    probs = softmax(logits)
    row_loss = -np.log(probs[np.arange(n), targets])
    loss = float((row_loss * mask).sum() / total)
    grad = probs.copy()
    grad[np.arange(n), targets] -= 1.0
    grad *= (mask / total)[:, None]
    return loss, grad


@dataclass
class AdamState:
    """Per-parameter Adam moments plus the shared step counter."""

    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: ParamStore, grads: ParamStore, st: AdamState) -> tuple[ParamStore, AdamState]:
    """One in-place Adam update with bias correction."""
    if set(params.keys()) != set(grads.keys()):
        raise NameMismatch(
            f"param/grad name sets differ: {sorted(set(params) ^ set(grads))}"
        )
    st.t += 1
    b1t = 1.0 - st.beta1**st.t
    b2t = 1.0 - st.beta2**st.t
    for name in sorted(params.keys()):
        g = grads[name]
        if name not in st.m:
            st.m[name] = np.zeros_like(params[name])
            st.v[name] = np.zeros_like(params[name])
        m = st.m[name]
        v = st.v[name]
        m *= st.beta1
        m += (1.0 - st.beta1) * g
        v *= st.beta2
        v += (1.0 - st.beta2) * (g * g)
        params[name] -= st.alpha * (m / b1t) / (np.sqrt(v / b2t) + st.eps)
    return params, st


@dataclass(frozen=True)
class ParamSpec:
    """One tensor to initialize: glorot weights, plain zeros, or an LSTM bias
    (zeros with the forget-gate slice set to 1.0)."""

    name: str
    shape: tuple
    init: str = "glorot"  # glorot | zeros | lstm_bias


def init_params(specs: list[ParamSpec], seed: int) -> ParamStore:
    """Glorot-uniform weights, zero biases, LSTM forget-gate bias 1.0.

    Tensors are drawn in sorted-name order from one PCG64 stream so the same
    seed always yields the same store.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    store: ParamStore = {}
    for spec in sorted(specs, key=lambda s: s.name):
        if spec.name in store:
            raise NameMismatch(f"duplicate parameter name {spec.name}")
        if spec.init == "glorot":
            fan_out, fan_in = spec.shape
            s = np.sqrt(6.0 / (fan_in + fan_out))
            store[spec.name] = rng.uniform(-s, s, size=spec.shape)
        elif spec.init == "zeros":
            store[spec.name] = np.zeros(spec.shape)
        elif spec.init == "lstm_bias":
            (four_h,) = spec.shape
            h = four_h // 4
            b = np.zeros(four_h)
            b[h : 2 * h] = 1.0  # forget gate open at init
            store[spec.name] = b
        else:
            raise ValueError(f"unknown init kind {spec.init}")
    return store


def zeros_like_store(params: ParamStore) -> ParamStore:
    return {name: np.zeros_like(t) for name, t in params.items()}


def clone_store(params: ParamStore) -> ParamStore:
    return {name: t.copy() for name, t in params.items()}


def relative_error(analytic: float, numeric: float, floor: float = 1e-10) -> float:
    """|a - f| / max(|a|, |f|), with differences under `floor` treated as zero."""
    diff = abs(analytic - numeric)
    if diff < floor:
        return 0.0
    return diff / max(abs(analytic), abs(numeric))


def grad_check(loss_fn, params: ParamStore, eps: float = 1e-5,
               n_coords: int = 200, seed: int = 0) -> float:
    """Compare loss_fn's analytic gradient against central differences.

    loss_fn(params) -> (loss, grads). Samples at least n_coords coordinates
    (all of them, if the store is smaller) with a seeded stream and returns
    the max relative error (1e-10 absolute floor).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    _, grads = loss_fn(params)
    coords = []
    for name in sorted(params.keys()):
        for flat_idx in range(params[name].size):
            coords.append((name, flat_idx))
    rng = np.random.Generator(np.random.PCG64(seed))
    if len(coords) > n_coords:
        picks = rng.choice(len(coords), size=n_coords, replace=False)
        coords = [coords[int(k)] for k in picks]
    worst = 0.0
    for name, flat_idx in coords:
        flat = params[name].reshape(-1)
        orig = flat[flat_idx]
        flat[flat_idx] = orig + eps
        loss_plus, _ = loss_fn(params)
        flat[flat_idx] = orig - eps
        loss_minus, _ = loss_fn(params)
        flat[flat_idx] = orig
        numeric = (loss_plus - loss_minus) / (2.0 * eps)
        analytic = float(grads[name].reshape(-1)[flat_idx])
        worst = max(worst, relative_error(analytic, numeric))
    return worst
