"""Neural engine oracles: hand-rolled LSTM step, finite differences, Adam algebra.

The scalar oracle below re-derives the cell from the gate equations with
explicit python loops and math.exp, independently of the vectorized code.
"""

import math

import numpy as np
import pytest

from finterp.nn import (
    AdamState,
    AllMasked,
    LstmParams,
    NameMismatch,
    ParamSpec,
    ShapeMismatch,
    adam_step,
    clone_store,
    dense_backward,
    dense_forward,
    grad_check,
    init_params,
    lstm_cell_backward,
    lstm_cell_backward_from_pre,
    lstm_cell_forward,
    lstm_cell_from_pre,
    relative_error,
    sigmoid,
    softmax,
    softmax_xent,
    zeros_like_store,
)


def test_rng_algorithm_pin():
    # the reproducibility contract everywhere: numpy Generator over PCG64
    g = np.random.Generator(np.random.PCG64(7))
    assert list(g.integers(0, 1000, 5)) == [944, 625, 684, 897, 578]


def scalar_sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def oracle_lstm_step(x, h, c, W, U, b):
    """Per-element LSTM step from the gate equations, no numpy algebra."""
    B, H = h.shape
    h_new = np.zeros_like(h)
    c_new = np.zeros_like(c)
    for r in range(B):
        pre = [
            sum(W[j, k] * x[r, k] for k in range(x.shape[1]))
            + sum(U[j, k] * h[r, k] for k in range(H))
            + b[j]
            for j in range(4 * H)
        ]
        for u in range(H):
            i = scalar_sigmoid(pre[u])
            f = scalar_sigmoid(pre[H + u])
            g = math.tanh(pre[2 * H + u])
            o = scalar_sigmoid(pre[3 * H + u])
            c_new[r, u] = f * c[r, u] + i * g
            h_new[r, u] = o * math.tanh(c_new[r, u])
    return h_new, c_new


def small_cell(seed=3, B=2, H=3, D=5):
    rng = np.random.Generator(np.random.PCG64(seed))
    p = LstmParams(
        W=rng.normal(size=(4 * H, D)),
        U=rng.normal(size=(4 * H, H)),
        b=rng.normal(size=4 * H),
    )
    x = rng.normal(size=(B, D))
    h = rng.normal(size=(B, H))
    c = rng.normal(size=(B, H))
    return p, x, h, c


def test_lstm_forward_matches_scalar_oracle():
    p, x, h, c = small_cell()
    h_new, c_new, _ = lstm_cell_forward(x, h, c, p)
    h_ref, c_ref = oracle_lstm_step(x, h, c, p.W, p.U, p.b)
    np.testing.assert_allclose(h_new, h_ref, rtol=0, atol=1e-12)
    np.testing.assert_allclose(c_new, c_ref, rtol=0, atol=1e-12)


def test_lstm_from_pre_equals_forward():
    p, x, h, c = small_cell(seed=11)
    pre = x @ p.W.T + h @ p.U.T + p.b
    a = lstm_cell_forward(x, h, c, p)
    bb = lstm_cell_from_pre(pre, h, c, p)
    np.testing.assert_array_equal(a[0], bb[0])
    np.testing.assert_array_equal(a[1], bb[1])


def test_lstm_forward_shape_errors():
    p, x, h, c = small_cell()
    with pytest.raises(ShapeMismatch):
        lstm_cell_forward(x[:, :3], h, c, p)
    with pytest.raises(ShapeMismatch):
        LstmParams(W=p.W, U=p.U[:, :2], b=p.b).check()


def lstm_scalar_loss(p, x, h, c, wh, wc):
    """Weighted sum of both cell outputs; gives every gradient a path."""
    h_new, c_new, cache = lstm_cell_forward(x, h, c, p)
    loss = float((h_new * wh).sum() + (c_new * wc).sum())
    grads = lstm_cell_backward(wh, wc, cache, x, h, p)
    return loss, grads


def test_lstm_backward_matches_finite_differences():
    p, x, h, c = small_cell(seed=5)
    rng = np.random.Generator(np.random.PCG64(99))
    wh = rng.normal(size=h.shape)
    wc = rng.normal(size=c.shape)
    _, (d_x, d_h, d_c, dW, dU, db) = lstm_scalar_loss(p, x, h, c, wh, wc)

    eps = 1e-6
    worst = 0.0

    def probe(arr, analytic):
        nonlocal worst
        flat = arr.reshape(-1)
        ana = analytic.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            lp, _ = lstm_scalar_loss(p, x, h, c, wh, wc)
            flat[idx] = orig - eps
            lm, _ = lstm_scalar_loss(p, x, h, c, wh, wc)
            flat[idx] = orig
            worst = max(worst, relative_error(float(ana[idx]), (lp - lm) / (2 * eps)))

    probe(p.W, dW)
    probe(p.U, dU)
    probe(p.b, db)
    probe(x, d_x)
    probe(h, d_h)
    probe(c, d_c)
    assert worst < 1e-6


def test_backward_from_pre_is_consistent_with_full_backward():
    p, x, h, c = small_cell(seed=8)
    rng = np.random.Generator(np.random.PCG64(1))
    wh = rng.normal(size=h.shape)
    wc = rng.normal(size=c.shape)
    _, _, cache = lstm_cell_forward(x, h, c, p)
    d_x, d_h_prev, d_c_prev, dW, dU, db = lstm_cell_backward(wh, wc, cache, x, h, p)
    d_pre, d_h2, d_c2 = lstm_cell_backward_from_pre(wh, wc, cache, h, p)
    np.testing.assert_allclose(d_pre @ p.W, d_x, atol=1e-12)
    np.testing.assert_allclose(d_pre.T @ x, dW, atol=1e-12)
    np.testing.assert_allclose(d_pre.T @ h, dU, atol=1e-12)
    np.testing.assert_allclose(d_pre.sum(axis=0), db, atol=1e-12)
    np.testing.assert_allclose(d_h2, d_h_prev, atol=1e-12)
    np.testing.assert_allclose(d_c2, d_c_prev, atol=1e-12)


def test_sigmoid_extremes_are_finite():
    v = sigmoid(np.array([-1e4, -30.0, 0.0, 30.0, 1e4]))
    assert np.all(np.isfinite(v))
    assert v[0] == 0.0 or v[0] < 1e-300
    assert v[2] == 0.5
    assert v[-1] == 1.0 or v[-1] > 1 - 1e-12


def test_dense_forward_and_backward():
    rng = np.random.Generator(np.random.PCG64(2))
    x = rng.normal(size=(3, 4))
    W = rng.normal(size=(6, 4))
    b = rng.normal(size=6)
    y = dense_forward(x, W, b)
    # row oracle
    for r in range(3):
        for j in range(6):
            want = sum(x[r, k] * W[j, k] for k in range(4)) + b[j]
            assert abs(y[r, j] - want) < 1e-12

    d_y = rng.normal(size=y.shape)
    d_x, dW, db = dense_backward(d_y, x, W)
    # the map is linear per coordinate: central differences are truncation-free,
    # so a larger step just cuts rounding noise
    eps = 1e-4
    worst = 0.0
    for arr, ana in ((x, d_x), (W, dW), (b, db)):
        flat = arr.reshape(-1)
        an = ana.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            lp = float((dense_forward(x, W, b) * d_y).sum())
            flat[idx] = orig - eps
            lm = float((dense_forward(x, W, b) * d_y).sum())
            flat[idx] = orig
            worst = max(worst, relative_error(float(an[idx]), (lp - lm) / (2 * eps)))
    assert worst < 1e-8
    with pytest.raises(ShapeMismatch):
        dense_forward(x, W[:, :3], b)


def test_softmax_rows_and_shift_invariance():
    rng = np.random.Generator(np.random.PCG64(4))
    z = rng.normal(size=(5, 7)) * 50
    p = softmax(z)
    np.testing.assert_allclose(p.sum(axis=1), np.ones(5), atol=1e-12)
    np.testing.assert_allclose(softmax(z + 123.0), p, atol=1e-12)
    assert np.all(p > 0)


def test_uniform_logits_loss_is_log_class_count():
    logits = np.zeros((4, 19))
    targets = np.array([0, 5, 18, 2])
    loss, grad = softmax_xent(logits, targets, np.ones(4))
    assert abs(loss - math.log(19)) < 1e-12
    assert abs(loss - 2.9444389791664403) < 1e-12
    loss8, _ = softmax_xent(np.zeros((4, 8)), targets % 8, np.ones(4))
    assert abs(loss8 - math.log(8)) < 1e-12
    # each row's gradient sums to zero (softmax minus one-hot)
    np.testing.assert_allclose(grad.sum(axis=1), np.zeros(4), atol=1e-12)


def test_masked_rows_do_not_contribute():
    rng = np.random.Generator(np.random.PCG64(6))
    logits = rng.normal(size=(5, 9))
    targets = rng.integers(0, 9, 5)
    mask = np.array([1.0, 0.0, 1.0, 0.0, 1.0])
    loss, grad = softmax_xent(logits, targets, mask)
    kept = [0, 2, 4]
    probs = softmax(logits)
    want = float(np.mean([-math.log(probs[r, targets[r]]) for r in kept]))
    assert abs(loss - want) < 1e-12
    assert np.all(grad[1] == 0) and np.all(grad[3] == 0)
    with pytest.raises(AllMasked):
        softmax_xent(logits, targets, np.zeros(5))


def test_softmax_xent_gradient_finite_difference():
    rng = np.random.Generator(np.random.PCG64(12))
    logits = rng.normal(size=(6, 11))
    targets = rng.integers(0, 11, 6)
    mask = np.array([1, 1, 0, 1, 1, 0], dtype=float)
    _, grad = softmax_xent(logits, targets, mask)
    eps = 1e-6
    worst = 0.0
    flat = logits.reshape(-1)
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + eps
        lp, _ = softmax_xent(logits, targets, mask)
        flat[idx] = orig - eps
        lm, _ = softmax_xent(logits, targets, mask)
        flat[idx] = orig
        worst = max(worst, relative_error(float(grad.reshape(-1)[idx]), (lp - lm) / (2 * eps)))
    assert worst < 1e-6


def test_adam_first_step_formula():
    params = {"w": np.array([1.0, -2.0, 0.5])}
    grads = {"w": np.array([2.0, -3.0, 0.0001])}
    st = AdamState()
    before = params["w"].copy()
    adam_step(params, grads, st)
    g = grads["w"]
    # bias correction makes the first step -alpha * g / (|g| + eps)
    expected = before - st.alpha * g / (np.abs(g) + st.eps)
    np.testing.assert_allclose(params["w"], expected, rtol=0, atol=1e-15)
    assert st.t == 1


def test_adam_zero_gradient_is_identity():
    params = {"w": np.array([[1.0, 2.0]])}
    st = AdamState()
    adam_step(params, {"w": np.zeros((1, 2))}, st)
    np.testing.assert_array_equal(params["w"], [[1.0, 2.0]])
    assert st.t == 1


def test_adam_two_steps_match_reference_loop():
    # independent transcription of the classic update, scalar case
    alpha, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
    theta = 0.7
    m = v = 0.0
    gs = [0.3, -1.2]
    for t, g in enumerate(gs, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1**t)
        vh = v / (1 - b2**t)
        theta -= alpha * mh / (math.sqrt(vh) + eps)

    params = {"w": np.array([0.7])}
    st = AdamState()
    for g in gs:
        adam_step(params, {"w": np.array([g])}, st)
    assert abs(params["w"][0] - theta) < 1e-15
    assert st.t == 2


def test_adam_name_mismatch():
    with pytest.raises(NameMismatch):
        adam_step({"a": np.zeros(1)}, {"b": np.zeros(1)}, AdamState())


def test_init_params_determinism_and_kinds():
    specs = [
        ParamSpec("enc.W", (8, 4), "glorot"),
        ParamSpec("enc.b", (8,), "lstm_bias"),
        ParamSpec("out.b", (5,), "zeros"),
    ]
    a = init_params(specs, seed=7)
    b = init_params(list(reversed(specs)), seed=7)  # order-insensitive
    c = init_params(specs, seed=8)
    for name in a:
        np.testing.assert_array_equal(a[name], b[name])
    assert not np.array_equal(a["enc.W"], c["enc.W"])

    bound = math.sqrt(6.0 / (4 + 8))
    assert np.all(np.abs(a["enc.W"]) <= bound)
    assert a["enc.W"].std() > 0
    np.testing.assert_array_equal(a["enc.b"], [0, 0, 1, 1, 0, 0, 0, 0])
    np.testing.assert_array_equal(a["out.b"], np.zeros(5))
    assert all(t.dtype == np.float64 for t in a.values())

    with pytest.raises(NameMismatch):
        init_params([specs[0], specs[0]], seed=0)


def test_store_helpers():
    store = {"a": np.ones((2, 2)), "b": np.arange(3.0)}
    z = zeros_like_store(store)
    assert set(z) == {"a", "b"} and np.all(z["a"] == 0)
    cl = clone_store(store)
    cl["a"][0, 0] = 99
    assert store["a"][0, 0] == 1.0


def test_relative_error_floor():
    assert relative_error(0.0, 5e-11) == 0.0
    assert relative_error(1.0, 2.0) == 0.5


def test_grad_check_on_quadratic():
    center = np.array([0.3, -1.0, 2.0])

    def loss_fn(params):
        d = params["w"] - center
        return float((d * d).sum()), {"w": 2 * d}

    err = grad_check(loss_fn, {"w": np.array([1.0, 1.0, 1.0])})
    assert err < 1e-9

    def wrong_fn(params):
        d = params["w"] - center
        return float((d * d).sum()), {"w": 3 * d}  # deliberately wrong scale

    assert grad_check(wrong_fn, {"w": np.array([1.0, 1.0, 1.0])}) > 0.3
