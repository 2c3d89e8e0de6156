"""The four Table-style architectures plus a sequence-to-sequence multi-task
variant: building, teacher-forced training with early stopping, greedy decode.

Architecture kinds over character input (one-hot by ASCII code):

    SINGLE_INTENT  LSTM(128->h), dense(h->8) on the final hidden state
    E2E_TAGGER     LSTM(128->h), per-step dense(h->19)
    MTL_E2E        shared LSTM trunk(128->h), both heads
    S2S_TAGGER     encoder LSTM(128->h); decoder LSTM(19->h) state-initialized
                   from the encoder's final (h, c); per-step dense(h->19)
    S2S_MTL        S2S_TAGGER plus an intent branch: LSTM(h->h) over the
                   encoder's per-step outputs, state-initialized from the
                   encoder's final state, then dense(h->8)

One-hot inputs never materialize: column gathers of W replace the input
matmul, and the per-step python loop carries only the recurrence while all
head/weight reductions run vectorized over [B, T, .] arrays.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .encoding import (
    CHAR_DIM,
    END,
    INTENT_DIM,
    START,
    TAG_DIM,
    Batch,
    LabeledSentence,
    encode_chars,
    make_batch,
)
from .nn import (
    AdamState,
    LstmParams,
    ParamSpec,
    ParamStore,
    adam_step,
    clone_store,
    dense_backward,
    dense_forward,
    init_params,
    lstm_cell_backward_from_pre,
    lstm_cell_from_pre,
    softmax,
    softmax_xent,
    zeros_like_store,
)

ARCH_KINDS = ("SINGLE_INTENT", "E2E_TAGGER", "MTL_E2E", "S2S_TAGGER", "S2S_MTL")

END_TOKEN = "END_TOKEN"
LENGTH_CAP = "LENGTH_CAP"


class InvalidArch(ValueError):
    pass


class CorpusTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class ArchSpec:
    kind: str
    hidden: int
    char_dim: int = CHAR_DIM
    tag_dim: int = TAG_DIM
    intent_dim: int = INTENT_DIM

    def __post_init__(self):
        if self.kind not in ARCH_KINDS:
            raise InvalidArch(f"unknown kind {self.kind!r}")
        if self.hidden < 8:
            raise InvalidArch(f"hidden must be >= 8, got {self.hidden}")

    @property
    def has_intent_head(self) -> bool:
        return self.kind in ("SINGLE_INTENT", "MTL_E2E", "S2S_MTL")

    @property
    def has_tag_head(self) -> bool:
        return self.kind != "SINGLE_INTENT"

    @property
    def is_seq2seq(self) -> bool:
        return self.kind in ("S2S_TAGGER", "S2S_MTL")


def param_specs(arch: ArchSpec) -> list[ParamSpec]:
    h = arch.hidden
    specs = [
        ParamSpec("enc.W", (4 * h, arch.char_dim), "glorot"),
        ParamSpec("enc.U", (4 * h, h), "glorot"),
        ParamSpec("enc.b", (4 * h,), "lstm_bias"),
    ]
    if arch.is_seq2seq:
        specs += [
            ParamSpec("dec.W", (4 * h, arch.tag_dim), "glorot"),
            ParamSpec("dec.U", (4 * h, h), "glorot"),
            ParamSpec("dec.b", (4 * h,), "lstm_bias"),
            ParamSpec("dec.out.W", (arch.tag_dim, h), "glorot"),
            ParamSpec("dec.out.b", (arch.tag_dim,), "zeros"),
        ]
    elif arch.has_tag_head:
        specs += [
            ParamSpec("tag.out.W", (arch.tag_dim, h), "glorot"),
            ParamSpec("tag.out.b", (arch.tag_dim,), "zeros"),
        ]
    if arch.kind == "S2S_MTL":
        specs += [
            ParamSpec("cls.W", (4 * h, h), "glorot"),
            ParamSpec("cls.U", (4 * h, h), "glorot"),
            ParamSpec("cls.b", (4 * h,), "lstm_bias"),
        ]
    if arch.has_intent_head:
        specs += [
            ParamSpec("cls.out.W", (arch.intent_dim, h), "glorot"),
            ParamSpec("cls.out.b", (arch.intent_dim,), "zeros"),
        ]
    return specs


def build(arch: ArchSpec, seed: int) -> ParamStore:
    """Initialize a parameter store for the architecture (same seed, same store)."""
    return init_params(param_specs(arch), seed)


def param_count(params: ParamStore) -> int:
    return int(sum(t.size for t in params.values()))


def _lstm(params: ParamStore, prefix: str) -> LstmParams:
    return LstmParams(params[f"{prefix}.W"], params[f"{prefix}.U"], params[f"{prefix}.b"])


def _seq_forward(pre_x: np.ndarray, p: LstmParams, h0=None, c0=None):
    """Run the recurrence over pre-projected inputs (pre_x includes W x + b).

    Returns per-step hidden states hs [B, T, h], cell states cs [B, T, h] and
    the per-step caches for the backward pass.
    """
    B, T, _ = pre_x.shape
    H = p.hidden
    h = np.zeros((B, H)) if h0 is None else h0
    c = np.zeros((B, H)) if c0 is None else c0
    hs = np.empty((B, T, H))
    cs = np.empty((B, T, H))
    caches = []
    for t in range(T):
        h, c, cache = lstm_cell_from_pre(pre_x[:, t] + h @ p.U.T, h, c, p)
        hs[:, t] = h
        cs[:, t] = c
        caches.append(cache)
    return hs, cs, caches


def _seq_backward(d_hs, d_c_extra, caches, hs, h0, p: LstmParams):
    """Backward through the recurrence.

    d_hs: upstream per-step gradients on h_t (final-state gradients already
    scattered in); d_c_extra: per-step injections on c_t or None. Padded
    steps carry zero upstream, so their contribution vanishes exactly and no
    state freezing is needed. Returns (d_pre [B,T,4h], dU, db, d_h0, d_c0).
    """
    B, T, H = d_hs.shape
    d_pre_all = np.empty((B, T, 4 * H))
    d_h = np.zeros((B, H))
    d_c = np.zeros((B, H))
    for t in reversed(range(T)):
        d_h = d_h + d_hs[:, t]
        if d_c_extra is not None:
            d_c = d_c + d_c_extra[:, t]
        h_prev = hs[:, t - 1] if t > 0 else (np.zeros((B, H)) if h0 is None else h0)
        d_pre, d_h, d_c = lstm_cell_backward_from_pre(d_h, d_c, caches[t], h_prev, p)
        d_pre_all[:, t] = d_pre
    h_prev_all = np.concatenate(
        [(np.zeros((B, 1, H)) if h0 is None else h0[:, None, :]), hs[:, :-1]], axis=1
    )
    dU = np.einsum("btk,bth->kh", d_pre_all, h_prev_all)
    db = d_pre_all.sum(axis=(0, 1))
    return d_pre_all, dU, db, d_h, d_c


def _gather_pre(W: np.ndarray, b: np.ndarray, codes: np.ndarray) -> np.ndarray:
    # one-hot input: x W^T is just a column gather of W
    return W.T[codes] + b


def _scatter_dW(dW: np.ndarray, codes: np.ndarray, d_pre_all: np.ndarray) -> None:
    B, T, four_h = d_pre_all.shape
    np.add.at(dW.T, codes.reshape(-1), d_pre_all.reshape(B * T, four_h))


def _final_rows(arr: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    return arr[np.arange(arr.shape[0]), lengths - 1]


def forward_train(params: ParamStore, arch: ArchSpec, batch: Batch,
                  w_intent: float = 1.0, w_tag: float = 1.0):
    """Teacher-forced losses and exact gradients for one batch.

    Returns (losses, grads): losses is a dict with "total" plus "intent"/"tag"
    per the kind's heads; total = w_intent*intent + w_tag*tag over the heads
    present. The decoder consumes the gold tag stream (teacher forcing); the
    encoder's per-step outputs carry loss only through heads that read them.
    """
    B = batch.size
    lengths = batch.lengths
    grads = zeros_like_store(params)
    losses: dict = {}

    enc = _lstm(params, "enc")
    pre_enc = _gather_pre(enc.W, enc.b, batch.chars)
    hs_enc, cs_enc, caches_enc = _seq_forward(pre_enc, enc)
    h_fin = _final_rows(hs_enc, lengths)
    c_fin = _final_rows(cs_enc, lengths)

    d_hs_enc = np.zeros_like(hs_enc)
    d_c_extra = None
    total = 0.0

    if arch.kind in ("E2E_TAGGER", "MTL_E2E"):
        W, b = params["tag.out.W"], params["tag.out.b"]
        logits = dense_forward(hs_enc.reshape(B * batch.max_len, -1), W, b)
        tag_loss, d_logits = softmax_xent(
            logits, batch.tags.reshape(-1), batch.mask.reshape(-1)
        )
        d_logits *= w_tag
        d_flat, dW, db = dense_backward(d_logits, hs_enc.reshape(B * batch.max_len, -1), W)
        grads["tag.out.W"] += dW
        grads["tag.out.b"] += db
        d_hs_enc += d_flat.reshape(hs_enc.shape)
        losses["tag"] = tag_loss
        total += w_tag * tag_loss

    if arch.kind in ("SINGLE_INTENT", "MTL_E2E"):
        W, b = params["cls.out.W"], params["cls.out.b"]
        logits = dense_forward(h_fin, W, b)
        intent_loss, d_logits = softmax_xent(logits, batch.intents, np.ones(B))
        d_logits *= w_intent
        d_h_fin, dW, db = dense_backward(d_logits, h_fin, W)
        grads["cls.out.W"] += dW
        grads["cls.out.b"] += db
        d_hs_enc[np.arange(B), lengths - 1] += d_h_fin
        losses["intent"] = intent_loss
        total += w_intent * intent_loss

    if arch.is_seq2seq:
        dec = _lstm(params, "dec")
        pre_dec = _gather_pre(dec.W, dec.b, batch.dec_input)
        hs_dec, _, caches_dec = _seq_forward(pre_dec, dec, h0=h_fin, c0=c_fin)
        T1 = batch.max_len + 1
        W, b = params["dec.out.W"], params["dec.out.b"]
        logits = dense_forward(hs_dec.reshape(B * T1, -1), W, b)
        tag_loss, d_logits = softmax_xent(
            logits, batch.dec_target.reshape(-1), batch.dec_mask.reshape(-1)
        )
        d_logits *= w_tag
        d_flat, dW, db = dense_backward(d_logits, hs_dec.reshape(B * T1, -1), W)
        grads["dec.out.W"] += dW
        grads["dec.out.b"] += db
        d_pre_dec, dU, db_dec, d_h0, d_c0 = _seq_backward(
            d_flat.reshape(hs_dec.shape), None, caches_dec, hs_dec, h_fin, dec
        )
        _scatter_dW(grads["dec.W"], batch.dec_input, d_pre_dec)
        grads["dec.U"] += dU
        grads["dec.b"] += db_dec
        d_hs_enc[np.arange(B), lengths - 1] += d_h0
        d_c_extra = np.zeros_like(cs_enc)
        d_c_extra[np.arange(B), lengths - 1] += d_c0
        losses["tag"] = tag_loss
        total += w_tag * tag_loss

    if arch.kind == "S2S_MTL":
        cls = _lstm(params, "cls")
        pre_cls = np.einsum("bth,kh->btk", hs_enc, cls.W) + cls.b
        hs_cls, _, caches_cls = _seq_forward(pre_cls, cls, h0=h_fin, c0=c_fin)
        h_cls_fin = _final_rows(hs_cls, lengths)
        W, b = params["cls.out.W"], params["cls.out.b"]
        logits = dense_forward(h_cls_fin, W, b)
        intent_loss, d_logits = softmax_xent(logits, batch.intents, np.ones(B))
        d_logits *= w_intent
        d_h_cls_fin, dW, db = dense_backward(d_logits, h_cls_fin, W)
        grads["cls.out.W"] += dW
        grads["cls.out.b"] += db
        d_hs_cls = np.zeros_like(hs_cls)
        d_hs_cls[np.arange(B), lengths - 1] += d_h_cls_fin
        d_pre_cls, dU, db_cls, d_h0, d_c0 = _seq_backward(
            d_hs_cls, None, caches_cls, hs_cls, h_fin, cls
        )
        grads["cls.W"] += np.einsum("btk,bth->kh", d_pre_cls, hs_enc)
        grads["cls.U"] += dU
        grads["cls.b"] += db_cls
        d_hs_enc += d_pre_cls @ cls.W  # branch input gradient, every step
        d_hs_enc[np.arange(B), lengths - 1] += d_h0
        if d_c_extra is None:
            d_c_extra = np.zeros_like(cs_enc)
        d_c_extra[np.arange(B), lengths - 1] += d_c0
        losses["intent"] = intent_loss
        total += w_intent * intent_loss

    d_pre_enc, dU, db_enc, _, _ = _seq_backward(
        d_hs_enc, d_c_extra, caches_enc, hs_enc, None, enc
    )
    _scatter_dW(grads["enc.W"], batch.chars, d_pre_enc)
    grads["enc.U"] += dU
    grads["enc.b"] += db_enc

    losses["total"] = total
    return losses, grads


# ---------------------------------------------------------------------------
# inference

@dataclass
class Prediction:
    """Greedy model output for one sentence.

    intent_probs is None for kinds without an intent head. tags never contain
    START/END. halted_by records how the tag stream ended: END_TOKEN when the
    decoder chose END, LENGTH_CAP otherwise (per-character kinds are capped
    structurally, so they always report LENGTH_CAP).
    """

    intent_probs: np.ndarray | None
    tags: list[int]
    halted_by: str

    @property
    def intent(self) -> int | None:
        if self.intent_probs is None:
            return None
        return int(np.argmax(self.intent_probs))


def _run_encoder(params: ParamStore, text: str):
    enc = _lstm(params, "enc")
    codes = encode_chars(text)
    pre = _gather_pre(enc.W, enc.b, np.array([codes]))
    hs, cs, _ = _seq_forward(pre, enc)
    return hs, hs[0, -1:, :].copy(), cs[0, -1:, :].copy()


def predict(params: ParamStore, arch: ArchSpec, text: str) -> Prediction:
    """Greedy inference for one ASCII sentence.

    Per-character kinds emit one tag per character via argmax over the content
    tags (START/END are decoder-internal symbols, excluded from the head's
    choices). Seq2seq kinds decode greedily from START, feeding back the
    argmax one-hot each step, halting on END; after |text| tags one further
    step may still observe END (it emits nothing), otherwise LENGTH_CAP.
    Argmax ties break toward the lowest tag id.
    """
    if len(text) < 1:
        raise ValueError("empty text")
    hs_enc, h_fin, c_fin = _run_encoder(params, text)
    n = len(text)

    intent_probs = None
    tags: list[int] = []
    halted = LENGTH_CAP

    if arch.kind in ("E2E_TAGGER", "MTL_E2E"):
        logits = dense_forward(hs_enc[0], params["tag.out.W"], params["tag.out.b"])
        tags = [int(k) + 2 for k in np.argmax(logits[:, 2:], axis=1)]
    if arch.kind in ("SINGLE_INTENT", "MTL_E2E"):
        intent_probs = softmax(
            dense_forward(h_fin, params["cls.out.W"], params["cls.out.b"])
        )[0]

    if arch.is_seq2seq:
        dec = _lstm(params, "dec")
        h, c = h_fin, c_fin
        fed = START
        for _ in range(n + 1):
            pre = dec.W.T[fed][None, :] + dec.b + h @ dec.U.T
            h, c, _ = lstm_cell_from_pre(pre, h, c, dec)
            logits = dense_forward(h, params["dec.out.W"], params["dec.out.b"])[0]
            pick = int(np.argmax(logits[1:])) + 1  # START never emitted
            if pick == END:
                halted = END_TOKEN
                break
            if len(tags) == n:
                break  # probe step saw a non-END tag: capped
            tags.append(pick)
            fed = pick

    if arch.kind == "S2S_MTL":
        cls = _lstm(params, "cls")
        pre = np.einsum("bth,kh->btk", hs_enc, cls.W) + cls.b
        hs_cls, _, _ = _seq_forward(pre, cls, h0=h_fin, c0=c_fin)
        intent_probs = softmax(
            dense_forward(hs_cls[0, -1:, :], params["cls.out.W"], params["cls.out.b"])
        )[0]

    return Prediction(intent_probs=intent_probs, tags=tags, halted_by=halted)


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainConfig:
    batch_size: int = 64
    max_epochs: int = 50
    learning_rate: float = 1e-3
    patience: int = 5
    val_fraction: float = 0.2
    seed: int = 0
    w_intent: float = 1.0
    w_tag: float = 1.0

    def validate(self) -> "TrainConfig":
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")
        if self.patience < 1 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("patience, batch_size and max_epochs must be >= 1")
        if self.learning_rate <= 0 or self.w_intent <= 0 or self.w_tag <= 0:
            raise ValueError("learning rate and loss weights must be positive")
        return self


@dataclass
class EpochStats:
    train_loss: float
    val_loss: float
    val_intent_acc: float | None
    val_tag_acc: float | None
    wall_seconds: float = field(compare=False, default=0.0)


@dataclass
class TrainReport:
    kind: str
    hidden: int
    epochs: list[EpochStats]
    best_epoch: int  # 1-based index into epochs
    param_count: int

    @property
    def epochs_run(self) -> int:
        return len(self.epochs)


def split_indices(n: int, val_fraction: float, rng: np.random.Generator):
    """Seeded shuffle; the first round(n*val_fraction) indices validate."""
    perm = rng.permutation(n)
    n_val = int(round(n * val_fraction))
    n_val = min(max(n_val, 1), n - 1)
    return perm[n_val:].tolist(), perm[:n_val].tolist()


def _length_sorted_chunks(examples, indices, batch_size):
    by_len = sorted(indices, key=lambda i: (len(examples[i].text), i))
    return [by_len[k : k + batch_size] for k in range(0, len(by_len), batch_size)]


def batched_eval(params: ParamStore, arch: ArchSpec, examples, indices,
                 batch_size: int = 256):
    """Teacher-forced validation pass: mean total loss plus intent/tag accuracy
    (accuracy via argmax on the gold-fed streams; fast batched path)."""
    total_loss = 0.0
    n_rows = 0
    intent_hits = 0
    tag_hits = 0.0
    tag_positions = 0.0
    for chunk in _length_sorted_chunks(examples, indices, batch_size):
        batch = make_batch(examples, order=chunk)
        losses, probs_int, tag_pred, tag_mask, tag_gold = _forward_scores(params, arch, batch)
        total_loss += losses["total"] * batch.size
        n_rows += batch.size
        if probs_int is not None:
            intent_hits += int((np.argmax(probs_int, axis=1) == batch.intents).sum())
        if tag_pred is not None:
            tag_hits += float(((tag_pred == tag_gold) * tag_mask).sum())
            tag_positions += float(tag_mask.sum())
    out = {
        "loss": total_loss / max(n_rows, 1),
        "intent_acc": (intent_hits / n_rows) if arch.has_intent_head and n_rows else None,
        "tag_acc": (tag_hits / tag_positions) if arch.has_tag_head and tag_positions else None,
    }
    return out


def _forward_scores(params: ParamStore, arch: ArchSpec, batch: Batch):
    """Loss and argmax streams without gradients (validation path)."""
    B = batch.size
    lengths = batch.lengths
    enc = _lstm(params, "enc")
    pre_enc = _gather_pre(enc.W, enc.b, batch.chars)
    hs_enc, cs_enc, _ = _seq_forward(pre_enc, enc)
    h_fin = _final_rows(hs_enc, lengths)
    c_fin = _final_rows(cs_enc, lengths)

    losses: dict = {}
    total = 0.0
    probs_int = None
    tag_pred = tag_mask = tag_gold = None

    if arch.kind in ("E2E_TAGGER", "MTL_E2E"):
        logits = dense_forward(
            hs_enc.reshape(-1, arch.hidden), params["tag.out.W"], params["tag.out.b"]
        )
        loss, _ = softmax_xent(logits, batch.tags.reshape(-1), batch.mask.reshape(-1))
        losses["tag"] = loss
        total += loss
        # accuracy argmax spans the emittable tags only, same as predict()
        tag_pred = (np.argmax(logits[:, 2:], axis=1) + 2).reshape(B, -1)
        tag_mask, tag_gold = batch.mask, batch.tags
    if arch.kind in ("SINGLE_INTENT", "MTL_E2E"):
        logits = dense_forward(h_fin, params["cls.out.W"], params["cls.out.b"])
        loss, _ = softmax_xent(logits, batch.intents, np.ones(B))
        losses["intent"] = loss
        total += loss
        probs_int = softmax(logits)
    if arch.is_seq2seq:
        dec = _lstm(params, "dec")
        pre_dec = _gather_pre(dec.W, dec.b, batch.dec_input)
        hs_dec, _, _ = _seq_forward(pre_dec, dec, h0=h_fin, c0=c_fin)
        logits = dense_forward(
            hs_dec.reshape(-1, arch.hidden), params["dec.out.W"], params["dec.out.b"]
        )
        loss, _ = softmax_xent(logits, batch.dec_target.reshape(-1), batch.dec_mask.reshape(-1))
        losses["tag"] = loss
        total += loss
        tag_pred = (np.argmax(logits[:, 1:], axis=1) + 1).reshape(B, -1)
        tag_mask, tag_gold = batch.dec_mask, batch.dec_target
    if arch.kind == "S2S_MTL":
        cls = _lstm(params, "cls")
        pre_cls = np.einsum("bth,kh->btk", hs_enc, cls.W) + cls.b
        hs_cls, _, _ = _seq_forward(pre_cls, cls, h0=h_fin, c0=c_fin)
        logits = dense_forward(
            _final_rows(hs_cls, lengths), params["cls.out.W"], params["cls.out.b"]
        )
        loss, _ = softmax_xent(logits, batch.intents, np.ones(B))
        losses["intent"] = loss
        total += loss
        probs_int = softmax(logits)

    losses["total"] = total
    return losses, probs_int, tag_pred, tag_mask, tag_gold


def train(arch: ArchSpec, corpus: list[LabeledSentence], cfg: TrainConfig):
    """Full training loop: seeded split, deterministic batch order, Adam,
    early stopping on validation total loss, best-epoch snapshot returned."""
    cfg.validate()
    if len(corpus) < 10:
        raise CorpusTooSmall(f"need >= 10 examples, got {len(corpus)}")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    train_idx, val_idx = split_indices(len(corpus), cfg.val_fraction, rng)

    params = build(arch, cfg.seed)
    adam = AdamState(alpha=cfg.learning_rate)
    chunks = _length_sorted_chunks(corpus, train_idx, cfg.batch_size)

    best_loss = np.inf
    best_epoch = 0
    best_params = clone_store(params)
    since_best = 0
    stats: list[EpochStats] = []

    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.monotonic()
        order = rng.permutation(len(chunks))
        epoch_loss = 0.0
        epoch_rows = 0
        for k in order:
            batch = make_batch(corpus, order=chunks[int(k)])
            losses, grads = forward_train(
                params, arch, batch, w_intent=cfg.w_intent, w_tag=cfg.w_tag
            )
            adam_step(params, grads, adam)
            epoch_loss += losses["total"] * batch.size
            epoch_rows += batch.size
        val = batched_eval(params, arch, corpus, val_idx)
        stats.append(
            EpochStats(
                train_loss=epoch_loss / max(epoch_rows, 1),
                val_loss=val["loss"],
                val_intent_acc=val["intent_acc"],
                val_tag_acc=val["tag_acc"],
                wall_seconds=time.monotonic() - t0,
            )
        )
        if val["loss"] < best_loss:
            best_loss = val["loss"]
            best_epoch = epoch
            best_params = clone_store(params)
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    report = TrainReport(
        kind=arch.kind,
        hidden=arch.hidden,
        epochs=stats,
        best_epoch=best_epoch,
        param_count=param_count(params),
    )
    return best_params, report
