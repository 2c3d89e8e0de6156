"""Model quality metrics and the four-way architecture comparison.

evaluate() walks the dataset one sentence at a time, so its numbers are by
construction a per-example recount: hit counters are integers, losses are
position-weighted sums divided once at the end. Tagging is scored two ways
for sequence-to-sequence kinds: teacher-forced (decoder fed the gold history,
END position included, the headline number) and free-running (greedy decode
feeding back its own output). Per-character kinds have no feedback path, so
the two coincide there.

compare_architectures() trains the three wide baselines and the compact
multi-task sequence-to-sequence model on one corpus with one seed. The split
helper is deterministic in the seed, so every kind is scored on the same
held-out sentences. Results line up against fixed reference figures for
delta display; the thresholds that gate releases live in the test suite, not
here.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from .encoding import LabeledSentence, make_batch
from .grammar import corpus_bytes
from .modelfile import dump_model
from .models import (
    END_TOKEN,
    ArchSpec,
    ParamStore,
    TrainConfig,
    _forward_scores,
    param_count,
    predict,
    split_indices,
    train,
)


class EmptyDataset(ValueError):
    pass


@dataclass(frozen=True)
class Metrics:
    """Scores for one model on one dataset.

    Accuracy/loss fields are None when the architecture lacks the matching
    head. tag_accuracy and tag_loss are teacher-forced, counted per non-pad
    position (the END step included for sequence-to-sequence kinds);
    free_tag_accuracy scores the greedy decode against the gold tags per
    character. file_size_bytes is the exact size of the serialized model.
    """

    intent_accuracy: float | None
    intent_loss: float | None
    tag_accuracy: float | None
    tag_loss: float | None
    free_tag_accuracy: float | None
    param_count: int
    file_size_bytes: int

    def validate(self) -> "Metrics":
        for name in ("intent_accuracy", "tag_accuracy", "free_tag_accuracy"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} out of [0, 1]: {v}")
        for name in ("intent_loss", "tag_loss"):
            v = getattr(self, name)
            if v is not None and v < 0.0:
                raise ValueError(f"{name} negative: {v}")
        if self.param_count < 1 or self.file_size_bytes < 1:
            raise ValueError("param_count and file_size_bytes must be positive")
        return self

    def to_dict(self) -> dict:
        return {
            "intent_accuracy": self.intent_accuracy,
            "intent_loss": self.intent_loss,
            "tag_accuracy": self.tag_accuracy,
            "tag_loss": self.tag_loss,
            "free_tag_accuracy": self.free_tag_accuracy,
            "param_count": self.param_count,
            "file_size_bytes": self.file_size_bytes,
        }


def evaluate(params: ParamStore, arch: ArchSpec,
             dataset: list[LabeledSentence]) -> Metrics:
    """Score a model example by example.

    Intent accuracy is the fraction of sentences whose argmax intent matches;
    intent loss is the mean cross-entropy over sentences. Teacher-forced tag
    accuracy divides correct positions by total scored positions across the
    whole dataset (not a mean of per-sentence rates), and tag loss pools the
    same way. Free-running accuracy scores predict() output over the same
    slots: per character (missing positions after an early END count as
    wrong), plus, for sequence-to-sequence kinds, an END slot that is correct
    only when the decoder emitted END right after the final character.
    """
    if len(dataset) == 0:
        raise EmptyDataset("cannot evaluate on zero examples")

    intent_hits = 0
    intent_loss_sum = 0.0
    tag_hits = 0
    tag_positions = 0
    tag_loss_sum = 0.0
    free_hits = 0
    free_positions = 0

    for i, ex in enumerate(dataset):
        batch = make_batch(dataset, order=[i])
        losses, probs_int, tag_pred, tag_mask, tag_gold = _forward_scores(
            params, arch, batch
        )
        if arch.has_intent_head:
            intent_hits += int(np.argmax(probs_int[0]) == ex.intent)
            intent_loss_sum += losses["intent"]
        if arch.has_tag_head:
            # singleton batch: every mask entry is 1, counts are exact ints
            m = int(tag_mask.sum())
            tag_hits += int(((tag_pred == tag_gold) * tag_mask).sum())
            tag_positions += m
            tag_loss_sum += losses["tag"] * m
            free = predict(params, arch, ex.text)
            free_hits += sum(1 for p, g in zip(free.tags, ex.tags) if p == g)
            free_positions += len(ex.tags)
            if arch.is_seq2seq:
                free_positions += 1
                ended_on_time = (
                    free.halted_by == END_TOKEN and len(free.tags) == len(ex.tags)
                )
                free_hits += int(ended_on_time)

    n = len(dataset)
    return Metrics(
        intent_accuracy=intent_hits / n if arch.has_intent_head else None,
        intent_loss=intent_loss_sum / n if arch.has_intent_head else None,
        tag_accuracy=tag_hits / tag_positions if arch.has_tag_head else None,
        tag_loss=tag_loss_sum / tag_positions if arch.has_tag_head else None,
        free_tag_accuracy=free_hits / free_positions if arch.has_tag_head else None,
        param_count=param_count(params),
        file_size_bytes=len(dump_model(params, arch)),
    ).validate()


# ---------------------------------------------------------------------------
# architecture comparison

COMPARISON_PLAN: tuple[tuple[str, int], ...] = (
    ("SINGLE_INTENT", 512),
    ("MTL_E2E", 512),
    ("S2S_TAGGER", 512),
    ("S2S_MTL", 128),
)

# E2E_TAGGER trains and evaluates like any other kind but has no row here:
# its tag head is subsumed by MTL_E2E and no reference figures exist for it.
OMITTED_KINDS: dict[str, str] = {
    "E2E_TAGGER": "per-character tag head covered by MTL_E2E; no reference row",
}

# Reference accuracy/loss figures the report shows deltas against. Display
# only; release thresholds are asserted in the test suite instead.
REFERENCE_VALUES: dict[str, dict[str, float]] = {
    "SINGLE_INTENT": {"intent_accuracy": 0.96, "intent_loss": 0.08},
    "MTL_E2E": {
        "intent_accuracy": 0.98, "intent_loss": 0.03,
        "tag_accuracy": 0.991, "tag_loss": 0.02,
    },
    "S2S_TAGGER": {"tag_accuracy": 0.97, "tag_loss": 0.02},
    "S2S_MTL": {
        "intent_accuracy": 0.996, "intent_loss": 0.006,
        "tag_accuracy": 0.994, "tag_loss": 0.007,
    },
}

# Absolute on-disk sizes track this serializer and layer inventory, nothing
# else; comparisons against sizes from other runtimes are out of scope and
# only the within-repo ratio is meaningful.
SIZE_SCOPE_NOTE = (
    "absolute file sizes are serializer-specific and out of scope; "
    "compare the param/size ratios only"
)


@dataclass
class ComparisonReport:
    """Per-architecture metrics plus the bookkeeping needed to rerun them.

    latency_ms is measured wall time per predict() call and is excluded from
    equality: two runs of the same comparison compare equal even though their
    clocks differ.
    """

    metrics: dict[str, Metrics]
    training: dict[str, dict]
    reference: dict[str, dict[str, float]]
    corpus_fingerprint: dict
    param_ratio: float
    size_ratio: float
    omitted: dict[str, str]
    latency_ms: dict[str, float] = field(compare=False, default_factory=dict)

    def deltas(self) -> dict[str, dict[str, float]]:
        """measured minus reference, for every field both sides define."""
        out: dict[str, dict[str, float]] = {}
        for kind, m in self.metrics.items():
            ref = self.reference.get(kind, {})
            d = m.to_dict()
            out[kind] = {
                k: d[k] - ref[k] for k in ref if d.get(k) is not None
            }
        return out

    def to_dict(self) -> dict:
        deltas = self.deltas()
        return {
            "architectures": {
                kind: {
                    "metrics": m.to_dict(),
                    "training": self.training[kind],
                    "reference": self.reference.get(kind, {}),
                    "delta": deltas[kind],
                    "latency_ms": self.latency_ms.get(kind),
                }
                for kind, m in self.metrics.items()
            },
            "ratios": {
                "param_count": self.param_ratio,
                "file_size": self.size_ratio,
            },
            "corpus": self.corpus_fingerprint,
            "omitted": self.omitted,
            "notes": {"size": SIZE_SCOPE_NOTE},
        }

    def format_table(self) -> str:
        def cell(v, ref=None):
            if v is None:
                return "-"
            s = f"{v:.4f}"
            if ref is not None:
                s += f" ({v - ref:+.3f})"
            return s

        header = (
            f"{'kind':<14} {'h':>4} {'params':>10} {'bytes':>10} "
            f"{'intent acc':>19} {'int loss':>9} "
            f"{'tag acc':>19} {'tag loss':>9} {'free tag':>9} {'ms':>7}"
        )
        lines = [header, "-" * len(header)]
        for kind, _hidden in COMPARISON_PLAN:
            m = self.metrics[kind]
            ref = self.reference.get(kind, {})
            lat = self.latency_ms.get(kind)
            lines.append(
                f"{kind:<14} {self.training[kind]['hidden']:>4} "
                f"{m.param_count:>10} {m.file_size_bytes:>10} "
                f"{cell(m.intent_accuracy, ref.get('intent_accuracy')):>19} "
                f"{cell(m.intent_loss):>9} "
                f"{cell(m.tag_accuracy, ref.get('tag_accuracy')):>19} "
                f"{cell(m.tag_loss):>9} "
                f"{cell(m.free_tag_accuracy):>9} "
                f"{'-' if lat is None else f'{lat:.2f}':>7}"
            )
        lines.append(
            f"stored-size ratio MTL_E2E / S2S_MTL: {self.size_ratio:.3f} "
            f"(parameters: {self.param_ratio:.3f})"
        )
        for kind, why in self.omitted.items():
            lines.append(f"omitted {kind}: {why}")
        lines.append(f"note: {SIZE_SCOPE_NOTE}")
        return "\n".join(lines)


def corpus_fingerprint(corpus: list[LabeledSentence], seed: int) -> dict:
    digest = hashlib.sha256(corpus_bytes(corpus)).hexdigest()
    return {"seed": seed, "size": len(corpus), "sha256": digest}


def compare_architectures(corpus: list[LabeledSentence],
                          cfg: TrainConfig) -> ComparisonReport:
    """Train the comparison plan on one corpus and score the shared split.

    Each kind trains with the identical config; the held-out sentences are
    recomputed here with the same seeded permutation train() uses, so the
    evaluation set matches training's validation set exactly.
    """
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    _, val_idx = split_indices(len(corpus), cfg.val_fraction, rng)
    heldout = [corpus[i] for i in val_idx]

    metrics: dict[str, Metrics] = {}
    training: dict[str, dict] = {}
    latency: dict[str, float] = {}
    for kind, hidden in COMPARISON_PLAN:
        arch = ArchSpec(kind, hidden)
        params, report = train(arch, corpus, cfg)
        metrics[kind] = evaluate(params, arch, heldout)
        training[kind] = {
            "hidden": hidden,
            "epochs_run": report.epochs_run,
            "best_epoch": report.best_epoch,
        }
        probe = heldout[: min(50, len(heldout))]
        t0 = time.monotonic()
        for ex in probe:
            predict(params, arch, ex.text)
        latency[kind] = (time.monotonic() - t0) * 1000.0 / len(probe)

    return ComparisonReport(
        metrics=metrics,
        training=training,
        reference={k: dict(v) for k, v in REFERENCE_VALUES.items()},
        corpus_fingerprint=corpus_fingerprint(corpus, cfg.seed),
        param_ratio=metrics["MTL_E2E"].param_count / metrics["S2S_MTL"].param_count,
        size_ratio=metrics["MTL_E2E"].file_size_bytes / metrics["S2S_MTL"].file_size_bytes,
        omitted=dict(OMITTED_KINDS),
        latency_ms=latency,
    )
