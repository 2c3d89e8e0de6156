"""Operator entry point: synthesize corpora, train and score models, run the
interactive loop or the HTTP service.

Exit codes: 0 success, 1 usage error (bad flags/subcommand), 2 data or
validation error (unparseable spec, corrupt corpus or model, domain errors),
3 runtime failure (I/O, missing files). Reports print machine-readable JSON
by default; --pretty switches to a table.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import uvicorn

from .encoding import INTENT_NAMES, TAG_NAMES
from .evaluation import compare_architectures, evaluate
from .grammar import augment, parse_corpus_spec, read_corpus, write_corpus
from .interpreter import (
    CommandError,
    Registry,
    build_command,
    command_to_dict,
    load_registry,
    spans_from_tags,
)
from .modelfile import load_model, model_fingerprint, save_model
from .models import ArchSpec, TrainConfig, predict, train
from .service import create_app

ARCH_FLAGS = {
    "single-intent": "SINGLE_INTENT",
    "e2e-tagger": "E2E_TAGGER",
    "mtl-e2e": "MTL_E2E",
    "s2s-tagger": "S2S_TAGGER",
    "s2s-mtl": "S2S_MTL",
}


class _Parser(argparse.ArgumentParser):
    # usage problems are exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _spans_payload(text, tags):
    return [
        {"tag": TAG_NAMES[s.tag], "text": s.text, "start": s.start, "end": s.end}
        for s in spans_from_tags(text, tags)
    ]


def _interpretation(params, arch, registry, text):
    """One sentence through the whole pipeline; command needs a registry."""
    pred = predict(params, arch, text)
    if pred.intent_probs is None:
        intent_id, confidence = 0, 0.0
    else:
        intent_id = pred.intent
        confidence = float(pred.intent_probs[intent_id])
    out = {
        "text": text,
        "intent": INTENT_NAMES[intent_id],
        "confidence": confidence,
        "spans": _spans_payload(text, pred.tags),
        "command": None,
        "error": None,
    }
    if registry is not None:
        try:
            cmd = build_command(intent_id, spans_from_tags(text, pred.tags), registry)
            out["command"] = command_to_dict(cmd)
        except CommandError as exc:
            out["error"] = {"type": type(exc).__name__, "message": str(exc)}
    return out


# ---------------------------------------------------------------------------
# subcommands

def cmd_augment(args) -> int:
    spec_path = Path(args.spec)
    spec = parse_corpus_spec(spec_path.read_text(encoding="utf-8"))
    negatives_source = None
    if spec.negatives:
        # negatives path resolves relative to the spec file, not the cwd
        neg_path = Path(spec.negatives.path)
        if not neg_path.is_absolute():
            neg_path = spec_path.parent / neg_path
        negatives_source = neg_path.read_text(encoding="utf-8").splitlines()
    corpus = augment(spec, seed=args.seed, target=args.count,
                     negatives_source=negatives_source)
    write_corpus(corpus, args.out)
    print(json.dumps({"written": len(corpus), "out": args.out, "seed": args.seed}))
    return 0


def cmd_train(args) -> int:
    corpus = read_corpus(args.corpus)
    arch = ArchSpec(ARCH_FLAGS[args.arch], args.hidden)
    cfg = TrainConfig(
        batch_size=args.batch,
        max_epochs=args.epochs,
        learning_rate=args.lr,
        patience=args.patience,
        seed=args.seed,
    )
    params, report = train(arch, corpus, cfg)
    n_bytes = save_model(params, arch, args.out)
    best = report.epochs[report.best_epoch - 1]
    print(json.dumps({
        "kind": report.kind,
        "hidden": report.hidden,
        "epochs_run": report.epochs_run,
        "best_epoch": report.best_epoch,
        "val_loss": best.val_loss,
        "val_intent_acc": best.val_intent_acc,
        "val_tag_acc": best.val_tag_acc,
        "param_count": report.param_count,
        "bytes_written": n_bytes,
        "out": args.out,
    }))
    return 0


def cmd_eval(args) -> int:
    params, arch = load_model(args.model)
    dataset = read_corpus(args.corpus)
    metrics = evaluate(params, arch, dataset)
    if args.pretty:
        for key, value in metrics.to_dict().items():
            print(f"{key:>18}: {'-' if value is None else value}")
    else:
        print(json.dumps({"kind": arch.kind, "hidden": arch.hidden,
                          **metrics.to_dict()}))
    return 0


def cmd_compare(args) -> int:
    corpus = read_corpus(args.corpus)
    cfg = TrainConfig()
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        allowed = {f.name for f in fields(TrainConfig)}
        unknown = set(raw) - allowed
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = TrainConfig(**raw)
    report = compare_architectures(corpus, cfg)
    document = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(document + "\n", encoding="utf-8")
    if args.pretty or not args.out:
        print(report.format_table() if args.pretty else document)
    return 0


def cmd_interpret(args) -> int:
    params, arch = load_model(args.model)
    registry = load_registry(args.registry) if args.registry else None
    print(json.dumps(_interpretation(params, arch, registry, args.text)))
    return 0


def _render_spans(text: str, spans_payload: list[dict]) -> str:
    out = []
    pos = 0
    for s in spans_payload:
        out.append(text[pos:s["start"]])
        out.append(f"[{s['text']}|{s['tag']}]")
        pos = s["end"]
    out.append(text[pos:])
    return "".join(out)


def cmd_repl(args) -> int:
    params, arch = load_model(args.model)
    registry = load_registry(args.registry)
    print("type a command, empty line to skip, exit/quit to leave", file=sys.stderr)
    for raw in sys.stdin:
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.strip() in ("exit", "quit"):
            break
        try:
            if any(ord(ch) >= 128 for ch in line):
                print("error: input must be ASCII")
                continue
            result = _interpretation(params, arch, registry, line)
            print(f"intent: {result['intent']} ({result['confidence']:.3f})")
            print(f"spans:  {_render_spans(line, result['spans'])}")
            if result["error"]:
                print(f"error:  {result['error']['type']}: {result['error']['message']}")
            else:
                print(f"command: {json.dumps(result['command'])}")
        except Exception as exc:  # the loop survives anything a line throws
            print(f"error: {exc}")
    return 0


def cmd_serve(args) -> int:
    params, arch = load_model(args.model)
    registry = load_registry(args.registry)
    fingerprint = model_fingerprint(Path(args.model).read_bytes())
    app = create_app(lambda text: predict(params, arch, text), registry,
                     fingerprint=fingerprint)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------
# wiring

def _parser() -> _Parser:
    p = _Parser(prog="finterp", description=__doc__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("augment", help="synthesize a labeled corpus from a spec")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_augment)

    sp = sub.add_parser("train", help="train one architecture on a corpus")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--arch", choices=sorted(ARCH_FLAGS), required=True)
    sp.add_argument("--hidden", type=int, default=128)
    sp.add_argument("--epochs", type=int, default=50)
    sp.add_argument("--batch", type=int, default=64)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--patience", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="score a model on a labeled corpus")
    sp.add_argument("--model", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--pretty", action="store_true")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("compare", help="train and score the architecture table")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--config", help="JSON file of training-config overrides")
    sp.add_argument("--out", help="write the JSON report here")
    sp.add_argument("--pretty", action="store_true")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("interpret", help="interpret one sentence")
    sp.add_argument("--model", required=True)
    sp.add_argument("--registry", help="resolve entities and build the command")
    sp.add_argument("text")
    sp.set_defaults(func=cmd_interpret)

    sp = sub.add_parser("repl", help="interactive interpretation loop")
    sp.add_argument("--model", required=True)
    sp.add_argument("--registry", required=True)
    sp.set_defaults(func=cmd_repl)

    sp = sub.add_parser("serve", help="start the HTTP service")
    sp.add_argument("--model", required=True)
    sp.add_argument("--registry", required=True)
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--host", default="127.0.0.1")
    sp.set_defaults(func=cmd_serve)

    return p


def run(argv: list[str]) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main(argv=None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
