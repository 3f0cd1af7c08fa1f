"""Command-line entry points: train, predict, evaluate, ablate."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .corpus import parse_conll
from .errors import CorefPipeError
from .model import load_checkpoint
from .pipeline import (
    evaluate_files,
    evaluate_pairs,
    format_score_table,
    report_to_json_dict,
    run_predict,
)
from .train import run_train

ETA_SWEEP = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
LMAX_SWEEP = [10, 20, 30, 40, float("inf")]
RHO_SWEEP = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1]
BRIDGING_SWEEP = ["none", "fc", "mha"]


def _cmd_train(args) -> int:
    config = load_config(args.config)
    train_path = args.train or config.dataset_paths.get("train")
    if not train_path:
        print("train: no training data given (flag --train or dataset_paths.train)", file=sys.stderr)
        return 2
    val_path = args.val or config.dataset_paths.get("val")
    train_docs = parse_conll(train_path)
    val_docs = parse_conll(val_path) if val_path else None
    _, result = run_train(config, train_docs, val_docs, checkpoint_path=args.checkpoint)
    print(
        f"trained {result.epochs_run} epoch(s); best validation avg F1 "
        f"{100 * result.best_avg_f1:.2f} at epoch {result.best_epoch}"
    )
    if result.checkpoint_path:
        print(f"checkpoint written to {result.checkpoint_path}")
    return 0


def _cmd_predict(args) -> int:
    config = load_config(args.config)
    if args.llm:
        config.llm.backend = args.llm
    model, _ = load_checkpoint(args.checkpoint)
    docs = parse_conll(args.input)
    result = run_predict(
        config,
        docs,
        model,
        output_path=args.output,
        audit_path=args.audit,
        use_agent=not args.no_agent,
    )
    n_exchanges = len(result.exchanges())
    print(f"predicted {len(docs)} document(s); {n_exchanges} LLM exchange(s)")
    if result.warnings:
        print(f"warning: {result.warnings} exchange(s) failed open", file=sys.stderr)
    return 0


def _cmd_evaluate(args) -> int:
    report = evaluate_files(args.gold, args.pred, drop_singleton_predictions=args.drop_singletons)
    print(format_score_table(report))
    payload = json.dumps(report_to_json_dict(report), sort_keys=True)
    if args.json:
        Path(args.json).write_text(payload + "\n", encoding="utf-8")
    else:
        print(payload)
    return 0


def _sweep_rows(args, config: PipelineConfig):
    model, _ = load_checkpoint(args.checkpoint)
    docs = parse_conll(args.input)

    def scored(cfg: PipelineConfig, use_agent: bool):
        result = run_predict(cfg, docs, model, use_agent=use_agent)
        report = evaluate_pairs(docs, result.predictions())
        return report, len(result.exchanges())

    if args.sweep == "eta":
        for eta in ETA_SWEEP:
            cfg = dataclasses.replace(config)
            cfg.filters = dataclasses.replace(config.filters, eta1=eta, eta2=eta)
            report, calls = scored(cfg, use_agent=True)
            yield f"eta={eta:<4}", report, calls
    elif args.sweep == "rho":
        for rho in RHO_SWEEP:
            cfg = dataclasses.replace(config)
            cfg.filters = dataclasses.replace(config.filters, rho=rho)
            report, calls = scored(cfg, use_agent=True)
            yield f"rho={rho:<6g}", report, calls
    elif args.sweep == "lmax":
        for l_max in LMAX_SWEEP:
            cfg = dataclasses.replace(config)
            cfg.detector = dataclasses.replace(config.detector, l_max=l_max)
            report, calls = scored(cfg, use_agent=False)
            yield f"l_max={l_max:<4g}", report, calls
    else:  # bridging: retrain a small model per variant
        train_path = args.train or config.dataset_paths.get("train")
        if not train_path:
            raise CorefPipeError("bridging sweep needs --train data to retrain per variant")
        train_docs = parse_conll(train_path)
        for variant in BRIDGING_SWEEP:
            cfg = dataclasses.replace(config)
            cfg.encoder = dataclasses.replace(
                config.encoder, bridging=variant, strategy="independent"
            )
            variant_model, _ = run_train(cfg, train_docs, docs)
            result = run_predict(cfg, docs, variant_model, use_agent=False)
            report = evaluate_pairs(docs, result.predictions())
            yield f"bridging={variant:<5}", report, 0


def _cmd_ablate(args) -> int:
    config = load_config(args.config)
    if args.llm:
        config.llm.backend = args.llm
    print(f"{'setting':<16}{'avg_f1':>8}{'mention_f1':>12}{'llm_calls':>11}")
    for label, report, calls in _sweep_rows(args, config):
        print(
            f"{label:<16}{100 * report['avg_f1']:>8.2f}"
            f"{100 * report['mention'].f1:>12.2f}{calls:>11}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corefpipe", description="Coreference resolution pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on CoNLL data")
    p.add_argument("--config", required=True)
    p.add_argument("--train", help="training CoNLL file (overrides config)")
    p.add_argument("--val", help="validation CoNLL file (overrides config)")
    p.add_argument("--checkpoint", required=True, help="output checkpoint path")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("predict", help="run inference over CoNLL input")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="predictions JSONL path")
    p.add_argument("--audit", help="audit log JSONL path")
    p.add_argument("--no-agent", action="store_true", help="skip the LLM stages")
    p.add_argument("--llm", help="mock:gold | mock:yes | mock:no | api | mock:scripted:PATH")
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold CoNLL")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--drop-singletons", action="store_true",
                   help="drop predicted singleton clusters before scoring")
    p.add_argument("--json", help="also write the report as JSON to this path")
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("ablate", help="sweep one knob and report scores")
    p.add_argument("--sweep", required=True, choices=["eta", "lmax", "rho", "bridging"])
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="gold-annotated CoNLL file")
    p.add_argument("--train", help="training data for the bridging sweep")
    p.add_argument("--llm", help="LLM backend override")
    p.set_defaults(fn=_cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CorefPipeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
