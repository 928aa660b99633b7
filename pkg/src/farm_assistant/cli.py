"""Command-line entry points.

  train     fit both models from a config file and write the bundle
  evaluate  score a bundle (or a fresh holdout run) and write report files
  compare   train the built-in configuration presets and write report files
  chat      interactive REPL against a trained bundle
  serve     HTTP chat API
  kb-check  parse the knowledge-base tables and print row counts

Every command prints a one-line diagnostic and exits 1 on data or config
errors; stack traces are reserved for actual bugs. ASSISTANT_LOG_LEVEL
(error|warn|info|debug) controls log verbosity.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .bundle import load_bundle
from .data import load_nlu_data
from .diet import diet_train
from .embeddings import load_embedding_table
from .engine import load_engine, load_engine_config, train_engine
from .errors import AssistantError, ConfigError
from .evaluation import (ComparisonReport, ConfigResult, built_in_presets,
                         compare_configs, evaluate_nlu, render_reports,
                         split_dataset)
from .featurizers import fit_featurizers
from .kb import load_kb
from .tokenizer import tokenize

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> str:
    raw = os.environ.get("ASSISTANT_LOG_LEVEL", "info").lower()
    if raw not in _LOG_LEVELS:
        print(f"warning: unknown ASSISTANT_LOG_LEVEL {raw!r}, using 'info'",
              file=sys.stderr)
        raw = "info"
    logging.basicConfig(level=_LOG_LEVELS[raw],
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    return raw


def cmd_train(args) -> int:
    config = load_engine_config(args.config)
    if args.out:
        config.bundle_dir = Path(args.out)
    result = train_engine(config)
    n = len(result.diet_history)
    for i, e in enumerate(result.diet_history, start=1):
        print(f"epoch {i}/{n}: total={e.total:.4f} intent={e.intent_loss:.4f}"
              f" mask={e.mask_loss:.4f} entity={e.entity_loss:.4f}")
    print(f"bundle written to {result.bundle_dir} (model_version {result.model_version})")
    return 0


def _print_macro_table(report: ComparisonReport) -> None:
    print("config | intent macro F1 | entity macro F1")
    for entry in report.entries:
        if entry.report is None:
            print(f"{entry.name} | FAILED | FAILED")
        else:
            print(f"{entry.name} | {entry.report.intent_macro_f1:.6f}"
                  f" | {entry.report.entity_macro_f1:.6f}")


def cmd_evaluate(args) -> int:
    config = load_engine_config(args.config)
    nlu = load_nlu_data(config.nlu_path)

    if args.model:
        loaded = load_bundle(args.model)
        nlu_report = evaluate_nlu(loaded.diet_params, loaded.featurizer_state,
                                  nlu.examples, loaded.embedding_table,
                                  loaded.fallback_threshold,
                                  loaded.ambiguity_threshold)
        n_train, n_test = 0, len(nlu.examples)
    else:
        train, test = split_dataset(nlu.examples, config.test_fraction,
                                    config.diet.seed)
        state = fit_featurizers([tokenize(ex.text) for ex in train],
                                config.featurizer, nlu.regex_patterns)
        table = (load_embedding_table(config.embedding_table_path)
                 if config.embedding_table_path else None)
        params, _ = diet_train(train, config.diet, state, table)
        nlu_report = evaluate_nlu(params, state, test, table,
                                  config.fallback_threshold,
                                  config.ambiguity_threshold)
        n_train, n_test = len(train), len(test)

    report = ComparisonReport(entries=[ConfigResult("model", nlu_report)],
                              n_train=n_train, n_test=n_test,
                              seed=config.diet.seed,
                              test_fraction=config.test_fraction)
    if args.out:
        render_reports(report, args.out)
    _print_macro_table(report)
    return 0


def cmd_compare(args) -> int:
    config = load_engine_config(args.config)
    if config.table_a_path is None or config.table_b_path is None:
        raise ConfigError("compare needs paths.table_a and paths.table_b in the config")
    config.validate_paths()
    nlu = load_nlu_data(config.nlu_path)
    table_a = load_embedding_table(config.table_a_path)
    table_b = load_embedding_table(config.table_b_path)

    presets = built_in_presets(table_a, table_b, base=config.diet)
    report = compare_configs(presets, nlu.examples,
                             regex_patterns=nlu.regex_patterns,
                             featurizer=config.featurizer,
                             test_fraction=config.test_fraction,
                             seed=config.diet.seed)
    render_reports(report, args.out)
    _print_macro_table(report)
    failed = [e.name for e in report.entries if e.report is None]
    if failed:
        print(f"note: partial report, failed configs: {', '.join(failed)}")
    print(f"reports written to {args.out}")
    return 0


def cmd_chat(args) -> int:
    engine = load_engine(args.model, args.kb, args.session_dir)
    debug = False
    print("farm assistant ready. /debug on|off toggles traces, /quit exits.")
    while True:
        try:
            line = input("> ")
        except EOFError:
            return 0
        line = line.strip()
        if not line:
            continue
        if line == "/quit":
            return 0
        if line in ("/debug on", "/debug off"):
            debug = line.endswith("on")
            print(f"# debug {'on' if debug else 'off'}")
            continue
        try:
            result = engine.handle_detailed("cli", line)
        except AssistantError as exc:
            print(f"# error: {exc}")
            continue
        if debug:
            top = result.ranking[0] if result.ranking else ("?", 0.0)
            print(f"# intent: {result.intent} (top {top[0]} {top[1]:.3f})")
            ents = ", ".join(f"{e.entity}={e.value}" for e in result.entities) or "none"
            print(f"# entities: {ents}")
            print(f"# actions: {' -> '.join(result.actions)}")
        for text in result.responses:
            print(text)


def cmd_serve(args, log_level: str) -> int:
    from .server import http_serve

    engine = load_engine(args.model, args.kb, args.session_dir)
    uvicorn_level = {"warn": "warning"}.get(log_level, log_level)
    print(f"serving on http://{args.host}:{args.port} "
          f"(model_version {engine.model_version})")
    http_serve(engine, host=args.host, port=args.port, log_level=uvicorn_level)
    return 0


def cmd_kb_check(args) -> int:
    kb = load_kb(args.kb)
    for table, count in kb.counts().items():
        print(f"{table}: {count} rows")
    print("knowledge base ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="farm-assistant",
                                     description="agricultural advisory dialogue engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train both models and write a bundle")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the bundle output directory")

    p = sub.add_parser("evaluate", help="score a bundle or a fresh holdout run")
    p.add_argument("--config", required=True)
    p.add_argument("--model", help="bundle directory; omit to train on a fresh split")
    p.add_argument("--out", help="directory for report files")

    p = sub.add_parser("compare", help="train the built-in presets and report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("chat", help="interactive REPL")
    p.add_argument("--model", required=True)
    p.add_argument("--kb")
    p.add_argument("--session-dir")

    p = sub.add_parser("serve", help="HTTP chat API")
    p.add_argument("--model", required=True)
    p.add_argument("--kb")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--session-dir")

    p = sub.add_parser("kb-check", help="validate the knowledge-base tables")
    p.add_argument("--kb", required=True)

    return parser


def main(argv=None) -> int:
    log_level = _setup_logging()
    args = build_parser().parse_args(argv)
    commands = {
        "train": cmd_train,
        "evaluate": cmd_evaluate,
        "compare": cmd_compare,
        "chat": cmd_chat,
        "kb-check": cmd_kb_check,
    }
    try:
        if args.command == "serve":
            return cmd_serve(args, log_level)
        return commands[args.command](args)
    except (AssistantError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
