#!/usr/bin/env python3
"""Train (or reuse) the bundled model and walk through a scripted conversation.

Shows the three interesting reply shapes: a knowledge-base hit, a miss that
produces the data-unavailable reply, and an out-of-scope message that lands in
fallback. Pass --retrain to force a fresh training run.
"""
from __future__ import annotations

import argparse
from pathlib import Path

from farm_assistant.bundle import CONFIG_FILE
from farm_assistant.engine import load_engine, load_engine_config, train_engine

ROOT = Path(__file__).resolve().parent.parent

SCRIPT = [
    "hi",
    "my paddy has leaf blast",
    "what about zinc deficiency in paddy",
    "my banana has leaf blast",
    "order me a taxi",
    "contact of agricultural officer in thanjavur",
    "thanks",
    "bye",
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--retrain", action="store_true",
                        help="retrain even if a bundle already exists")
    args = parser.parse_args()

    config = load_engine_config(ROOT / "data" / "config.json")
    bundle_dir = Path(config.bundle_dir)
    if args.retrain or not (bundle_dir / CONFIG_FILE).is_file():
        print("training model bundle (a minute or two)...")
        result = train_engine(config)
        print(f"bundle written to {result.bundle_dir} "
              f"(model_version {result.model_version})\n")

    engine = load_engine(bundle_dir, kb_dir=config.kb_dir)
    for line in SCRIPT:
        print(f"you> {line}")
        for reply in engine.handle("demo", line):
            print(f"bot> {reply}")
        print()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
