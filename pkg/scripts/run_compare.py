#!/usr/bin/env python3
"""Run the feature-set comparison on the bundled corpus and refresh the
checked-in report under reports/compare/.

Equivalent to: farm-assistant compare --config data/config.json --out reports/compare
"""
from __future__ import annotations

import sys
from pathlib import Path

from farm_assistant.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else str(ROOT / "reports" / "compare")
    sys.exit(main(["compare", "--config", str(ROOT / "data" / "config.json"),
                   "--out", out]))
