#!/usr/bin/env python3
"""Regenerate the committed golden trace fixture from the demo bundle.

Run after any intentional routing change, then review the diff:

    python scripts/make_golden_traces.py
"""

import json
from pathlib import Path

from shopassist.demo import run_golden_script

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "golden_traces.json"


def main() -> None:
    records = run_golden_script()
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(records, indent=2, ensure_ascii=False) + "\n",
                   encoding="utf-8")
    print(f"wrote {len(records)} turn traces to {OUT}")


if __name__ == "__main__":
    main()
