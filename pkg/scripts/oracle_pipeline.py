#!/usr/bin/env python3
"""Synthetic metadata -> benchmark -> oracle answers -> report, via the CLI.

    python scripts/oracle_pipeline.py --clips 200 --out runs/oracle
"""

import argparse
import json
import sys
import time
from pathlib import Path

from spatialqa.cli import main as cli


def run(step: list[str]) -> None:
    status = cli(step)
    if status != 0:
        sys.exit(f"{step[0]} exited with status {status}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--clips", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/oracle")
    args = ap.parse_args()

    out = Path(args.out)
    meta = out / "metadata"
    t0 = time.perf_counter()
    run(["synth", str(meta), "--clips", str(args.clips), "--seed", str(args.seed)])
    run(["gen-benchmark", str(meta), "--out-dir", str(out), "--seed", str(args.seed)])
    run(["answer", str(out / "benchmark.json"), str(out / "manifest.json"), "--out-dir", str(out)])
    run(["score", str(out / "benchmark.json"), str(out / "answers.jsonl"), "--out-dir", str(out),
         "--model-name", "oracle"])
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    print(f"overall accuracy {report['overall_accuracy']:.3f} in {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    main()
