#!/usr/bin/env python3
"""Run one behavior at full scale (1200 drivers, 6000 episodes, 3 seeds).

This is the long protocol; expect on the order of an hour per repetition.

Usage: python scripts/run_full_scale.py --behavior malicious --out out/full/malicious
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

from routechoice.config import load_config_file
from routechoice.reporting import export_run, summarize_result, write_manifest
from routechoice.runner import run_scenario

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "full_scale.yaml"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--behavior", default="selfish")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--reps", type=int, default=None)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    cfg = load_config_file(CONFIG)
    cfg.avs.behavior = args.behavior
    if args.seed is not None:
        cfg.run.master_seed = args.seed
    if args.reps is not None:
        cfg.run.repetitions = args.reps
    cfg.validate()
    write_manifest(cfg, args.out)
    t0 = time.time()
    result = run_scenario(cfg, progress=lambda i: print(f"repetition {i} done, {time.time()-t0:.0f}s"))
    export_run(result, args.out)
    print(summarize_result(result, window=100).to_csv(), end="")


if __name__ == "__main__":
    main()
