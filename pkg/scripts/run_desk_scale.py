#!/usr/bin/env python3
"""Run the desk-scale experiment grid: all six AV behaviors, three seeds each.

Writes one run directory per behavior under the output root, then a combined
summary table and charts. Roughly four minutes on a laptop.

Usage: python scripts/run_desk_scale.py [--out out/desk_scale] [--window 50]
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

from routechoice.behavior import BEHAVIORS
from routechoice.config import load_config_file
from routechoice.reporting import emit_charts, export_run, summarize_result, write_manifest
from routechoice.runner import run_scenario

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "desk_scale.yaml"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/desk_scale")
    parser.add_argument("--window", type=int, default=50)
    parser.add_argument("--charts", action="store_true", help="also render SVG charts")
    args = parser.parse_args()

    out_root = Path(args.out)
    combined = ["behavior,repetition,av_pct,human_pct,system_pct"]
    for behavior in sorted(BEHAVIORS):
        cfg = load_config_file(CONFIG)
        cfg.avs.behavior = behavior
        out_dir = out_root / behavior
        write_manifest(cfg, out_dir)
        t0 = time.time()
        result = run_scenario(cfg)
        export_run(result, out_dir)
        table = summarize_result(result, window=args.window)
        combined.extend(table.to_csv().strip().splitlines()[1:])
        if args.charts:
            emit_charts([rep.records for rep in result.reps], out_dir / "charts")
        mean = table.rows[-1]
        print(
            f"{behavior:14s} {time.time() - t0:5.1f}s  "
            f"av {mean.av_pct:+7.2f}%  human {mean.human_pct:+7.2f}%  "
            f"system {mean.system_pct:+7.2f}%"
        )
    out_root.mkdir(parents=True, exist_ok=True)
    summary_path = out_root / "summary_all.csv"
    summary_path.write_text("\n".join(combined) + "\n", encoding="utf-8")
    print(f"wrote {summary_path}")


if __name__ == "__main__":
    main()
