"""Dropping probability and utilization of the priority scheme against the baseline.

    python scripts/dropping_utilization_sweep.py --seeds 10 --out results/
"""

import argparse
import time
from pathlib import Path

from femtohandover.config import ScenarioConfig, load_config
from femtohandover.metrics import rows_to_csv, run_sweep, summarize, summary_to_csv

GRID = (0.0025, 0.005, 0.0075, 0.01, 0.0125, 0.015, 0.02, 0.03)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--grid", type=float, nargs="+", default=list(GRID))
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()

    cfg = load_config(args.config) if args.config else ScenarioConfig()
    t0 = time.time()
    rows = run_sweep(cfg, args.grid, list(range(1, args.seeds + 1)), jobs=args.jobs)
    summary = summarize(rows)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "sweep_runs.csv").write_text(rows_to_csv(rows), encoding="utf-8")
    (args.out / "sweep_summary.csv").write_text(summary_to_csv(summary), encoding="utf-8")

    by = {(s["scheme"], s["lambda_new"]): s for s in summary}
    print(f"{'load':>6} {'drop prop':>10} {'drop base':>10} {'util prop':>10} {'util base':>10} {'blk prop':>9} {'blk base':>9}")
    for lam in args.grid:
        p, b = by[("proposed", lam)], by[("baseline", lam)]
        print(f"{p['offered_load']:6.2f} {p['dropping_prob_mean']:10.4f} {b['dropping_prob_mean']:10.4f} "
              f"{p['utilization_mean']:10.4f} {b['utilization_mean']:10.4f} "
              f"{p['blocking_prob_mean']:9.4f} {b['blocking_prob_mean']:9.4f}")
    print(f"{len(rows)} runs in {time.time() - t0:.1f} s -> {args.out}/")


if __name__ == "__main__":
    main()
