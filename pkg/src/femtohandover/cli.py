"""Command-line driver: single runs, load sweeps, traces and the Erlang-B oracle."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .cac import Scheme
from .config import ScenarioConfig, load_config
from .errors import FemtoSimError
from .metrics import erlang_b, rows_to_csv, run_scenario, run_sweep, summarize, summary_to_csv


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="femtohandover", description=__doc__)
    ap.add_argument("--config", type=Path, help="YAML scenario file (defaults reproduce the reference parameters)")
    ap.add_argument("--seed", type=int, help="override the scenario seed")
    ap.add_argument("--seeds", type=int, nargs="+", help="replication seeds for --sweep")
    ap.add_argument("--sweep", nargs="+", metavar="LAMBDA", help="new-call arrival rates per cell (1/s)")
    ap.add_argument("--scheme", choices=["proposed", "baseline", "both"], default="both")
    ap.add_argument("--out", type=Path, help="KPI CSV path (stdout when omitted)")
    ap.add_argument("--summary", type=Path, help="per-point mean and 95%% CI of a sweep")
    ap.add_argument("--trace", type=Path, help="write handover and FSO step traces of a single run")
    ap.add_argument("--jobs", type=int, default=1, help="parallel worker processes for sweeps")
    ap.add_argument("--oracle", nargs=3, metavar=("erlangb", "C", "a"), help="print an Erlang-B blocking value")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)

    if args.oracle:
        name, c, a = args.oracle
        if name.lower() != "erlangb":
            ap.error(f"unknown oracle {name!r}")
        print(f"{erlang_b(int(c), float(a)):.10g}")
        return 0

    try:
        cfg = load_config(args.config) if args.config else ScenarioConfig()
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        schemes = [Scheme.PROPOSED, Scheme.BASELINE] if args.scheme == "both" else [Scheme(args.scheme)]

        if args.sweep is not None:
            grid = [x for tok in args.sweep for x in _floats(tok)]
            if not grid:
                ap.error("--sweep needs at least one arrival rate")
            if args.trace:
                ap.error("--trace applies to single runs, not sweeps")
            seeds = args.seeds or [cfg.seed]
            rows = run_sweep(cfg, grid, seeds, schemes, jobs=args.jobs)
            summary = summary_to_csv(summarize(rows))
            if args.summary:
                args.summary.write_text(summary, encoding="utf-8")
            else:
                sys.stderr.write(summary)
        else:
            rows, traces = [], []
            for s in schemes:
                run_cfg = cfg.replace(scheme=s)
                if args.trace:
                    report, text = run_scenario(run_cfg, trace=True)
                    traces.append(f"# run scheme={s.value} seed={run_cfg.seed}\n{text}")
                else:
                    report = run_scenario(run_cfg)
                rows.append(report)
            if args.trace:
                args.trace.write_text("".join(traces), encoding="utf-8")
    except FemtoSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    text = rows_to_csv(rows)
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
