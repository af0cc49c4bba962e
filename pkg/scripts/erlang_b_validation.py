"""Simulated blocking of the degenerate single-cell loss system against Erlang-B."""

import argparse
import time
from pathlib import Path

from femtohandover.config import load_config
from femtohandover.metrics import erlang_b, run_scenario

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "erlangb.yaml"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=CONFIG)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1])
    args = ap.parse_args()
    cfg = load_config(args.config)
    servers = int(cfg.cell.capacity / cfg.classes[0].beta_r)
    exact = erlang_b(servers, cfg.workload.offered_load)
    print(f"Erlang-B({servers}, {cfg.workload.offered_load:g}) = {exact:.5f}")
    for seed in args.seeds:
        t0 = time.time()
        r = run_scenario(cfg.replace(seed=seed))
        print(f"seed {seed}: {r.new_attempts} calls, blocking {r.blocking_prob:.5f} "
              f"(diff {r.blocking_prob - exact:+.5f}) in {time.time() - t0:.1f} s")


if __name__ == "__main__":
    main()
