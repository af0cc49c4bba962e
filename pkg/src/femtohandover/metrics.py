"""KPI accounting, the Erlang-B oracle, scenario runs and load sweeps."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .cac import Scheme
from .errors import InputError


def erlang_b(servers: int, offered_load: float) -> float:
    """Blocking probability of an M/M/C/C loss system (stable recursion)."""
    if servers < 0 or offered_load < 0:
        raise InputError("servers and offered load must be nonnegative")
    b = 1.0
    for k in range(1, int(servers) + 1):
        b = offered_load * b / (k + offered_load * b)
    return b


@dataclass
class KpiAccumulator:
    c_total: float  # aggregate capacity of all cells, Mbps
    warmup: float = 0.0
    handover_attempts: int = 0
    handover_drops: int = 0
    new_attempts: int = 0
    new_blocks: int = 0
    utilization_integral: float = 0.0  # Mbps * s after warmup
    sim_time: float = 0.0
    stream_attempts: dict = field(default_factory=lambda: {"m2m": 0, "femto": 0})
    latencies: dict = field(default_factory=lambda: defaultdict(list))
    fso_switches: list = field(default_factory=list)

    def counting(self, now: float) -> bool:
        return now >= self.warmup

    def new_call(self, now: float, blocked: bool) -> None:
        if now >= self.warmup:
            self.new_attempts += 1
            self.new_blocks += bool(blocked)

    def handover(self, now: float, dropped: bool, stream: str) -> None:
        if now >= self.warmup:
            self.handover_attempts += 1
            self.handover_drops += bool(dropped)
            self.stream_attempts[stream] += 1

    def latency(self, now: float, kind, ms: float) -> None:
        if now >= self.warmup:
            self.latencies[getattr(kind, "value", kind)].append(ms)

    def fso_switch(self, record: tuple[float, float]) -> None:
        if record[0] >= self.warmup:
            self.fso_switches.append(record[1])

    def integrate(self, level: float, t0: float, t1: float) -> None:
        lo = max(t0, self.warmup)
        if t1 > lo:
            self.utilization_integral += level * (t1 - lo)

    def reset(self, now: float) -> None:
        """Discard everything counted so far and restart the window at ``now``."""
        fresh = KpiAccumulator(self.c_total, now)
        self.__dict__.update(fresh.__dict__)

    @property
    def dropping_probability(self) -> float:
        return self.handover_drops / self.handover_attempts if self.handover_attempts else 0.0

    @property
    def blocking_probability(self) -> float:
        return self.new_blocks / self.new_attempts if self.new_attempts else 0.0

    @property
    def utilization(self) -> float:
        span = self.sim_time - self.warmup
        return self.utilization_integral / (self.c_total * span) if span > 0 else 0.0

    def mean_latency(self, kind: str) -> float:
        xs = self.latencies.get(kind, [])
        return math.fsum(xs) / len(xs) if xs else math.nan

    def report(self, cfg) -> "KpiReport":
        w = cfg.workload
        return KpiReport(
            scheme=Scheme(cfg.scheme).value, lambda_new=w.lambda_new, offered_load=w.offered_load, seed=cfg.seed,
            dropping_prob=self.dropping_probability, blocking_prob=self.blocking_probability,
            utilization=self.utilization,
            mean_f2m_ms=self.mean_latency("F2M"), mean_m2f_ms=self.mean_latency("M2F"),
            mean_bh_ms=self.mean_latency("BH_M2M"),
            mean_fso_switch_ms=math.fsum(self.fso_switches) / len(self.fso_switches) if self.fso_switches else math.nan,
            handover_attempts=self.handover_attempts, handover_drops=self.handover_drops,
            new_attempts=self.new_attempts, new_blocks=self.new_blocks,
            m2m_attempts=self.stream_attempts["m2m"], femto_attempts=self.stream_attempts["femto"],
        )


@dataclass(frozen=True)
class KpiReport:
    scheme: str
    lambda_new: float
    offered_load: float
    seed: int
    dropping_prob: float
    blocking_prob: float
    utilization: float
    mean_f2m_ms: float
    mean_m2f_ms: float
    mean_bh_ms: float
    mean_fso_switch_ms: float
    handover_attempts: int
    handover_drops: int
    new_attempts: int
    new_blocks: int
    m2m_attempts: int
    femto_attempts: int


CSV_COLUMNS = tuple(f.name for f in dataclasses.fields(KpiReport))


def _cell(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def rows_to_csv(rows: Iterable[KpiReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def run_scenario(cfg, trace: bool = False):
    """Run one seeded scenario; with ``trace`` returns ``(report, trace_text)``."""
    from .simulation import Simulation

    sim = Simulation(cfg, trace=trace)
    report = sim.run()
    return (report, sim.trace_text()) if trace else report


def _sweep_job(cfg):
    return run_scenario(cfg)


def sweep_configs(cfg, lambda_grid: Sequence[float], seeds: Sequence[int],
                  schemes: Sequence[Scheme | str] = (Scheme.PROPOSED, Scheme.BASELINE)) -> list:
    if not len(lambda_grid):
        raise InputError("sweep needs at least one arrival rate")
    if not len(seeds):
        raise InputError("sweep needs at least one seed")
    return [cfg.replace(scheme=Scheme(s), seed=int(seed)).with_workload(lambda_new=float(lam))
            for s in schemes for lam in lambda_grid for seed in seeds]


def run_sweep(cfg, lambda_grid: Sequence[float], seeds: Sequence[int],
              schemes: Sequence[Scheme | str] = (Scheme.PROPOSED, Scheme.BASELINE), jobs: int = 1) -> list[KpiReport]:
    """One row per (scheme, arrival rate, seed), in that nesting order."""
    configs = sweep_configs(cfg, lambda_grid, seeds, schemes)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_job, configs))
    return [run_scenario(c) for c in configs]


SUMMARY_METRICS = ("dropping_prob", "blocking_prob", "utilization")


def ci_half_width(values: Sequence[float], level: float = 0.95) -> float:
    """Student-t confidence half-width of the mean over independent replications."""
    n = len(values)
    if n < 2:
        return math.nan
    sd = float(np.std(values, ddof=1))
    return float(stats.t.ppf(0.5 + level / 2, n - 1)) * sd / math.sqrt(n)


def summarize(rows: Iterable[KpiReport], level: float = 0.95) -> list[dict]:
    """Per (scheme, arrival rate) mean and confidence half-width of the headline KPIs."""
    groups: dict[tuple, list[KpiReport]] = defaultdict(list)
    for r in rows:
        groups[(r.scheme, r.lambda_new)].append(r)
    out = []
    for (scheme, lam), rs in sorted(groups.items()):
        entry = {"scheme": scheme, "lambda_new": lam, "offered_load": rs[0].offered_load, "replications": len(rs)}
        for m in SUMMARY_METRICS:
            xs = [getattr(r, m) for r in rs]
            entry[f"{m}_mean"] = float(np.mean(xs))
            entry[f"{m}_ci"] = ci_half_width(xs, level)
        out.append(entry)
    return out


def summary_to_csv(summary: list[dict]) -> str:
    if not summary:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(summary[0]), lineterminator="\n")
    w.writeheader()
    for row in summary:
        w.writerow({k: _cell(v) for k, v in row.items()})
    return buf.getvalue()
