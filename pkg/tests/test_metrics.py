import csv
import io
import math

import pytest

from femtohandover.cac import Scheme
from femtohandover.cli import main
from femtohandover.config import ScenarioConfig, dump_config
from femtohandover.errors import InputError
from femtohandover.metrics import (CSV_COLUMNS, KpiAccumulator, ci_half_width, erlang_b, rows_to_csv, run_scenario,
                                   run_sweep, summarize, summary_to_csv, sweep_configs)
from femtohandover.simulation import Simulation

SHORT = ScenarioConfig(stop_time=4000, warmup=500)


def erlang_b_sum(c, a):
    """Erlang's formula written out as a ratio of truncated Poisson sums."""
    terms = [a**k / math.factorial(k) for k in range(c + 1)]
    return terms[-1] / math.fsum(terms)


def test_erlang_b_cases():
    assert erlang_b(0, 2.5) == 1.0
    assert erlang_b(6, 0) == 0.0
    assert erlang_b(6, 3) == pytest.approx(0.05215, abs=1e-4)
    for c in range(0, 30, 3):
        for a in (0.1, 1.0, 3.0, 7.5, 20.0):
            assert erlang_b(c, a) == pytest.approx(erlang_b_sum(c, a), rel=1e-12)
    with pytest.raises(InputError):
        erlang_b(-1, 1.0)


def test_erlang_b_extreme_load_is_stable():
    b = erlang_b(500, 400.0)
    assert 0 < b < 1 and math.isfinite(b)


def test_accumulator_counts_after_warmup_only():
    k = KpiAccumulator(c_total=6, warmup=10)
    k.new_call(5, blocked=True)
    k.handover(5, dropped=True, stream="m2m")
    k.new_call(10, blocked=False)
    k.handover(12, dropped=True, stream="femto")
    k.handover(13, dropped=False, stream="m2m")
    assert (k.new_attempts, k.new_blocks) == (1, 0)
    assert (k.handover_attempts, k.handover_drops) == (2, 1)
    assert k.stream_attempts == {"m2m": 1, "femto": 1}
    k.integrate(3.0, 0, 20)  # only [10, 20] counts
    k.sim_time = 20
    assert k.utilization_integral == 30.0 and k.utilization == 0.5
    assert k.dropping_probability == 0.5 and k.blocking_probability == 0.0


def test_empty_accumulator_ratios_are_zero():
    k = KpiAccumulator(6)
    assert k.dropping_probability == k.blocking_probability == k.utilization == 0.0


def test_kpis_in_unit_interval():
    for scheme in Scheme:
        r = run_scenario(SHORT.replace(scheme=scheme).with_workload(lambda_new=0.05))
        for v in (r.dropping_prob, r.blocking_prob, r.utilization):
            assert 0.0 <= v <= 1.0
        assert r.handover_drops <= r.handover_attempts and r.new_blocks <= r.new_attempts


def test_utilization_matches_snapshot_reintegration():
    cfg = SHORT.with_workload(lambda_new=0.03)
    sim = Simulation(cfg, record_snapshots=True)
    sim.run()
    levels = {c: 0.0 for c in range(cfg.track.cell_count)}
    integral, last = 0.0, 0.0
    for t, c, occ in sim.snapshots + [(cfg.stop_time, None, None)]:
        lo = max(last, cfg.warmup)
        if t > lo:
            integral += sum(levels.values()) * (t - lo)
        last = max(last, t)
        if c is not None:
            levels[c] = occ
    assert sim.kpi.utilization_integral == pytest.approx(integral, rel=1e-9)
    expected = integral / (cfg.cell.capacity * cfg.track.cell_count * (cfg.stop_time - cfg.warmup))
    assert sim.report().utilization == pytest.approx(expected, rel=1e-9)


def test_warmup_equals_restart_from_mid_state():
    w = 800.0
    a = run_scenario(SHORT.replace(warmup=w))
    sim = Simulation(SHORT.replace(warmup=0.0))
    sim.ctx.run_until(w)
    sim.kpi.reset(w)
    sim.ctx.run_until(SHORT.stop_time)
    sim.finish()
    b = sim.report()
    for name in ("handover_attempts", "handover_drops", "new_attempts", "new_blocks", "m2m_attempts",
                 "femto_attempts", "dropping_prob", "blocking_prob", "mean_bh_ms"):
        assert getattr(a, name) == getattr(b, name), name
    assert a.utilization == pytest.approx(b.utilization, rel=1e-12)


def test_low_load_dropping_is_negligible():
    r = run_scenario(ScenarioConfig().with_workload(lambda_new=0.01))
    assert r.offered_load <= 2.0
    assert r.dropping_prob < 0.01


def test_same_seed_same_row():
    assert rows_to_csv([run_scenario(SHORT)]) == rows_to_csv([run_scenario(SHORT)])
    assert run_scenario(SHORT) != run_scenario(SHORT.replace(seed=2))


def test_latency_means_from_scripts():
    quiet = run_scenario(SHORT.with_workload(lambda_new=0.01))
    assert quiet.handover_drops == 0 and quiet.mean_bh_ms == 155.0
    # Rejected BH sessions stop after 16 steps (80 ms) and pull the mean down.
    busy = run_scenario(SHORT.with_workload(lambda_new=0.04))
    assert busy.handover_drops > 0 and 80.0 < busy.mean_bh_ms < 155.0
    assert math.isnan(quiet.mean_fso_switch_ms)


def test_csv_schema():
    rows = [run_scenario(SHORT), run_scenario(SHORT.replace(scheme=Scheme.BASELINE))]
    text = rows_to_csv(rows)
    parsed = list(csv.reader(io.StringIO(text)))
    assert tuple(parsed[0]) == CSV_COLUMNS
    assert CSV_COLUMNS[:4] == ("scheme", "lambda_new", "offered_load", "seed")
    assert len(parsed) == 3
    assert all(len(p) == len(CSV_COLUMNS) for p in parsed)
    assert float(parsed[1][CSV_COLUMNS.index("dropping_prob")]) == rows[0].dropping_prob
    assert parsed[1][CSV_COLUMNS.index("mean_fso_switch_ms")] == "nan"


def test_sweep_shape():
    rows = run_sweep(SHORT, [0.01], [3])
    assert [r.scheme for r in rows] == ["proposed", "baseline"]
    assert len(sweep_configs(SHORT, [0.01, 0.02], [1, 2, 3])) == 12
    with pytest.raises(InputError):
        run_sweep(SHORT, [], [1])
    with pytest.raises(InputError):
        run_sweep(SHORT, [0.01], [])


def test_parallel_sweep_matches_serial():
    grid, seeds = [0.01, 0.02], [1]
    assert rows_to_csv(run_sweep(SHORT, grid, seeds, jobs=2)) == rows_to_csv(run_sweep(SHORT, grid, seeds))


def test_summary_statistics():
    assert ci_half_width([1.0]) != ci_half_width([1.0])  # nan
    xs = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    sd = math.sqrt(sum((x - 0.55) ** 2 for x in xs) / 9)
    assert ci_half_width(xs) == pytest.approx(2.262157 * sd / math.sqrt(10), rel=1e-6)
    rows = run_sweep(SHORT, [0.01], [1, 2])
    summary = summarize(rows)
    assert [(s["scheme"], s["replications"]) for s in summary] == [("baseline", 2), ("proposed", 2)]
    assert summary_to_csv(summary).splitlines()[0].startswith("scheme,lambda_new,offered_load,replications")


def test_cli_oracle(capsys):
    assert main(["--oracle", "erlangb", "6", "3"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.052157, abs=1e-6)


def test_cli_single_run_and_trace(tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text(dump_config(SHORT), encoding="utf-8")
    out, trace = tmp_path / "k.csv", tmp_path / "t.tsv"
    assert main(["--config", str(cfg), "--seed", "4", "--scheme", "proposed", "--out", str(out),
                 "--trace", str(trace)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("proposed,")
    text = trace.read_text()
    assert text.startswith("# run scheme=proposed seed=4")
    assert "\tmeasurement_report\t" in text


def test_cli_sweep(tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text(dump_config(SHORT), encoding="utf-8")
    out, summ = tmp_path / "k.csv", tmp_path / "s.csv"
    assert main(["--config", str(cfg), "--sweep", "0.01,0.02", "--seeds", "1", "2", "--out", str(out),
                 "--summary", str(summ)]) == 0
    assert len(out.read_text().splitlines()) == 1 + 2 * 2 * 2
    assert len(summ.read_text().splitlines()) == 1 + 4


def test_cli_reports_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("cell:\n  capcity: 6\n", encoding="utf-8")
    assert main(["--config", str(cfg)]) == 2
    assert "cell.capcity" in capsys.readouterr().err
