from pathlib import Path

import pytest

from femtohandover.cac import Scheme
from femtohandover.config import (ScenarioConfig, config_from_dict, config_to_dict, dump_config,
                                  load_config)
from femtohandover.errors import ConfigError
from femtohandover.handover import HandoverKind
from femtohandover.traffic import Backhaul

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_defaults_match_reference_table():
    cfg = ScenarioConfig()
    assert cfg.cell.capacity == 6.0
    assert cfg.cell.reservation_time == 10.0
    assert [c.xi for c in cfg.classes if c.qos_adaptive] == [0.5]
    assert cfg.workload.adaptive_ratio == 0.5
    assert cfg.workload.m2m_to_femto_ratio == 1.0
    assert cfg.workload.mean_holding == 120.0
    assert cfg.workload.mean_dwell == 540.0
    assert cfg.warmup == 1000.0
    assert cfg.fso.profile().total_ms == 136.0


def test_round_trip(tmp_path):
    cfg = ScenarioConfig(seed=9, scheme=Scheme.BASELINE).with_workload(lambda_new=0.03)
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(cfg), encoding="utf-8")
    assert load_config(path) == cfg
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_shipped_default_matches_code():
    assert load_config(CONFIGS / "default.yaml") == ScenarioConfig()


def test_shipped_configs_load():
    e = load_config(CONFIGS / "erlangb.yaml")
    assert e.track.cell_count == 1 and e.workload.offered_load == pytest.approx(3.0)
    f = load_config(CONFIGS / "fso.yaml")
    assert f.track.backhaul is Backhaul.FSO


def test_partial_config_keeps_defaults():
    cfg = config_from_dict({"cell": {"capacity": 8}, "workload": {"vehicle_count": 2}})
    assert cfg.cell.capacity == 8.0 and cfg.cell.reservation_time == 10.0
    assert cfg.workload.vehicle_count == 2 and cfg.workload.mean_dwell == 540.0
    assert config_from_dict(None) == ScenarioConfig()


@pytest.mark.parametrize("data,field", [
    ({"cell": {"capcity": 6}}, "cell.capcity"),
    ({"sede": 1}, "sede"),
    ({"workload": {"lambda_new": "fast"}}, "workload.lambda_new"),
    ({"workload": {"lambda_new": -1}}, "workload"),
    ({"scheme": "greedy"}, "scheme"),
    ({"classes": [{"class_id": 1, "beta_r": 1.0, "xi": 2.0}]}, "classes[0]"),
    ({"seed": 1.5}, "seed"),
    ({"warmup": 5e4}, "warmup"),
    ({"track": {"backhaul": "copper"}}, "track.backhaul"),
])
def test_errors_name_the_field(data, field):
    with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
        config_from_dict(data)


def test_top_level_must_be_mapping(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(p)


def test_latency_overrides_reach_scripts():
    cfg = config_from_dict({"handover": {"step_latency_ms": 2, "latency_overrides": {"F2M": {"1": 10}}}})
    scripts = cfg.handover.scripts()
    assert scripts[HandoverKind.F2M].steps[0].latency_ms == 10.0
    assert scripts[HandoverKind.F2M].steps[1].latency_ms == 2.0
    assert scripts[HandoverKind.M2F].steps[0].latency_ms == 2.0
