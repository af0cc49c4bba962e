"""Scenario configuration: nested dataclasses loaded from YAML.

Unknown keys are rejected with the dotted path of the offending field.
Defaults mirror the parameter table of the reference study: 6 Mbps cells,
xi = 0.5, 1:1 adaptive mix, 1:1 handover streams, 120 s holding, 540 s
dwell and a 10 s reservation time.
"""

from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import yaml

from .cac import DEFAULT_CLASSES, Scheme, TrafficClass
from .errors import ConfigError
from .fso import DEFAULT_SWITCH_LATENCIES_MS, FsoLinkConfig, FsoSwitchProfile
from .handover import DEFAULT_STEP_MS, HandoverKind, StepScript, default_scripts
from .radio import RadioConfig
from .traffic import Track, WorkloadParams


@dataclass(frozen=True)
class CellConfig:
    capacity: float = 6.0  # Mbps per macrocell
    reservation_time: float = 10.0  # s


@dataclass(frozen=True)
class HandoverConfig:
    step_latency_ms: float = DEFAULT_STEP_MS
    latency_overrides: dict = field(default_factory=dict)  # kind -> {step index: ms}

    def scripts(self) -> dict[HandoverKind, StepScript]:
        base = default_scripts()
        out = {}
        for kind, script in base.items():
            extra = self.latency_overrides.get(kind.value, {})
            out[kind] = script.with_latencies(self.step_latency_ms, {int(k): float(v) for k, v in extra.items()})
        return out


@dataclass(frozen=True)
class FsoConfig:
    P_t: float = 1.0  # W
    A: float = 1e-4  # m^2
    T_s: float = 1.0
    v: float = 1.5
    psi_c_deg: float = 60.0
    phi_half_deg: float = 60.0
    lateral_offset: float = 2.0  # m between track axis and AP heads
    min_gain: float = 0.0
    switch_latencies_ms: tuple[float, ...] = DEFAULT_SWITCH_LATENCIES_MS

    def link(self) -> FsoLinkConfig:
        return FsoLinkConfig(P_t=self.P_t, A=self.A, T_s=self.T_s, v=self.v,
                             psi_c=math.radians(self.psi_c_deg), phi_half=math.radians(self.phi_half_deg))

    def profile(self) -> FsoSwitchProfile:
        return FsoSwitchProfile(tuple(self.switch_latencies_ms))


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 1
    scheme: Scheme = Scheme.PROPOSED
    stop_time: float = 20000.0  # s
    warmup: float = 1000.0  # s
    cell: CellConfig = CellConfig()
    classes: tuple[TrafficClass, ...] = DEFAULT_CLASSES
    workload: WorkloadParams = WorkloadParams()
    track: Track = Track()
    handover: HandoverConfig = HandoverConfig()
    fso: FsoConfig = FsoConfig()
    radio: RadioConfig = RadioConfig()

    def __post_init__(self):
        if not 0 <= self.warmup < self.stop_time:
            raise ConfigError("warmup must lie in [0, stop_time)")
        if not self.classes:
            raise ConfigError("classes: at least one traffic class required")
        ids = [c.class_id for c in self.classes]
        if len(set(ids)) != len(ids):
            raise ConfigError("classes: duplicate class_id")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def with_workload(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, workload=dataclasses.replace(self.workload, **changes))


def _convert(tp, value, path: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, getattr(__import__("types"), "UnionType", None)):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _convert(inner[0], value, path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a mapping")
        return _build(tp, value, path + ".")
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list")
        return tuple(_convert(args[0], v, f"{path}[{i}]") for i, v in enumerate(value))
    if tp is dict or origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a mapping")
        return value
    if isinstance(tp, type) and issubclass(tp, Enum):
        try:
            return tp(value)
        except ValueError:
            raise ConfigError(f"{path}: {value!r} is not one of {[m.value for m in tp]}") from None
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    return value


def _build(cls, data: dict, path: str = ""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key{'s' if len(unknown) > 1 else ''} {', '.join(path + k for k in unknown)}")
    kwargs = {k: _convert(hints[k], v, path + k) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path.rstrip('.') or 'config'}: {exc}") from exc


def config_from_dict(data: dict[str, Any] | None) -> ScenarioConfig:
    return _build(ScenarioConfig, data or {}, "")


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data)


def _plain(value):
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return _plain(cfg)


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
