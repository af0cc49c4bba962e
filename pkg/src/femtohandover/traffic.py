"""Call workload and vehicle mobility on a ring-shaped 1-D track.

The track is a ring of ``cell_count`` macrocells, each ``cell_length``
meters long.  FSO access points sit every ``fso_spacing`` meters; a
vehicle switches to the next AP once it passes the midpoint between two
APs by ``fso_switch_offset`` meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Hashable, Sequence

import numpy as np

from .cac import Admission, TrafficClass
from .errors import InputError

_TOUCH = 1e-9  # m; a crossing this close to the end of a step counts as reached


@dataclass(frozen=True)
class WorkloadParams:
    lambda_new: float = 0.02  # new fixed-user calls per second per cell
    mean_holding: float = 120.0  # s
    mean_dwell: float = 540.0  # s
    adaptive_ratio: float = 0.5  # fraction of calls drawn from adaptive classes
    m2m_to_femto_ratio: float = 1.0  # target ratio of handover streams
    fixed_dwell: bool = True  # fixed users hand over when their dwell expires
    vehicle_count: int = 4
    vehicle_speed: float = 20.0  # m/s
    fap_capacity: int = 4  # calls per femtocell
    onboard_rate_factor: float | None = None  # onboard calls/s per vehicle, relative to lambda_new
    m2f_probability: float = 0.0  # FSO backhaul only: share of dwell expiries that board a vehicle

    def __post_init__(self):
        for name in ("lambda_new", "mean_holding", "mean_dwell", "m2m_to_femto_ratio"):
            if not getattr(self, name) > 0:
                raise InputError(f"workload.{name} must be positive")
        if self.vehicle_count < 0 or self.fap_capacity < 0:
            raise InputError("vehicle_count and fap_capacity must be nonnegative")
        if self.vehicle_count and not self.vehicle_speed > 0:
            raise InputError("workload.vehicle_speed must be positive")
        if not 0 <= self.adaptive_ratio <= 1 or not 0 <= self.m2f_probability <= 1:
            raise InputError("ratios must lie in [0, 1]")
        if self.onboard_rate_factor is not None and self.onboard_rate_factor < 0:
            raise InputError("workload.onboard_rate_factor must be nonnegative")

    @property
    def offered_load(self) -> float:
        """Fixed-user offered load per cell in Erlangs."""
        return self.lambda_new * self.mean_holding


class Backhaul(str, Enum):
    MACRO = "macro"
    FSO = "fso"


@dataclass(frozen=True)
class Track:
    cell_count: int = 4
    cell_length: float = 1000.0  # m
    backhaul: Backhaul = Backhaul.MACRO
    fso_spacing: float = 200.0  # m
    fso_switch_offset: float = 1.0  # m past the AP midpoint

    def __post_init__(self):
        if self.cell_count < 1 or not self.cell_length > 0 or not self.fso_spacing > 0:
            raise InputError("track sizes must be positive")
        if not 0 <= self.fso_switch_offset < self.fso_spacing / 2:
            raise InputError("fso_switch_offset must lie in [0, fso_spacing / 2)")

    @property
    def length(self) -> float:
        return self.cell_count * self.cell_length

    @property
    def ap_count(self) -> int:
        return max(1, round(self.length / self.fso_spacing))

    def cell_at(self, x: float) -> int:
        return int(x // self.cell_length) % self.cell_count

    def serving_ap_at(self, x: float) -> int:
        """AP index serving position ``x`` under the switch-point rule."""
        k = math.floor((x - self.fso_spacing / 2 - self.fso_switch_offset) / self.fso_spacing) + 1
        return k % self.ap_count

    def ap_position(self, ap: int) -> float:
        return ap * self.fso_spacing


def calibrated_onboard_factor(params: WorkloadParams, track: Track) -> float:
    """Onboard call rate factor that makes the two handover streams meet the target ratio.

    Fixed users hand over at ``load / mean_dwell`` per cell.  With macrocell
    backhaul a vehicle carries ``onboard_rate * mean_holding`` calls across a
    boundary every ``cell_length / speed`` seconds.  With FSO backhaul a
    passenger stays onboard ``min(holding, dwell)`` on average and then
    alights, after which its call joins the fixed population and feeds the
    macro-to-macro stream too; boardings are ignored.
    """
    if params.vehicle_count == 0:
        return 0.0
    per_cell = params.vehicle_count / track.cell_count
    if track.backhaul is Backhaul.FSO:
        h, d = params.mean_holding, params.mean_dwell
        stay = 1.0 / (1.0 / h + 1.0 / d)
        ratio = params.m2m_to_femto_ratio
        if ratio <= h / d:
            raise InputError("workload.m2m_to_femto_ratio is unreachable with FSO backhaul")
        return h / (stay * (ratio - h / d)) / per_cell
    transit = track.cell_length / params.vehicle_speed
    return transit / params.m2m_to_femto_ratio / (params.mean_dwell * per_cell)


@dataclass
class Vehicle:
    vehicle_id: int
    position: float
    speed: float
    fap_capacity: int = 4
    onboard_calls: list = field(default_factory=list)
    serving_cell: int = 0
    serving_ap: int = 0
    pending_boardings: int = 0
    last_move: float = 0.0

    @property
    def fap_room(self) -> int:
        return self.fap_capacity - len(self.onboard_calls) - self.pending_boardings


class Crossing(str, Enum):
    CELL_BOUNDARY = "cell_boundary"  # starts a backhaul M2M handover
    FSO_SWITCH = "fso_switch"  # starts an FSO link switch


@dataclass(frozen=True)
class MobilityEvent:
    offset: float  # seconds into the step
    kind: Crossing
    source: int
    target: int


def _points_crossed(x0: float, x1: float, period: float, phase: float):
    """Points ``phase + k * period`` in ``(x0, x1 + touch]``."""
    k = math.floor((x0 - phase) / period) + 1
    while True:
        b = phase + k * period
        if b <= x0:
            k += 1
            continue
        if b > x1 + _TOUCH:
            return
        yield b
        k += 1


def step_vehicle(vehicle: Vehicle, dt: float, track: Track) -> list[MobilityEvent]:
    """Advance ``vehicle`` by ``dt`` seconds and report the crossings, in time order."""
    if not dt > 0:
        raise InputError(f"dt must be positive, got {dt!r}")
    x0 = vehicle.position
    x1 = x0 + vehicle.speed * dt
    events: list[tuple[float, int, MobilityEvent]] = []
    reached = x1
    for b in _points_crossed(x0, x1, track.cell_length, 0.0):
        src = track.cell_at(b - track.cell_length / 2)
        dst = track.cell_at(b + track.cell_length / 2)
        events.append((b, 0, MobilityEvent((b - x0) / vehicle.speed, Crossing.CELL_BOUNDARY, src, dst)))
        reached = max(reached, b)
    if track.backhaul is Backhaul.FSO:
        phase = track.fso_spacing / 2 + track.fso_switch_offset
        for b in _points_crossed(x0, x1, track.fso_spacing, phase):
            src = track.serving_ap_at(b - track.fso_spacing / 2)
            dst = track.serving_ap_at(b + track.fso_spacing / 4)
            events.append((b, 1, MobilityEvent((b - x0) / vehicle.speed, Crossing.FSO_SWITCH, src, dst)))
            reached = max(reached, b)
    events.sort(key=lambda e: (e[0], e[1]))
    vehicle.position = reached % track.length
    return [e[2] for e in events]


def time_to_next_crossing(vehicle: Vehicle, track: Track) -> float:
    """Seconds until the vehicle reaches its next cell boundary or FSO switch point."""
    x = vehicle.position

    def ahead(period, phase):
        b = phase + (math.floor((x - phase) / period) + 1) * period
        while b <= x + _TOUCH:
            b += period
        return b

    nxt = ahead(track.cell_length, 0.0)
    if track.backhaul is Backhaul.FSO:
        nxt = min(nxt, ahead(track.fso_spacing, track.fso_spacing / 2 + track.fso_switch_offset))
    return (nxt - x) / vehicle.speed


def next_arrival(rng: np.random.Generator, lam: float) -> float:
    """Exponential inter-arrival time for a Poisson stream of rate ``lam``."""
    if not lam > 0:
        raise InputError(f"arrival rate must be positive, got {lam!r}")
    return float(rng.exponential(1.0 / lam))


def _positive_exponential(rng: np.random.Generator, mean: float) -> float:
    x = float(rng.exponential(mean))
    while x <= 0.0:
        x = float(rng.exponential(mean))
    return x


def sample_holding(rng: np.random.Generator, mean: float = 120.0) -> float:
    return _positive_exponential(rng, mean)


def sample_dwell(rng: np.random.Generator, mean: float = 540.0) -> float:
    return _positive_exponential(rng, mean)


def draw_class(rng: np.random.Generator, classes: Sequence[TrafficClass], adaptive_ratio: float) -> TrafficClass:
    """Adaptive class with probability ``adaptive_ratio`` (when both kinds exist), uniform within kind."""
    adaptive = [c for c in classes if c.qos_adaptive]
    fixed = [c for c in classes if not c.qos_adaptive]
    u = rng.random()
    if adaptive and fixed:
        pool = adaptive if u < adaptive_ratio else fixed
    else:
        pool = adaptive or fixed
    if len(pool) == 1:
        return pool[0]
    return pool[int(rng.integers(len(pool)))]


class Origin(str, Enum):
    FIXED = "fixed"
    ONBOARD = "onboard"


@dataclass
class Call:
    call_id: int
    cls: TrafficClass
    origin: Origin
    created_at: float
    ends_at: float
    cell: int | None = None  # macrocell holding its bandwidth, if any
    vehicle: int | None = None
    departure: object = None
    dwell: object = None
    hold_cell: int | None = None  # target cell holding bandwidth during a handover
    in_handover: bool = False
    ended: bool = False


@dataclass(frozen=True)
class CallPlacement:
    call: Call
    admission: Admission


def spawn_call(rng: np.random.Generator, params: WorkloadParams, classes: Sequence[TrafficClass],
               admit: Callable[[int, Hashable], Admission], call_id: int, origin: Origin, now: float,
               cell: int | None = None, vehicle: int | None = None) -> CallPlacement:
    """Draw a call's class and holding time and ask ``admit`` for bandwidth."""
    cls = draw_class(rng, classes, params.adaptive_ratio)
    holding = sample_holding(rng, params.mean_holding)
    call = Call(call_id, cls, origin, now, now + holding, cell=cell, vehicle=vehicle)
    return CallPlacement(call, admit(cls.class_id, call_id))
