"""Free-space optical backhaul: LOS channel gain and AP link switching."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import InputError, StateError
from .kernel import EventKind, RunContext


@dataclass(frozen=True)
class FsoLinkConfig:
    """Geometry and optics of one FSO hop.  Angles are in radians."""

    P_t: float = 1.0  # W
    A: float = 1e-4  # m^2
    D: float = 10.0  # m
    phi: float = 0.0
    psi: float = 0.0
    psi_c: float = math.radians(60.0)
    T_s: float = 1.0
    v: float = 1.5
    phi_half: float = math.radians(60.0)

    def __post_init__(self):
        if self.P_t < 0:
            raise InputError("P_t must be nonnegative")
        if not (self.A > 0 and self.D > 0):
            raise InputError("A and D must be positive")
        if not 0 <= self.psi_c <= math.pi / 2:
            raise InputError("psi_c must lie in [0, pi/2]")
        if not 0 < self.phi_half < math.pi / 2:
            raise InputError("phi_half must lie in (0, pi/2)")
        if not 0 <= self.T_s <= 1:
            raise InputError("T_s must lie in [0, 1]")
        if self.v < 1:
            raise InputError("refractive index v must be >= 1")


def lambertian_order(phi_half: float) -> float:
    if not 0 < phi_half < math.pi / 2:
        raise InputError(f"half-power angle must lie in (0, pi/2), got {phi_half!r}")
    return -math.log(2.0) / math.log(math.cos(phi_half))


def concentrator_gain(psi: float, psi_c: float, v: float) -> float:
    """Optical concentrator gain; zero outside the field of view."""
    if v < 1:
        raise InputError(f"refractive index must be >= 1, got {v!r}")
    if not 0 <= psi_c <= math.pi / 2:
        raise InputError(f"field of view must lie in [0, pi/2], got {psi_c!r}")
    if psi < 0:
        raise InputError(f"incidence angle must be nonnegative, got {psi!r}")
    if psi > psi_c:
        return 0.0
    s = math.sin(psi_c)
    if s == 0.0:
        raise InputError("zero field of view makes the concentrator gain undefined")
    return v * v / (s * s)


def los_channel_gain(cfg: FsoLinkConfig) -> float:
    """DC gain of the line-of-sight link."""
    g = concentrator_gain(cfg.psi, cfg.psi_c, cfg.v)
    if g == 0.0:
        return 0.0
    tau = lambertian_order(cfg.phi_half)
    return ((tau + 1.0) * cfg.A / (2.0 * math.pi * cfg.D**2)
            * math.cos(cfg.phi) ** tau * cfg.T_s * g * math.cos(cfg.psi))


def received_optical_power(P_t: float, H: float) -> float:
    if P_t < 0 or H < 0:
        raise InputError("power and gain must be nonnegative")
    return H * P_t


def track_link(base: FsoLinkConfig, along_track_m: float, lateral_m: float) -> FsoLinkConfig:
    """Link to an AP beaming along the track; angles are measured from the track axis."""
    dx = abs(along_track_m)
    angle = math.atan2(lateral_m, dx) if dx > 0 else math.pi / 2
    return replace(base, D=math.hypot(dx, lateral_m), phi=angle, psi=angle)


SWITCH_MESSAGES = (
    ("OT", "TAP", "measurement"),
    ("OT", "TAP", "switch_request"),
    ("TAP", "OT", "switch_response"),
    ("TAP", "OT", "link_setup"),
    ("OT", "TAP", "synchronize"),
    ("OT", "SAP", "switch_complete"),
)

# Quarter-millisecond values are exact in binary, so the sum is exactly 136.
DEFAULT_SWITCH_LATENCIES_MS = (22.75, 22.75, 22.75, 22.75, 22.5, 22.5)


@dataclass(frozen=True)
class FsoSwitchProfile:
    latencies_ms: tuple[float, ...] = DEFAULT_SWITCH_LATENCIES_MS

    def __post_init__(self):
        if len(self.latencies_ms) != len(SWITCH_MESSAGES):
            raise InputError(f"profile needs {len(SWITCH_MESSAGES)} latencies")
        if any(x < 0 for x in self.latencies_ms):
            raise InputError("latencies must be nonnegative")

    @classmethod
    def uniform(cls, ms: float) -> "FsoSwitchProfile":
        return cls((ms,) * len(SWITCH_MESSAGES))

    @property
    def total_ms(self) -> float:
        return math.fsum(self.latencies_ms)

    def offsets_ms(self) -> list[float]:
        return [math.fsum(self.latencies_ms[: k + 1]) for k in range(len(self.latencies_ms))]


@dataclass
class FsoBackhaul:
    """Optical attachment state of one vehicle."""

    serving_ap: int
    in_switch: bool = False
    target_ap: int | None = None
    previous_ap: int | None = None
    started_at: float = 0.0
    switches: int = 0
    trace: list = field(default_factory=list)
    on_complete: object = None


@dataclass(frozen=True)
class LinkSwitchResult:
    completed_at_ms: float
    trace: tuple  # (step_index, from_role, to_role, message_name, offset_ms)


def execute_link_switch(link: FsoBackhaul, target_ap: int, profile: FsoSwitchProfile = FsoSwitchProfile(),
                        ctx: RunContext | None = None, *, serving_gain: float | None = None,
                        target_gain: float | None = None, min_gain: float = 0.0) -> LinkSwitchResult:
    """Re-attach ``link`` to ``target_ap`` through the six-message switch sequence.

    With a context the messages are delivered as kernel events and
    ``link.in_switch`` stays set until the last one; traffic is buffered, not
    dropped, meanwhile.  Without a context the switch resolves immediately.
    """
    if target_ap == link.serving_ap:
        raise InputError(f"target AP {target_ap} is already serving")
    if link.in_switch:
        raise StateError("a link switch is already in progress")
    if serving_gain is not None and target_gain is not None:
        if not (target_gain > serving_gain and target_gain >= min_gain):
            raise InputError(f"target gain {target_gain:.3e} does not beat serving gain {serving_gain:.3e}")
    offsets = profile.offsets_ms()
    plan = tuple((k + 1, fr, to, name, off) for k, ((fr, to, name), off) in enumerate(zip(SWITCH_MESSAGES, offsets)))
    result = LinkSwitchResult(profile.total_ms, plan)
    if ctx is None:
        link.previous_ap = link.serving_ap
        link.serving_ap = target_ap
        link.switches += 1
        link.trace.extend(plan)
        return result
    link.in_switch = True
    link.target_ap = target_ap
    link.started_at = ctx.clock
    for step in plan:
        ctx.schedule_at(link.started_at + step[4] / 1000.0, EventKind.MESSAGE_DELIVERY, SwitchMessage(link, step))
    return result


@dataclass(frozen=True)
class SwitchMessage:
    link: FsoBackhaul
    step: tuple


def deliver_switch_message(ctx: RunContext, msg: SwitchMessage) -> bool:
    """Record one switch message; returns True when the switch has completed."""
    link = msg.link
    index, fr, to, name, _ = msg.step
    link.trace.append((index, fr, to, name, (ctx.clock - link.started_at) * 1000.0))
    if index == len(SWITCH_MESSAGES):
        link.previous_ap = link.serving_ap
        link.serving_ap = link.target_ap
        link.target_ap = None
        link.in_switch = False
        link.switches += 1
        return True
    return False
