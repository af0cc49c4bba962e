"""Signaling state machines for the three handover procedures.

Each procedure is a fixed script of numbered messages.  A session walks
its script one delivered message at a time; the admission decision is
taken when the CAC step arrives, and a rejected session stops after the
handover-response messages that carry the reject back to the source.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Hashable, Mapping

from .errors import ConfigError, ProtocolError, StateError
from .kernel import EventKind, RunContext

DEFAULT_STEP_MS = 5.0


class HandoverKind(str, Enum):
    F2M = "F2M"
    M2F = "M2F"
    BH_M2M = "BH_M2M"


class Outcome(str, Enum):
    PENDING = "pending"
    COMPLETED = "completed"
    REJECTED = "rejected"
    FAILED = "failed"


class Phase(str, Enum):
    PREPARATION = "preparation"
    ADMISSION = "admission"
    EXECUTION = "execution"
    REJECTING = "rejecting"
    DONE = "done"


@dataclass(frozen=True)
class Step:
    index: int
    from_role: str
    to_role: str
    message_name: str
    latency_ms: float = DEFAULT_STEP_MS
    decision_point: str | None = None  # "CAC" or "trigger"


@dataclass(frozen=True)
class StepScript:
    kind: HandoverKind
    steps: tuple[Step, ...]
    reject_exit: int  # last step executed after a CAC reject

    def __post_init__(self):
        if [s.index for s in self.steps] != list(range(1, len(self.steps) + 1)):
            raise ConfigError(f"{self.kind.value}: step indices must run 1..n without gaps")
        if any(s.latency_ms < 0 for s in self.steps):
            raise ConfigError(f"{self.kind.value}: latencies must be nonnegative")
        if not self.cac_step <= self.reject_exit <= len(self.steps):
            raise ConfigError(f"{self.kind.value}: reject exit must follow the CAC step")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def cac_step(self) -> int:
        cac = [s.index for s in self.steps if s.decision_point == "CAC"]
        if len(cac) != 1:
            raise ConfigError(f"{self.kind.value}: exactly one CAC step required")
        return cac[0]

    @property
    def roles(self) -> frozenset[str]:
        return frozenset(r for s in self.steps for r in (s.from_role, s.to_role))

    def with_latencies(self, default_ms: float | None = None,
                       overrides: Mapping[int, float] | None = None) -> "StepScript":
        overrides = overrides or {}
        steps = tuple(
            replace(s, latency_ms=overrides.get(s.index, s.latency_ms if default_ms is None else default_ms))
            for s in self.steps
        )
        return replace(self, steps=steps)


def _script(kind, reject_exit, rows):
    steps = []
    for i, row in enumerate(rows, start=1):
        fr, to, name, *rest = row
        steps.append(Step(i, fr, to, name, decision_point=rest[0] if rest else None))
    return StepScript(kind, tuple(steps), reject_exit)


# Roles: MS, FAP, OT (outside transceiver), SBS/TBS (serving/target macro BS),
# SRNC/TRNC (serving/target RNC), CN (core network).

F2M_STEPS = (
    ("MS", "FAP", "measurement_report"),
    ("FAP", "MS", "measurement_report_ack"),
    ("MS", "TBS", "neighbor_signal_search"),
    ("MS", "FAP", "handover_decision", "trigger"),
    ("FAP", "OT", "ho_request"),
    ("OT", "TBS", "ho_request"),
    ("TBS", "TRNC", "cac_request"),
    ("TRNC", "TBS", "rrc_setup"),
    ("TBS", "TBS", "cac_rrc_decision", "CAC"),
    ("TBS", "OT", "ho_response"),
    ("OT", "FAP", "ho_response"),
    ("TBS", "MS", "link_setup_request"),
    ("MS", "TBS", "link_setup_response"),
    ("TBS", "MS", "link_setup_confirm"),
    ("MS", "TBS", "channel_reestablish"),
    ("MS", "FAP", "detach"),
    ("MS", "TBS", "sync_request"),
    ("TBS", "MS", "sync_response"),
    ("MS", "TBS", "ho_complete"),
    ("TBS", "OT", "ho_complete"),
    ("OT", "FAP", "delete_old_link"),
    ("FAP", "OT", "delete_old_link_ack"),
)

M2F_STEPS = (
    ("MS", "SBS", "measurement_report"),
    ("SBS", "MS", "measurement_report_ack"),
    ("MS", "SBS", "son_configuration"),
    ("SBS", "FAP", "son_configuration"),
    ("MS", "FAP", "pre_authentication"),
    ("MS", "SBS", "handover_decision", "trigger"),
    ("SBS", "OT", "ho_request"),
    ("OT", "FAP", "ho_request"),
    ("FAP", "FAP", "cac_rrc_interference_check", "CAC"),
    ("FAP", "OT", "ho_response"),
    ("OT", "SBS", "ho_response"),
    ("FAP", "OT", "link_setup_request"),
    ("OT", "FAP", "link_setup_response"),
    ("FAP", "OT", "radio_bearer_setup"),
    ("OT", "FAP", "radio_bearer_setup_complete"),
    ("OT", "SBS", "link_setup_complete"),
    ("SBS", "MS", "ho_command"),
    ("MS", "FAP", "channel_reestablish"),
    ("FAP", "MS", "channel_reestablish_ack"),
    ("MS", "SBS", "detach"),
    ("MS", "FAP", "sync_request"),
    ("FAP", "MS", "sync_response"),
    ("MS", "FAP", "ho_complete"),
    ("FAP", "OT", "ho_complete"),
    ("OT", "SBS", "ho_complete"),
    ("SBS", "OT", "delete_old_link"),
    ("OT", "SBS", "delete_old_link_ack"),
)

BH_M2M_STEPS = (
    ("OT", "SBS", "measurement_report"),
    ("SBS", "OT", "measurement_report_ack"),
    ("OT", "TBS", "neighbor_signal_search"),
    ("OT", "SBS", "son_configuration"),
    ("SBS", "TBS", "son_configuration"),
    ("OT", "TBS", "pre_authentication"),
    ("OT", "SBS", "handover_decision", "trigger"),
    ("SBS", "SRNC", "ho_request"),
    ("SRNC", "TRNC", "ho_request"),
    ("TRNC", "TBS", "ho_request"),
    ("TBS", "TRNC", "cac_rrc_decision", "CAC"),
    ("TBS", "TRNC", "ho_response"),
    ("TRNC", "CN", "ho_response"),
    ("CN", "SRNC", "ho_response"),
    ("SRNC", "SBS", "ho_response"),
    ("SBS", "OT", "ho_command"),
    ("TRNC", "TBS", "link_setup_request"),
    ("TBS", "TRNC", "link_setup_response"),
    ("TRNC", "TBS", "link_setup_confirm"),
    # Not described in the prose; filled as the close of the link-setup exchange.
    ("TBS", "TRNC", "link_setup_complete"),
    ("OT", "TBS", "channel_reestablish"),
    ("OT", "SBS", "detach"),
    ("OT", "TBS", "sync_request"),
    ("TBS", "OT", "sync_response"),
    ("OT", "TBS", "ho_complete"),
    ("TBS", "TRNC", "ho_complete"),
    ("TRNC", "CN", "ho_complete_notify"),
    ("CN", "SRNC", "release_request"),
    ("SRNC", "SBS", "delete_old_link"),
    ("SBS", "SRNC", "delete_old_link_ack"),
    ("SRNC", "CN", "release_complete"),
)


def default_scripts(step_ms: float = DEFAULT_STEP_MS) -> dict[HandoverKind, StepScript]:
    scripts = {
        HandoverKind.F2M: _script(HandoverKind.F2M, 11, F2M_STEPS),
        HandoverKind.M2F: _script(HandoverKind.M2F, 11, M2F_STEPS),
        HandoverKind.BH_M2M: _script(HandoverKind.BH_M2M, 16, BH_M2M_STEPS),
    }
    if step_ms != DEFAULT_STEP_MS:
        scripts = {k: s.with_latencies(step_ms) for k, s in scripts.items()}
    return scripts


@dataclass(frozen=True)
class TraceEntry:
    step_index: int
    from_role: str
    to_role: str
    message_name: str
    fire_time: float  # seconds


@dataclass
class HandoverSession:
    session_id: int
    kind: HandoverKind
    script: StepScript
    participants: dict[str, Any]
    subject: Hashable
    started_at: float
    payload: Any = None
    trace: list[TraceEntry] = field(default_factory=list)
    outcome: Outcome = Outcome.PENDING
    admitted: bool | None = None

    @property
    def next_step(self) -> int:
        return len(self.trace) + 1

    @property
    def state(self) -> Phase:
        if self.outcome is not Outcome.PENDING:
            return Phase.DONE
        n = len(self.trace)
        cac = self.script.cac_step
        if n < cac - 1:
            return Phase.PREPARATION
        if n == cac - 1:
            return Phase.ADMISSION
        return Phase.EXECUTION if self.admitted else Phase.REJECTING


def total_latency(session: HandoverSession) -> float:
    """Summed latency in ms of the steps the session executed."""
    if session.outcome is Outcome.PENDING:
        raise StateError(f"session {session.session_id} is still pending")
    return math.fsum(session.script.steps[e.step_index - 1].latency_ms for e in session.trace)


@dataclass(frozen=True)
class StepMessage:
    session_id: int
    step_index: int


@dataclass(frozen=True)
class Action:
    name: str  # "send" | "decided" | "finish"
    value: Any = None


Decide = Callable[[HandoverSession], bool]
Finish = Callable[[HandoverSession], None]


def _admit_all(session: HandoverSession) -> bool:
    return True


class HandoverEngine:
    """Runs handover sessions on a :class:`RunContext`, one per subject at a time."""

    def __init__(self, ctx: RunContext, scripts: Mapping[HandoverKind, StepScript] | None = None,
                 decide: Decide = _admit_all, on_finish: Finish | None = None):
        self.ctx = ctx
        self.scripts = dict(scripts or default_scripts())
        self.decide = decide
        self.on_finish = on_finish
        self.sessions: dict[int, HandoverSession] = {}
        self.active: dict[Hashable, HandoverSession] = {}
        self._ids = itertools.count(1)

    def busy(self, subject: Hashable) -> bool:
        return subject in self.active

    def start_handover(self, kind: HandoverKind | str, participants: Mapping[str, Any],
                       subject: Hashable, payload: Any = None) -> HandoverSession:
        kind = HandoverKind(kind)
        script = self.scripts[kind]
        missing = sorted(script.roles - set(participants))
        if missing:
            raise ConfigError(f"{kind.value} handover needs roles {missing}")
        if subject in self.active:
            raise StateError(f"{subject!r} already has a pending handover")
        s = HandoverSession(next(self._ids), kind, script, dict(participants), subject, self.ctx.clock, payload)
        self.sessions[s.session_id] = s
        self.active[subject] = s
        self._send(s, 1)
        return s

    def _send(self, s: HandoverSession, index: int) -> None:
        step = s.script.steps[index - 1]
        self.ctx.schedule(step.latency_ms / 1000.0, EventKind.MESSAGE_DELIVERY, StepMessage(s.session_id, index))

    def advance(self, session: HandoverSession, message: StepMessage) -> list[Action]:
        """Accept the next scripted message and return what must happen next."""
        if session.outcome is not Outcome.PENDING:
            raise StateError(f"session {session.session_id} already {session.outcome.value}")
        expected = session.next_step
        if message.step_index != expected:
            raise ProtocolError(expected, message.step_index, session.session_id)
        step = session.script.steps[expected - 1]
        session.trace.append(TraceEntry(step.index, step.from_role, step.to_role, step.message_name, self.ctx.clock))
        actions = []
        if step.decision_point == "CAC":
            session.admitted = bool(self.decide(session))
            actions.append(Action("decided", session.admitted))
        if session.admitted is False and expected == session.script.reject_exit:
            session.outcome = Outcome.REJECTED
        elif expected == len(session.script):
            session.outcome = Outcome.COMPLETED
        if session.outcome is Outcome.PENDING:
            actions.append(Action("send", expected + 1))
        else:
            actions.append(Action("finish", session.outcome))
        return actions

    def deliver(self, ctx: RunContext, message: StepMessage) -> None:
        """Kernel-side delivery of a step message."""
        s = self.sessions[message.session_id]
        if s.outcome is Outcome.FAILED:
            return
        for act in self.advance(s, message):
            if act.name == "send":
                self._send(s, act.value)
            elif act.name == "finish":
                del self.active[s.subject]
                if self.on_finish is not None:
                    self.on_finish(s)

    def abort(self, session: HandoverSession) -> None:
        """Mark a pending session failed; later messages for it are ignored."""
        if session.outcome is Outcome.PENDING:
            session.outcome = Outcome.FAILED
            self.active.pop(session.subject, None)


def format_trace(session: HandoverSession, origin: float | None = None) -> list[str]:
    """Tab-separated trace lines: step, from, to, message, sim time in ms."""
    t0 = 0.0 if origin is None else origin
    return [f"{e.step_index}\t{e.from_role}\t{e.to_role}\t{e.message_name}\t{(e.fire_time - t0) * 1000.0:.3f}"
            for e in session.trace]


STANDARD_PARTICIPANTS = {
    "MS": "ms-1", "FAP": "fap-1", "OT": "ot-1", "SBS": "bs-1", "TBS": "bs-2",
    "SRNC": "rnc-1", "TRNC": "rnc-2", "CN": "cn",
}


def trace_procedure(kind: HandoverKind | str, seed: int = 0, admit: bool = True,
                    scripts: Mapping[HandoverKind, StepScript] | None = None) -> HandoverSession:
    """Run a single session of ``kind`` in an otherwise empty simulation."""
    ctx = RunContext(rng_seed=seed)
    engine = HandoverEngine(ctx, scripts, decide=lambda s: admit)
    ctx.on(EventKind.MESSAGE_DELIVERY, lambda c, ev: engine.deliver(c, ev.payload))
    session = engine.start_handover(kind, STANDARD_PARTICIPANTS, subject="ms-1")
    ctx.run_until()
    return session
