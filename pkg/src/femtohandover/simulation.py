"""One seeded run of the mobile-femtocell scenario.

Fixed users arrive in every macrocell and hand over to a neighbor cell
when their dwell time expires.  Vehicles circle the track carrying a FAP;
with macrocell backhaul their calls hold bandwidth in the serving cell and
move as a group at every cell boundary, with FSO backhaul they switch
optical APs instead, and passengers enter (M2F) and leave (F2M) the
femtocell individually.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field

from .cac import Admission, CellLedger, ReleaseCause, admit_group
from .config import ScenarioConfig
from .errors import ConfigError
from .fso import FsoBackhaul, SwitchMessage, deliver_switch_message, execute_link_switch, los_channel_gain, track_link
from .handover import HandoverEngine, HandoverKind, HandoverSession, Outcome, StepMessage, format_trace, total_latency
from .kernel import EventKind, RunContext
from .metrics import KpiAccumulator, KpiReport
from .traffic import (Backhaul, Call, Crossing, Origin, Vehicle, calibrated_onboard_factor, next_arrival,
                      sample_dwell, spawn_call, step_vehicle, time_to_next_crossing)


@dataclass
class _CallMove:
    call: Call
    source: int
    target: int


@dataclass
class _VehicleMove:
    vehicle: Vehicle
    source: int
    target: int
    admitted: list = field(default_factory=list)


@dataclass
class _Boarding:
    call: Call
    vehicle: Vehicle
    source: int
    slot_held: bool = False


@dataclass
class _Alighting:
    call: Call
    vehicle: Vehicle
    target: int


class Simulation:
    def __init__(self, cfg: ScenarioConfig, *, trace: bool = False, record_snapshots: bool = False,
                 audit: bool = False):
        self.cfg = cfg
        self.track = cfg.track
        self.work = cfg.workload
        self.ctx = RunContext(rng_seed=cfg.seed, stop_time=cfg.stop_time)
        self.ledgers = [CellLedger.for_scheme(cfg.scheme, cfg.cell.capacity, cfg.classes,
                                              cfg.cell.reservation_time, cell_id=i)
                        for i in range(self.track.cell_count)]
        self.classes = list(cfg.classes)
        self.engine = HandoverEngine(self.ctx, cfg.handover.scripts(), decide=self._decide,
                                     on_finish=self._finished)
        self.kpi = KpiAccumulator(cfg.cell.capacity * self.track.cell_count, cfg.warmup)
        self.calls: dict[int, Call] = {}
        self._ids = itertools.count(1)
        self._dirty: set[int] = set()
        self._level = 0.0
        self._last = 0.0
        self.trace_lines: list[str] | None = [] if trace else None
        self.snapshots: list[tuple[float, int, float]] | None = [] if record_snapshots else None
        self.audit = audit
        self.fso_link_cfg = cfg.fso.link()
        self.fso_profile = cfg.fso.profile()

        factor = self.work.onboard_rate_factor
        if factor is None:
            factor = calibrated_onboard_factor(self.work, self.track)
        self.onboard_lambda = factor * self.work.lambda_new

        self.vehicles = []
        self.links: dict[int, FsoBackhaul] = {}
        spacing = self.track.length / self.work.vehicle_count if self.work.vehicle_count else 0.0
        place = self.ctx.substream("vehicles/placement")
        for vid in range(self.work.vehicle_count):
            # Evenly spread with a random phase so boundary crossings do not line up.
            x = (vid * spacing + float(place.uniform(0, spacing))) % self.track.length
            v = Vehicle(vid, x, self.work.vehicle_speed, self.work.fap_capacity,
                        serving_cell=self.track.cell_at(x), serving_ap=self.track.serving_ap_at(x))
            self.vehicles.append(v)
            if self.track.backhaul is Backhaul.FSO:
                self.links[vid] = FsoBackhaul(v.serving_ap)
        self._validate()

        ctx = self.ctx
        for kind, fn in ((EventKind.ARRIVAL, self._on_arrival), (EventKind.DEPARTURE, self._on_departure),
                         (EventKind.DWELL_EXPIRY, self._on_dwell), (EventKind.RESERVATION_EXPIRY, self._on_expiry),
                         (EventKind.MESSAGE_DELIVERY, self._on_message), (EventKind.FEMTOCELL_MOVE, self._on_move)):
            ctx.on(kind, self._wrap(fn))
        for c in range(self.track.cell_count):
            ctx.schedule(next_arrival(self._rng(f"cell/{c}/arrivals"), self.work.lambda_new), EventKind.ARRIVAL, ("fixed", c))
        for v in self.vehicles:
            if self.onboard_lambda > 0:
                ctx.schedule(next_arrival(self._rng(f"vehicle/{v.vehicle_id}/arrivals"), self.onboard_lambda),
                             EventKind.ARRIVAL, ("onboard", v.vehicle_id))
            ctx.schedule(time_to_next_crossing(v, self.track), EventKind.FEMTOCELL_MOVE, v.vehicle_id)

    def _validate(self):
        if self.work.vehicle_count and self.track.backhaul is Backhaul.MACRO:
            transit = self.track.cell_length / self.work.vehicle_speed
            longest = max(math.fsum(s.latency_ms for s in sc.steps) for sc in self.engine.scripts.values()) / 1000.0
            if transit <= longest:
                raise ConfigError("track.cell_length: vehicles cross cells faster than a backhaul handover completes")
        if self.track.cell_count < 2 and self.work.fixed_dwell:
            raise ConfigError("workload.fixed_dwell: dwell-driven handover needs at least two cells")

    def _rng(self, name):
        return self.ctx.substream(name)

    # bookkeeping around every event

    def _wrap(self, fn):
        def handler(ctx, ev):
            now = ctx.clock
            if now > self._last:
                self.kpi.integrate(self._level, self._last, now)
                self._last = now
            fn(ev.payload)
            if self._dirty:
                if self.snapshots is not None:
                    for c in sorted(self._dirty):
                        self.snapshots.append((now, c, self.ledgers[c].occupied))
                if self.audit:
                    self._audit_all()
                self._dirty.clear()
                self._level = math.fsum(l.occupied for l in self.ledgers)
        return handler

    def _audit_all(self):
        for l in self.ledgers:
            bad = l.audit()
            if bad:
                raise AssertionError(f"cell {l.cell_id}: {bad}")
        owners: dict[int, int] = {}
        for l in self.ledgers:
            for cid, a in l.allocations.items():
                if a.confirmed:
                    if cid in owners:
                        raise AssertionError(f"call {cid} confirmed in cells {owners[cid]} and {l.cell_id}")
                    owners[cid] = l.cell_id

    def _release(self, cell: int, call_id: int, cause: ReleaseCause):
        self._dirty.add(cell)
        rel = self.ledgers[cell].release_call(call_id, cause, self.ctx.clock)
        if rel.reservation is not None:
            self.ctx.schedule(self.ledgers[cell].reservation_time, EventKind.RESERVATION_EXPIRY,
                              (cell, rel.reservation))
        return rel

    def _end_call(self, call: Call, cause=ReleaseCause.NORMAL_END):
        """Terminate a call, freeing whatever bandwidth and FAP slot it holds."""
        call.ended = True
        self.ctx.cancel(call.departure)
        self.ctx.cancel(call.dwell)
        if call.cell is not None and call.call_id in self.ledgers[call.cell]:
            self._release(call.cell, call.call_id, cause)
        hold = call.hold_cell
        if hold is not None and call.call_id in self.ledgers[hold]:
            self._release(hold, call.call_id, ReleaseCause.NORMAL_END)
        call.hold_cell = None
        if call.vehicle is not None:
            v = self.vehicles[call.vehicle]
            if call.call_id in v.onboard_calls:
                v.onboard_calls.remove(call.call_id)
        self.calls.pop(call.call_id, None)

    # event handlers

    def _on_arrival(self, payload):
        origin, idx = payload
        now = self.ctx.clock
        if origin == "fixed":
            rng = self._rng(f"cell/{idx}/arrivals")
            self._spawn_fixed(idx, rng)
            self.ctx.schedule(next_arrival(rng, self.work.lambda_new), EventKind.ARRIVAL, payload)
        else:
            rng = self._rng(f"vehicle/{idx}/arrivals")
            self._spawn_onboard(self.vehicles[idx], rng)
            self.ctx.schedule(next_arrival(rng, self.onboard_lambda), EventKind.ARRIVAL, payload)

    def _spawn_fixed(self, cell, rng):
        ledger = self.ledgers[cell]
        call_id = next(self._ids)
        placed = spawn_call(rng, self.work, self.classes, ledger.admit_new_call, call_id, Origin.FIXED,
                            self.ctx.clock, cell=cell)
        self.kpi.new_call(self.ctx.clock, blocked=not placed.admission)
        if placed.admission:
            self._dirty.add(cell)
            self._activate(placed.call)

    def _spawn_onboard(self, v: Vehicle, rng):
        macro = self.track.backhaul is Backhaul.MACRO

        def admit(class_id, call_id):
            if v.fap_room <= 0:
                return Admission(False)
            if not macro:
                return Admission(True, 0.0)
            if self.engine.busy(("vehicle", v.vehicle_id)):
                return Admission(False)
            return self.ledgers[v.serving_cell].admit_new_call(class_id, call_id)

        call_id = next(self._ids)
        placed = spawn_call(rng, self.work, self.classes, admit, call_id, Origin.ONBOARD, self.ctx.clock,
                            cell=v.serving_cell if macro else None, vehicle=v.vehicle_id)
        self.kpi.new_call(self.ctx.clock, blocked=not placed.admission)
        if placed.admission:
            if macro:
                self._dirty.add(v.serving_cell)
            v.onboard_calls.append(call_id)
            self._activate(placed.call)

    def _activate(self, call: Call):
        self.calls[call.call_id] = call
        call.departure = self.ctx.schedule(call.ends_at - self.ctx.clock, EventKind.DEPARTURE, call.call_id)
        self._schedule_dwell(call)

    def _schedule_dwell(self, call: Call):
        if not self.work.fixed_dwell:
            return
        if call.origin is Origin.ONBOARD and self.track.backhaul is Backhaul.MACRO:
            return
        rng = self._rng(f"dwell/{call.origin.value}")
        call.dwell = self.ctx.schedule(sample_dwell(rng, self.work.mean_dwell), EventKind.DWELL_EXPIRY, call.call_id)

    def _on_departure(self, call_id):
        call = self.calls.get(call_id)
        if call is not None and not call.ended:
            self._end_call(call)

    def _on_dwell(self, call_id):
        call = self.calls.get(call_id)
        if call is None or call.ended or call.in_handover:
            return
        call.dwell = None
        if call.origin is Origin.ONBOARD:
            v = self.vehicles[call.vehicle]
            self._start(HandoverKind.F2M, ("call", call_id), _Alighting(call, v, v.serving_cell),
                        MS=call_id, FAP=f"fap-{v.vehicle_id}", OT=f"ot-{v.vehicle_id}",
                        TBS=f"bs-{v.serving_cell}", TRNC=f"rnc-{v.serving_cell}")
            return
        src = call.cell
        rng = self._rng("mobility/fixed")
        if self.track.backhaul is Backhaul.FSO and self.work.m2f_probability > 0:
            boarding = rng.random() < self.work.m2f_probability
            hosts = [v for v in self.vehicles if v.serving_cell == src and v.fap_room > 0]
            if boarding and hosts:
                v = hosts[int(rng.integers(len(hosts)))]
                self._start(HandoverKind.M2F, ("call", call_id), _Boarding(call, v, src),
                            MS=call_id, SBS=f"bs-{src}", FAP=f"fap-{v.vehicle_id}", OT=f"ot-{v.vehicle_id}")
                return
        step = 1 if rng.random() < 0.5 else -1
        dst = (src + step) % self.track.cell_count
        self._start(HandoverKind.BH_M2M, ("call", call_id), _CallMove(call, src, dst), OT=call_id,
                    **self._macro_roles(src, dst))

    def _macro_roles(self, src, dst):
        return {"SBS": f"bs-{src}", "TBS": f"bs-{dst}", "SRNC": f"rnc-{src}", "TRNC": f"rnc-{dst}", "CN": "cn"}

    def _start(self, kind, subject, payload, **participants):
        if isinstance(payload, (_CallMove, _Boarding, _Alighting)):
            payload.call.in_handover = True
        return self.engine.start_handover(kind, participants, subject, payload)

    def _on_expiry(self, payload):
        cell, entry = payload
        self._dirty.add(cell)
        self.ledgers[cell].expire_reservation(entry)

    def _on_message(self, msg):
        if isinstance(msg, StepMessage):
            self.engine.deliver(self.ctx, msg)
        elif isinstance(msg, SwitchMessage):
            if deliver_switch_message(self.ctx, msg):
                link = msg.link
                self.kpi.fso_switch((self.ctx.clock, (self.ctx.clock - link.started_at) * 1000.0))
                if self.trace_lines is not None:
                    vid = next(k for k, l in self.links.items() if l is link)
                    self.trace_lines.append(f"# fso_switch vehicle={vid} from_ap={link.previous_ap} "
                                            f"to_ap={link.serving_ap}")
                    origin = link.started_at
                    for idx, fr, to, name, off in link.trace[-6:]:
                        self.trace_lines.append(f"{idx}\t{fr}\t{to}\t{name}\t{(origin * 1000.0) + off:.3f}")

    def _on_move(self, vid):
        v = self.vehicles[vid]
        now = self.ctx.clock
        dt = now - v.last_move
        v.last_move = now
        events = step_vehicle(v, dt, self.track) if dt > 0 else []
        for ev in events:
            if ev.kind is Crossing.CELL_BOUNDARY:
                if self.track.backhaul is Backhaul.MACRO:
                    self._start(HandoverKind.BH_M2M, ("vehicle", vid), _VehicleMove(v, v.serving_cell, ev.target),
                                OT=f"ot-{vid}", **self._macro_roles(v.serving_cell, ev.target))
                else:
                    v.serving_cell = ev.target
            else:
                self._switch_ap(v, ev.target)
        self.ctx.schedule(time_to_next_crossing(v, self.track), EventKind.FEMTOCELL_MOVE, vid)

    def _switch_ap(self, v: Vehicle, target_ap: int):
        link = self.links[v.vehicle_id]
        if link.in_switch:
            return
        L = self.track.length

        def gain(ap):
            dx = (self.track.ap_position(ap) - v.position + L / 2) % L - L / 2
            return los_channel_gain(track_link(self.fso_link_cfg, dx, self.cfg.fso.lateral_offset))

        execute_link_switch(link, target_ap, self.fso_profile, self.ctx, serving_gain=gain(link.serving_ap),
                            target_gain=gain(target_ap), min_gain=self.cfg.fso.min_gain)
        v.serving_ap = target_ap

    # admission decisions at the CAC step

    def _decide(self, s: HandoverSession) -> bool:
        p = s.payload
        now = self.ctx.clock
        if isinstance(p, _CallMove):
            call = p.call
            if call.ended:
                return True
            adm = self.ledgers[p.target].admit_handover_call(call.cls.class_id, call.call_id, confirmed=False)
            self.kpi.handover(now, dropped=not adm, stream="m2m")
            if adm:
                self._dirty.add(p.target)
                call.hold_cell = p.target
            return bool(adm)
        if isinstance(p, _VehicleMove):
            src = self.ledgers[p.source]
            members = []
            for cid in p.vehicle.onboard_calls:
                call = self.calls[cid]
                members.append((cid, call.cls.class_id, src.allocations[cid].granted))
            if not members:
                return True
            admitted, dropped = admit_group(self.ledgers[p.target], members)
            self._dirty.add(p.target)
            for cid in admitted:
                self.calls[cid].hold_cell = p.target
                self.calls[cid].in_handover = True
            for cid in dropped:
                self._end_call(self.calls[cid], ReleaseCause.FEMTOCELL_LEFT)
            for _ in admitted:
                self.kpi.handover(now, dropped=False, stream="femto")
            for _ in dropped:
                self.kpi.handover(now, dropped=True, stream="femto")
            p.admitted = admitted
            return bool(admitted)
        if isinstance(p, _Alighting):
            call = p.call
            if call.ended:
                return True
            adm = self.ledgers[p.target].admit_handover_call(call.cls.class_id, call.call_id, confirmed=False)
            self.kpi.handover(now, dropped=not adm, stream="femto")
            if adm:
                self._dirty.add(p.target)
                call.hold_cell = p.target
            return bool(adm)
        if isinstance(p, _Boarding):
            if p.call.ended or p.vehicle.fap_room <= 0:
                return False
            p.vehicle.pending_boardings += 1
            p.slot_held = True
            return True
        raise TypeError(f"unexpected handover payload {p!r}")

    def _finished(self, s: HandoverSession):
        p = s.payload
        ok = s.outcome is Outcome.COMPLETED
        if isinstance(p, _CallMove):
            self._finish_call_move(p, ok)
        elif isinstance(p, _VehicleMove):
            for cid in p.admitted:
                call = self.calls.get(cid)
                if call is None or call.ended:
                    continue
                self._release(p.source, cid, ReleaseCause.FEMTOCELL_LEFT)
                self.ledgers[p.target].confirm(cid)
                call.cell, call.hold_cell, call.in_handover = p.target, None, False
            p.vehicle.serving_cell = p.target
        elif isinstance(p, _Alighting):
            call = p.call
            call.in_handover = False
            if not call.ended:
                if ok:
                    p.vehicle.onboard_calls.remove(call.call_id)
                    self.ledgers[p.target].confirm(call.call_id)
                    call.cell, call.hold_cell, call.vehicle, call.origin = p.target, None, None, Origin.FIXED
                    self._schedule_dwell(call)
                else:
                    self._end_call(call)
        elif isinstance(p, _Boarding):
            call = p.call
            call.in_handover = False
            if p.slot_held:
                p.vehicle.pending_boardings -= 1
            if not call.ended:
                if ok:
                    self._release(p.source, call.call_id, ReleaseCause.OUTBOUND_M2F)
                    call.cell, call.vehicle, call.origin = None, p.vehicle.vehicle_id, Origin.ONBOARD
                    p.vehicle.onboard_calls.append(call.call_id)
                self._schedule_dwell(call)
        self.kpi.latency(self.ctx.clock, s.kind, total_latency(s))
        if self.trace_lines is not None:
            self.trace_lines.append(f"# session {s.session_id} {s.kind.value} subject={s.subject[0]}-{s.subject[1]} "
                                    f"outcome={s.outcome.value}")
            self.trace_lines.extend(format_trace(s))

    def _finish_call_move(self, p: _CallMove, ok: bool):
        call = p.call
        call.in_handover = False
        if call.ended:
            return
        if ok:
            self._release(p.source, call.call_id, ReleaseCause.OUTBOUND_M2M)
            self.ledgers[p.target].confirm(call.call_id)
            call.cell, call.hold_cell = p.target, None
            self._schedule_dwell(call)
        else:
            self._end_call(call, ReleaseCause.OUTBOUND_M2M)

    # running

    def run(self) -> KpiReport:
        self.ctx.run_until(self.cfg.stop_time)
        self.finish()
        return self.report()

    def finish(self):
        stop = self.cfg.stop_time
        if stop > self._last:
            self.kpi.integrate(self._level, self._last, stop)
            self._last = stop
        self.kpi.sim_time = stop

    def report(self) -> KpiReport:
        return self.kpi.report(self.cfg)

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in (self.trace_lines or []))

    def trace_hash(self) -> str:
        return hashlib.sha256(self.trace_text().encode()).hexdigest()
