"""Macrocell bandwidth ledger and the handover-priority admission policy.

Bandwidth in one macrocell is split into

* occupied  -- the sum of every call's current grant,
* vacant    -- bandwidth freed by outbound mobility, held back for handover
               calls until its reservation entry expires, and
* free      -- everything else.

New calls only see ``free``.  Handover calls may also consume the vacant
pool and, for the remaining shortfall, degrade QoS-adaptive calls down to
``(1 - xi) * beta_r``.  The baseline ledger has neither reservations nor
degradation, so both call types face the same rule.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Iterable

from .errors import ConfigError, InputError, StateError

EPS = 1e-9


@dataclass(frozen=True)
class TrafficClass:
    class_id: int
    beta_r: float  # requested bandwidth, Mbps
    qos_adaptive: bool = False
    xi: float = 0.0  # maximum degradable fraction

    def __post_init__(self):
        if not self.beta_r > 0:
            raise InputError(f"class {self.class_id}: beta_r must be positive")
        if not 0 <= self.xi <= 1:
            raise InputError(f"class {self.class_id}: xi must lie in [0, 1]")
        if not self.qos_adaptive and self.xi != 0:
            raise InputError(f"class {self.class_id}: non-adaptive classes must have xi = 0")

    @property
    def floor(self) -> float:
        """Smallest grant the class tolerates."""
        return (1.0 - self.xi) * self.beta_r


DEFAULT_CLASSES = (
    TrafficClass(1, 2.0, qos_adaptive=True, xi=0.5),
    TrafficClass(2, 1.0, qos_adaptive=False),
)


class ReleaseCause(str, Enum):
    NORMAL_END = "normal_end"
    OUTBOUND_M2F = "outbound_m2f_handover"
    FEMTOCELL_LEFT = "femtocell_left_cell"
    OUTBOUND_M2M = "outbound_m2m_handover"


RESERVING_CAUSES = frozenset({ReleaseCause.OUTBOUND_M2F, ReleaseCause.FEMTOCELL_LEFT, ReleaseCause.OUTBOUND_M2M})


class Scheme(str, Enum):
    PROPOSED = "proposed"
    BASELINE = "baseline"


@dataclass
class Allocation:
    call_id: Hashable
    cls: TrafficClass
    granted: float
    confirmed: bool = True


@dataclass
class Reservation:
    entry_id: int
    amount: float
    expires_at: float


@dataclass(frozen=True)
class Admission:
    admitted: bool
    granted: float = 0.0
    degradations: dict = field(default_factory=dict)
    reserved_used: float = 0.0

    def __bool__(self) -> bool:
        return self.admitted


@dataclass(frozen=True)
class Release:
    amount: float
    reservation: Reservation | None


@dataclass(frozen=True)
class LedgerSnapshot:
    cell_id: int
    occupied: float
    vacant: float
    releasable: float
    counts: dict


class CellLedger:
    """Per-macrocell bandwidth accounting."""

    def __init__(self, c_total: float = 6.0, classes: Iterable[TrafficClass] = DEFAULT_CLASSES,
                 reservation_time: float = 10.0, allow_degradation: bool = True,
                 auto_restore: bool = True, cell_id: int = 0):
        if not c_total > 0:
            raise InputError("C_total must be positive")
        if reservation_time < 0:
            raise InputError("reservation time must be nonnegative")
        self.c_total = float(c_total)
        self.classes = {c.class_id: c for c in classes}
        self.reservation_time = float(reservation_time)
        self.allow_degradation = allow_degradation
        self.auto_restore = auto_restore
        self.cell_id = cell_id
        self.allocations: dict[Hashable, Allocation] = {}
        self.reservations: deque[Reservation] = deque()
        self.counts = {cid: 0 for cid in self.classes}
        self._next_entry = 0

    @classmethod
    def for_scheme(cls, scheme: Scheme | str, c_total: float = 6.0,
                   classes: Iterable[TrafficClass] = DEFAULT_CLASSES,
                   reservation_time: float = 10.0, cell_id: int = 0) -> "CellLedger":
        """Ledger for ``scheme``; the baseline forces T = 0 and no degradation."""
        if Scheme(scheme) is Scheme.BASELINE:
            return cls(c_total, classes, 0.0, allow_degradation=False, cell_id=cell_id)
        return cls(c_total, classes, reservation_time, cell_id=cell_id)

    def _class(self, class_id: int) -> TrafficClass:
        try:
            return self.classes[class_id]
        except KeyError:
            raise ConfigError(f"unknown traffic class {class_id!r}") from None

    @property
    def occupied(self) -> float:
        return math.fsum(a.granted for a in self.allocations.values())

    @property
    def vacant(self) -> float:
        return math.fsum(r.amount for r in self.reservations)

    @property
    def free(self) -> float:
        """Bandwidth that is neither granted nor reserved."""
        return max(0.0, self.c_total - self.occupied - self.vacant)

    def releasable_bandwidth(self) -> float:
        """Bandwidth recoverable by degrading adaptive calls to their floors."""
        if not self.allow_degradation:
            return 0.0
        return math.fsum(max(0.0, a.granted - a.cls.floor) for a in self.allocations.values() if a.cls.qos_adaptive)

    def nominal_releasable(self) -> float:
        """Sum over classes of N_i * xi_i * beta_r_i, from the class counters."""
        if not self.allow_degradation:
            return 0.0
        return math.fsum(n * self.classes[cid].xi * self.classes[cid].beta_r
                         for cid, n in self.counts.items() if self.classes[cid].qos_adaptive)

    def is_degraded(self) -> bool:
        return any(a.granted < a.cls.beta_r - EPS for a in self.allocations.values())

    def __contains__(self, call_id) -> bool:
        return call_id in self.allocations

    # admission

    def can_admit_new(self, class_id: int) -> bool:
        return self._class(class_id).beta_r <= self.free + EPS

    def can_admit_handover(self, class_id: int) -> bool:
        need = self._class(class_id).beta_r
        return need <= self.c_total - self.occupied + self.releasable_bandwidth() + EPS

    def admit_new_call(self, class_id: int, call_id: Hashable) -> Admission:
        cls = self._class(class_id)
        if not self.can_admit_new(class_id):
            return Admission(False)
        self._allocate(call_id, cls, cls.beta_r, True)
        return Admission(True, cls.beta_r)

    def admit_handover_call(self, class_id: int, call_id: Hashable, confirmed: bool = True) -> Admission:
        """Admit a handover call using, in order, the vacant pool, free bandwidth and degradation."""
        cls = self._class(class_id)
        if not self.can_admit_handover(class_id):
            return Admission(False)
        need = cls.beta_r
        free = self.free
        used = self._consume_reservations(min(need, self.vacant))
        shortfall = need - used - min(free, need - used)
        degradations = self._degrade(shortfall) if shortfall > EPS else {}
        self._allocate(call_id, cls, need, confirmed)
        return Admission(True, need, degradations, used)

    def _allocate(self, call_id, cls, granted, confirmed):
        if call_id in self.allocations:
            raise StateError(f"call {call_id!r} already allocated in cell {self.cell_id}")
        self.allocations[call_id] = Allocation(call_id, cls, granted, confirmed)
        self.counts[cls.class_id] += 1

    def _consume_reservations(self, amount: float) -> float:
        taken = 0.0
        while amount - taken > EPS and self.reservations:
            head = self.reservations[0]
            bite = min(head.amount, amount - taken)
            taken += bite
            head.amount -= bite
            if head.amount <= EPS:
                self.reservations.popleft()
        return taken

    def _degrade(self, shortfall: float) -> dict:
        margins = [(a, a.granted - a.cls.floor) for a in self.allocations.values()
                   if a.cls.qos_adaptive and a.granted - a.cls.floor > 0]
        total = math.fsum(m for _, m in margins)
        out = {}
        for a, m in margins:
            if shortfall >= total - EPS:
                cut = m
            else:
                cut = shortfall * m / total
            a.granted -= cut
            if a.granted - a.cls.floor < EPS:
                a.granted = a.cls.floor
            out[a.call_id] = cut
        return out

    def confirm(self, call_id: Hashable) -> None:
        self.allocations[call_id].confirmed = True

    # release and expiry

    def release_call(self, call_id: Hashable, cause: ReleaseCause | str, now: float = 0.0) -> Release:
        """Remove a call; mobility causes hold its bandwidth back for ``reservation_time``."""
        alloc = self.allocations.pop(call_id, None)
        if alloc is None:
            raise StateError(f"call {call_id!r} not allocated in cell {self.cell_id}")
        self.counts[alloc.cls.class_id] -= 1
        entry = None
        if ReleaseCause(cause) in RESERVING_CAUSES and self.reservation_time > 0:
            entry = Reservation(self._next_entry, alloc.granted, now + self.reservation_time)
            self._next_entry += 1
            self.reservations.append(entry)
        if self.auto_restore:
            self.restore_degraded()
        return Release(alloc.granted, entry)

    def expire_reservation(self, entry: Reservation) -> None:
        try:
            self.reservations.remove(entry)
        except ValueError:
            return
        if self.auto_restore:
            self.restore_degraded()

    def restore_degraded(self) -> float:
        """Hand unreserved free bandwidth back to degraded calls, in proportion to their deficits."""
        degraded = [(a, a.cls.beta_r - a.granted) for a in self.allocations.values() if a.granted < a.cls.beta_r]
        if not degraded:
            return 0.0
        free = self.free
        if free <= EPS:
            return 0.0
        deficit = math.fsum(d for _, d in degraded)
        give = min(free, deficit)
        for a, d in degraded:
            if give >= deficit - EPS:
                a.granted = a.cls.beta_r
            else:
                a.granted = min(a.cls.beta_r, a.granted + give * d / deficit)
        return give

    # inspection

    def snapshot(self) -> LedgerSnapshot:
        return LedgerSnapshot(self.cell_id, self.occupied, self.vacant, self.releasable_bandwidth(), dict(self.counts))

    def audit(self) -> list[str]:
        """Invariant violations, empty when the ledger is consistent."""
        bad = []
        occ, vac = self.occupied, self.vacant
        if occ > self.c_total + EPS:
            bad.append(f"occupied {occ} exceeds capacity {self.c_total}")
        if occ + vac > self.c_total + 1e-6:
            bad.append(f"occupied + vacant = {occ + vac} exceeds capacity {self.c_total}")
        if any(r.amount < -EPS for r in self.reservations):
            bad.append("negative reservation")
        counts = {cid: 0 for cid in self.classes}
        for a in self.allocations.values():
            counts[a.cls.class_id] += 1
            lo = a.cls.floor if (a.cls.qos_adaptive and self.allow_degradation) else a.cls.beta_r
            if not (lo - EPS <= a.granted <= a.cls.beta_r + EPS):
                bad.append(f"call {a.call_id!r} grant {a.granted} outside [{lo}, {a.cls.beta_r}]")
        if counts != self.counts:
            bad.append(f"class counters {self.counts} disagree with allocations {counts}")
        if not self.is_degraded() and abs(self.releasable_bandwidth() - self.nominal_releasable()) > 1e-9:
            bad.append("releasable bandwidth disagrees with the class-counter sum in an undegraded state")
        return bad


def admit_group(ledger: CellLedger, members: Iterable[tuple[Hashable, int, float]],
                confirmed: bool = False) -> tuple[list, list]:
    """Admit a vehicle's calls one by one, largest current grant first.

    ``members`` holds ``(call_id, class_id, granted_at_source)``.  Returns the
    admitted and dropped call ids; partial admission is allowed.
    """
    admitted, dropped = [], []
    for call_id, class_id, _ in sorted(members, key=lambda m: (-m[2], str(m[0]))):
        if ledger.admit_handover_call(class_id, call_id, confirmed=confirmed):
            admitted.append(call_id)
        else:
            dropped.append(call_id)
    return admitted, dropped
