"""Deterministic discrete-event engine.

Events are ordered by ``(fire_time, seq)`` where ``seq`` is a global
insertion counter, so simultaneous events fire in FIFO order.  Random
draws come from per-source substreams derived from the run seed: adding a
new source never shifts the draws of an existing one.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import math
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

import numpy as np

from .errors import InputError, SimulationError


class EventKind(str, Enum):
    ARRIVAL = "arrival"
    DEPARTURE = "departure"
    DWELL_EXPIRY = "dwell-expiry"
    RESERVATION_EXPIRY = "reservation-expiry"
    MESSAGE_DELIVERY = "message-delivery"
    FEMTOCELL_MOVE = "femtocell-move"


@dataclass(eq=False)
class SimEvent:
    fire_time: float
    seq: int
    kind: EventKind
    payload: Any = None
    cancelled: bool = False
    fired: bool = False

    def __repr__(self) -> str:
        return f"SimEvent(t={self.fire_time!r}, seq={self.seq}, kind={self.kind.value})"


Handler = Callable[["RunContext", SimEvent], None]


@dataclass
class RunContext:
    """Clock, event queue and random source of one simulation run."""

    rng_seed: int = 0
    stop_time: float = math.inf
    clock: float = 0.0
    record_digest: bool = True
    _queue: list = field(default_factory=list, repr=False)
    _seq: Any = field(default_factory=itertools.count, repr=False)
    _handlers: dict = field(default_factory=dict, repr=False)
    _streams: dict = field(default_factory=dict, repr=False)
    _digest: Any = field(default_factory=lambda: hashlib.blake2b(digest_size=16), repr=False)
    fired_count: int = 0

    def on(self, kind: EventKind, handler: Handler) -> None:
        self._handlers[kind] = handler

    def schedule(self, delay: float, kind: EventKind, payload: Any = None) -> SimEvent:
        """Enqueue an event ``delay`` seconds from now and return its handle."""
        if not isinstance(delay, (int, float)) or not math.isfinite(delay) or delay < 0:
            raise InputError(f"delay must be finite and nonnegative, got {delay!r}")
        if kind.__class__ is not EventKind:
            kind = EventKind(kind)
        ev = SimEvent(self.clock + delay, next(self._seq), kind, payload)
        heapq.heappush(self._queue, (ev.fire_time, ev.seq, ev))
        return ev

    def schedule_at(self, fire_time: float, kind: EventKind, payload: Any = None) -> SimEvent:
        return self.schedule(fire_time - self.clock, kind, payload)

    def cancel(self, handle: SimEvent | None) -> bool:
        """Suppress a pending event; False if it already fired or was cancelled."""
        if handle is None or handle.fired or handle.cancelled:
            return False
        handle.cancelled = True
        return True

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._queue if not ev.cancelled)

    def _drop_cancelled(self) -> None:
        q = self._queue
        while q and q[0][2].cancelled:
            heapq.heappop(q)

    def run_until(self, stop_time: float | None = None) -> bool:
        """Process every event with ``fire_time <= stop_time``.

        Returns True when the queue is exhausted.  If events remain beyond
        ``stop_time`` the clock is left at ``stop_time``; otherwise it stays at
        the last processed event.
        """
        if stop_time is None:
            stop_time = self.stop_time
        if stop_time < self.clock:
            raise InputError(f"stop_time {stop_time} precedes clock {self.clock}")
        q = self._queue
        handlers = self._handlers
        while True:
            self._drop_cancelled()
            if not q or q[0][0] > stop_time:
                break
            ev = heapq.heappop(q)[2]
            self.clock = ev.fire_time
            ev.fired = True
            self.fired_count += 1
            if self.record_digest:
                self._digest.update(f"{ev.fire_time!r}|{ev.seq}|{ev.kind._value_};".encode())
            handler = handlers.get(ev.kind)
            if handler is None:
                raise SimulationError(f"no handler registered for {ev!r}")
            try:
                handler(self, ev)
            except SimulationError:
                raise
            except Exception as exc:
                raise SimulationError(f"handler failed on {ev!r} (payload={ev.payload!r}): {exc}") from exc
        self._drop_cancelled()
        exhausted = not q
        if not exhausted:
            self.clock = stop_time
        return exhausted

    def substream(self, name: str) -> np.random.Generator:
        """Independent generator for a named traffic source."""
        rng = self._streams.get(name)
        if rng is None:
            key = zlib.crc32(name.encode())
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.rng_seed, spawn_key=(key,))))
            self._streams[name] = rng
        return rng

    def trace_digest(self) -> str:
        """Hex digest of the (time, seq, kind) sequence of fired events."""
        return self._digest.hexdigest()
