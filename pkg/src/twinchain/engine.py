"""Deterministic discrete-event core: virtual clock, event queue, seeded streams."""

from __future__ import annotations

import hashlib
import heapq
import json
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

import numpy as np


class EventKind(str, Enum):
    TX_ARRIVAL = "TxArrival"
    MSG_DELIVERY = "MsgDelivery"
    ROUND_TIMEOUT = "RoundTimeout"


@dataclass
class Event:
    fire_time: float
    seq: int
    kind: EventKind
    payload: Any = None


class SchedulingError(RuntimeError):
    """An event was scheduled before the current clock."""


class RunawaySimulation(RuntimeError):
    pass


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode())


def rng_stream(seed: int, label: str, *key: int) -> np.random.Generator:
    """A generator fixed by ``(seed, label, *key)``.

    Each concern ("topology", "bandwidth", "workload", "drops") draws from its
    own stream so changing one never perturbs another. Extra integer keys
    derive sub-streams, e.g. one per gossiped message.
    """
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, _label_key(label), *key])


def payload_digest(payload: Any) -> str:
    return hashlib.sha1(repr(payload).encode()).hexdigest()[:12]


class Simulator:
    """Single-threaded event loop.

    Handlers are registered per :class:`EventKind` and receive the event.
    Events with equal fire time pop in scheduling order.
    """

    def __init__(self, max_events: int = 20_000_000, trace: Optional[list] = None):
        self.now = 0.0
        self.max_events = max_events
        self.processed = 0
        self.trace = trace
        self._queue: list = []
        self._seq = 0
        self._handlers: dict = {}

    def on(self, kind: EventKind, handler: Callable[[Event], None]):
        self._handlers[kind] = handler

    def schedule(self, fire_time: float, kind: EventKind, payload: Any = None) -> Event:
        if fire_time < self.now:
            raise SchedulingError(f"cannot schedule {kind.value} at {fire_time} < now {self.now}")
        ev = Event(fire_time, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._queue, (fire_time, ev.seq, ev))
        return ev

    def __len__(self):
        return len(self._queue)

    def pop(self) -> Event:
        return heapq.heappop(self._queue)[2]

    def run_until_quiescent(self, limit_time: float = float("inf")) -> float:
        """Fire events in (time, seq) order until none are left at or before
        ``limit_time``; returns the time of the last fired event."""
        queue = self._queue
        handlers = self._handlers
        last = self.now
        while queue and queue[0][0] <= limit_time:
            ev = heapq.heappop(queue)[2]
            self.processed += 1
            if self.processed > self.max_events:
                raise RunawaySimulation(f"exceeded {self.max_events} events at t={ev.fire_time}")
            self.now = last = ev.fire_time
            if self.trace is not None:
                self.trace.append(
                    {"t": ev.fire_time, "seq": ev.seq, "kind": ev.kind.value, "digest": payload_digest(ev.payload)}
                )
            handlers[ev.kind](ev)
        return last


def dump_trace(trace: list, path) -> None:
    with open(path, "w") as fh:
        for row in trace:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
