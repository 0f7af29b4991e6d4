"""Deterministic discrete-event queue.

Events are totally ordered by (deliver_time, event class, sensor_id, seq);
the class ordinal makes tie-breaking explicit so repeated runs with the same
seed pop an identical sequence.  Duplicate keys are rejected: no two accepted
events may compare equal.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any

# Event class ordinals (tie-break order at equal times).
DYNAMICS_TICK = 0
MEASUREMENT_DELIVERY = 1
DETECTOR_TICK = 2
LOGGING = 3


@dataclass(frozen=True, order=True)
class SimEvent:
    deliver_time: float
    event_class: int
    sensor_id: int
    seq: int
    payload: Any = field(default=None, compare=False)

    def key(self) -> tuple[float, int, int, int]:
        return (self.deliver_time, self.event_class, self.sensor_id, self.seq)


class EventQueue:
    """Min-heap over the SimEvent total order with duplicate-key rejection."""

    def __init__(self):
        self._heap: list[SimEvent] = []
        self._keys: set[tuple] = set()

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, event: SimEvent) -> None:
        key = event.key()
        if key in self._keys:
            raise ValueError(f"duplicate event key {key}")
        self._keys.add(key)
        heapq.heappush(self._heap, event)

    def pop(self) -> SimEvent | None:
        """Pop the minimum event, or None when the simulation is drained."""
        if not self._heap:
            return None
        event = heapq.heappop(self._heap)
        self._keys.discard(event.key())
        return event
