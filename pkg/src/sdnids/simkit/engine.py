"""Discrete-event core: integer-microsecond clock and an insertion-stable heap."""

from __future__ import annotations

import hashlib
import heapq
import json
from collections import deque
from typing import Any, Callable, Optional

from ..dataplane import SimulationFault


class EventQueue:
    """Min-heap on (time, sequence); equal times dispatch in insertion order."""

    def __init__(self):
        self._heap = []
        self._seq = 0
        self.now = 0

    def push(self, t: int, kind: str, fn: Callable, *args) -> None:
        if t < self.now:
            raise SimulationFault(f"event {kind!r} scheduled in the past ({t} < {self.now})")
        heapq.heappush(self._heap, (t, self._seq, kind, fn, args))
        self._seq += 1

    def pop(self):
        item = heapq.heappop(self._heap)
        self.now = item[0]
        return item

    def __len__(self):
        return len(self._heap)

    def __bool__(self):
        return bool(self._heap)


class EventLog:
    """JSON-lines sink for dispatched events; keeps a running digest and a tail."""

    def __init__(self, stream=None, tail: int = 20):
        self.stream = stream
        self.digest = hashlib.sha256()
        self.tail = deque(maxlen=tail)
        self.count = 0
        self._dumps = json.JSONEncoder(separators=(",", ":")).encode

    def write(self, record: dict) -> None:
        line = self._dumps(record) + "\n"
        self.digest.update(line.encode())
        self.tail.append(line)
        self.count += 1
        if self.stream is not None:
            self.stream.write(line)

    def hexdigest(self) -> str:
        return self.digest.hexdigest()


class Simulator:
    def __init__(self, log: Optional[EventLog] = None):
        self.queue = EventQueue()
        self.log = log if log is not None else EventLog()

    @property
    def now(self) -> int:
        return self.queue.now

    def at(self, t: int, kind: str, fn: Callable, *args: Any) -> None:
        self.queue.push(t, kind, fn, *args)

    def run(self) -> None:
        """Dispatch until the queue drains.

        Handlers return a dict of fields for the event record (or None).
        """
        q = self.queue
        write = self.log.write
        while q:
            t, seq, kind, fn, args = q.pop()
            try:
                extra = fn(*args)
            except SimulationFault as exc:
                tail = "".join(self.log.tail)
                raise SimulationFault(f"{exc} at t={t}us ({kind}); last events:\n{tail}") from exc
            record = {"t": t, "i": seq, "ev": kind}
            if extra:
                record.update(extra)
            write(record)
