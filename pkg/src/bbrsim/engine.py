"""Deterministic discrete-event engine.

All simulation time is integer nanoseconds; there is no floating-point
time anywhere in the system.  Events with equal fire time are processed
in insertion order, which makes every run bit-reproducible.
"""

import heapq
import random

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_SEC = 1_000_000_000


def ms(x):
    """Milliseconds -> integer nanoseconds."""
    return int(round(x * NS_PER_MS))


def seconds(x):
    """Seconds -> integer nanoseconds."""
    return int(round(x * NS_PER_SEC))


class SchedulingError(Exception):
    """Raised when an event is scheduled in the past."""


class EventHandle:
    """Cancellation token for a scheduled event."""

    __slots__ = ("fire_at", "seq", "fn", "cancelled")

    def __init__(self, fire_at, seq, fn):
        self.fire_at = fire_at
        self.seq = seq
        self.fn = fn
        self.cancelled = False


class Simulator:
    """Monotone clock plus a (fire_at, seq)-ordered event queue."""

    def __init__(self):
        self._now = 0
        self._seq = 0
        self._heap = []

    def now(self):
        return self._now

    def schedule(self, fire_at, fn):
        """Queue fn to run at fire_at; returns a handle for cancel()."""
        if fire_at < self._now:
            raise SchedulingError(
                f"schedule at {fire_at} ns is before now ({self._now} ns)"
            )
        handle = EventHandle(fire_at, self._seq, fn)
        self._seq += 1
        heapq.heappush(self._heap, (fire_at, handle.seq, handle))
        return handle

    def schedule_after(self, delay, fn):
        return self.schedule(self._now + delay, fn)

    @staticmethod
    def cancel(handle):
        """True if the event was pending and is now removed."""
        if handle is None or handle.cancelled or handle.fn is None:
            return False
        handle.cancelled = True
        handle.fn = None
        return True

    def run_until(self, end):
        """Process every event with fire_at <= end; leaves now() == end."""
        if end < self._now:
            raise SchedulingError(f"run_until({end}) is before now ({self._now})")
        heap = self._heap
        while heap and heap[0][0] <= end:
            fire_at, _, handle = heapq.heappop(heap)
            if handle.cancelled:
                continue
            self._now = fire_at
            fn = handle.fn
            handle.fn = None
            fn()
        self._now = end

    def pending(self):
        return sum(1 for _, _, h in self._heap if not h.cancelled)


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def rng_stream(seed, stream_id):
    """Independent RNG substream: same (seed, stream_id) -> same sequence.

    Mixing through splitmix64 means adding a consumer never perturbs
    the streams other consumers observe.
    """
    mixed = _splitmix64(_splitmix64(seed & 0xFFFFFFFFFFFFFFFF) ^ _splitmix64(stream_id))
    return random.Random(mixed)


# Stream ids, one per randomness consumer.
STREAM_LOSS = 1
STREAM_PHASE = 2
STREAM_CYCLE = 3
