"""Deadline-scheduling CPU contention model.

The sender may execute (send bursts, process ACKs, run CCA logic) only
inside periodic on-CPU windows [k*period + phase, k*period + phase + runtime),
k >= 0.  Window boundaries are half-open: an event due exactly at a window
end is deferred to the next window.  Times before the first window start
are off-CPU.
"""

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class CpuSchedule:
    runtime: int  # timeslice length, ns
    period: int  # ns
    phase: int = 0  # offset of the first window start, in [0, period)

    def __post_init__(self):
        if not (0 < self.runtime <= self.period):
            raise ValueError(f"need 0 < runtime <= period, got {self.runtime}/{self.period}")
        if not (0 <= self.phase < self.period):
            raise ValueError(f"phase {self.phase} outside [0, period)")

    def share(self):
        """runtime/period as an exact rational."""
        return Fraction(self.runtime, self.period)

    @property
    def always_on(self):
        return self.runtime == self.period


def is_on_cpu(t, s):
    if s is None or s.always_on:
        return True
    rel = t - s.phase
    if rel < 0:
        return False
    return rel % s.period < s.runtime


def next_on_cpu(t, s):
    """t itself if on-CPU, else the start of the next on-CPU window."""
    if s is None or s.always_on:
        return t
    rel = t - s.phase
    if rel < 0:
        return s.phase
    k, off = divmod(rel, s.period)
    if off < s.runtime:
        return t
    return s.phase + (k + 1) * s.period
