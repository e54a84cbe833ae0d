"""Deterministic discrete-event simulator of TCP congestion control
(BBRv1, BBRv3, Cubic) on a single bottleneck link, with the sender gated
by a periodic CPU-scheduling contention model."""

from .bbr import Bbr, BbrParams
from .cpugate import CpuSchedule
from .cubic import Cubic
from .engine import Simulator
from .harness import (AggregateRow, ExperimentConfig, RunResult, classify_run,
                      expand_grid, run_single, run_sweep)
from .link import MSS, BottleneckLink, LinkConfig
from .transport import Receiver, Sender, pacing_interval, tso_burst_size

__all__ = [
    "Bbr", "BbrParams", "CpuSchedule", "Cubic", "Simulator",
    "AggregateRow", "ExperimentConfig", "RunResult", "classify_run",
    "expand_grid", "run_single", "run_sweep",
    "MSS", "BottleneckLink", "LinkConfig",
    "Receiver", "Sender", "pacing_interval", "tso_burst_size",
]

__version__ = "0.1.0"
