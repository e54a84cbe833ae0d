"""Experiment harness: single runs, repetition sweeps, aggregation, export.

A run wires one sender (with its CPU schedule and congestion controller)
to one bottleneck link and one receiver, samples metrics inside the event
loop at a fixed interval, and reports the whole-run average goodput plus
the time series.  A sweep runs the cartesian product of parameter axes,
repeats each cell, and aggregates per-run averages into
median/stddev/p10/p90 rows.
"""

import csv
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

from . import cpugate
from .bbr import Bbr, BbrParams
from .cubic import Cubic
from .engine import (NS_PER_MS, NS_PER_SEC, STREAM_CYCLE, STREAM_LOSS,
                     STREAM_PHASE, Simulator, ms, rng_stream, seconds)
from .link import MSS, BottleneckLink, LinkConfig
from .transport import Receiver, Sender

CCAS = ("bbr1", "bbr3", "cubic")

STRICTLY_CPU_LIMITED = "StrictlyCpuLimited"
RECOVERING = "Recovering"
NON_LIMITED = "NonLimited"

AGGREGATE_HEADER = ("cca,patch,bw_mbps,rtt_ms,slice_ms,share_pct,buffer_bdp,"
                    "loss,reps,median_mbps,stddev_mbps,p10,p90,class")
SERIES_HEADER = ("t_s,goodput_mbps,pacing_mbps,delivery_mbps,btlbw_mbps,"
                 "rtprop_ms,inflight_bytes,inflight_bdp,pacing_gain,"
                 "cwnd_gain,phase,deficit,cwnd_limited,retx")


@dataclass(frozen=True)
class ExperimentConfig:
    cca: str = "bbr3"
    patch: bool = False
    bandwidth_mbps: float = 100.0
    rtt_ms: float = 10.0
    buffer_bdp: float = 1.0
    loss_rate: float = 0.0
    slice_ms: float = 10.0
    share_pct: float = 100.0
    duration_s: float = 20.0
    repetitions: int = 30
    seed: int = 1
    sample_ms: float = 100.0

    def __post_init__(self):
        if self.cca not in CCAS:
            raise ValueError(f"cca must be one of {CCAS}, got {self.cca!r}")
        if self.bandwidth_mbps <= 0:
            raise ValueError("bandwidth_mbps must be positive")
        if self.rtt_ms <= 0:
            raise ValueError("rtt_ms must be positive")
        if self.buffer_bdp <= 0:
            raise ValueError("buffer_bdp must be positive")
        if not 0.0 <= self.loss_rate < 1.0:
            raise ValueError("loss_rate outside [0, 1)")
        if self.slice_ms <= 0:
            raise ValueError("slice_ms must be positive")
        if not 0 < self.share_pct <= 100:
            raise ValueError("share_pct outside (0, 100]")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.sample_ms <= 0:
            raise ValueError("sample_ms must be positive")
        if self.share_pct < 100 and self.period_ns() <= self.slice_ns():
            raise ValueError(
                f"share_pct {self.share_pct}: derived period must exceed "
                f"the slice")

    def slice_ns(self):
        return ms(self.slice_ms)

    def period_ns(self):
        """Scheduling period slice/share, rounded to whole nanoseconds."""
        period = Fraction(self.slice_ns()) * 100 / Fraction(str(self.share_pct))
        return int(round(period))

    def link_config(self):
        bw = int(self.bandwidth_mbps * 1_000_000)
        owd = ms(self.rtt_ms) // 2
        bdp = bw * ms(self.rtt_ms) // (8 * NS_PER_SEC)
        return LinkConfig(
            bandwidth=bw, one_way_delay=owd,
            buffer_limit=max(int(self.buffer_bdp * bdp), MSS),
            loss_rate=self.loss_rate)

    def key(self):
        """Grid-cell identity (everything but seed/reps/sampling)."""
        return (self.cca, self.patch, self.bandwidth_mbps, self.rtt_ms,
                self.slice_ms, self.share_pct, self.buffer_bdp,
                self.loss_rate)


@dataclass
class MetricSample:
    t_s: float
    goodput_mbps: float
    pacing_mbps: float
    delivery_mbps: float
    btlbw_mbps: float
    rtprop_ms: float
    inflight_bytes: int
    inflight_bdp: float
    pacing_gain: float
    cwnd_gain: float
    phase: str
    deficit: bool
    cwnd_limited: bool
    retx: int

    def row(self):
        return (self.t_s, self.goodput_mbps, self.pacing_mbps,
                self.delivery_mbps, self.btlbw_mbps, self.rtprop_ms,
                self.inflight_bytes, self.inflight_bdp, self.pacing_gain,
                self.cwnd_gain, self.phase, int(self.deficit),
                int(self.cwnd_limited), self.retx)


@dataclass
class RunResult:
    config: ExperimentConfig
    rep_index: int
    avg_goodput_mbps: float
    series: list = field(default_factory=list)
    retransmits: int = 0
    lost_bytes: int = 0


def _make_cca(cfg, cycle_rng):
    if cfg.cca == "cubic":
        return Cubic()
    return Bbr(BbrParams(version=cfg.cca, patch_enabled=cfg.patch), cycle_rng)


def _rep_stream(cfg, rep_index, purpose):
    return rng_stream(cfg.seed, (rep_index << 3) | purpose)


def run_single(cfg, rep_index=0, collect_series=True):
    """Execute one repetition; deterministic in (cfg, cfg.seed, rep_index)."""
    sim = Simulator()
    link_cfg = cfg.link_config()

    if cfg.share_pct >= 100:
        gate = None
    else:
        period = cfg.period_ns()
        phase = _rep_stream(cfg, rep_index, STREAM_PHASE).randrange(period)
        gate = cpugate.CpuSchedule(runtime=cfg.slice_ns(), period=period,
                                   phase=phase)

    loss_rng = (_rep_stream(cfg, rep_index, STREAM_LOSS)
                if cfg.loss_rate > 0 else None)
    cca = _make_cca(cfg, _rep_stream(cfg, rep_index, STREAM_CYCLE))

    receiver = Receiver()
    sender = None

    def on_deliver(burst, t):
        ack = receiver.on_burst(burst)
        link.deliver_ack(ack, t, sender.on_ack_arrival)

    link = BottleneckLink(sim, link_cfg, on_deliver, loss_rng)
    sender = Sender(sim, link, cca, schedule=gate)

    duration = seconds(cfg.duration_s)
    interval = ms(cfg.sample_ms)
    series = []
    ground_bdp = link_cfg.bandwidth * ms(cfg.rtt_ms) / (8 * NS_PER_SEC)
    state = {"prev_bytes": 0, "next_t": interval}

    def sample_tick():
        t = sim.now()
        delivered = receiver.recv_next
        goodput = (delivered - state["prev_bytes"]) * 8 / (interval / NS_PER_SEC)
        state["prev_bytes"] = delivered
        if collect_series:
            series.append(_snapshot(t, goodput, sender, cca, ground_bdp))
        # Progress guarantee for unpaced flows: with every burst lost and no
        # ACK clock, only a timer can notice the timeout.
        if cpugate.is_on_cpu(t, gate):
            sender._try_send(t)
        state["next_t"] += interval
        if state["next_t"] <= duration:
            sim.schedule(state["next_t"], sample_tick)

    sim.schedule(interval, sample_tick)
    sender.start()
    sim.run_until(duration)
    sender.stop()

    avg = receiver.recv_next * 8 / cfg.duration_s / 1e6
    return RunResult(config=cfg, rep_index=rep_index, avg_goodput_mbps=avg,
                     series=series, retransmits=sender.retransmits,
                     lost_bytes=sender.lost_bytes)


def _snapshot(t, goodput_bps, sender, cca, ground_bdp):
    inflight = sender.inflight
    sample = sender.last_sample
    delivery = sample.delivery_rate if sample else 0
    if isinstance(cca, Bbr):
        bw = cca.btlbw() or 0
        rt = cca.rtprop() or 0
        deficit = cca.deficit_active
        phase = cca.phase
        pacing_gain, cwnd_gain = cca.pacing_gain, cca.cwnd_gain
    else:
        bw = rt = 0
        deficit = False
        phase = "slow_start" if cca.epoch_start is None else "avoidance"
        pacing_gain = cwnd_gain = 0.0
    return MetricSample(
        t_s=t / NS_PER_SEC,
        goodput_mbps=goodput_bps / 1e6,
        pacing_mbps=(sender.pacing_rate or 0) / 1e6,
        delivery_mbps=delivery / 1e6,
        btlbw_mbps=bw / 1e6,
        rtprop_ms=rt / NS_PER_MS,
        inflight_bytes=inflight,
        inflight_bdp=inflight / ground_bdp if ground_bdp else 0.0,
        pacing_gain=pacing_gain,
        cwnd_gain=cwnd_gain,
        phase=phase,
        deficit=deficit,
        cwnd_limited=sender.cwnd_limited,
        retx=sender.retransmits)


# -- sweeps & aggregation ------------------------------------------------------


@dataclass
class AggregateRow:
    config: ExperimentConfig
    goodputs: list
    median_mbps: float = 0.0
    stddev_mbps: float = 0.0
    p10: float = 0.0
    p90: float = 0.0

    def __post_init__(self):
        vals = sorted(self.goodputs)
        self.median_mbps = statistics.median(vals)
        self.stddev_mbps = statistics.stdev(vals) if len(vals) > 1 else 0.0
        self.p10 = percentile(vals, 0.10)
        self.p90 = percentile(vals, 0.90)

    @property
    def n(self):
        return len(self.goodputs)


def percentile(sorted_vals, q):
    """Linear-interpolation percentile over an ascending list."""
    if not sorted_vals:
        raise ValueError("empty sample")
    rank = q * (len(sorted_vals) - 1)
    lo = int(rank)
    hi = min(lo + 1, len(sorted_vals) - 1)
    frac = rank - lo
    return sorted_vals[lo] * (1 - frac) + sorted_vals[hi] * frac


def classify(goodput_mbps, bandwidth_mbps, cap_mbps=20.0):
    """Run regime: limited by the link, by the CPU, or in between."""
    if goodput_mbps >= 0.8 * bandwidth_mbps:
        return NON_LIMITED
    if goodput_mbps <= cap_mbps:
        return STRICTLY_CPU_LIMITED
    return RECOVERING


def classify_run(result, cap_mbps=20.0):
    return classify(result.avg_goodput_mbps, result.config.bandwidth_mbps,
                    cap_mbps)


def _run_avg(task):
    cfg, rep = task
    return run_single(cfg, rep, collect_series=False).avg_goodput_mbps


def run_cell(cfg, jobs=1, executor=None):
    """All repetitions of one config; returns the per-run averages in
    repetition order."""
    tasks = [(cfg, rep) for rep in range(cfg.repetitions)]
    if executor is not None:
        return list(executor.map(_run_avg, tasks))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_avg, tasks))
    return [_run_avg(t) for t in tasks]


def run_sweep(configs, jobs=1):
    """Aggregate every config; identical output for any jobs value."""
    configs = list(configs)
    tasks = [(cfg, rep) for cfg in configs for rep in range(cfg.repetitions)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            avgs = list(pool.map(_run_avg, tasks, chunksize=4))
    else:
        avgs = [_run_avg(t) for t in tasks]
    rows = []
    i = 0
    for cfg in configs:
        vals = avgs[i:i + cfg.repetitions]
        i += cfg.repetitions
        rows.append(AggregateRow(config=cfg, goodputs=vals))
    rows.sort(key=lambda r: (r.config.cca, r.config.patch,
                             r.config.bandwidth_mbps, r.config.rtt_ms,
                             r.config.slice_ms, r.config.share_pct,
                             r.config.buffer_bdp, r.config.loss_rate))
    return rows


_AXIS_FIELDS = {
    "cca": "cca", "patch": "patch", "bw": "bandwidth_mbps",
    "bandwidth_mbps": "bandwidth_mbps", "rtt": "rtt_ms", "rtt_ms": "rtt_ms",
    "buffer_bdp": "buffer_bdp", "loss": "loss_rate", "loss_rate": "loss_rate",
    "slice_ms": "slice_ms", "slice": "slice_ms", "share": "share_pct",
    "share_pct": "share_pct", "duration": "duration_s",
    "duration_s": "duration_s", "reps": "repetitions",
    "repetitions": "repetitions", "seed": "seed", "sample_ms": "sample_ms",
}


def expand_grid(axes):
    """Cartesian product of axis values into ExperimentConfigs.

    `axes` maps axis names (CLI spellings accepted) to a value or a list.
    """
    fields = {}
    for key, val in axes.items():
        if key not in _AXIS_FIELDS:
            raise ValueError(f"unknown sweep axis {key!r}")
        fields[_AXIS_FIELDS[key]] = val if isinstance(val, list) else [val]
    names = list(fields)
    configs = []
    for combo in product(*(fields[n] for n in names)):
        configs.append(ExperimentConfig(**dict(zip(names, combo))))
    return configs


def load_sweep_file(path):
    """Sweep grid file: flat YAML mapping of axis name to value or list."""
    import yaml
    with open(path) as fh:
        axes = yaml.safe_load(fh)
    if not isinstance(axes, dict):
        raise ValueError(f"{path}: expected a flat mapping of sweep axes")
    return expand_grid(axes)


# -- export --------------------------------------------------------------------


def _fmt(x):
    """Fixed 6-significant-digit rendering for byte-stable files."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return "%.6g" % x
    return str(x)


def aggregate_record(row, cap_mbps=20.0):
    c = row.config
    return {
        "cca": c.cca, "patch": int(c.patch),
        "bw_mbps": c.bandwidth_mbps, "rtt_ms": c.rtt_ms,
        "slice_ms": c.slice_ms, "share_pct": c.share_pct,
        "buffer_bdp": c.buffer_bdp, "loss": c.loss_rate, "reps": row.n,
        "median_mbps": row.median_mbps, "stddev_mbps": row.stddev_mbps,
        "p10": row.p10, "p90": row.p90,
        "class": classify(row.median_mbps, c.bandwidth_mbps, cap_mbps),
    }


def export_aggregate(rows, path, fmt="csv", cap_mbps=20.0):
    records = [aggregate_record(r, cap_mbps) for r in rows]
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump([{k: (_fmt(v) if isinstance(v, float) else v)
                        for k, v in rec.items()} for rec in records],
                      fh, indent=2)
            fh.write("\n")
        return
    header = AGGREGATE_HEADER.split(",")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for rec in records:
            w.writerow([_fmt(rec[k]) for k in header])


def export_series(series, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_HEADER.split(","))
        for s in series:
            w.writerow([_fmt(v) for v in s.row()])
