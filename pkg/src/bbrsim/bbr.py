"""BBRv1/BBRv3 congestion control with the inflight-deficit pacing patch.

Model estimation (windowed-max bandwidth, windowed-min RTT), the
Startup/Drain/ProbeBW/ProbeRTT phase machine, and the gain schedule.
BBRv3 runs the same machine re-parameterized (high gain 2.77, 5 s ProbeRTT
interval, bandwidth cap on loss); this approximation is documented in the
README.

With the patch enabled, gain selection overrides pacing_gain to the high
gain whenever a non-app-limited sender holds less than one estimated BDP
inflight; cwnd sizing is never touched.
"""

from dataclasses import dataclass, field

from .engine import NS_PER_MS, NS_PER_SEC
from .link import MSS

STARTUP = "startup"
DRAIN = "drain"
PROBE_BW = "probe_bw"
PROBE_RTT = "probe_rtt"

PROBE_BW_GAINS = (1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
STARTUP_GROWTH = 1.25  # full-pipe rule: <25% bw growth ...
STARTUP_STALL_ROUNDS = 3  # ... over 3 consecutive round trips

DEFAULT_BDP = 10 * MSS  # used until both filters have a sample


class WindowedFilter:
    """Windowed max (or min) over (key, value) samples.

    Keys are monotone non-decreasing (round counts or timestamps); samples
    older than `window` in key units fall out.
    """

    def __init__(self, window, is_max=True):
        self.window = window
        self.is_max = is_max
        self._samples = []  # monotone deque of (key, value)

    def update(self, key, value):
        s = self._samples
        if self.is_max:
            while s and s[-1][1] <= value:
                s.pop()
        else:
            while s and s[-1][1] >= value:
                s.pop()
        s.append((key, value))
        lo = key - self.window
        while s and s[0][0] <= lo:
            s.pop(0)

    def current(self):
        return self._samples[0][1] if self._samples else None

    def current_key(self):
        return self._samples[0][0] if self._samples else None

    def reset(self, key, value):
        self._samples = [(key, value)]

    @property
    def empty(self):
        return not self._samples


@dataclass
class BbrParams:
    version: str = "bbr3"
    high_gain: float = 0.0  # filled per version if left 0
    cwnd_gain_probe_bw: float = 2.0
    probe_bw_gains: tuple = PROBE_BW_GAINS
    probe_rtt_interval: int = 0  # ns; filled per version if left 0
    probe_rtt_duration: int = 200 * NS_PER_MS
    bw_window_rounds: int = 0  # round trips; filled per version if left 0
    rtprop_window: int = 10 * NS_PER_SEC
    min_cwnd: int = 4 * MSS
    patch_enabled: bool = False
    loss_bw_cap: float = 0.7  # v3 only: BtlBw multiplier on a loss episode

    def __post_init__(self):
        if self.version not in ("bbr1", "bbr3"):
            raise ValueError(f"unknown BBR version {self.version!r}")
        if not self.high_gain:
            self.high_gain = 2.89 if self.version == "bbr1" else 2.77
        if not self.probe_rtt_interval:
            self.probe_rtt_interval = (
                10 * NS_PER_SEC if self.version == "bbr1" else 5 * NS_PER_SEC)
        if not self.bw_window_rounds:
            # v3 keeps bandwidth memory over roughly two ProbeBW cycles,
            # noticeably longer than v1's 10-round filter
            self.bw_window_rounds = 10 if self.version == "bbr1" else 20

    @property
    def drain_gain(self):
        return 1.0 / self.high_gain


class Bbr:
    paced = True

    def __init__(self, params, cycle_rng=None):
        self.p = params
        self.cycle_rng = cycle_rng
        self.phase = STARTUP
        self.bw_filter = WindowedFilter(params.bw_window_rounds, is_max=True)
        self.rtprop_filter = WindowedFilter(params.rtprop_window, is_max=False)
        self.round_count = 0
        self.next_round_delivered = 0
        self.full_bw = 0
        self.full_bw_rounds = 0
        self.cycle_index = 0
        self.cycle_stamp = 0
        self.probe_rtt_done = None
        self.pacing_gain = params.high_gain
        self.cwnd_gain = params.high_gain
        self.deficit_active = False
        self.bw_cap = None  # v3 loss response, cleared at a loss-free round
        self._loss_in_round = False
        self._loss_since_cycle = False

    # -- model ---------------------------------------------------------------

    def btlbw(self):
        bw = self.bw_filter.current()
        if bw is None:
            return None
        if self.bw_cap is not None:
            bw = min(bw, self.bw_cap)
        return bw

    def rtprop(self):
        return self.rtprop_filter.current()

    def bdp(self, gain=1.0):
        bw, rt = self.btlbw(), self.rtprop()
        if bw is None or rt is None:
            return int(gain * DEFAULT_BDP)
        return int(gain * (bw * rt) / (8 * NS_PER_SEC))

    # -- main entry ----------------------------------------------------------

    def on_ack(self, sample, inflight, t):
        round_start = False
        if sample.prior_delivered >= self.next_round_delivered:
            # Rounds spent in ProbeRTT do not age the bandwidth window:
            # with cwnd clamped to the floor, delivery in those rounds says
            # nothing about capacity (as with app-limited samples).
            if self.phase != PROBE_RTT:
                self.round_count += 1
            self.next_round_delivered = sample.delivered
            round_start = True

        cur = self.bw_filter.current()
        restricted = sample.is_app_limited or self.phase == PROBE_RTT
        if not restricted or cur is None or sample.delivery_rate > cur:
            self.bw_filter.update(self.round_count, sample.delivery_rate)
        if sample.rtt > 0:
            self.rtprop_filter.update(t, sample.rtt)

        if round_start:
            if not self._loss_in_round:
                self.bw_cap = None
            self._loss_in_round = False

        if self.phase == STARTUP:
            self._check_full_pipe(sample, round_start)
        if self.phase == DRAIN and inflight <= self.bdp():
            self._enter_probe_bw(t)
        if self.phase == PROBE_BW:
            self._advance_cycle(inflight, t)
        self._check_probe_rtt(inflight, t)

        self.update_gains(inflight, sample.is_app_limited)

        bw = self.btlbw()
        pacing_rate = int(self.pacing_gain * bw) if bw else None
        if self.phase == PROBE_RTT:
            cwnd = self.p.min_cwnd
        else:
            cwnd = max(self.bdp(self.cwnd_gain), self.p.min_cwnd)
        return pacing_rate, cwnd

    def on_loss(self, t):
        self._loss_in_round = True
        self._loss_since_cycle = True
        if self.p.version == "bbr3":
            bw = self.btlbw()
            if bw:
                self.bw_cap = int(self.p.loss_bw_cap * bw)
            # end any ongoing up-probe
            if self.phase == PROBE_BW and self.p.probe_bw_gains[self.cycle_index] > 1.0:
                self._next_cycle_slot(t)

    # -- phases --------------------------------------------------------------

    def _check_full_pipe(self, sample, round_start):
        if not round_start or sample.is_app_limited:
            return
        bw = self.bw_filter.current() or 0
        if bw >= self.full_bw * STARTUP_GROWTH:
            self.full_bw = bw
            self.full_bw_rounds = 0
            return
        self.full_bw_rounds += 1
        if self.full_bw_rounds >= STARTUP_STALL_ROUNDS:
            self.phase = DRAIN

    def _enter_probe_bw(self, t):
        self.phase = PROBE_BW
        gains = self.p.probe_bw_gains
        if self.cycle_rng is not None:
            # random start slot, skipping the drain (0.75) slot
            idx = self.cycle_rng.randrange(len(gains) - 1)
            self.cycle_index = idx + 1 if idx >= 1 else idx
        else:
            self.cycle_index = 2
        self.cycle_stamp = t
        self._loss_since_cycle = False

    def _next_cycle_slot(self, t):
        self.cycle_index = (self.cycle_index + 1) % len(self.p.probe_bw_gains)
        self.cycle_stamp = t
        self._loss_since_cycle = False

    def _advance_cycle(self, inflight, t):
        gain = self.p.probe_bw_gains[self.cycle_index]
        rt = self.rtprop() or 0
        elapsed = t - self.cycle_stamp >= rt
        if gain > 1.0:
            # keep probing until the target inflight is reached or loss ends it
            if elapsed and (inflight >= self.bdp(gain) or self._loss_since_cycle):
                self._next_cycle_slot(t)
        elif gain < 1.0:
            # leave the drain slot as soon as the queue is gone
            if elapsed or inflight <= self.bdp():
                self._next_cycle_slot(t)
        elif elapsed:
            self._next_cycle_slot(t)

    def _check_probe_rtt(self, inflight, t):
        if self.phase == PROBE_RTT:
            if t >= self.probe_rtt_done:
                rt = self.rtprop()
                if rt is not None:
                    self.rtprop_filter.reset(t, rt)
                self.probe_rtt_done = None
                self._enter_probe_bw(t)
            return
        stamp = self.rtprop_filter.current_key()
        if stamp is not None and t - stamp > self.p.probe_rtt_interval:
            self.phase = PROBE_RTT
            # hold the floor for the fixed duration or one round trip,
            # whichever is longer
            self.probe_rtt_done = t + max(self.p.probe_rtt_duration,
                                          self.rtprop() or 0)

    # -- gains ---------------------------------------------------------------

    def update_gains(self, inflight, app_limited):
        if self.phase == STARTUP:
            self.pacing_gain = self.p.high_gain
            self.cwnd_gain = self.p.high_gain
        elif self.phase == DRAIN:
            self.pacing_gain = self.p.drain_gain
            self.cwnd_gain = self.p.high_gain
        elif self.phase == PROBE_BW:
            self.pacing_gain = self.p.probe_bw_gains[self.cycle_index]
            self.cwnd_gain = self.p.cwnd_gain_probe_bw
        else:  # PROBE_RTT
            self.pacing_gain = 1.0
            self.cwnd_gain = 1.0

        # The override belongs to ProbeBW: Startup already paces at the high
        # gain and ProbeRTT deliberately holds inflight at the floor.
        self.deficit_active = bool(
            self.p.patch_enabled and self.phase == PROBE_BW
            and not app_limited and inflight < self.bdp())
        if self.deficit_active:
            self.pacing_gain = self.p.high_gain
        return self.pacing_gain, self.cwnd_gain
