"""Sender/receiver TCP abstraction.

Covers sequence space, inflight accounting, delivery-rate sampling, and a
Linux-style pacing + TSO-burst engine.  Every stack activity (burst emission,
ACK processing, CCA callbacks, loss detection) happens only while the sender
is on-CPU per its CpuSchedule; ACKs and pacing deadlines that land in an
off-CPU gap are deferred to the start of the next window.

Pacing has no catch-up: when overdue bursts are released after a gap, the
pacing clock restarts from the release instant instead of the missed due
times, so off-CPU time is send capacity lost forever.  At most `tsq_limit`
overdue bursts are held for back-to-back release at resume.
"""

from collections import deque
from dataclasses import dataclass

from . import cpugate
from .engine import NS_PER_MS, NS_PER_SEC
from .link import MSS

MAX_TSO_BYTES = 65536
TSO_DISABLE_BELOW_BPS = 1_200_000  # below this rate, one MSS per burst
MIN_RTO_NS = 10 * NS_PER_MS


def tso_burst_size(pacing_rate):
    """Burst handed to the NIC: 1 ms of data at the pacing rate,
    clamped to [2 MSS, 64 KB]; a single MSS below 1.2 Mbps."""
    if pacing_rate <= 0:
        raise ValueError("pacing rate must be positive")
    if pacing_rate < TSO_DISABLE_BELOW_BPS:
        return MSS
    size = -(-pacing_rate // 8000)  # bits/s * 1 ms / 8 = bytes, rounded up
    return max(2 * MSS, min(size, MAX_TSO_BYTES))


def pacing_interval(burst, pacing_rate):
    """Inter-burst offset: burst size / pacing rate, in nanoseconds."""
    if pacing_rate <= 0:
        raise ValueError("pacing rate must be positive")
    return -(burst * 8 * NS_PER_SEC // -pacing_rate)


@dataclass
class Burst:
    seq_start: int
    size: int
    record: "BurstRecord"


@dataclass
class BurstRecord:
    seq_start: int
    size: int
    sent_at: int
    delivered_at_send: int
    delivered_time_at_send: int
    app_limited_at_send: bool
    lost: bool = False
    retired: bool = False


@dataclass
class RateSample:
    delivery_rate: int  # bits/second
    rtt: int  # ns
    newly_acked: int  # bytes
    is_app_limited: bool
    inflight_after_ack: int  # bytes
    prior_delivered: int  # sender delivered counter when the burst left
    delivered: int  # sender delivered counter now


class Receiver:
    """Acks every arriving burst immediately with a cumulative ACK."""

    def __init__(self):
        self.recv_next = 0
        self._ooo = {}  # seq_start -> seq_end of out-of-order data

    def on_burst(self, burst):
        """Returns the cumulative ACK after absorbing the burst."""
        start, end = burst.seq_start, burst.seq_start + burst.size
        if end > self.recv_next:
            if start <= self.recv_next:
                self.recv_next = end
            else:
                cur = self._ooo.get(start, 0)
                if end > cur:
                    self._ooo[start] = end
            # coalesce any stored segments now contiguous
            while True:
                nxt = None
                for s, e in self._ooo.items():
                    if s <= self.recv_next and e > self.recv_next:
                        nxt = s
                        break
                if nxt is None:
                    break
                self.recv_next = self._ooo.pop(nxt)
        return self.recv_next


class Sender:
    """Bulk-data TCP sender driven by an attached CCA object.

    The CCA must provide on_ack(sample, inflight, t) -> (pacing_rate|None,
    cwnd) and on_loss(t); pacing_rate None means the flow is unpaced and
    transmits back-to-back bursts whenever the gate and cwnd allow.
    """

    def __init__(self, sim, link, cca, schedule=None, tsq_limit=1,
                 initial_cwnd=10 * MSS, initial_pacing_rate=120_000_000,
                 app_limit_bytes=None):
        self.sim = sim
        self.link = link
        self.cca = cca
        self.gate = schedule
        self.tsq_limit = tsq_limit

        self.next_seq = 0
        self.cum_ack = 0
        self.delivered = 0
        self.delivered_time = 0
        self.inflight = 0
        self.cwnd = initial_cwnd
        self.pacing_rate = initial_pacing_rate if getattr(cca, "paced", True) else None
        self.next_send_due = 0
        self.tsq_queue = []  # due times of overdue, not-yet-released bursts
        self.app_limit_bytes = app_limit_bytes
        self.app_limited = False

        self.unacked = deque()  # BurstRecords in send order
        self._seq_ordered = True  # False while a retransmission broke order
        self.retx_queue = []  # (seq_start, size) awaiting retransmission
        self.pending_acks = []  # acks that arrived off-CPU
        self.srtt = None
        self.rttvar = 0
        self.lost_bytes = 0
        self.retransmits = 0
        self.loss_episodes = 0
        self._episode_end_seq = 0
        self._last_cn_time = None
        self.cwnd_limited = False
        self.stopped = False
        self.last_sample = None

        self._pacing_timer = None
        self._resume_timer = None
        self._rto_timer = None
        self._send_log = []  # (t, size) burst emissions, for trace assertions
        self.ack_process_log = []  # timestamps of ACK processing

    # -- event entry points -------------------------------------------------

    def start(self):
        self._try_send(self.sim.now())

    def stop(self):
        """Terminate sending (run horizon reached)."""
        self.stopped = True

    def on_ack_arrival(self, ack):
        t = self.sim.now()
        if cpugate.is_on_cpu(t, self.gate):
            self._process_ack(ack, t)
            self._try_send(t)
        else:
            self.pending_acks.append(ack)
            self._ensure_resume(t)

    def _on_pacing_timer(self):
        self._pacing_timer = None
        self._try_send(self.sim.now())

    def _on_rto_timer(self):
        self._rto_timer = None
        t = self.sim.now()
        if cpugate.is_on_cpu(t, self.gate):
            self.detect_loss_and_retransmit(t)
            self._try_send(t)
        else:
            self._ensure_resume(t)

    def _on_cpu_resume(self):
        self._resume_timer = None
        t = self.sim.now()
        if self.pending_acks:
            acks, self.pending_acks = self.pending_acks, []
            for ack in acks:
                self._process_ack(ack, t)
        self._try_send(t)

    # -- sending -------------------------------------------------------------

    def _try_send(self, t):
        if self.stopped:
            return
        if not cpugate.is_on_cpu(t, self.gate):
            # Bank overdue pacing deadlines (bounded) and wait for the window.
            if self.pacing_rate is not None:
                while (self.next_send_due <= t
                       and len(self.tsq_queue) < self.tsq_limit):
                    self.tsq_queue.append(self.next_send_due)
                    self.next_send_due += self._interval_for_current_rate()
                if len(self.tsq_queue) < self.tsq_limit:
                    self._arm_pacing_timer_or_run()
            self._ensure_resume(t)
            return

        self.detect_loss_and_retransmit(t)

        if self.pacing_rate is None:
            self._send_unpaced(t)
            return

        # Release banked bursts back-to-back (they do not advance the pacing
        # clock), then any overdue fresh burst; the clock restarts from the
        # release instant rather than the missed due time (no catch-up).
        while self.tsq_queue:
            if not self._emit_one(t):
                return  # cwnd-limited; keep the backlog
            self.tsq_queue.pop(0)
        while self.next_send_due <= t:
            if not self._emit_one(t):
                return
            self.next_send_due = t + self._interval_for_current_rate()
        self._arm_pacing_timer_or_run()

    def _interval_for_current_rate(self):
        return pacing_interval(tso_burst_size(self.pacing_rate), self.pacing_rate)

    def _arm_pacing_timer_or_run(self):
        if self.pacing_rate is None or self.stopped:
            return
        due = max(self.next_send_due, self.sim.now())
        if self._pacing_timer is None or self._pacing_timer.fn is None:
            self._pacing_timer = self.sim.schedule(due, self._on_pacing_timer)
        elif self._pacing_timer.fire_at > due:
            self.sim.cancel(self._pacing_timer)
            self._pacing_timer = self.sim.schedule(due, self._on_pacing_timer)

    def _ensure_resume(self, t):
        if self._resume_timer is None or self._resume_timer.fn is None:
            self._resume_timer = self.sim.schedule(
                cpugate.next_on_cpu(t, self.gate), self._on_cpu_resume)

    def _emit_one(self, t):
        """Emit one paced burst (retransmission first); False if blocked
        by cwnd or a full TX ring."""
        if self.retx_queue:
            seq, size = self.retx_queue[0]
            if self.inflight + size > self.cwnd:
                self.cwnd_limited = True
                return False
            self.retx_queue.pop(0)
            return self._transmit(seq, size, t, retx=True)
        size = self._next_burst_size()
        if size == 0:
            return False
        if not self._transmit(self.next_seq, size, t):
            return False
        self.next_seq += size
        return True

    def _next_burst_size(self):
        """TSO-sized burst capped to the cwnd space, MSS-aligned."""
        size = tso_burst_size(self.pacing_rate)
        space = self.cwnd - self.inflight
        if space < min(size, MSS):
            self.cwnd_limited = True
            return 0
        self.cwnd_limited = False
        if size > space:
            size = max(space // MSS * MSS, MSS)
        return self._cap_to_app_limit(size)

    def _cap_to_app_limit(self, size):
        if self.app_limit_bytes is None:
            return size
        avail = self.app_limit_bytes - self.next_seq
        if avail < size:
            self.app_limited = True
            if avail < MSS:
                return 0
            return avail // MSS * MSS
        return size

    def _send_unpaced(self, t):
        """Back-to-back bursts (<= 64 KB each) while the window allows."""
        while True:
            if self.retx_queue:
                seq, size = self.retx_queue[0]
                if self.inflight + size > self.cwnd:
                    self.cwnd_limited = True
                    return
                self.retx_queue.pop(0)
                if not self._transmit(seq, size, t, retx=True):
                    return
                continue
            space = self.cwnd - self.inflight
            if space < MSS:
                self.cwnd_limited = True
                return
            self.cwnd_limited = False
            size = self._cap_to_app_limit(min(space // MSS * MSS, MAX_TSO_BYTES))
            if size == 0:
                return
            if not self._transmit(self.next_seq, size, t):
                return
            self.next_seq += size

    def _transmit(self, seq, size, t, retx=False):
        """Hand one burst to the link; False when the TX ring pushes back."""
        rec = BurstRecord(
            seq_start=seq, size=size, sent_at=t,
            delivered_at_send=self.delivered,
            delivered_time_at_send=self.delivered_time,
            app_limited_at_send=self.app_limited,
        )
        status = self.link.enqueue(Burst(seq, size, rec), t)
        if status == "blocked":
            # Local congestion: the burst never left, so it is not a
            # retransmission; put it back and tell the CCA once per RTT.
            if retx:
                self.retx_queue.insert(0, (seq, size))
            self._congestion_signal(t)
            return False
        if retx and self.unacked and seq < self.unacked[-1].seq_start:
            self._seq_ordered = False
        self.unacked.append(rec)
        self.inflight += size
        if retx:
            self.retransmits += 1
        self._send_log.append((t, size))
        self._arm_rto_timer(self.rto())
        return True

    def _congestion_signal(self, t):
        cooldown = max(self.srtt or 0, MIN_RTO_NS)
        if self._last_cn_time is None or t - self._last_cn_time > cooldown:
            self._last_cn_time = t
            self.loss_episodes += 1
            self.cca.on_loss(t)

    # -- ACK path ------------------------------------------------------------

    def _process_ack(self, ack, t):
        self.ack_process_log.append(t)
        if ack <= self.cum_ack:
            self.detect_loss_and_retransmit(t)
            return
        newly = ack - self.cum_ack
        self.cum_ack = ack
        self.delivered += newly
        self.delivered_time = t

        newest = None
        if self._seq_ordered:
            # common case: records sorted by sequence, the ack retires a prefix
            un = self.unacked
            while un and un[0].seq_start + un[0].size <= ack:
                rec = un.popleft()
                rec.retired = True
                if not rec.lost:
                    self.inflight -= rec.size
                if newest is None or rec.sent_at >= newest.sent_at:
                    newest = rec
        else:
            keep = deque()
            for rec in self.unacked:
                if rec.seq_start + rec.size <= ack:
                    rec.retired = True
                    if not rec.lost:
                        self.inflight -= rec.size
                    if newest is None or rec.sent_at >= newest.sent_at:
                        newest = rec
                else:
                    keep.append(rec)
            self.unacked = deque(sorted(keep, key=lambda r: r.seq_start))
            self._seq_ordered = True
        if self.retx_queue:
            self.retx_queue = [(s, z) for (s, z) in self.retx_queue if s + z > ack]

        if newest is None:
            self.detect_loss_and_retransmit(t)
            return
        rtt = t - newest.sent_at
        if self.srtt is None:
            self.srtt = rtt
            self.rttvar = rtt // 2
        else:
            self.rttvar = (3 * self.rttvar + abs(self.srtt - rtt)) // 4
            self.srtt = (7 * self.srtt + rtt) // 8
        interval = t - newest.delivered_time_at_send
        rate = ((self.delivered - newest.delivered_at_send) * 8 * NS_PER_SEC
                // max(interval, 1))
        sample = RateSample(
            delivery_rate=rate, rtt=rtt, newly_acked=newly,
            is_app_limited=newest.app_limited_at_send,
            inflight_after_ack=self.inflight,
            prior_delivered=newest.delivered_at_send,
            delivered=self.delivered,
        )
        self.last_sample = sample
        pacing_rate, cwnd = self.cca.on_ack(sample, self.inflight, t)
        if pacing_rate is not None:
            self.pacing_rate = max(pacing_rate, 1200)
        self.cwnd = cwnd
        self.detect_loss_and_retransmit(t)

    # -- loss ----------------------------------------------------------------

    def rto(self):
        if self.srtt is None:
            return max(MIN_RTO_NS, 200 * NS_PER_MS)
        return max(self.srtt + 4 * self.rttvar, 2 * self.srtt, MIN_RTO_NS)

    def detect_loss_and_retransmit(self, t):
        """Timeout-based: a burst unacked past the RTO is lost."""
        rto = self.rto()
        signalled = False
        for rec in self.unacked:
            if rec.lost:
                continue
            if t - rec.sent_at > rto:
                rec.lost = True
                self.inflight -= rec.size
                self.lost_bytes += rec.size
                self.retx_queue.append((rec.seq_start, rec.size))
                if rec.seq_start >= self._episode_end_seq:
                    signalled = True
            else:
                break  # send order == timeout order
        if signalled:
            self._episode_end_seq = self.next_seq
            self.loss_episodes += 1
            self.cca.on_loss(t)
            self.retx_queue.sort()
        self._arm_rto_timer(rto)

    def _arm_rto_timer(self, rto):
        """Keep a timer on the oldest outstanding burst so a fully stalled
        window still times out without waiting for another ACK."""
        head = None
        for rec in self.unacked:
            if not rec.lost:
                head = rec
                break
        if head is None or self.stopped:
            return
        due = head.sent_at + rto + 1
        if self._rto_timer is None or self._rto_timer.fn is None:
            self._rto_timer = self.sim.schedule(
                max(due, self.sim.now()), self._on_rto_timer)
        elif self._rto_timer.fire_at > due:
            self.sim.cancel(self._rto_timer)
            self._rto_timer = self.sim.schedule(
                max(due, self.sim.now()), self._on_rto_timer)
