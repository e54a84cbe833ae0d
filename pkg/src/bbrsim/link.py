"""Single-bottleneck-link emulation.

Forward path: drop-tail buffer + FIFO serialization at the configured
bandwidth, then a fixed one-way propagation delay.  Reverse path is ideal:
ACKs are delayed by one_way_delay and never queued, dropped, or reordered.

A bounded sender-side TX ring sits in front of the drop-tail buffer and
drains into it as space frees up.  It models the virtio/NIC ring of a VM
sender: bursts handed off by the (CPU-gated) TCP stack keep flowing to the
wire while the sender is off-CPU.  An unpaced sender can therefore ride
out off-CPU gaps on this backlog, while a paced sender never builds one.
Set tx_ring_bytes=0 for a bare drop-tail link.
"""

from collections import deque
from dataclasses import dataclass, field

from .engine import NS_PER_SEC

MSS = 1500


def serialization_ns(size, bandwidth):
    return size * 8 * NS_PER_SEC // bandwidth


@dataclass(frozen=True)
class LinkConfig:
    bandwidth: int  # bits/second
    one_way_delay: int  # ns, RTT/2 per direction
    buffer_limit: int = 0  # bytes; 0 -> default 1 BDP
    loss_rate: float = 0.0
    tx_ring_bytes: int = 4 * 1024 * 1024

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.one_way_delay < 0:
            raise ValueError("one_way_delay must be >= 0")
        if not 0.0 <= self.loss_rate <= 1.0:
            raise ValueError("loss_rate outside [0, 1]")
        if self.buffer_limit == 0:
            # 1 BDP of the configured link: bandwidth * RTT / 8 bytes.
            bdp = self.bandwidth * (2 * self.one_way_delay) // (8 * NS_PER_SEC)
            object.__setattr__(self, "buffer_limit", max(bdp, MSS))
        if self.buffer_limit < MSS:
            raise ValueError("buffer_limit must be at least 1 MSS")


def min_rtt_of(cfg, size):
    """Unloaded RTT seen by a burst: propagation + own serialization."""
    return 2 * cfg.one_way_delay + serialization_ns(size, cfg.bandwidth)


@dataclass
class LinkStats:
    enqueued_bytes: int = 0
    delivered_bytes: int = 0
    dropped_bytes: int = 0
    enqueued_bursts: int = 0
    delivered_bursts: int = 0
    dropped_bursts: int = 0


class BottleneckLink:
    """Forward-path shaper; delivers bursts to `on_deliver(burst, t)`."""

    def __init__(self, sim, cfg, on_deliver, loss_rng=None):
        self.sim = sim
        self.cfg = cfg
        self.on_deliver = on_deliver
        self.loss_rng = loss_rng
        self.queue = deque()  # (burst, enqueue_time); head is in service when busy
        self.occupied = 0
        self.ring = deque()
        self.ring_used = 0
        self.busy = False
        self.busy_until = 0
        self.stats = LinkStats()

    def enqueue(self, burst, t):
        """Accept a burst into the buffer or TX ring.

        Returns "ok" when queued, "lost" when randomly dropped on the wire
        (the sender finds out by timeout), or "blocked" when the TX ring is
        full (immediate local backpressure; the burst never left the host).
        """
        buffer_ok = (self.occupied + burst.size <= self.cfg.buffer_limit
                     or self.occupied == 0)
        if self.ring_used + burst.size > self.cfg.tx_ring_bytes:
            # no ring space: only a direct buffer admit can still take it,
            # and never past bursts already parked in the ring (FIFO)
            if self.ring or not buffer_ok:
                return "blocked"
        self.stats.enqueued_bytes += burst.size
        self.stats.enqueued_bursts += 1
        if self.loss_rng is not None and self.cfg.loss_rate > 0.0:
            if self.loss_rng.random() < self.cfg.loss_rate:
                self._drop(burst)
                return "lost"
        if not self.ring and buffer_ok:
            self._admit(burst, t)
        else:
            self.ring.append(burst)
            self.ring_used += burst.size
            if not self.busy:
                self._refill_from_ring()
                if self.queue:
                    self._start_service()
        return "ok"

    def _drop(self, burst):
        self.stats.dropped_bytes += burst.size
        self.stats.dropped_bursts += 1

    def _admit(self, burst, t):
        self.queue.append((burst, t))
        self.occupied += burst.size
        if not self.busy:
            self._start_service()

    def _start_service(self):
        burst, _ = self.queue[0]
        self.busy = True
        self.busy_until = self.sim.now() + serialization_ns(burst.size, self.cfg.bandwidth)
        self.sim.schedule(self.busy_until, self._dequeue_done)

    def _dequeue_done(self):
        burst, _ = self.queue.popleft()
        self.occupied -= burst.size
        self._refill_from_ring()
        if self.queue:
            self._start_service()
        else:
            self.busy = False
        t = self.sim.now()
        arrival = t + self.cfg.one_way_delay
        self.sim.schedule(arrival, lambda b=burst: self._deliver(b))

    def _refill_from_ring(self):
        # A burst larger than the whole buffer may still occupy it alone;
        # otherwise an oversized head would wedge the ring permanently.
        now = self.sim.now()
        while self.ring and (self.occupied + self.ring[0].size <= self.cfg.buffer_limit
                             or self.occupied == 0):
            burst = self.ring.popleft()
            self.ring_used -= burst.size
            self.queue.append((burst, now))
            self.occupied += burst.size

    def _deliver(self, burst):
        self.stats.delivered_bytes += burst.size
        self.stats.delivered_bursts += 1
        self.on_deliver(burst, self.sim.now())

    def deliver_ack(self, ack, t, on_ack):
        """Ideal reverse path: on_ack(ack) fires at t + one_way_delay."""
        self.sim.schedule(t + self.cfg.one_way_delay, lambda: on_ack(ack))

    @property
    def backlog(self):
        """Bytes held sender-side of the wire (buffer + TX ring)."""
        return self.occupied + self.ring_used
