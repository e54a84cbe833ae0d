"""Cubic congestion control.

Loss-driven window growth: slow start doubles cwnd each round until the
first loss, after which cwnd follows the cubic law
w(t) = C*(t - K)^3 + w_max directly (no per-ack increment accounting).
Cubic does not pace; the sender emits back-to-back bursts while cwnd
allows.
"""

from .engine import NS_PER_SEC
from .link import MSS

C = 0.4          # cubic scaling constant, segments/sec^3
BETA = 0.7       # multiplicative decrease factor


class Cubic:
    paced = False

    def __init__(self, min_cwnd=2 * MSS):
        self.min_cwnd = min_cwnd
        self.cwnd = 10 * MSS
        self.w_max = 0.0         # segments
        self.k = 0.0             # seconds from epoch to plateau
        self.epoch_start = None  # ns; None while in slow start
        self.next_round_delivered = 0

    def on_ack(self, sample, inflight, t):
        if self.epoch_start is None:
            # slow start: double once per round trip
            if sample.prior_delivered >= self.next_round_delivered:
                self.next_round_delivered = sample.delivered
                self.cwnd *= 2
        else:
            elapsed = (t - self.epoch_start) / NS_PER_SEC
            w = C * (elapsed - self.k) ** 3 + self.w_max
            self.cwnd = max(int(w * MSS), self.min_cwnd)
        return None, self.cwnd

    def on_loss(self, t):
        self.w_max = self.cwnd / MSS
        self.k = (self.w_max * (1 - BETA) / C) ** (1 / 3)
        self.epoch_start = t
        self.cwnd = max(int(BETA * self.cwnd), self.min_cwnd)
