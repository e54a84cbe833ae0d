"""Shared wiring helpers for transport-level tests."""

from bbrsim.engine import Simulator, ms, seconds
from bbrsim.link import BottleneckLink, LinkConfig
from bbrsim.transport import Receiver, Sender


class FixedCca:
    """Stub congestion controller with a constant window (and rate)."""

    def __init__(self, cwnd, pacing_rate=None):
        self.paced = pacing_rate is not None
        self.cwnd = cwnd
        self.pacing_rate = pacing_rate
        self.samples = []
        self.losses = 0

    def on_ack(self, sample, inflight, t):
        self.samples.append(sample)
        return self.pacing_rate, self.cwnd

    def on_loss(self, t):
        self.losses += 1


def wire_run(cca, bandwidth, rtt_ms, duration_s, schedule=None,
             buffer_limit=0, loss_rng=None, loss_rate=0.0, **sender_kw):
    """One sender/link/receiver loop; returns (sender, receiver, link, sim)."""
    sim = Simulator()
    cfg = LinkConfig(bandwidth=bandwidth, one_way_delay=ms(rtt_ms) // 2,
                     buffer_limit=buffer_limit, loss_rate=loss_rate)
    receiver = Receiver()
    sender = None

    def on_deliver(burst, t):
        ack = receiver.on_burst(burst)
        link.deliver_ack(ack, t, sender.on_ack_arrival)

    link = BottleneckLink(sim, cfg, on_deliver, loss_rng)
    sender = Sender(sim, link, cca, schedule=schedule, **sender_kw)
    sender.start()
    sim.run_until(seconds(duration_s))
    sender.stop()
    return sender, receiver, link, sim
