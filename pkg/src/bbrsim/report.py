"""Figure rendering for sweep and time-series output.

Renders alongside the CSV files: goodput-vs-share curves per
(cca, patch, slice) group for aggregate results, and a three-panel
rate/inflight/gain view for a single run's series.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def plot_aggregate(rows, path):
    """Median goodput vs CPU share, one curve per (cca, patch, slice_ms)."""
    groups = {}
    for row in rows:
        c = row.config
        key = (c.cca, c.patch, c.slice_ms, c.bandwidth_mbps, c.rtt_ms)
        groups.setdefault(key, []).append(row)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for key in sorted(groups):
        cca, patch, slice_ms, bw, rtt = key
        pts = sorted(groups[key], key=lambda r: r.config.share_pct)
        xs = [r.config.share_pct for r in pts]
        med = [r.median_mbps for r in pts]
        lo = [r.p10 for r in pts]
        hi = [r.p90 for r in pts]
        label = f"{cca}{'+patch' if patch else ''} {slice_ms:g}ms/{bw:g}Mbps"
        line, = ax.plot(xs, med, marker="o", markersize=3, label=label)
        if len(xs) > 1:
            ax.fill_between(xs, lo, hi, alpha=0.15, color=line.get_color())
    ax.set_xlabel("CPU share (%)")
    ax.set_ylabel("median goodput (Mbps)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_series(series, path):
    """Rates, inflight, and gains over time for one run."""
    ts = [s.t_s for s in series]
    fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)

    ax = axes[0]
    ax.plot(ts, [s.goodput_mbps for s in series], label="goodput", lw=1)
    ax.plot(ts, [s.pacing_mbps for s in series], label="pacing rate", lw=1)
    ax.plot(ts, [s.btlbw_mbps for s in series], label="btlbw est", lw=1)
    ax.plot(ts, [s.delivery_mbps for s in series], label="delivery rate",
            lw=0.8, alpha=0.6)
    ax.set_ylabel("Mbps")
    ax.legend(fontsize=7)
    ax.grid(True, alpha=0.3)

    ax = axes[1]
    ax.plot(ts, [s.inflight_bdp for s in series], lw=1, color="tab:red")
    ax.axhline(1.0, color="gray", ls="--", lw=0.8)
    ax.set_ylabel("inflight (est. BDP)")
    ax.grid(True, alpha=0.3)

    ax = axes[2]
    ax.plot(ts, [s.pacing_gain for s in series], label="pacing gain", lw=1)
    ax.plot(ts, [s.cwnd_gain for s in series], label="cwnd gain", lw=1)
    ax.set_ylabel("gain")
    ax.set_xlabel("time (s)")
    ax.legend(fontsize=7)
    ax.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
