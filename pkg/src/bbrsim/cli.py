"""Command-line front end.

Single-cell mode runs one configuration (all repetitions) and prints or
writes the aggregate; --sweep runs a grid from a YAML file.  --out /
--series-out select CSV (or .json for aggregates) destinations; figures
are rendered next to each CSV when --plot is given.
"""

import argparse
import sys
from pathlib import Path

from . import harness, report


def build_parser():
    p = argparse.ArgumentParser(
        prog="bbrsim",
        description="Simulate TCP congestion control under CPU contention "
                    "on a single bottleneck link.")
    p.add_argument("--cca", choices=harness.CCAS, default="bbr3")
    p.add_argument("--patch", action="store_true",
                   help="enable the inflight-deficit pacing-gain override")
    p.add_argument("--bw", type=float, default=100.0,
                   help="link bandwidth in Mbps (default 100)")
    p.add_argument("--rtt", type=float, default=10.0,
                   help="round-trip propagation delay in ms (default 10)")
    p.add_argument("--buffer-bdp", type=float, default=1.0,
                   help="bottleneck buffer in BDPs (default 1)")
    p.add_argument("--loss", type=float, default=0.0,
                   help="random burst loss probability (default 0)")
    p.add_argument("--slice-ms", type=float, default=10.0,
                   help="on-CPU timeslice in ms (default 10)")
    p.add_argument("--share", type=float, default=100.0,
                   help="CPU share percent; 100 disables the gate")
    p.add_argument("--duration", type=float, default=20.0,
                   help="run length in seconds (default 20)")
    p.add_argument("--reps", type=int, default=30,
                   help="repetitions per cell (default 30)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--sample-ms", type=float, default=100.0,
                   help="metric sampling interval in ms (default 100)")
    p.add_argument("--out", type=Path,
                   help="aggregate output path (.csv or .json)")
    p.add_argument("--series-out", type=Path,
                   help="per-sample series CSV for repetition 0")
    p.add_argument("--sweep", type=Path,
                   help="YAML file mapping axis names to values/lists; "
                        "runs the cartesian product")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel worker processes (default 1)")
    p.add_argument("--plot", action="store_true",
                   help="render a figure next to each CSV output")
    return p


def _single_config(args):
    return harness.ExperimentConfig(
        cca=args.cca, patch=args.patch, bandwidth_mbps=args.bw,
        rtt_ms=args.rtt, buffer_bdp=args.buffer_bdp, loss_rate=args.loss,
        slice_ms=args.slice_ms, share_pct=args.share,
        duration_s=args.duration, repetitions=args.reps, seed=args.seed,
        sample_ms=args.sample_ms)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.sweep:
            configs = harness.load_sweep_file(args.sweep)
            overrides = {}
            if args.seed != 1:
                overrides["seed"] = args.seed
            if overrides:
                from dataclasses import replace
                configs = [replace(c, **overrides) for c in configs]
        else:
            configs = [_single_config(args)]

        rows = harness.run_sweep(configs, jobs=args.jobs)

        if args.out:
            fmt = "json" if args.out.suffix == ".json" else "csv"
            harness.export_aggregate(rows, args.out, fmt=fmt)
            if args.plot and fmt == "csv":
                report.plot_aggregate(rows, args.out.with_suffix(".png"))
        else:
            print(harness.AGGREGATE_HEADER)
            for row in rows:
                rec = harness.aggregate_record(row)
                print(",".join(harness._fmt(rec[k])
                               for k in harness.AGGREGATE_HEADER.split(",")))

        if args.series_out:
            result = harness.run_single(configs[0], 0)
            harness.export_series(result.series, args.series_out)
            if args.plot:
                report.plot_series(result.series,
                                   args.series_out.with_suffix(".png"))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
