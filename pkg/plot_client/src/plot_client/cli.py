"""Command-line figure rendering.

    plot-series --csv probe.csv --channel Bx --out fig.png [--overlay probe2.csv]
    plot-bh --csv bh.csv --out fig.png
"""

from __future__ import annotations

import argparse
import sys

from .plotting import CHANNELS, PlotJob, plot_bh, plot_timeseries


def main_series(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot-series", description="plot one B channel over time")
    parser.add_argument("--csv", required=True, help="probe CSV (t,Bx,By,Hx,Hy)")
    parser.add_argument("--channel", default="Bx", choices=CHANNELS)
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--overlay", help="second probe CSV on the same axes")
    args = parser.parse_args(argv)
    try:
        path = plot_timeseries(
            PlotJob(csv_path=args.csv, out_path=args.out, channel=args.channel,
                    overlay_path=args.overlay)
        )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


def main_bh(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot-bh", description="plot a B-H trajectory")
    parser.add_argument("--csv", required=True, help="B-H CSV (H,B)")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        path = plot_bh(PlotJob(csv_path=args.csv, out_path=args.out))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main_series())
