"""Render flux-density histories and B-H loops from exported CSV files.

Only the CSV contract couples this package to the solver: probe files carry
the header 't,Bx,By,Hx,Hy', B-H files 'H,B'.  Output images are written
atomically (temporary file in the target directory, then rename).
"""

from __future__ import annotations

import dataclasses
import os
import tempfile

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

PROBE_HEADER = ["t", "Bx", "By", "Hx", "Hy"]
BH_HEADER = ["H", "B"]
CHANNELS = ("Bx", "By")


@dataclasses.dataclass(frozen=True)
class PlotJob:
    """One figure: inputs, channel selection, destination."""

    csv_path: str
    out_path: str
    channel: str = "Bx"
    overlay_path: str | None = None

    def __post_init__(self) -> None:
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {self.channel!r}")


def read_csv(path: str, expected_header: list[str]) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != expected_header:
            raise ValueError(f"{path}: header {header} does not match {expected_header}")
        rows = []
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != len(expected_header):
                raise ValueError(f"{path}:{line_no}: expected {len(expected_header)} columns")
            rows.append([float(v) for v in parts])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows)
    return {name: data[:, k] for k, name in enumerate(expected_header)}


def _save_atomic(fig, out_path: str) -> None:
    directory = os.path.dirname(os.path.abspath(out_path))
    suffix = os.path.splitext(out_path)[1] or ".png"
    fd, tmp = tempfile.mkstemp(suffix=suffix, dir=directory)
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=150, bbox_inches="tight")
        os.replace(tmp, out_path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.remove(tmp)


def build_series_figure(job: PlotJob):
    """Line plot of one B channel over time, optionally overlaying a second
    file on the same axes."""
    data = read_csv(job.csv_path, PROBE_HEADER)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    label = os.path.splitext(os.path.basename(job.csv_path))[0]
    ax.plot(data["t"], data[job.channel], label=label)
    if job.overlay_path is not None:
        other = read_csv(job.overlay_path, PROBE_HEADER)
        other_label = os.path.splitext(os.path.basename(job.overlay_path))[0]
        ax.plot(other["t"], other[job.channel], "--", label=other_label)
    ax.set_xlabel("t [s]")
    ax.set_ylabel(f"{job.channel} [T]")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def build_bh_figure(job: PlotJob):
    """B over H as a connected path; single-sample files get a marker."""
    data = read_csv(job.csv_path, BH_HEADER)
    fig, ax = plt.subplots(figsize=(5.0, 4.5))
    style = "o" if len(data["H"]) == 1 else "-"
    ax.plot(data["H"], data["B"], style)
    ax.set_xlabel("H [A/m]")
    ax.set_ylabel("B [T]")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def plot_timeseries(job: PlotJob) -> str:
    """Write the B(t) figure and return the output path."""
    _save_atomic(build_series_figure(job), job.out_path)
    return job.out_path


def plot_bh(job: PlotJob) -> str:
    """Write the B-H loop figure and return the output path."""
    _save_atomic(build_bh_figure(job), job.out_path)
    return job.out_path
