"""Render the tab-separated plot series written by the CLI into PNG figures."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)


def _read_tsv(path):
    lines = Path(path).read_text().splitlines()
    if not lines:
        return [], []
    header = lines[0].split("\t")
    rows = [line.split("\t") for line in lines[1:] if line]
    return header, rows


def _series_figure(path, xlabel, ylabel):
    header, rows = _read_tsv(path)
    if not rows:
        return None
    x = [float(r[0]) for r in rows]
    y = [float(r[1]) for r in rows]
    err = [float(r[2]) for r in rows] if len(header) > 2 else None
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(x, y, yerr=err, marker="o", capsize=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig


def _bar_figure(path, xlabel, ylabel):
    header, rows = _read_tsv(path)
    if not rows:
        return None
    labels = [r[0] for r in rows]
    y = [float(r[1]) for r in rows]
    fig, ax = plt.subplots(figsize=(max(5, 0.45 * len(labels)), 3.5))
    ax.bar(range(len(labels)), y)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=90 if len(labels) > 12 else 0, fontsize=7)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, axis="y", alpha=0.3)
    return fig


_PATTERNS = (
    ("*_throughput_vs_n.tsv", _series_figure, "stations", "throughput (Mbit/s)"),
    ("*_failures_vs_n.tsv", _series_figure, "stations", "failure fraction"),
    ("*_station_throughput.tsv", _bar_figure, "station", "throughput (Mbit/s)"),
    ("*_floor_metrics.tsv", _bar_figure, "floor", "throughput (Mbit/s)"),
    ("*_jfi.tsv", _bar_figure, "protocol", "Jain fairness index"),
)


def render_all(out_dir) -> list[Path]:
    """Render one PNG per known plot-data file; returns the figures written."""
    out = Path(out_dir)
    written = []
    for pattern, make, xlabel, ylabel in _PATTERNS:
        for tsv in sorted(out.glob(pattern)):
            fig = make(tsv, xlabel, ylabel)
            if fig is None:
                continue
            png = tsv.with_suffix(".png")
            fig.savefig(png, dpi=120, bbox_inches="tight")
            plt.close(fig)
            written.append(png)
    return written
