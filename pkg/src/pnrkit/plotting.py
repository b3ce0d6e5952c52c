"""Deterministic SVG figures (fixed hash salt, no date metadata)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .multigauss import MultiGaussianModel, evaluate_density  # noqa: E402
from .simulate import Histogram  # noqa: E402
from .sweep import SweepResult  # noqa: E402

_RC = {"svg.hashsalt": "pnrkit", "svg.fonttype": "none", "figure.figsize": (5.0, 3.6),
       "font.size": 9}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "pnrkit"})
    plt.close(fig)
    return path


def histogram_with_model(path, hist: Histogram, model: MultiGaussianModel | None = None,
                         title: str = "", components: bool = True) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.stairs(hist.counts, hist.edges, color="0.35", label="counts")
        if model is not None:
            t = np.linspace(hist.edges[0], hist.edges[-1], 1200)
            w = hist.bin_width_ps
            if components:
                for p in model.peaks:
                    ax.plot(t, w * p.density(t), lw=0.9, label=f"n={p.n}")
            ax.plot(t, w * evaluate_density(model, t), "k--", lw=1.0, label="sum")
        ax.set_xlabel("latency (ps)" if hist.kind != "iat" else "inter-arrival time (ps)")
        ax.set_ylabel("counts per bin")
        ax.set_title(title)
        ax.legend(fontsize=7, frameon=False)
        return _save(fig, path)


def sweep_curves(path, result: SweepResult, n_shown: int | None = None, logx: bool = False,
                 title: str = "", xlabel: str | None = None, target: float | None = None) -> Path:
    n_shown = result.n_max if n_shown is None else n_shown
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for n in range(1, n_shown + 1):
            ax.plot(result.axis_values, result.q(n), marker=".", ms=3, lw=1, label=f"Q_{n}")
        if target is not None:
            ax.axhline(target, color="0.5", lw=0.8, ls=":")
        if logx:
            ax.set_xscale("log")
        ax.set_ylim(0, 1.02)
        ax.set_xlabel(xlabel or result.axis_name)
        ax.set_ylabel("PNR quality")
        ax.set_title(title)
        ax.legend(fontsize=7, frameon=False)
        return _save(fig, path)


def bars(path, labels: Sequence[str], series: dict[str, Sequence[float]], ylabel: str,
         title: str = "") -> Path:
    x = np.arange(len(labels))
    k = max(1, len(series))
    width = 0.8 / k
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for i, (name, vals) in enumerate(series.items()):
            ax.bar(x + (i - (k - 1) / 2) * width, vals, width, label=name)
        ax.set_xticks(x, labels)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend(fontsize=7, frameon=False)
        return _save(fig, path)


def xy(path, series: dict[str, tuple[Sequence[float], Sequence[float]]], xlabel: str, ylabel: str,
       title: str = "", styles: dict[str, str] | None = None, twin: dict | None = None) -> Path:
    """Line/marker plot; ``twin`` = {label: (x, y, ylabel)} adds a right-hand axis."""
    styles = styles or {}
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for name, (xs, ys) in series.items():
            ax.plot(xs, ys, styles.get(name, "o-"), ms=4, lw=1, label=name)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        handles, labels = ax.get_legend_handles_labels()
        if twin:
            ax2 = ax.twinx()
            for name, (xs, ys, lab) in twin.items():
                ax2.plot(xs, ys, "s--", color="C3", ms=4, lw=1, label=name)
                ax2.set_ylabel(lab)
            h2, l2 = ax2.get_legend_handles_labels()
            handles, labels = handles + h2, labels + l2
        ax.legend(handles, labels, fontsize=7, frameon=False)
        return _save(fig, path)
