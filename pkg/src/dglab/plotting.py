"""Byte-reproducible SVG line plots."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "svg.hashsalt": "dglab",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (5.0, 3.6),
}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def oscillation_plot(path: Path, traces: Mapping[str, tuple[Sequence[float], Sequence[float]]]) -> Path:
    """Oscillation against radius on log-log axes, one line per probe."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for label, (radii, osc) in traces.items():
            pts = [(r, o) for r, o in zip(radii, osc) if r > 0 and o > 0]
            if pts:
                ax.loglog(*zip(*pts), marker="o", ms=3, label=label)
        ax.set_xlabel("radius")
        ax.set_ylabel("oscillation")
        if ax.lines:
            ax.legend(fontsize=7)
        fig.tight_layout()
        return _save(fig, path)


def ratio_plot(path: Path, series: Mapping[str, Sequence[float]]) -> Path:
    """Empirical Harnack ratios against probe index."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for label, vals in series.items():
            if len(vals):
                ax.plot(range(len(vals)), vals, marker="s", ms=3, label=label)
        ax.set_xlabel("probe index")
        ax.set_ylabel("ratio")
        if ax.lines:
            ax.legend(fontsize=7)
        fig.tight_layout()
        return _save(fig, path)


def sweep_plot(path: Path, eps: Sequence[float], diffs: Sequence[float]) -> Path:
    """``||u_eps - u_eps'||`` against ``eps`` on log-log axes."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        pts = [(e, d) for e, d in zip(eps, diffs) if e > 0 and d > 0]
        if pts:
            ax.loglog(*zip(*pts), marker="o", ms=3)
        ax.set_xlabel("eps")
        ax.set_ylabel("L2 distance to next member")
        fig.tight_layout()
        return _save(fig, path)
