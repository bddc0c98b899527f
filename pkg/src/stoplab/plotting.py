"""Line plots of experiment tables, written as reproducible SVG."""

from __future__ import annotations

import math
import re
from collections import defaultdict
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure

_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "lines.linewidth": 1.2,
    "lines.markersize": 3.5,
    "axes.grid": True,
    "grid.alpha": 0.3,
    # fixed salt and no timestamp keep repeated renders byte-identical
    "svg.hashsalt": "stoplab",
    "svg.fonttype": "none",
}

_Z = re.compile(r"^perturbed\(z=([-+0-9.eE]+)\)$")


def _finite(row, key) -> bool:
    v = row.get(key)
    return isinstance(v, float) and math.isfinite(v)


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    with matplotlib.rc_context(_STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def _new_figure(ncols: int) -> Figure:
    with matplotlib.rc_context(_STYLE):
        fig = Figure(figsize=(3.4 * ncols, 2.8), layout="constrained")
        fig.subplots(1, ncols, squeeze=False)
    return fig


def plot_experiment(rows: list[dict], path) -> Path:
    """Regret against z for pure perturbation sweeps, else against horizon."""
    rows = [r for r in rows if not r.get("error") and _finite(r, "relative_regret")]
    by_z = rows and all(_Z.match(r["policy"]) for r in rows)
    alphas = sorted({r["alpha"] for r in rows}) or [math.nan]
    with matplotlib.rc_context(_STYLE):
        fig = _new_figure(len(alphas))
        for ax, alpha in zip(fig.axes, alphas):
            lines = defaultdict(list)
            for r in rows:
                if r["alpha"] != alpha:
                    continue
                if by_z:
                    key = f"theta={r['theta']:g}, 1/(1-gamma)={r['effective_horizon']:.4g}"
                    x = float(_Z.match(r["policy"]).group(1))
                else:
                    key = f"{r['policy']}, theta={r['theta']:g}"
                    x = r["effective_horizon"]
                lines[key].append((x, r["relative_regret"]))
            for key in sorted(lines):
                pts = sorted(lines[key])
                ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=key)
            if by_z:
                ax.set_xlabel("perturbation z (units of sd)")
            else:
                ax.set_xscale("log")
                ax.set_xlabel("effective horizon 1/(1-gamma)")
            ax.set_ylabel("relative regret")
            ax.set_title(f"alpha={alpha:g}")
            if lines:
                ax.legend()
    return _save(fig, path)


def plot_phase(rows: list[dict], path) -> Path:
    """Regret and scaled stopping time against horizon, one line per multiplier."""
    rows = [r for r in rows if not r.get("error") and _finite(r, "relative_regret")]
    with matplotlib.rc_context(_STYLE):
        fig = _new_figure(2)
        ax_r, ax_t = fig.axes
        lines = defaultdict(list)
        for r in rows:
            lines[(r["section"], r["multiplier"])].append(
                (r["effective_horizon"], r["relative_regret"], r["scaled_stop_time"])
            )
        for (section, m) in sorted(lines):
            pts = sorted(lines[(section, m)])
            label = f"{section}, m={m:g}"
            ax_r.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
            ax_t.plot([p[0] for p in pts], [p[2] for p in pts], marker="o", label=label)
        for ax, ylabel in ((ax_r, "relative regret"), (ax_t, "(1-gamma) E[tau]")):
            ax.set_xscale("log")
            ax.set_xlabel("effective horizon 1/(1-gamma)")
            ax.set_ylabel(ylabel)
        ax_t.set_yscale("log")
        if lines:
            ax_r.legend()
    return _save(fig, path)
