"""Figure rendering for the CLI report paths.

Figures are drawn straight onto matplotlib Figure objects (no pyplot, no
interactive backend) and written as SVG with a fixed hash salt and no date
metadata, so re-running a command reproduces the files byte for byte.
"""

from __future__ import annotations

import matplotlib
from matplotlib.figure import Figure

_SVG_RC = {"svg.hashsalt": "fiberpinn"}
_NO_DATE = {"Date": None}

_DISTANCE_COLORS = ["red", "green", "blue", "cyan", "magenta", "orange",
                    "purple", "brown"]


def _save(fig: Figure, path) -> None:
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata=_NO_DATE)


def _power_mw(fields):
    return (abs(fields) ** 2) * 1e3


def waveform_overlay(surface, path, title: str = "") -> None:
    """Power waveforms of every snapshot on one axis, colored by distance."""
    fig = Figure(figsize=(7.0, 4.2))
    ax = fig.add_subplot()
    t_ps = surface.times * 1e12
    for i, z in enumerate(surface.distances):
        color = _DISTANCE_COLORS[i % len(_DISTANCE_COLORS)]
        ax.plot(t_ps, _power_mw(surface.fields[i]), color=color, lw=1.0,
                label=f"{z / 1e3:g} km")
    ax.set_xlabel("time (ps)")
    ax.set_ylabel("power (mW)")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def compare_overlay(times, ref_field, pred_field, z_m: float, path,
                    title: str = "") -> None:
    """Reference power as a solid line, prediction as a dotted overlay."""
    fig = Figure(figsize=(7.0, 4.2))
    ax = fig.add_subplot()
    t_ps = times * 1e12
    ax.plot(t_ps, _power_mw(ref_field), "k-", lw=1.2, label="reference")
    ax.plot(t_ps, _power_mw(pred_field), "r:", lw=1.6, label="prediction")
    ax.set_xlabel("time (ps)")
    ax.set_ylabel("power (mW)")
    ax.set_title(title or f"z = {z_m / 1e3:g} km")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def convergence_curve(record, path) -> None:
    """Training loss against iteration; stage break marked by line style."""
    fig = Figure(figsize=(6.4, 4.0))
    ax = fig.add_subplot()
    offset = 0
    plotted = False
    for stage, style in (("adam", "--"), ("lbfgs", "-")):
        rows = record.stage_rows(stage)
        if not rows:
            continue
        xs = [offset + r.iteration for r in rows]
        ax.semilogy(xs, [r.j_total for r in rows], style, color="tab:blue",
                    lw=1.0, label=stage)
        offset = xs[-1]
        plotted = True
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    if plotted:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def eye_figure(eye, path, title: str = "") -> None:
    """All folded two-symbol power traces overlaid."""
    fig = Figure(figsize=(5.6, 4.0))
    ax = fig.add_subplot()
    t_ps = eye.trace_times * 1e12
    for row in eye.traces:
        ax.plot(t_ps, row * 1e3, color="tab:blue", lw=0.6, alpha=0.6)
    ax.set_xlabel("time (ps)")
    ax.set_ylabel("power (mW)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
