"""Figure rendering for the report path.

Figures are written next to the delimited output: gap-versus-size curves
on log axes, phase-diagram heatmaps over the exponent grid, and the
relaxation-window summaries.
"""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update({"figure.dpi": 130, "font.size": 9,
                     "axes.grid": True, "grid.alpha": 0.3})


def _series(rows, metric):
    """Group (size, mean, std) by (alpha_h, alpha_l, gamma, task)."""
    out = defaultdict(list)
    for r in rows:
        if r["metric"] != metric:
            continue
        key = (r["alpha_h"], r["alpha_l"], r["gamma"], r["task"])
        out[key].append((r["size"], r["mean"], r["std"]))
    return {k: sorted(v) for k, v in out.items()}


def render_gap_vs_size(rows, out_dir, metric="gap"):
    """One log-log gap(N) panel per task; returns written paths."""
    by_task = defaultdict(dict)
    for key, pts in _series(rows, metric).items():
        by_task[key[3]][key[:3]] = pts
    paths = []
    for task, series in by_task.items():
        if not any(len(p) > 1 for p in series.values()):
            continue
        fig, ax = plt.subplots(figsize=(4.6, 3.4))
        for (ah, al, g), pts in sorted(series.items()):
            sizes, means, stds = (np.array(x) for x in zip(*pts))
            ax.errorbar(sizes, means, yerr=stds,
                        marker="o", ms=3, lw=1, capsize=2,
                        label=rf"$\alpha_H$={ah:g}, $\alpha_L$={al:g}, $\gamma$={g:g}")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("N")
        ax.set_ylabel(r"gap $\Delta$")
        ax.set_title(task)
        ax.legend(fontsize=6)
        path = os.path.join(out_dir, f"gap_vs_size_{task}.png")
        fig.savefig(path, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    return paths


def render_phase_diagrams(rows, out_dir, metric="gap"):
    """Heatmaps of the mean gap over the (alpha_H, alpha_L) grid, one per
    (task, gamma, size) with at least a 2x2 grid."""
    cells = defaultdict(dict)
    for r in rows:
        if r["metric"] != metric:
            continue
        cells[(r["task"], r["gamma"], r["size"])][(r["alpha_h"], r["alpha_l"])] = r["mean"]
    paths = []
    for (task, gamma, size), grid in sorted(cells.items()):
        ahs = sorted({k[0] for k in grid})
        als = sorted({k[1] for k in grid})
        if len(ahs) < 2 or len(als) < 2:
            continue
        img = np.full((len(als), len(ahs)), np.nan)
        for (ah, al), val in grid.items():
            img[als.index(al), ahs.index(ah)] = val
        fig, ax = plt.subplots(figsize=(4.2, 3.4))
        pos = img[np.isfinite(img) & (img > 0)]
        norm = matplotlib.colors.LogNorm(vmin=pos.min(), vmax=pos.max()) \
            if pos.size else None
        mesh = ax.pcolormesh(ahs, als, img, shading="nearest", norm=norm)
        fig.colorbar(mesh, ax=ax, label=r"mean $\Delta$")
        ax.set_xlabel(r"$\alpha_H$")
        ax.set_ylabel(r"$\alpha_L$")
        ax.set_title(f"{task}, gamma={gamma:g}, N={size:g}")
        path = os.path.join(out_dir,
                            f"phase_diagram_{task}_gamma{gamma:g}_N{size:g}.png")
        fig.savefig(path, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    return paths


def render_relaxation_windows(rows, out_dir):
    """Window-resolved |relative rate difference| per parameter point."""
    window_metrics = sorted({r["metric"] for r in rows
                             if r["task"] == "dynamics"
                             and r["metric"].startswith("w")
                             and r["metric"].endswith("_mean")})
    if not window_metrics:
        return []
    points = defaultdict(dict)
    for r in rows:
        if r["task"] == "dynamics" and r["metric"] in window_metrics:
            key = (r["alpha_h"], r["alpha_l"], r["gamma"], r["size"])
            points[key][r["metric"]] = r["mean"]
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    x = np.arange(len(window_metrics))
    for key, vals in sorted(points.items()):
        y = [abs(vals.get(m, np.nan)) for m in window_metrics]
        ax.plot(x, y, marker="o", ms=3,
                label=rf"$\alpha_H$={key[0]:g}, $\alpha_L$={key[1]:g}, "
                      rf"$\gamma$={key[2]:g}, N={key[3]:g}")
    ax.set_xticks(x)
    ax.set_xticklabels([m[1:-5].replace("_", "-") for m in window_metrics])
    ax.set_yscale("log")
    ax.set_xlabel(r"fit window (units of $1/\Delta$)")
    ax.set_ylabel(r"$|\langle(\tau^{-1}-\Delta)/\Delta\rangle|$")
    ax.legend(fontsize=6)
    path = os.path.join(out_dir, "relaxation_windows.png")
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return [path]


def render_trajectory(traj, out_dir, sites=None, name="trajectory.png"):
    """Decay of |rho_ii - 1/N| for a few sites on a log scale."""
    n = traj.site_populations.shape[1]
    sites = sites if sites is not None else sorted({0, n // 2, n - 1})
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    for site in sites:
        r = np.abs(traj.site_populations[:, site] - 1.0 / n)
        ax.semilogy(traj.times, np.maximum(r, 1e-18), lw=1, label=f"site {site}")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$|\rho_{ii} - 1/N|$")
    ax.legend(fontsize=7)
    path = os.path.join(out_dir, name)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return [path]
