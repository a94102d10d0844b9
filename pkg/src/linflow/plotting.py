"""Matplotlib renderings of run outputs, written next to the CSV files.

Figures are a convenience view; the CSV files stay the source of truth.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from linflow.config import GRID_METHODS  # noqa: E402

SATURATION = 0.05


def _style():
    plt.rcParams.update({
        "figure.dpi": 110,
        "font.size": 9,
        "axes.spines.top": False,
        "axes.spines.right": False,
    })


def render_run(result, cfg) -> list:
    """Write PNG figures for a finished run; returns the paths written."""
    _style()
    out = Path(result.output_dir)
    written = []
    if result.summary is None:
        return written
    s = result.summary
    if cfg.method in GRID_METHODS and result.densities is not None:
        written += _density_figures(result, cfg, out)
    fig, axes = plt.subplots(s.mode.shape[1], 1, figsize=(5.5, 2.4 * s.mode.shape[1]),
                             squeeze=False, sharex=True)
    from linflow.runner import reference_states
    ref = reference_states(cfg, np.asarray(result.meta["initial_state"]), s.times)
    for a, ax in enumerate(axes[:, 0]):
        ax.plot(s.times, ref[:, a], "k-", lw=1.2, label="reference")
        ax.plot(s.times, s.mode[:, a], ".", ms=2, label="mode")
        ax.plot(s.times, s.mean[:, a], "-", lw=1, alpha=0.8, label="mean")
        ax.set_ylabel("xy"[a])
    axes[-1, 0].set_xlabel("t")
    axes[0, 0].legend(frameon=False, fontsize=7)
    axes[0, 0].set_title(f"{cfg.name} ({cfg.method})")
    fig.tight_layout()
    path = out / "summary.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)
    return written


def _density_figures(result, cfg, out: Path) -> list:
    dens = result.densities
    times = result.times
    points = cfg.grid.points
    written = []
    if len(points) == 1:
        lo, hi = cfg.grid.bounds[0]
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.2), sharey=True)
        extent = (times[0], times[-1], lo, hi)
        ax0.imshow(np.minimum(dens, SATURATION).T, origin="lower", aspect="auto",
                   extent=extent, cmap="viridis")
        ax0.set_title("density (saturated)")
        with np.errstate(divide="ignore"):
            logd = np.log10(np.clip(dens, 1e-16, None))
        im = ax1.imshow(logd.T, origin="lower", aspect="auto", extent=extent,
                        cmap="magma", vmin=-16, vmax=0)
        ax1.set_title("log10 density")
        fig.colorbar(im, ax=ax1)
        for ax in (ax0, ax1):
            ax.set_xlabel("t")
        ax0.set_ylabel("x")
    else:
        picks = np.linspace(0, len(times) - 1, 4).astype(int)
        (xlo, xhi), (ylo, yhi) = cfg.grid.bounds
        fig, axes = plt.subplots(1, len(picks), figsize=(3 * len(picks), 2.8))
        for ax, k in zip(axes, picks):
            ax.imshow(dens[k].reshape(points).T, origin="lower", aspect="auto",
                      extent=(xlo, xhi, ylo, yhi), cmap="viridis")
            ax.set_title(f"t = {times[k]:.2f}")
            ax.set_xlabel("x")
        axes[0].set_ylabel("y")
    fig.tight_layout()
    path = out / "density.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)
    return written


def render_comparison(report, run_dirs, reference, path) -> Path:
    """Overlay the mode trajectories of several runs against the reference."""
    from linflow.runner import load_summary

    _style()
    ref = load_summary(reference)
    axes_names = [a for a in ("x", "y") if f"mean_{a}" in ref]
    fig, axes = plt.subplots(len(axes_names), 1, figsize=(6, 2.4 * len(axes_names)),
                             squeeze=False, sharex=True)
    for i, a in enumerate(axes_names):
        ax = axes[i, 0]
        ax.plot(ref["t"], ref[f"mean_{a}"], "k-", lw=1.2, label="reference")
        for run in run_dirs:
            s = load_summary(run)
            ax.plot(s["t"], s[f"mode_{a}"], lw=0.9, label=Path(run).name)
        ax.set_ylabel(a)
    axes[-1, 0].set_xlabel("t")
    axes[0, 0].legend(frameon=False, fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)
