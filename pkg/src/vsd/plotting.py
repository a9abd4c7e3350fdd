"""Figures written next to the CSV output (non-interactive Agg backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .grid import GridField  # noqa: E402

__all__ = ["plot_fields", "plot_convergence", "plot_snapshots", "plot_oracle_report"]

_RC = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "savefig.dpi": 150,
    "image.cmap": "viridis",
}


def _padded(field: GridField) -> np.ndarray:
    """Nodal array including the zero Dirichlet boundary, indexed [ix, iy]."""
    n = field.grid.n_cells
    out = np.zeros((n + 1, n + 1))
    out[1:-1, 1:-1] = field.as_array()
    return out


def _show(ax, field: GridField, title: str, vmin=None, vmax=None):
    im = ax.imshow(
        _padded(field).T, origin="lower", extent=(0, 1, 0, 1), vmin=vmin, vmax=vmax, interpolation="nearest"
    )
    ax.set_title(title)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    return im


def _box(ax, box):
    if box is None:
        return
    x0, x1, y0, y1 = box
    ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, fill=False, ec="w", lw=1.0, ls="--"))


def plot_fields(
    truth: Optional[GridField], recon: GridField, path, box: Optional[Sequence[float]] = None, title: str = ""
) -> Path:
    """Side-by-side maps of the true source, the reconstruction and their difference."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_RC):
        ncol = 3 if truth is not None else 1
        fig, axes = plt.subplots(1, ncol, figsize=(3.4 * ncol, 3.2), squeeze=False, layout="constrained")
        axes = axes[0]
        if truth is not None:
            lo = min(truth.values.min(), recon.values.min(), 0.0)
            hi = max(truth.values.max(), recon.values.max())
            im = _show(axes[0], truth, "true source", lo, hi)
            fig.colorbar(im, ax=axes[0], shrink=0.85)
            im = _show(axes[1], recon, "reconstruction", lo, hi)
            fig.colorbar(im, ax=axes[1], shrink=0.85)
            diff = recon - truth
            m = float(np.abs(diff.values).max()) or 1.0
            im = axes[2].imshow(
                _padded(diff).T, origin="lower", extent=(0, 1, 0, 1), cmap="RdBu_r", vmin=-m, vmax=m
            )
            axes[2].set_title("reconstruction - truth")
            axes[2].set_xlabel("x")
            fig.colorbar(im, ax=axes[2], shrink=0.85)
        else:
            im = _show(axes[0], recon, "reconstruction")
            fig.colorbar(im, ax=axes[0], shrink=0.85)
        for ax in axes:
            _box(ax, box)
        if title:
            fig.suptitle(title)
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_convergence(history, path, threshold: Optional[float] = None) -> Path:
    """Data residual (and relative error when known) against the outer iteration."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    it = np.array([h.iter for h in history])
    res = np.array([h.residual for h in history])
    errs = [h.rel_error for h in history]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.semilogy(it, res, "-", color="C0", label="data residual")
        if threshold is not None and np.isfinite(threshold):
            ax.axhline(threshold, color="C0", ls=":", lw=1, label="discrepancy level")
        ax.set_xlabel("iteration")
        ax.set_ylabel("residual")
        if all(e is not None for e in errs):
            ax2 = ax.twinx()
            ax2.plot(it, errs, "-", color="C3", label="relative error")
            ax2.set_ylabel("relative L2 error", color="C3")
            ax2.tick_params(axis="y", colors="C3")
        ax.legend(loc="upper right", frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_snapshots(traj, path, n_panels: int = 4) -> Path:
    """A few time slices of a trajectory on a shared colour scale."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    idx = np.unique(np.linspace(1, len(traj) - 1, n_panels).round().astype(int))
    vmax = float(np.abs(traj.values).max()) or 1.0
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(
            1, len(idx), figsize=(2.8 * len(idx), 2.6), squeeze=False, sharey=True, layout="constrained"
        )
        for ax, n in zip(axes[0], idx):
            im = _show(ax, traj[n], f"t = {traj.timegrid.times[n]:.3g}", -vmax if traj.values.min() < 0 else 0, vmax)
        for ax in axes[0, 1:]:
            ax.set_ylabel("")
        fig.colorbar(im, ax=list(axes[0]), shrink=0.85)
        fig.savefig(path, bbox_inches="tight")
        plt.close(fig)
    return path


def plot_oracle_report(rows, path) -> Path:
    """Bar chart of the per-mode deviation between grid solver and spectral oracle."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = [r["mode"] for r in rows]
    dev = [r["max_deviation"] for r in rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(max(3.0, 0.5 * len(rows) + 1.5), 3.0))
        ax.bar(range(len(rows)), dev, color="C0")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(labels, rotation=45, ha="right")
        ax.set_yscale("log")
        ax.set_ylabel("max |c_grid - c_oracle|")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
