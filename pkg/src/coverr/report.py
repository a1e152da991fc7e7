"""Matplotlib figures written next to the delimited outputs.

Everything renders through the Agg backend at a fixed dpi with a fixed
Software tag in the PNG metadata, so identical inputs produce identical
bytes (the reproducibility contract of the command line).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .gibbs import PosteriorDraws
from .spatial import VariogramCloud
from .synthetic import SyntheticTruth

_DPI = 120
_META = {"Software": "coverr"}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, format="png", metadata=_META)
    plt.close(fig)
    return path


def variogram_figure(clouds: dict[str, VariogramCloud], path) -> Path:
    """One panel per subset: squared rate difference against distance."""
    labels = list(clouds)
    fig, axes = plt.subplots(1, max(len(labels), 1), figsize=(4.0 * max(len(labels), 1), 3.4),
                             squeeze=False)
    for ax, label in zip(axes[0], labels):
        pts = clouds[label].points
        ax.scatter(pts[:, 0], pts[:, 1], s=6, alpha=0.35, edgecolors="none")
        ax.set_title(f"subset: {label} ({pts.shape[0]} pairs)")
        ax.set_xlabel("distance (degrees)")
        ax.set_ylabel("squared rate difference")
    if not labels:
        axes[0][0].text(0.5, 0.5, "no variogram subsets available",
                        ha="center", va="center")
        axes[0][0].set_axis_off()
    fig.tight_layout()
    return _save(fig, path)


def trace_figure(draws: PosteriorDraws, path) -> Path:
    """Trace of every retained scalar parameter, one line per chain."""
    blocks = draws.scalar_blocks()
    n = len(blocks)
    fig, axes = plt.subplots(n, 1, figsize=(7.0, 1.8 * n), sharex=True, squeeze=False)
    for ax, (name, arr) in zip(axes[:, 0], blocks.items()):
        for c in range(arr.shape[0]):
            ax.plot(arr[c], linewidth=0.6)
        ax.set_ylabel(name, fontsize=9)
    axes[-1, 0].set_xlabel("retained draw")
    fig.suptitle(f"variant {draws.variant.id}", fontsize=10)
    fig.tight_layout()
    return _save(fig, path)


def shrinkage_figure(predictions, path) -> Path:
    """Model estimates against the direct estimates, with 95% intervals."""
    fig, ax = plt.subplots(figsize=(5.2, 5.0))
    y = predictions["y"].to_numpy()
    th = predictions["theta_hat"].to_numpy()
    lo = predictions["ci_low"].to_numpy()
    hi = predictions["ci_high"].to_numpy()
    ax.errorbar(y, th, yerr=np.vstack([th - lo, hi - th]), fmt="o",
                markersize=3, linewidth=0.6, alpha=0.7, capsize=0)
    span = [min(y.min(), lo.min()), max(y.max(), hi.max())]
    ax.plot(span, span, linestyle="--", linewidth=0.8, color="gray")
    ax.set_xlabel("direct rate")
    ax.set_ylabel("model rate (95% interval)")
    ax.set_title("shrinkage toward the model surface")
    fig.tight_layout()
    return _save(fig, path)


def residual_figure(residual_table, path) -> Path:
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    ax.scatter(residual_table["theta_hat"], residual_table["std_residual"],
               s=10, alpha=0.6, edgecolors="none")
    for ref in (-2.0, 0.0, 2.0):
        ax.axhline(ref, linestyle=":" if ref else "-", linewidth=0.7, color="gray")
    ax.set_xlabel("model rate")
    ax.set_ylabel("standardized residual")
    fig.tight_layout()
    return _save(fig, path)


def score_figure(score_table, path) -> Path:
    """DIC (lower wins) and LPML (higher wins) side by side."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    ids = score_table["variant"].tolist()
    ax1.bar(ids, score_table["dic"])
    ax1.set_title("DIC (smaller is better)")
    ax2.bar(ids, score_table["lpml"])
    ax2.set_title("LPML (larger is better)")
    for ax in (ax1, ax2):
        ax.set_xlabel("variant")
    fig.tight_layout()
    return _save(fig, path)


def field_figure(truth: SyntheticTruth, path) -> Path:
    """The generated rate surface at the target time, on the grid."""
    ds = truth.dataset
    lon = [a.longitude for a in ds.areas]
    lat = [a.latitude for a in ds.areas]
    fig, ax = plt.subplots(figsize=(5.6, 4.4))
    sc = ax.scatter(lon, lat, c=truth.theta_target, s=60, marker="s")
    fig.colorbar(sc, ax=ax, label="true rate")
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.set_title(f"synthetic truth, variant {truth.variant.id}")
    fig.tight_layout()
    return _save(fig, path)
