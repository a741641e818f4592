"""Static PNG figures rendered next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .changepoint import ChangePointFit, piecewise_coefficients

_DPI = 150


def _save(fig, path: str | Path) -> Path:
    out = Path(path)
    fig.tight_layout()
    fig.savefig(out, dpi=_DPI)
    plt.close(fig)
    return out


def save_roc_figure(
    path: str | Path,
    curves: Mapping[str, Sequence[tuple[float, float]]],
    aurocs: Mapping[str, float] | None = None,
) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 5.0))
    for method in sorted(curves):
        points = curves[method]
        fpr = [p[0] for p in points]
        tpr = [p[1] for p in points]
        label = method
        if aurocs and method in aurocs:
            label = f"{method} (AUROC {aurocs[method]:.3f})"
        ax.plot(fpr, tpr, marker=".", markersize=3, label=label)
    ax.plot([0, 1], [0, 1], linestyle=":", color="gray", linewidth=1)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="lower right", fontsize=8)
    return _save(fig, path)


def save_precision_figure(
    path: str | Path, precision: Mapping[str, Mapping[int, float]]
) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for method in sorted(precision):
        per_k = precision[method]
        ks = sorted(per_k)
        ax.plot(ks, [per_k[k] for k in ks], marker="o", label=method)
    ax.set_xlabel("K")
    ax.set_ylabel("precision at K")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    return _save(fig, path)


def save_coefficients_figure(
    path: str | Path,
    entries: Sequence[tuple[str, float]],
    top_k: int = 40,
    title: str | None = None,
) -> Path:
    head = list(entries[:top_k])
    fig, ax = plt.subplots(figsize=(6.0, max(2.5, 0.18 * len(head) + 1.0)))
    if head:
        names = [d for d, _ in head][::-1]
        scores = [s for _, s in head][::-1]
        ax.barh(range(len(head)), scores, color="#33658a")
        ax.set_yticks(range(len(head)))
        ax.set_yticklabels(names, fontsize=6)
    ax.axvline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("score")
    if title:
        ax.set_title(title, fontsize=9)
    return _save(fig, path)


def save_gap_figure(
    path: str | Path,
    gaps: Sequence[float],
    fit: ChangePointFit | None = None,
    title: str | None = None,
) -> Path:
    """Sorted gap values against rank, with the fitted break overlaid."""
    values = np.sort(np.asarray(gaps, dtype=np.float64))
    ranks = np.arange(1, values.shape[0] + 1)
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.plot(ranks, values, ".", markersize=3, color="#555555", label="gaps")
    if fit is not None and fit.converged and fit.psi is not None:
        a, b, c = piecewise_coefficients(values, fit.psi)
        grid = np.linspace(1, values.shape[0], 200)
        line = a + b * grid + c * np.maximum(grid - fit.psi, 0.0)
        ax.plot(grid, line, color="#d1495b", linewidth=1.5, label="fit")
        ax.axvline(fit.psi, color="#d1495b", linestyle=":", linewidth=1)
    ax.set_xlabel("rank")
    ax.set_ylabel("gap (days)")
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(fontsize=8)
    return _save(fig, path)


def save_changepoint_figure(
    path: str | Path,
    break_values: Sequence[float],
    second_level: ChangePointFit | None,
    mean_refill_days: float | None,
) -> Path:
    """Per-drug refill-period estimates with the regime split overlaid."""
    values = np.sort(np.asarray(break_values, dtype=np.float64))
    ranks = np.arange(1, values.shape[0] + 1)
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.plot(ranks, values, "o", markersize=4, color="#33658a", label="per-drug break value")
    if second_level is not None and second_level.converged and second_level.psi is not None:
        ax.axvline(
            second_level.psi,
            color="#d1495b",
            linestyle="--",
            linewidth=1.2,
            label="regime split",
        )
    if mean_refill_days is not None:
        ax.axhline(mean_refill_days, color="#2e933c", linestyle=":", linewidth=1.2, label="regime mean")
    ax.set_xlabel("drug rank")
    ax.set_ylabel("break value (days)")
    ax.legend(fontsize=8)
    return _save(fig, path)
