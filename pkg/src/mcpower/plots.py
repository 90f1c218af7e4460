"""Static SVG renderings of the evaluation reports.

Output is byte-stable for identical inputs (fixed hash salt, no date metadata).
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "mcpower"


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def uncertainty_scatter(speed, power_pred, std, path: Path, label: str) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    sc = ax.scatter(speed, power_pred, c=std, s=4, cmap="viridis", rasterized=False)
    fig.colorbar(sc, ax=ax, label=f"{label} std (kW)")
    ax.set_xlabel("wind speed (m/s)")
    ax.set_ylabel("predicted power (kW)")
    return _save(fig, path)


def bin_frequency(table, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(table["frequency"], table["mean_epistemic_std"], s=12)
    ax.set_xlabel("relative frequency of wind-speed bin")
    ax.set_ylabel("mean epistemic std (kW)")
    return _save(fig, path)


def power_histograms(dist, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    centers = 0.5 * (dist.edges[1:] + dist.edges[:-1])
    width = np.diff(dist.edges)
    ax.bar(centers, dist.actual, width=width, alpha=0.5, label="actual")
    ax.bar(centers, dist.predicted, width=width, alpha=0.5, label="model")
    ax.set_xlabel("power (kW)")
    ax.set_ylabel("fraction of samples")
    ax.legend()
    return _save(fig, path)


def nominal_vs_actual(curve, speed, power, improvements: dict[str, float], path: Path) -> Path:
    fig, (a0, a1) = plt.subplots(1, 2, figsize=(9, 4))
    a0.scatter(speed, power, s=3, alpha=0.4, label="measured")
    v = np.linspace(0, max(curve.cut_out + 2, float(np.max(speed))), 400)
    from .evaluate import nominal_predict

    a0.plot(v, nominal_predict(curve, v), color="k", label="nominal")
    a0.set_xlabel("wind speed (m/s)")
    a0.set_ylabel("power (kW)")
    a0.legend()
    a1.bar(list(improvements), list(improvements.values()))
    a1.set_ylabel("MAE improvement vs nominal (%)")
    return _save(fig, path)


def ablation_bars(table, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(table["label"], table["mae_mean"], yerr=table["mae_std"], capsize=3)
    ax.set_ylabel("test MAE (kW)")
    ax.tick_params(axis="x", rotation=30)
    return _save(fig, path)
