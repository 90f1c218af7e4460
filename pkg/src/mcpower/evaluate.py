"""Accuracy and uncertainty reports: MAE, baselines, binned uncertainty, ablation."""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from .data import DataError, FeatureSpec
from .model import NetworkConfig
from .pipeline import fit, prepare
from .train import TrainConfig
from .uq import McConfig, PredictiveSummary, summarize

log = logging.getLogger(__name__)

CUT_IN = 3.5
CUT_OUT = 20.0
RATED_SPEED = 14.5
RATED_POWER = 2050.0


def mae(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("mae of empty vectors")
    return float(np.mean(np.abs(y_true - y_pred)))


@dataclass
class BinnedCurve:
    """Mean power per occupied wind-speed bin."""

    centers: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    width: float


def method_of_bins(speeds, powers, bin_width: float = 0.5) -> BinnedCurve:
    speeds = np.asarray(speeds, dtype=float)
    powers = np.asarray(powers, dtype=float)
    if speeds.size == 0:
        raise ValueError("method of bins needs at least one training sample")
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    k = np.floor(speeds / bin_width).astype(np.int64)
    occupied, inverse, counts = np.unique(k, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=powers)
    return BinnedCurve((occupied + 0.5) * bin_width, sums / counts, counts, bin_width)


def predict_bins(curve: BinnedCurve, v) -> np.ndarray:
    """Linear interpolation between bin centers, clamped to the edge bins."""
    return np.interp(np.asarray(v, dtype=float), curve.centers, curve.values)


@dataclass
class NominalCurve:
    speeds: np.ndarray
    powers: np.ndarray
    cut_in: float = CUT_IN
    cut_out: float = CUT_OUT
    rated_speed: float = RATED_SPEED
    rated_power: float = RATED_POWER

    def __post_init__(self):
        self.speeds = np.asarray(self.speeds, dtype=float)
        self.powers = np.asarray(self.powers, dtype=float)
        self.validate()

    def validate(self) -> None:
        s, p = self.speeds, self.powers
        if s.ndim != 1 or s.shape != p.shape or s.size < 2:
            raise ValueError("nominal curve needs at least two (speed, power) breakpoints")
        if not np.all(np.isfinite(s)) or not np.all(np.isfinite(p)):
            raise ValueError("nominal curve has non-finite entries")
        if np.any(np.diff(s) <= 0):
            raise ValueError("nominal curve speeds must be strictly increasing")
        outside = (s < self.cut_in) | (s > self.cut_out)
        if np.any(p[outside] != 0):
            raise ValueError("nominal curve has non-zero power outside [cut-in, cut-out]")
        if np.any(p > self.rated_power):
            raise ValueError(f"nominal curve exceeds rated power {self.rated_power} kW")
        at_rated = float(np.interp(self.rated_speed, s, p))
        if abs(at_rated - self.rated_power) > 0.01 * self.rated_power:
            raise ValueError(f"nominal curve gives {at_rated:.1f} kW at rated speed "
                             f"{self.rated_speed} m/s, expected {self.rated_power} kW +/- 1%")

    @classmethod
    def from_csv(cls, path, **limits) -> "NominalCurve":
        df = pd.read_csv(path)
        cols = [c.strip().lower() for c in df.columns]
        if cols[:2] != ["speed", "power"]:
            raise DataError(f"{path}: nominal curve needs 'speed' and 'power' columns")
        return cls(df.iloc[:, 0].to_numpy(float), df.iloc[:, 1].to_numpy(float), **limits)


def nominal_predict(curve: NominalCurve, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("wind speed must be non-negative")
    p = np.interp(v, curve.speeds, curve.powers)
    return np.where((v < curve.cut_in) | (v > curve.cut_out), 0.0, p)


def improvement_vs_nominal(model_mae: float, nominal_mae: float) -> float:
    """Percent reduction of MAE relative to the nominal curve (negative if worse)."""
    if not nominal_mae > 0:
        raise ValueError("nominal MAE must be positive")
    return 100.0 * (nominal_mae - model_mae) / nominal_mae


def spearman(a, b) -> tuple[float, bool]:
    """Spearman rank correlation with average ranks for ties.

    Returns ``(rho, defined)``. Fewer than two points is undefined (nan); a
    constant side gives 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2:
        return float("nan"), False
    ra, rb = rankdata(a) - (a.size + 1) / 2, rankdata(b) - (b.size + 1) / 2
    denom = np.sqrt(np.sum(ra * ra) * np.sum(rb * rb))
    if denom == 0:
        return 0.0, True
    return float(np.sum(ra * rb) / denom), True


@dataclass
class BinReport:
    table: pd.DataFrame  # bin_center, count, frequency, mean_epistemic_std, mean_aleatoric_std
    rho: float
    rho_defined: bool
    bin_width: float


def binned_uncertainty(summary: PredictiveSummary, speeds, bin_width: float = 0.5) -> BinReport:
    """Per-bin sample frequency and mean uncertainty, plus frequency/epistemic rank correlation."""
    speeds = np.asarray(speeds, dtype=float)
    if speeds.size == 0:
        raise ValueError("no predictions to bin")
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    if speeds.shape != summary.mean.shape:
        raise ValueError("speeds and predictions differ in length")
    k = np.floor(speeds / bin_width).astype(np.int64)
    occupied, inverse, counts = np.unique(k, return_inverse=True, return_counts=True)
    ep = np.bincount(inverse, weights=summary.epistemic_std) / counts
    al = np.bincount(inverse, weights=summary.aleatoric_std) / counts
    freq = counts / counts.sum()
    table = pd.DataFrame({
        "bin_center": (occupied + 0.5) * bin_width,
        "count": counts,
        "frequency": freq,
        "mean_epistemic_std": ep,
        "mean_aleatoric_std": al,
    })
    rho, ok = spearman(freq, ep)
    if not ok:
        log.warning("all samples fall in one bin; rank correlation undefined")
    return BinReport(table, rho, ok, bin_width)


@dataclass
class PowerDistribution:
    edges: np.ndarray
    predicted: np.ndarray  # normalized histogram (sums to 1)
    actual: np.ndarray
    tv_distance: float


def power_distribution(predicted, actual, bin_kw: float = 100.0) -> PowerDistribution:
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.size == 0 or actual.size == 0:
        raise ValueError("empty power vectors")
    lo = np.floor(min(predicted.min(), actual.min()) / bin_kw) * bin_kw
    hi = (np.floor(max(predicted.max(), actual.max()) / bin_kw) + 1) * bin_kw
    edges = np.arange(lo, hi + bin_kw / 2, bin_kw)
    hp = np.histogram(predicted, edges)[0] / predicted.size
    ha = np.histogram(actual, edges)[0] / actual.size
    return PowerDistribution(edges, hp, ha, float(0.5 * np.abs(hp - ha).sum()))


@dataclass
class AblationReport:
    table: pd.DataFrame  # label, mae_mean, mae_std, runs
    run_maes: list[list[float]]  # aligned with table rows


def ablation(records: pd.DataFrame, feature_sets: Sequence[FeatureSpec], runs: int = 3,
             net_config: NetworkConfig | None = None, train_config: TrainConfig = TrainConfig(),
             mc: McConfig = McConfig(), fractions=(0.7, 0.15, 0.15),
             mode: str = "chronological", seed: int = 0) -> AblationReport:
    """Test-set MAE (kW) per feature set, mean and std over ``runs`` seeds.

    Run ``r`` uses seed ``seed + r`` for initialization, batching, dropout and MC
    draws. Every set sees the same split of rows.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    net_config = net_config or NetworkConfig(input_dim=1, hidden_width=64)
    rows, per = [], []
    for spec in feature_sets:
        maes = []
        prep = prepare(records, spec, fractions, mode, seed)
        for r in range(runs):
            s = seed + r
            fitted = fit(prep, dataclasses.replace(net_config, init_seed=s),
                         dataclasses.replace(train_config, seed=s))
            summ = summarize(fitted.network, prep.raw.x_test, dataclasses.replace(mc, seed=s),
                             prep.standardizer)
            maes.append(mae(prep.raw.y_test, summ.mean))
            log.info("ablation %s run %d: MAE %.3f kW", spec.label, r, maes[-1])
        per.append(maes)
        rows.append((spec.label, float(np.mean(maes)), float(np.std(maes)), runs))
    table = pd.DataFrame(rows, columns=["label", "mae_mean", "mae_std", "runs"])
    return AblationReport(table, per)


def write_csv(df: pd.DataFrame, path: Path) -> Path:
    df.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path
