"""Monte-Carlo dropout inference: predictive mean, epistemic and aleatoric variance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .data import Standardizer
from .model import Network, forward
from .numerics import RngStream, stream_id

_MAX_LOG_VAR = float(np.log(np.finfo(np.float64).max))


@dataclass(frozen=True)
class McConfig:
    passes: int = 100
    seed: int = 0
    mask_mode: str = "hard"  # "hard", "relaxed" or "off"
    chunk_size: int = 4096  # rows per forward call; part of the stream key

    def __post_init__(self):
        if self.passes < 1:
            raise ValueError("passes (B) must be >= 1")
        if self.mask_mode not in ("hard", "relaxed", "off"):
            raise ValueError(f"unknown mask mode {self.mask_mode!r}")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")


def mc_samples(net: Network, x, mc: McConfig) -> tuple[np.ndarray, np.ndarray]:
    """``B`` stochastic passes; returns head outputs ``(mu, log_var)``, each ``(B, n)``.

    Draw ``b`` on row chunk ``c`` uses stream ``(seed, ("mc", b, c))``, so a draw
    does not depend on how many other draws are taken.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    mus = np.empty((mc.passes, n))
    lvs = np.empty((mc.passes, n))
    for b in range(mc.passes):
        for c, start in enumerate(range(0, n, mc.chunk_size)):
            sl = slice(start, start + mc.chunk_size)
            stream = RngStream(mc.seed, stream_id("mc", b, c))
            mu, lv, _ = forward(net, x[sl], mc.mask_mode, stream=stream)
            mus[b, sl] = mu
            lvs[b, sl] = lv
    return mus, lvs


def _check_draws(draws) -> np.ndarray:
    d = np.asarray(draws, dtype=float)
    if d.size == 0 or d.shape[0] == 0:
        raise ValueError("no Monte-Carlo draws")
    return d


def predictive_mean(draws) -> np.ndarray:
    """Mean over the draw axis (axis 0)."""
    return _check_draws(draws).mean(axis=0)


def epistemic_variance(draws) -> np.ndarray:
    """Population variance over draws (divisor B)."""
    d = _check_draws(draws)
    mean = d.mean(axis=0)
    return ((d - mean) ** 2).mean(axis=0)


def aleatoric_variance(log_var_draws) -> np.ndarray:
    """Mean of ``exp(log_var)`` over draws."""
    s = _check_draws(log_var_draws)
    if np.any(s > _MAX_LOG_VAR):
        b = int(np.argwhere(s > _MAX_LOG_VAR)[0][0])
        raise FloatingPointError(f"log-variance overflows exp() in draw {b}")
    return np.exp(s).mean(axis=0)


@dataclass
class PredictiveSummary:
    mean: np.ndarray  # kW
    epistemic_var: np.ndarray  # kW^2
    aleatoric_var: np.ndarray  # kW^2
    mu_draws: np.ndarray | None = None  # standardized units

    @property
    def epistemic_std(self) -> np.ndarray:
        return np.sqrt(self.epistemic_var)

    @property
    def aleatoric_std(self) -> np.ndarray:
        return np.sqrt(self.aleatoric_var)

    def __len__(self) -> int:
        return len(self.mean)


def summarize(net: Network, x, mc: McConfig, standardizer: Standardizer,
              keep_draws: bool = False) -> PredictiveSummary:
    """Physical-unit predictive summary for raw (unstandardized) feature rows."""
    z = standardizer.transform_x(x)
    mus, lvs = mc_samples(net, z, mc)
    return PredictiveSummary(
        mean=standardizer.inverse_y(predictive_mean(mus)),
        epistemic_var=standardizer.inverse_variance(epistemic_variance(mus)),
        aleatoric_var=standardizer.inverse_variance(aleatoric_variance(lvs)),
        mu_draws=mus if keep_draws else None,
    )


def predictions_frame(summary: PredictiveSummary, wind_speed, actual=None, row_id=None) -> pd.DataFrame:
    n = len(summary)
    df = pd.DataFrame({
        "row_id": np.arange(n) if row_id is None else np.asarray(row_id),
        "wind_speed": np.asarray(wind_speed, dtype=float),
        "power_pred_kw": summary.mean,
        "epistemic_std_kw": summary.epistemic_std,
        "aleatoric_std_kw": summary.aleatoric_std,
    })
    if actual is not None:
        df["power_actual_kw"] = np.asarray(actual, dtype=float)
    return df
