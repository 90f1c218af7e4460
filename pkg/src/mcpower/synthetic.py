"""Synthetic datasets with known structure, used by tests, demos and the CLI.

All generators are deterministic in ``seed``.
"""
from __future__ import annotations

import numpy as np
import pandas as pd

RATED_POWER = 2050.0
CUT_IN, RATED_SPEED, CUT_OUT = 3.5, 14.5, 20.0


def noise_std_sine(x):
    return 0.05 + 0.10 * np.asarray(x, dtype=float)


def heteroscedastic_sine(n: int = 4000, seed: int = 0):
    """x ~ U[0, 1], y = sin(2 pi x) + N(0, (0.05 + 0.10 x)^2). Returns ``(x[:, None], y)``."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, n)
    y = np.sin(2 * np.pi * x) + noise_std_sine(x) * rng.standard_normal(n)
    return x[:, None], y


def _two_bumps(rng, n):
    centers = np.where(rng.uniform(size=n) < 0.5, 0.2, 0.8)
    return centers + 0.1 * rng.standard_normal(n)


def in_gap_support(x):
    x = np.asarray(x, dtype=float)
    return ((x >= 0.0) & (x <= 0.4)) | ((x >= 0.6) & (x <= 1.0))


def gap_sine(n: int = 4000, seed: int = 0, noise: float = 0.05):
    """Training data with a hole at (0.4, 0.6).

    x comes from two Gaussian bumps at 0.2 and 0.8 (sd 0.1) restricted to
    [0, 0.4] U [0.6, 1], so density also thins toward the edges;
    y = sin(2 pi x) + N(0, noise^2).
    """
    rng = np.random.default_rng(seed)
    out = np.empty(0)
    while out.size < n:
        draw = _two_bumps(rng, 2 * n)
        out = np.concatenate([out, draw[in_gap_support(draw)]])
    x = out[:n]
    y = np.sin(2 * np.pi * x) + noise * rng.standard_normal(n)
    return x[:, None], y


def gap_probe(n: int = 2000, seed: int = 1):
    """Evaluation inputs from the unrestricted two-bump density clipped to [0, 1].

    The hole region is reached, but rarely, so per-bin frequency varies smoothly.
    """
    rng = np.random.default_rng(seed)
    return np.clip(_two_bumps(rng, n), 0.0, 1.0)[:, None]


def linear_task(n: int = 1000, seed: int = 0, noise: float = 0.1):
    """y = 3 x + N(0, noise^2) with x ~ U[-1, 1]."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, n)
    return x[:, None], 3.0 * x + noise * rng.standard_normal(n)


def ideal_power(v):
    """Cubic ramp between cut-in and rated speed, flat to cut-out, zero elsewhere (kW)."""
    v = np.asarray(v, dtype=float)
    ramp = (v ** 3 - CUT_IN ** 3) / (RATED_SPEED ** 3 - CUT_IN ** 3)
    p = RATED_POWER * np.clip(ramp, 0.0, 1.0)
    return np.where((v < CUT_IN) | (v > CUT_OUT), 0.0, p)


def nominal_curve_frame(step: float = 0.5) -> pd.DataFrame:
    """Tabulated :func:`ideal_power` from cut-in to cut-out (speed, power)."""
    v = np.round(np.arange(CUT_IN, CUT_OUT + step / 2, step), 6)
    return pd.DataFrame({"speed": v, "power": np.round(ideal_power(v), 3)})


def synthetic_scada(n: int = 3000, seed: int = 0, ti_effect: float = 1.5,
                    noise_kw: float = 25.0, start: str = "2017-06-01T00:00:00Z") -> pd.DataFrame:
    """SCADA-like 10-minute records with La Haute Borne header names.

    Power follows :func:`ideal_power` at an effective speed
    ``v * (1 + ti_effect * (TI - 0.13))``, so turbulence intensity carries real
    signal. Noise grows with output.
    """
    rng = np.random.default_rng(seed)
    v = np.clip(7.3 * rng.weibull(2.0, n), 0.3, 28.0)
    ti = np.clip(rng.lognormal(np.log(0.12), 0.4, n), 0.02, 0.6)
    sigma = ti * v
    gust = 1.0 + 2.9 * ti * np.clip(1 + 0.2 * rng.standard_normal(n), 0.3, 2.0)
    v_max = v * gust
    v_alt = v * np.clip(1.042 + 0.069 * rng.standard_normal(n), 0.7, 1.4)
    temp = 5.0 + 3.5 * rng.standard_normal(n)
    direction = np.where(rng.uniform(size=n) < 0.7, 225.0, 45.0) + 35.0 * rng.standard_normal(n)
    direction = np.mod(direction, 360.0)
    nacelle = np.mod(direction + 5.0 * rng.standard_normal(n), 360.0)
    v_eff = v * (1.0 + ti_effect * (ti - 0.13))
    clean_p = ideal_power(v_eff)
    power = clean_p + (5.0 + noise_kw * clean_p / RATED_POWER * 4.0) * rng.standard_normal(n)
    power = np.clip(power, -20.0, RATED_POWER * 1.02)
    pitch = np.where(v > RATED_SPEED, 2.0 * (v - RATED_SPEED), 0.0) + 0.5 * rng.standard_normal(n)
    pitch = np.where(v < CUT_IN, 45.0 + rng.standard_normal(n), pitch)
    stamps = pd.date_range(start, periods=n, freq="10min", tz="UTC")
    return pd.DataFrame({
        "Date_time": stamps.strftime("%Y-%m-%dT%H:%M:%S+00:00"),
        "Ws_avg": v.round(4),
        "Ws_std": sigma.round(4),
        "Ws_max": v_max.round(4),
        "Ws2_avg": v_alt.round(4),
        "Ot_avg": temp.round(3),
        "Wa_avg": direction.round(3),
        "Ba_avg": pitch.round(3),
        "Ya_avg": nacelle.round(3),
        "P_avg": power.round(3),
    })
