"""SCADA ingestion, cleaning, feature engineering, splitting and scaling.

Records are held in a :class:`pandas.DataFrame` with one row per 10-minute
interval and canonical column names (see ``CHANNELS``), regardless of the header
names used in the source file.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd

from .numerics import RngStream, stream_id


class DataError(ValueError):
    """Problem with the input data (missing headers, empty files, bad values)."""


# semantic channel -> canonical record column
CHANNELS = {
    "timestamp": "timestamp",
    "wind_speed_avg": "v_bar",
    "wind_speed_std": "sigma_v",
    "wind_speed_max": "v_max",
    "wind_speed_alt_avg": "v_alt",
    "temperature_avg": "temp",
    "direction_avg": "dir",
    "pitch_avg": "pitch",
    "nacelle_avg": "nacelle",
    "power_avg": "power",
}

MIN_WIND_SPEED = 0.1
MAX_WIND_SPEED = 30.0
MIN_POWER = -50.0


@dataclass(frozen=True)
class ColumnMapping:
    """Binds semantic channels to CSV header names. Unbound channels are ``None``.

    Defaults follow the La Haute Borne open-data headers.
    """

    wind_speed_avg: str = "Ws_avg"
    power_avg: str | None = "P_avg"
    timestamp: str | None = "Date_time"
    wind_speed_std: str | None = "Ws_std"
    wind_speed_max: str | None = "Ws_max"
    wind_speed_alt_avg: str | None = "Ws2_avg"
    temperature_avg: str | None = "Ot_avg"
    direction_avg: str | None = "Wa_avg"
    pitch_avg: str | None = "Ba_avg"
    nacelle_avg: str | None = "Ya_avg"

    def __post_init__(self):
        bound = [h for h in self.bound().values()]
        dupes = {h for h in bound if bound.count(h) > 1}
        if dupes:
            raise ValueError(f"headers bound to more than one channel: {sorted(dupes)}")

    def bound(self) -> dict[str, str]:
        return {k: v for k, v in dataclasses.asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnMapping":
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown channel(s) in column mapping: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class LoadResult(NamedTuple):
    records: pd.DataFrame
    rejects: pd.DataFrame  # columns: row_number, reason


def load_scada(
    path: str | Path,
    mapping: ColumnMapping = ColumnMapping(),
    sep: str = ",",
    row_filter: dict[str, str] | None = None,
    required: Sequence[str] | None = None,
) -> LoadResult:
    """Read a SCADA CSV into canonical records.

    ``row_number`` in both outputs is the 1-based line number in the file (the
    header is line 1). Rows whose mapped cells cannot be parsed go to
    ``rejects``. ``row_filter`` keeps only rows whose raw cell equals the given
    value (e.g. one turbine out of a multi-turbine export). ``required`` limits
    which channels must be present (default: every bound channel).
    """
    path = Path(path)
    try:
        raw = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: file is empty") from None
    if raw.shape[1] == 0 or raw.empty:
        raise DataError(f"{path}: file has no data rows")
    raw.columns = [c.strip() for c in raw.columns]

    bound = mapping.bound()
    missing = [f"{h} (for {ch})" for ch, h in bound.items() if h not in raw.columns]
    if missing:
        raise DataError(f"{path}: missing header(s): {', '.join(missing)}")

    raw["row_number"] = np.arange(2, len(raw) + 2)
    for col, value in (row_filter or {}).items():
        if col not in raw.columns:
            raise DataError(f"{path}: missing header(s): {col} (row filter)")
        raw = raw[raw[col].str.strip() == str(value)]

    required = set(bound) if required is None else set(required) & set(bound)
    out = pd.DataFrame({"row_number": raw["row_number"].to_numpy()})
    reasons = pd.Series("", index=raw.index, dtype=object)
    for ch, header in bound.items():
        cells = raw[header].str.strip()
        if ch == "timestamp":
            parsed = pd.to_datetime(cells, utc=True, errors="coerce", format="ISO8601")
        else:
            parsed = pd.to_numeric(cells, errors="coerce")
            parsed = parsed.where(np.isfinite(parsed))
        bad = parsed.isna()
        if ch in required:
            reasons[bad] += f"unparseable {header!r}; "
        out[CHANNELS[ch]] = parsed.to_numpy()

    bad_rows = (reasons != "").to_numpy()
    rejects = pd.DataFrame({
        "row_number": out["row_number"][bad_rows].to_numpy(),
        "reason": reasons[bad_rows].str.rstrip("; ").to_numpy(),
    })
    records = out[~bad_rows].reset_index(drop=True)
    return LoadResult(records, rejects)


def clean(records: pd.DataFrame, require_power: bool = True) -> pd.DataFrame:
    """Drop incomplete and physically implausible records.

    Kept rows satisfy v_bar in [0.1, 30] m/s, power >= -50 kW, v_max >= v_bar,
    sigma_v >= 0 and have no missing channel values.
    """
    df = records
    channels = [c for c in CHANNELS.values() if c in df.columns]
    if not require_power:
        channels = [c for c in channels if c != "power"]
    keep = df[channels].notna().all(axis=1)
    keep &= df["v_bar"].between(MIN_WIND_SPEED, MAX_WIND_SPEED)
    if "power" in channels:
        keep &= df["power"] >= MIN_POWER
    if "v_max" in df.columns:
        keep &= df["v_max"] >= df["v_bar"]
    if "sigma_v" in df.columns:
        keep &= df["sigma_v"] >= 0
    return df[keep].reset_index(drop=True)


def turbulence_intensity(sigma_v, v_bar):
    """sigma_v / v_bar."""
    sigma_v, v_bar = np.asarray(sigma_v, dtype=float), np.asarray(v_bar, dtype=float)
    if np.any(v_bar < MIN_WIND_SPEED):
        raise DataError(f"mean wind speed below {MIN_WIND_SPEED} m/s")
    return sigma_v / v_bar


def wind_shear_indicator(v, v0):
    """Speed ratio v / v0 standing in for the shear exponent (anemometer heights unknown)."""
    v, v0 = np.asarray(v, dtype=float), np.asarray(v0, dtype=float)
    if np.any(v0 < MIN_WIND_SPEED):
        raise DataError(f"reference wind speed below {MIN_WIND_SPEED} m/s")
    return v / v0


def gust_factor(v_max, v_bar):
    """v_max / v_bar."""
    v_max, v_bar = np.asarray(v_max, dtype=float), np.asarray(v_bar, dtype=float)
    if np.any(v_bar < MIN_WIND_SPEED):
        raise DataError(f"mean wind speed below {MIN_WIND_SPEED} m/s")
    if np.any(v_max < v_bar):
        raise DataError("maximum wind speed below mean wind speed")
    return v_max / v_bar


def encode_angle(deg):
    rad = np.deg2rad(np.asarray(deg, dtype=float))
    return np.sin(rad), np.cos(rad)


# feature name -> record columns it needs
FEATURE_CHANNELS = {
    "WS": ("v_bar",),
    "T": ("temp",),
    "DIR_SIN": ("dir",),
    "DIR_COS": ("dir",),
    "TI": ("sigma_v", "v_bar"),
    "G": ("v_max", "v_bar"),
    "SHEAR": ("v_alt", "v_bar"),
    "PITCH": ("pitch",),
    "NAC_SIN": ("nacelle",),
    "NAC_COS": ("nacelle",),
}
_ALIASES = {"DIR": ("DIR_SIN", "DIR_COS"), "NAC": ("NAC_SIN", "NAC_COS"), "BA": ("PITCH",)}
ALL_FEATURES = tuple(FEATURE_CHANNELS)


@dataclass(frozen=True)
class FeatureSpec:
    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise ValueError("feature spec is empty")
        unknown = [n for n in self.names if n not in FEATURE_CHANNELS]
        if unknown:
            raise ValueError(f"unknown feature(s): {unknown}")
        if "WS" not in self.names:
            raise ValueError("feature spec must include WS (wind speed)")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate features in {list(self.names)}")

    @classmethod
    def parse(cls, items: str | Sequence[str]) -> "FeatureSpec":
        """Accepts ``"WS,TI,DIR"`` or a list; ``DIR``/``NAC`` expand to sin and cos, ``BA`` is ``PITCH``."""
        if isinstance(items, str):
            items = [s for s in items.replace("+", ",").split(",")]
        names: list[str] = []
        for raw in items:
            name = raw.strip().upper()
            names.extend(_ALIASES.get(name, (name,)))
        return cls(tuple(names))

    @property
    def label(self) -> str:
        return "+".join(self.names)

    def channels(self) -> set[str]:
        return {c for n in self.names for c in FEATURE_CHANNELS[n]}

    def __len__(self) -> int:
        return len(self.names)


def build_features(records: pd.DataFrame, spec: FeatureSpec) -> np.ndarray:
    """Model input matrix with columns in ``spec`` order."""
    missing = sorted(c for c in spec.channels() if c not in records.columns)
    if missing:
        inv = {v: k for k, v in CHANNELS.items()}
        raise DataError("features need unmapped channel(s): " + ", ".join(inv[c] for c in missing))
    cols = []
    for name in spec.names:
        if name == "WS":
            col = records["v_bar"].to_numpy(float)
        elif name == "T":
            col = records["temp"].to_numpy(float)
        elif name == "PITCH":
            col = records["pitch"].to_numpy(float)
        elif name == "TI":
            col = turbulence_intensity(records["sigma_v"], records["v_bar"])
        elif name == "G":
            col = gust_factor(records["v_max"], records["v_bar"])
        elif name == "SHEAR":
            col = wind_shear_indicator(records["v_alt"], records["v_bar"])
        else:
            base = "dir" if name.startswith("DIR") else "nacelle"
            s, c = encode_angle(records[base])
            col = s if name.endswith("SIN") else c
        cols.append(np.asarray(col, dtype=float))
    return np.column_stack(cols) if cols else np.empty((len(records), 0))


def targets(records: pd.DataFrame) -> np.ndarray:
    if "power" not in records.columns:
        raise DataError("records have no power channel")
    return records["power"].to_numpy(float)


@dataclass
class SplitDataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    idx_train: np.ndarray
    idx_val: np.ndarray
    idx_test: np.ndarray
    fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)
    mode: str = "chronological"


def split_sizes(n: int, fractions: Sequence[float]) -> tuple[int, int, int]:
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("split fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions sum to {sum(fractions)}, not 1")
    n_train = math.floor(fractions[0] * n + 1e-9)
    n_val = math.floor(fractions[1] * n + 1e-9)
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise DataError(f"split of {n} rows into {fractions} leaves an empty part "
                        f"({n_train}, {n_val}, {n_test})")
    return n_train, n_val, n_test


def split(
    x: np.ndarray,
    y: np.ndarray,
    fractions: Sequence[float] = (0.7, 0.15, 0.15),
    mode: str = "chronological",
    seed: int = 0,
) -> SplitDataset:
    """Disjoint train/validation/test partition.

    Sizes are floor(train), floor(val), remainder. ``chronological`` keeps row
    order (rows are assumed time-sorted); ``shuffled`` permutes with ``seed``.
    """
    n = len(x)
    n_train, n_val, _ = split_sizes(n, fractions)
    if mode == "chronological":
        order = np.arange(n)
    elif mode == "shuffled":
        order = RngStream(seed, stream_id("split")).permutation(n)
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    tr, va, te = order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:]
    return SplitDataset(x[tr], y[tr], x[va], y[va], x[te], y[te], tr, va, te,
                        tuple(float(f) for f in fractions), mode)


@dataclass
class Standardizer:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    feature_names: tuple[str, ...] = field(default=())

    @classmethod
    def fit(cls, x: np.ndarray, y: np.ndarray, feature_names: Sequence[str] = ()) -> "Standardizer":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if len(x) == 0:
            raise DataError("cannot fit a standardizer on an empty training split")
        names = tuple(feature_names) or tuple(f"x{i}" for i in range(x.shape[1]))
        x_std = x.std(axis=0)
        for name, s in zip(names, x_std):
            if not s > 1e-12:
                raise DataError(f"feature column {name!r} is constant on the training split")
        y_std = float(y.std())
        if not y_std > 1e-12:
            raise DataError("target (power) is constant on the training split")
        return cls(x.mean(axis=0), x_std, float(y.mean()), y_std, names)

    def transform_x(self, x):
        return (np.asarray(x, dtype=float) - self.x_mean) / self.x_std

    def inverse_x(self, z):
        return np.asarray(z, dtype=float) * self.x_std + self.x_mean

    def transform_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_std

    def inverse_y(self, z):
        return np.asarray(z, dtype=float) * self.y_std + self.y_mean

    def inverse_variance(self, var):
        return np.asarray(var, dtype=float) * self.y_std ** 2

    def to_dict(self) -> dict:
        return {
            "x_mean": [float(v) for v in self.x_mean],
            "x_std": [float(v) for v in self.x_std],
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.array(d["x_mean"], dtype=float), np.array(d["x_std"], dtype=float),
                   float(d["y_mean"]), float(d["y_std"]), tuple(d["feature_names"]))


_SUMMARY_ROWS = [
    ("Wind Speed (m/s)", lambda r: r["v_bar"], ("v_bar",)),
    ("Temperature (C)", lambda r: r["temp"], ("temp",)),
    ("Wind Direction (deg)", lambda r: r["dir"], ("dir",)),
    ("Turbulence Int.", lambda r: turbulence_intensity(r["sigma_v"], r["v_bar"]), ("sigma_v", "v_bar")),
    ("Gust Factor", lambda r: gust_factor(r["v_max"], r["v_bar"]), ("v_max", "v_bar")),
    ("Wind Speed Ratio", lambda r: wind_shear_indicator(r["v_alt"], r["v_bar"]), ("v_alt", "v_bar")),
    ("Pitch Angle (deg)", lambda r: r["pitch"], ("pitch",)),
    ("Nacelle Angle (deg)", lambda r: r["nacelle"], ("nacelle",)),
    ("Power (kW)", lambda r: r["power"], ("power",)),
]


def summarize_inputs(records: pd.DataFrame) -> pd.DataFrame:
    """Per-variable mean and std of the model inputs on cleaned records."""
    rows = []
    for label, fn, needs in _SUMMARY_ROWS:
        if all(c in records.columns for c in needs) and len(records):
            vals = np.asarray(fn(records), dtype=float)
            rows.append((label, float(vals.mean()), float(vals.std()), int(vals.size)))
    return pd.DataFrame(rows, columns=["variable", "mean", "std", "count"])


def standardize_split(sp: SplitDataset, st: Standardizer) -> SplitDataset:
    """Copy of ``sp`` with features and targets in standardized units."""
    return dataclasses.replace(
        sp,
        x_train=st.transform_x(sp.x_train), y_train=st.transform_y(sp.y_train),
        x_val=st.transform_x(sp.x_val), y_val=st.transform_y(sp.y_val),
        x_test=st.transform_x(sp.x_test), y_test=st.transform_y(sp.y_test),
    )
