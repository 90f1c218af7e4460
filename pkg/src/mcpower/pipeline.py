"""Glue from cleaned records to a trained model: features, split, scaling, training."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .data import (
    FeatureSpec,
    SplitDataset,
    Standardizer,
    build_features,
    split,
    standardize_split,
    targets,
)
from .model import Network, NetworkConfig
from .train import TrainConfig, TrainHistory, train


@dataclass
class Prepared:
    spec: FeatureSpec
    raw: SplitDataset  # physical units
    scaled: SplitDataset  # standardized with ``standardizer``
    standardizer: Standardizer
    records: pd.DataFrame


def prepare(records: pd.DataFrame, spec: FeatureSpec, fractions=(0.7, 0.15, 0.15),
            mode: str = "chronological", seed: int = 0) -> Prepared:
    if mode == "chronological" and "timestamp" in records.columns:
        records = records.sort_values("timestamp", kind="stable").reset_index(drop=True)
    x = build_features(records, spec)
    y = targets(records)
    raw = split(x, y, fractions, mode, seed)
    st = Standardizer.fit(raw.x_train, raw.y_train, spec.names)
    return Prepared(spec, raw, standardize_split(raw, st), st, records)


@dataclass
class Fitted:
    network: Network
    history: TrainHistory
    prepared: Prepared


def fit(prepared: Prepared, net_config: NetworkConfig, train_config: TrainConfig) -> Fitted:
    """Train on ``prepared``; ``net_config.input_dim`` is overridden by the feature count."""
    cfg = dataclasses.replace(net_config, input_dim=len(prepared.spec))
    net, hist = train(prepared.scaled, cfg, train_config)
    return Fitted(net, hist, prepared)


def split_records(prepared: Prepared, part: str) -> pd.DataFrame:
    """Cleaned records belonging to ``part`` ("train", "val" or "test"), in split order."""
    idx = getattr(prepared.raw, f"idx_{part}")
    return prepared.records.iloc[idx].reset_index(drop=True)
