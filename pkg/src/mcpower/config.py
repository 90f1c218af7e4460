"""Run configuration: one YAML (or JSON) tree validated into typed sections.

Relative paths resolve against the config file's directory. Unknown keys are
rejected so typos fail loudly.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .data import ColumnMapping, FeatureSpec
from .model import NetworkConfig
from .train import TrainConfig
from .uq import McConfig

PROFILES = {"desk": 64, "paper": 1024}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted path of the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "profile": "desk",
    "output_dir": "out",
    "data": {
        "paths": [],
        "sep": ",",
        "row_filter": {},
        "start": None,
        "end": None,
        "columns": ColumnMapping().to_dict(),
        "split": {"fractions": [0.7, 0.15, 0.15], "mode": "chronological"},
    },
    "features": ["WS", "T", "DIR", "TI", "G", "SHEAR", "PITCH", "NAC"],
    "network": {
        "hidden_width": None,
        "init_dropout_p": 0.1,
        "concrete_temperature": 0.1,
        "characteristic_length_sq": 1e-4,
        "regularizer_variant": "paper",
    },
    "train": {
        "epochs": 200,
        "batch_size": 256,
        "lr_start": 1e-3,
        "lr_end": 1e-5,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "loss_mode": "heteroscedastic",
        "early_stopping_patience": None,
    },
    "mc": {"passes": 100, "mask_mode": "hard"},
    "evaluation": {
        "nominal_curve": None,
        "bin_width": 0.5,
        "power_bin_kw": 100.0,
        "ablation_sets": [["WS"], ["WS", "TI"]],
        "ablation_runs": 3,
    },
}

# subtrees whose keys are free-form
_OPEN = {"data.row_filter"}


def _merge(base: dict, over: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        path = f"{prefix}{k}"
        if k not in base:
            raise ConfigError(path, "unknown key")
        if isinstance(base[k], dict) and path not in _OPEN:
            if not isinstance(v, dict):
                raise ConfigError(path, "expected a mapping")
            if path == "data.columns":
                out[k] = {**base[k], **v}
                unknown = set(v) - set(base[k])
                if unknown:
                    raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown channel")
            else:
                out[k] = _merge(base[k], v, path + ".")
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    paths: list[Path]
    mapping: ColumnMapping
    features: FeatureSpec
    network: NetworkConfig  # input_dim filled per feature spec at training time
    train: TrainConfig
    mc: McConfig
    fractions: tuple[float, float, float]
    split_mode: str
    output_dir: Path
    seed: int = 0
    sep: str = ","
    row_filter: dict[str, str] = field(default_factory=dict)
    start: str | None = None
    end: str | None = None
    nominal_curve: Path | None = None
    bin_width: float = 0.5
    power_bin_kw: float = 100.0
    ablation_sets: list[FeatureSpec] = field(default_factory=list)
    ablation_runs: int = 3
    profile: str = "desk"
    raw: dict = field(default_factory=dict)


def _num(tree: dict, path: str, kind=float):
    node = tree
    for part in path.split("."):
        node = node[part]
    if node is None:
        return None
    if isinstance(node, str):  # YAML 1.1 reads "1e-4" as a string
        try:
            node = float(node)
        except ValueError:
            raise ConfigError(path, f"expected a number, got {node!r}") from None
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(path, f"expected a number, got {node!r}")
    if kind is int and int(node) != node:
        raise ConfigError(path, f"expected an integer, got {node!r}")
    return kind(node)


def build_config(tree: dict, base_dir: Path = Path("."), overrides: dict | None = None,
                 check_paths: bool = True) -> RunConfig:
    """Validate a config tree. ``overrides`` keys: seed, output_dir, profile."""
    if not isinstance(tree, dict):
        raise ConfigError("", "config root must be a mapping")
    t = _merge(DEFAULTS, tree)
    for k, v in (overrides or {}).items():
        if v is not None:
            t[k] = v
    seed = _num(t, "seed", int)
    profile = t["profile"]
    if profile not in PROFILES:
        raise ConfigError("profile", f"expected one of {sorted(PROFILES)}")

    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else (base_dir / p)

    d = t["data"]
    paths = d["paths"]
    if isinstance(paths, str):
        paths = [paths]
    paths = [resolve(p) for p in paths]
    if check_paths:
        for i, p in enumerate(paths):
            if not p.exists():
                raise ConfigError(f"data.paths[{i}]", f"file not found: {p}")
    try:
        mapping = ColumnMapping.from_dict(d["columns"])
    except (TypeError, ValueError) as exc:
        raise ConfigError("data.columns", str(exc)) from None
    fractions = d["split"]["fractions"]
    if not (isinstance(fractions, list) and len(fractions) == 3):
        raise ConfigError("data.split.fractions", "expected three numbers")
    if any(not isinstance(f, (int, float)) or f <= 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise ConfigError("data.split.fractions", "must be positive and sum to 1")
    if d["split"]["mode"] not in ("chronological", "shuffled"):
        raise ConfigError("data.split.mode", "expected 'chronological' or 'shuffled'")

    def spec(value, path):
        try:
            return FeatureSpec.parse(value)
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None

    features = spec(t["features"], "features")

    n = t["network"]
    width = PROFILES[profile] if n["hidden_width"] is None else _num(t, "network.hidden_width", int)
    if (overrides or {}).get("profile"):
        width = PROFILES[profile]
    try:
        network = NetworkConfig(
            input_dim=len(features), hidden_width=width,
            init_dropout_p=_num(t, "network.init_dropout_p"),
            concrete_temperature=_num(t, "network.concrete_temperature"),
            characteristic_length_sq=_num(t, "network.characteristic_length_sq"),
            init_seed=seed, regularizer_variant=n["regularizer_variant"])
    except ValueError as exc:
        raise ConfigError("network", str(exc)) from None

    tr = t["train"]
    lr_start, lr_end = _num(t, "train.lr_start"), _num(t, "train.lr_end")
    if lr_end is None or lr_end <= 0:
        raise ConfigError("train.lr_end", "must be positive")
    if lr_start is None or lr_start < lr_end:
        raise ConfigError("train.lr_end", f"lr_end ({lr_end}) exceeds lr_start ({lr_start})")
    for key in ("epochs", "batch_size"):
        v = _num(t, f"train.{key}", int)
        if v is None or v < 1:
            raise ConfigError(f"train.{key}", "must be a positive integer")
    if tr["loss_mode"] not in ("heteroscedastic", "mse"):
        raise ConfigError("train.loss_mode", "expected 'heteroscedastic' or 'mse'")
    train = TrainConfig(
        epochs=_num(t, "train.epochs", int), batch_size=_num(t, "train.batch_size", int),
        lr_start=lr_start, lr_end=lr_end, beta1=_num(t, "train.beta1"),
        beta2=_num(t, "train.beta2"), eps=_num(t, "train.eps"), seed=seed,
        loss_mode=tr["loss_mode"],
        early_stopping_patience=_num(t, "train.early_stopping_patience", int))

    passes = _num(t, "mc.passes", int)
    if passes is None or passes < 1:
        raise ConfigError("mc.passes", "must be >= 1")
    if t["mc"]["mask_mode"] not in ("hard", "relaxed", "off"):
        raise ConfigError("mc.mask_mode", "expected 'hard', 'relaxed' or 'off'")
    mc = McConfig(passes=passes, seed=seed, mask_mode=t["mc"]["mask_mode"])

    ev = t["evaluation"]
    nominal = resolve(ev["nominal_curve"]) if ev["nominal_curve"] else None
    if check_paths and nominal is not None and not nominal.exists():
        raise ConfigError("evaluation.nominal_curve", f"file not found: {nominal}")
    sets = [spec(s, f"evaluation.ablation_sets[{i}]") for i, s in enumerate(ev["ablation_sets"])]
    labels = [s.label for s in sets]
    if len(set(labels)) != len(labels):
        raise ConfigError("evaluation.ablation_sets", f"duplicate feature-set labels in {labels}")
    runs = _num(t, "evaluation.ablation_runs", int)
    if runs is None or runs < 1:
        raise ConfigError("evaluation.ablation_runs", "must be >= 1")
    for key in ("bin_width", "power_bin_kw"):
        v = _num(t, f"evaluation.{key}")
        if v is None or v <= 0:
            raise ConfigError(f"evaluation.{key}", "must be positive")

    return RunConfig(
        paths=paths, mapping=mapping, features=features, network=network, train=train, mc=mc,
        fractions=tuple(float(f) for f in fractions), split_mode=d["split"]["mode"],
        output_dir=resolve(t["output_dir"]) if not (overrides or {}).get("output_dir")
        else Path(overrides["output_dir"]),
        seed=seed, sep=d["sep"], row_filter={str(k): str(v) for k, v in (d["row_filter"] or {}).items()},
        start=d["start"], end=d["end"], nominal_curve=nominal,
        bin_width=float(ev["bin_width"]), power_bin_kw=float(ev["power_bin_kw"]),
        ablation_sets=sets, ablation_runs=runs, profile=profile, raw=t)


def load_config(path, overrides: dict | None = None, check_paths: bool = True) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("", f"config file not found: {path}")
    try:
        tree = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError("", f"cannot parse {path}: {exc}") from None
    return build_config(tree, path.parent, overrides, check_paths)


def dump_defaults() -> str:
    return yaml.safe_dump(DEFAULTS, sort_keys=False)


__all__ = ["RunConfig", "ConfigError", "build_config", "load_config", "DEFAULTS", "PROFILES",
           "dump_defaults"]
