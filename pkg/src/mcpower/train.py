"""Heteroscedastic NLL + concrete-dropout objective, Adam, training loop and checkpoints."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .data import ColumnMapping, FeatureSpec, SplitDataset, Standardizer
from .model import (
    LAYERS,
    Network,
    NetworkConfig,
    backward,
    forward,
    init_network,
    regularizer_grads,
    regularizer_total,
)
from .numerics import RngStream, stream_id

log = logging.getLogger(__name__)

LOSS_MODES = ("heteroscedastic", "mse")


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch: int, batch: int, detail: str = ""):
        super().__init__(f"training diverged at epoch {epoch}, batch {batch}" + (f": {detail}" if detail else ""))
        self.epoch, self.batch = epoch, batch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 256
    lr_start: float = 1e-3
    lr_end: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    loss_mode: str = "heteroscedastic"
    early_stopping_patience: int | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.lr_end > 0:
            raise ValueError("lr_end must be positive")
        if self.lr_start < self.lr_end:
            raise ValueError("lr_start must be >= lr_end")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")


def heteroscedastic_nll(y, mu, s):
    """Gaussian NLL parametrized by log-variance ``s``: ``0.5 (exp(-s) (y - mu)^2 + s)``.

    Returns ``(mean, per_sample)``.
    """
    y, mu, s = (np.asarray(a, dtype=float) for a in (y, mu, s))
    if not (y.shape == mu.shape == s.shape):
        raise ValueError(f"length mismatch: {y.shape}, {mu.shape}, {s.shape}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(s))):
        raise FloatingPointError("non-finite input to heteroscedastic_nll")
    per = 0.5 * (np.exp(-s) * (y - mu) ** 2 + s)
    return float(per.mean()), per


def _nll_head_grads(y, mu, s):
    n = len(y)
    r = y - mu
    inv = np.exp(-s)
    return -inv * r / n, 0.5 * (1.0 - inv * r * r) / n


def loss_and_grads(net: Network, x, y, n_train: int, loss_mode: str = "heteroscedastic",
                   stream: RngStream | None = None, noise=None):
    """One-sample Monte-Carlo estimate of the objective and its exact gradient.

    ``heteroscedastic``: NLL over one relaxed-dropout pass plus the dropout KL
    terms. ``mse``: mean squared error with dropout off, no KL and a frozen
    log-variance head.
    """
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise ValueError("empty batch")
    if loss_mode == "mse":
        mu, s, trace = forward(net, x, "off")
        r = y - mu
        loss = float(np.mean(r * r))
        grads = backward(net, trace, -2.0 * r / len(y), np.zeros_like(s))
        return loss, grads
    mu, s, trace = forward(net, x, "relaxed", stream=stream, noise=noise)
    nll, _ = heteroscedastic_nll(y, mu, s)
    loss = nll + regularizer_total(net, n_train)
    grads = backward(net, trace, *_nll_head_grads(y, mu, s))
    for k, g in regularizer_grads(net, n_train).items():
        grads[k] += g
    return loss, grads


def total_loss(net: Network, x, y, n_train: int, loss_mode: str = "heteroscedastic",
               stream: RngStream | None = None, noise=None) -> float:
    return loss_and_grads(net, x, y, n_train, loss_mode, stream, noise)[0]


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Geometric decay from ``lr_start`` (first epoch) to ``lr_end`` (last epoch)."""
    if not 0 <= epoch < config.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {config.epochs})")
    if config.epochs == 1 or epoch == 0:
        return config.lr_start
    if epoch == config.epochs - 1:
        return config.lr_end
    return config.lr_start * (config.lr_end / config.lr_start) ** (epoch / (config.epochs - 1))


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(a) for k, a in params.items()},
                   {k: np.zeros_like(a) for k, a in params.items()})


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Bias-corrected Adam update, applied in place. Returns ``(params, state)``."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {k} has shape {g.shape}, parameter {p.shape}")
        m, v = state.m[k], state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


@dataclass
class TrainHistory:
    rows: list[dict] = field(default_factory=list)
    n_steps: int = 0

    def to_frame(self) -> pd.DataFrame:
        cols = ["epoch", "loss", "val_nll", "val_mae", "lr", "p_1", "p_2", "p_3", "p_4"]
        return pd.DataFrame(self.rows, columns=cols)

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.10g")

    def __len__(self) -> int:
        return len(self.rows)


def evaluate_offline(net: Network, x, y) -> tuple[float, float]:
    """Validation NLL and MAE from a deterministic (dropout-off) pass."""
    mu, s, _ = forward(net, x, "off")
    nll, _ = heteroscedastic_nll(y, mu, s)
    return nll, float(np.mean(np.abs(y - mu)))


def train(split: SplitDataset, net_config: NetworkConfig, config: TrainConfig,
          net: Network | None = None, callback=None) -> tuple[Network, TrainHistory]:
    """Minibatch Adam on standardized data. Returns the final-epoch network.

    Batch order and dropout noise come from ``config.seed`` via per-(epoch, batch)
    streams, so reruns are bit-identical. ``callback(epoch, net)`` runs after
    every epoch.
    """
    x, y = split.x_train, split.y_train
    n = len(y)
    if n == 0 or len(split.y_val) == 0:
        raise ValueError("train and validation splits must be non-empty")
    net = init_network(net_config) if net is None else net
    params = net.param_arrays()
    state = AdamState.zeros_like(params)
    history = TrainHistory()
    best = (math.inf, None)
    stale = 0
    for epoch in range(config.epochs):
        lr = lr_at(epoch, config)
        order = RngStream(config.seed, stream_id("shuffle", epoch)).permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            stream = RngStream(config.seed, stream_id("dropout", epoch, b))
            try:
                loss, grads = loss_and_grads(net, x[idx], y[idx], n, config.loss_mode, stream)
            except FloatingPointError as exc:
                raise TrainingDiverged(epoch, b, str(exc)) from exc
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch, b, f"loss = {loss}")
            adam_step(params, grads, state, lr, config.beta1, config.beta2, config.eps)
            net.clamp_gates()
            history.n_steps += 1
            total += loss * len(idx)
        try:
            val_nll, val_mae = evaluate_offline(net, split.x_val, split.y_val)
        except FloatingPointError as exc:
            raise TrainingDiverged(epoch, -1, f"validation: {exc}") from exc
        p = net.dropout_p
        history.rows.append({"epoch": epoch, "loss": total / n, "val_nll": val_nll,
                             "val_mae": val_mae, "lr": lr, "p_1": p[0], "p_2": p[1],
                             "p_3": p[2], "p_4": p[3]})
        if callback is not None:
            callback(epoch, net)
        log.debug("epoch %d loss %.5f val_nll %.5f val_mae %.5f", epoch, total / n, val_nll, val_mae)
        if config.early_stopping_patience is not None:
            if val_nll < best[0]:
                best, stale = (val_nll, net.copy()), 0
            else:
                stale += 1
                if stale >= config.early_stopping_patience:
                    log.info("early stop at epoch %d", epoch)
                    net = best[1]
                    break
    return net, history


# ---------------------------------------------------------------------------
# checkpoints
#
# layout: MAGIC(8) | version u16 | total_len u64 | header_len u32 | header JSON
#         | float64 LE parameters in Network.param_arrays order | sha256(32)

MAGIC = b"MCPWRCKP"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sHQI")


class CheckpointError(Exception):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ChecksumError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    network: Network
    standardizer: Standardizer
    feature_spec: FeatureSpec
    mapping: ColumnMapping | None = None
    meta: dict = field(default_factory=dict)  # seed, epoch, loss_mode, ...


def checkpoint_bytes(ckpt: Checkpoint, version: int = FORMAT_VERSION) -> bytes:
    net = ckpt.network
    arrays = net.param_arrays()
    header = {
        "network_config": dataclasses.asdict(net.config),
        "standardizer": ckpt.standardizer.to_dict(),
        "feature_spec": list(ckpt.feature_spec.names),
        "mapping": ckpt.mapping.to_dict() if ckpt.mapping is not None else None,
        "meta": ckpt.meta,
        "layout": [[k, list(a.shape)] for k, a in arrays.items()],
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays.values())
    total = _PREFIX.size + len(hbytes) + len(body) + 32
    head = _PREFIX.pack(MAGIC, version, total, len(hbytes))
    blob = head + hbytes + body
    return blob + hashlib.sha256(blob).digest()


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(ckpt))


def parse_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < _PREFIX.size:
        raise TruncatedCheckpointError(f"checkpoint is {len(data)} bytes, shorter than its header")
    magic, version, total, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic bytes)")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})")
    if len(data) < total:
        raise TruncatedCheckpointError(f"checkpoint truncated: {len(data)} of {total} bytes")
    if len(data) > total:
        raise CheckpointError(f"{len(data) - total} unexpected trailing bytes")
    if hashlib.sha256(data[:-32]).digest() != data[-32:]:
        raise ChecksumError("checkpoint checksum mismatch (file corrupted)")
    header = json.loads(data[_PREFIX.size:_PREFIX.size + hlen])
    net = init_network(NetworkConfig(**header["network_config"]))
    arrays = net.param_arrays()
    offset = _PREFIX.size + hlen
    for name, shape in header["layout"]:
        a = arrays[name]
        if list(a.shape) != shape:
            raise CheckpointError(f"parameter {name} has shape {shape}, expected {list(a.shape)}")
        a[...] = np.frombuffer(data, dtype="<f8", count=a.size, offset=offset).reshape(a.shape)
        offset += a.size * 8
    if offset != len(data) - 32:
        raise CheckpointError("parameter block size does not match layout")
    mapping = header.get("mapping")
    return Checkpoint(
        network=net,
        standardizer=Standardizer.from_dict(header["standardizer"]),
        feature_spec=FeatureSpec(tuple(header["feature_spec"])),
        mapping=ColumnMapping.from_dict(mapping) if mapping else None,
        meta=header.get("meta", {}),
    )


def load_checkpoint(path) -> Checkpoint:
    return parse_checkpoint(Path(path).read_bytes())


__all__ = [
    "TrainConfig", "TrainHistory", "AdamState", "TrainingDiverged", "heteroscedastic_nll",
    "loss_and_grads", "total_loss", "lr_at", "adam_step", "train", "evaluate_offline",
    "Checkpoint", "save_checkpoint", "load_checkpoint", "parse_checkpoint", "checkpoint_bytes",
    "CheckpointError", "UnsupportedVersionError", "TruncatedCheckpointError", "ChecksumError",
    "LAYERS",
]
