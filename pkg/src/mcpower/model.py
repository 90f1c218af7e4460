"""Probabilistic MLP with learnable concrete dropout and a log-variance head.

Topology (all hidden layers tanh, ``w`` = hidden width, ``d`` = input dim)::

    x -> h1 (w) -> [gate1] -> h2 (w) -> [gate2] -> h3 (w) -> [gate3] --+
    x -------------------------------------------------------------------+-> concat -> h4 (w) -> [gate4] -> mu (1)
                                                                                                        -> log_var (1)

Each gate multiplies its layer's activations by a per-unit, per-sample mask.
Weights are stored ``(out, in)``; a layer computes ``inputs @ W.T + b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import entr, expit, logit

from .numerics import RngStream, matmul, stream_id

N_HIDDEN = 4
LAYERS = ("h1", "h2", "h3", "h4", "mu", "logvar")
P_MIN, P_MAX = 1e-4, 0.9
LOGIT_MIN, LOGIT_MAX = float(logit(P_MIN)), float(logit(P_MAX))
MASK_MODES = ("relaxed", "hard", "off")


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    hidden_width: int = 1024
    n_hidden: int = N_HIDDEN
    init_dropout_p: float = 0.1
    concrete_temperature: float = 0.1
    characteristic_length_sq: float = 1e-4
    init_seed: int = 0
    # "paper": weight term scaled by p; "reference": scaled by (1 - p)
    regularizer_variant: str = "paper"

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.hidden_width < 1:
            raise ValueError("hidden_width must be >= 1")
        if self.n_hidden != N_HIDDEN:
            raise ValueError(f"n_hidden is fixed at {N_HIDDEN}")
        if not 0 < self.init_dropout_p < 1:
            raise ValueError("init_dropout_p must lie in (0, 1)")
        if not self.concrete_temperature > 0:
            raise ValueError("concrete_temperature must be positive")
        if not self.characteristic_length_sq > 0:
            raise ValueError("characteristic_length_sq must be positive")
        if self.regularizer_variant not in ("paper", "reference"):
            raise ValueError("regularizer_variant must be 'paper' or 'reference'")


def layer_shapes(cfg: NetworkConfig) -> dict[str, tuple[int, int]]:
    w, d = cfg.hidden_width, cfg.input_dim
    return {"h1": (w, d), "h2": (w, w), "h3": (w, w), "h4": (w, w + d), "mu": (1, w), "logvar": (1, w)}


@dataclass
class Network:
    config: NetworkConfig
    weights: dict[str, np.ndarray]
    biases: dict[str, np.ndarray]
    gate_logits: np.ndarray  # shape (4,), p = sigmoid(logit)

    @property
    def dropout_p(self) -> np.ndarray:
        return expit(self.gate_logits)

    def param_arrays(self) -> dict[str, np.ndarray]:
        """Live views of every learnable array, in a fixed order."""
        out = {}
        for name in LAYERS:
            out[f"W_{name}"] = self.weights[name]
            out[f"b_{name}"] = self.biases[name]
        out["gate_logits"] = self.gate_logits
        return out

    def get_flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.param_arrays().values()])

    def set_flat(self, flat: np.ndarray) -> None:
        i = 0
        for a in self.param_arrays().values():
            a[...] = np.reshape(flat[i:i + a.size], a.shape)
            i += a.size
        if i != flat.size:
            raise ValueError(f"flat vector has {flat.size} entries, network has {i}")

    def clamp_gates(self) -> None:
        np.clip(self.gate_logits, LOGIT_MIN, LOGIT_MAX, out=self.gate_logits)

    def copy(self) -> "Network":
        return Network(self.config,
                       {k: v.copy() for k, v in self.weights.items()},
                       {k: v.copy() for k, v in self.biases.items()},
                       self.gate_logits.copy())

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.param_arrays().values())


def init_network(cfg: NetworkConfig) -> Network:
    """Glorot-uniform weights, zero biases, gates at ``init_dropout_p``."""
    weights, biases = {}, {}
    for i, (name, (fan_out, fan_in)) in enumerate(layer_shapes(cfg).items()):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        u = RngStream(cfg.init_seed, stream_id("init", i)).uniform((fan_out, fan_in))
        weights[name] = (2.0 * u - 1.0) * limit
        biases[name] = np.zeros(fan_out)
    gates = np.full(N_HIDDEN, float(logit(cfg.init_dropout_p)))
    net = Network(cfg, weights, biases, gates)
    net.clamp_gates()
    return net


def _mask_from_noise(logit_p: float, u: np.ndarray, mode: str, temperature: float):
    """Returns (mask, relaxed drop variable z) for noise ``u`` in (0, 1)."""
    scale = 1.0 + np.exp(logit_p)  # 1 / (1 - p)
    if mode == "relaxed":
        arg = (logit_p + np.log(u) - np.log1p(-u)) / temperature
        z = expit(arg)
        return expit(-arg) * scale, z
    if mode == "hard":
        p = expit(logit_p)
        return (u >= p) * scale, None
    if mode == "off":
        return np.ones_like(u), None
    raise ValueError(f"unknown mask mode {mode!r}; expected one of {MASK_MODES}")


def sample_concrete_mask(logit_p: float, n, stream: RngStream | None, mode: str = "relaxed",
                         temperature: float = 0.1) -> np.ndarray:
    """Inverted-dropout keep mask for one gate.

    ``relaxed``: (1 - sigmoid((logit p + logit u) / t)) / (1 - p), continuous in p.
    ``hard``: Bernoulli(1 - p) / (1 - p). ``off``: ones.
    """
    if mode == "off":
        return np.ones(n)
    mask, _ = _mask_from_noise(logit_p, stream.uniform(n), mode, temperature)
    return mask


@dataclass
class ForwardTrace:
    mode: str
    x: np.ndarray
    inputs: list[np.ndarray] = field(default_factory=list)  # input to each hidden layer
    acts: list[np.ndarray] = field(default_factory=list)  # tanh outputs h_i
    masks: list[np.ndarray] = field(default_factory=list)
    drop_z: list[np.ndarray | None] = field(default_factory=list)
    noise: list[np.ndarray | None] = field(default_factory=list)
    out: np.ndarray | None = None  # masked h4, input to the heads


def forward(net: Network, x, mode: str = "off", stream: RngStream | None = None,
            noise: list[np.ndarray] | None = None):
    """Returns ``(mu, log_var, trace)``; ``mu`` and ``log_var`` have shape ``(n,)``.

    Masks come from ``noise`` (four uniform arrays of shape ``(n, width)``) when
    given, otherwise from ``stream`` in layer order.
    """
    x = np.asarray(x, dtype=np.float64)
    cfg = net.config
    if x.ndim != 2 or x.shape[1] != cfg.input_dim:
        raise ValueError(f"input has shape {x.shape}, network expects (n, {cfg.input_dim})")
    if mode not in MASK_MODES:
        raise ValueError(f"unknown mask mode {mode!r}; expected one of {MASK_MODES}")
    if mode != "off" and noise is None and stream is None:
        raise ValueError(f"mode {mode!r} needs a random stream or explicit noise")
    n, w = x.shape[0], cfg.hidden_width
    trace = ForwardTrace(mode, x)
    inp = x
    for i, name in enumerate(LAYERS[:N_HIDDEN]):
        if i == 3:
            inp = np.concatenate([inp, x], axis=1)
        h = np.tanh(matmul(inp, net.weights[name].T) + net.biases[name])
        if mode == "off":
            u, m, z = None, np.ones_like(h), None
        else:
            u = noise[i] if noise is not None else stream.uniform((n, w))
            m, z = _mask_from_noise(net.gate_logits[i], u, mode, cfg.concrete_temperature)
        trace.inputs.append(inp)
        trace.acts.append(h)
        trace.masks.append(m)
        trace.drop_z.append(z)
        trace.noise.append(u)
        inp = h * m
    trace.out = inp
    mu = matmul(inp, net.weights["mu"].T)[:, 0] + net.biases["mu"][0]
    log_var = matmul(inp, net.weights["logvar"].T)[:, 0] + net.biases["logvar"][0]
    return mu, log_var, trace


def backward(net: Network, trace: ForwardTrace, dL_dmu, dL_dlogvar) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss given its derivatives w.r.t. the two heads.

    Gate-logit gradients flow through the relaxed masks (pathwise); they are
    zero for ``off`` traces. Keys match :meth:`Network.param_arrays`.
    """
    if trace.mode == "hard":
        raise ValueError("cannot differentiate through hard Bernoulli masks")
    cfg = net.config
    w = cfg.hidden_width
    dmu = np.asarray(dL_dmu, dtype=float).reshape(-1, 1)
    dlv = np.asarray(dL_dlogvar, dtype=float).reshape(-1, 1)
    grads: dict[str, np.ndarray] = {}
    grads["W_mu"] = matmul(dmu.T, trace.out)
    grads["b_mu"] = dmu.sum(axis=0)
    grads["W_logvar"] = matmul(dlv.T, trace.out)
    grads["b_logvar"] = dlv.sum(axis=0)
    d_out = matmul(dmu, net.weights["mu"]) + matmul(dlv, net.weights["logvar"])

    g_logits = np.zeros(N_HIDDEN)
    for i in range(N_HIDDEN - 1, -1, -1):
        name = LAYERS[i]
        h, m = trace.acts[i], trace.masks[i]
        if trace.mode == "relaxed":
            lg = net.gate_logits[i]
            z = trace.drop_z[i]
            keep = 1.0 - z
            scale = 1.0 + np.exp(lg)
            dm_dlogit = -z * keep / cfg.concrete_temperature * scale + keep * np.exp(lg)
            g_logits[i] = np.sum(d_out * h * dm_dlogit)
        da = d_out * m * (1.0 - h * h)
        grads[f"W_{name}"] = matmul(da.T, trace.inputs[i])
        grads[f"b_{name}"] = da.sum(axis=0)
        if i > 0:
            d_in = matmul(da, net.weights[name])
            d_out = d_in[:, :w] if i == 3 else d_in
    grads["gate_logits"] = g_logits
    return {k: grads[k] for k in net.param_arrays()}


def bernoulli_entropy(p):
    """-p ln p - (1 - p) ln(1 - p), zero at the endpoints."""
    p = np.asarray(p, dtype=float)
    return entr(p) + entr(1.0 - p)


def concrete_kl(p: float, weight_sq_norm: float, k: int, length_sq: float, n_train: int,
                variant: str = "paper") -> float:
    """Per-sample dropout KL term: ``[(l^2 c / 2) ||W||^2 - k H(p)] / n_train``.

    ``c`` is ``p`` for the ``paper`` variant and ``1 - p`` for ``reference``.
    """
    coef = p if variant == "paper" else 1.0 - p
    return float((0.5 * length_sq * coef * weight_sq_norm - k * bernoulli_entropy(p)) / n_train)


def _gated_weights(net: Network, i: int) -> list[np.ndarray]:
    """Weight blocks that consume the units gated by gate ``i`` (column slices are views)."""
    w = net.config.hidden_width
    if i < 2:
        return [net.weights[LAYERS[i + 1]]]
    if i == 2:
        return [net.weights["h4"][:, :w]]
    return [net.weights["mu"], net.weights["logvar"]]


def dropout_regularizer(net: Network, layer_index: int, n_train: int) -> float:
    if not 0 <= layer_index < N_HIDDEN:
        raise IndexError(f"gate index {layer_index} out of range")
    if n_train < 1:
        raise ValueError("n_train must be >= 1")
    cfg = net.config
    sq = sum(float(np.sum(W * W)) for W in _gated_weights(net, layer_index))
    p = float(expit(net.gate_logits[layer_index]))
    return concrete_kl(p, sq, cfg.hidden_width, cfg.characteristic_length_sq, n_train,
                       cfg.regularizer_variant)


def regularizer_total(net: Network, n_train: int) -> float:
    return sum(dropout_regularizer(net, i, n_train) for i in range(N_HIDDEN))


def regularizer_grads(net: Network, n_train: int) -> dict[str, np.ndarray]:
    """Gradient of :func:`regularizer_total` for every parameter array."""
    cfg = net.config
    grads = {k: np.zeros_like(v) for k, v in net.param_arrays().items()}
    l2, w = cfg.characteristic_length_sq, cfg.hidden_width
    paper = cfg.regularizer_variant == "paper"
    for i in range(N_HIDDEN):
        lg = float(net.gate_logits[i])
        p = float(expit(lg))
        coef = p if paper else 1.0 - p
        sq = 0.0
        for W in _gated_weights(net, i):
            sq += float(np.sum(W * W))
        if i < 2:
            grads[f"W_{LAYERS[i + 1]}"] += l2 * coef * net.weights[LAYERS[i + 1]] / n_train
        elif i == 2:
            grads["W_h4"][:, :w] += l2 * coef * net.weights["h4"][:, :w] / n_train
        else:
            grads["W_mu"] += l2 * coef * net.weights["mu"] / n_train
            grads["W_logvar"] += l2 * coef * net.weights["logvar"] / n_train
        dp = p * (1.0 - p)
        dcoef = dp if paper else -dp
        # dH/dlogit = -logit * p (1 - p)
        grads["gate_logits"][i] = (0.5 * l2 * sq * dcoef + w * lg * dp) / n_train
    return grads


def with_dropout(net: Network, p: float) -> Network:
    """Copy of ``net`` with every gate set to probability ``p`` (not clamped)."""
    out = net.copy()
    out.gate_logits[:] = float(logit(p))
    return out


def zero_network(cfg: NetworkConfig) -> Network:
    net = init_network(cfg)
    for a in net.param_arrays().values():
        if a is not net.gate_logits:
            a[...] = 0.0
    return net


__all__ = [
    "NetworkConfig", "Network", "ForwardTrace", "init_network", "sample_concrete_mask",
    "forward", "backward", "dropout_regularizer", "regularizer_total", "regularizer_grads",
    "concrete_kl", "bernoulli_entropy", "with_dropout", "zero_network", "layer_shapes",
    "P_MIN", "P_MAX", "LAYERS",
]
