"""Dense float64 linear algebra helpers, counter-based random streams and a
central-difference gradient checker.

Matrices are plain ``numpy.ndarray`` objects of dtype float64; the helpers here
only add the shape/finiteness contracts the rest of the package relies on.
"""
from __future__ import annotations

import hashlib
from typing import Callable

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""

    def __init__(self, message: str, *shapes: tuple[int, ...]):
        super().__init__(message)
        self.shapes = shapes


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check and a finiteness guarantee."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply matrices of shapes {a.shape} and {b.shape}",
                         a.shape, b.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite entries in product of {a.shape} and {b.shape}")
    return out


def stream_id(*parts: int | str) -> int:
    """Derive a 64-bit stream id from a tuple of labels (e.g. ``("dropout", epoch, batch)``)."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


class RngStream:
    """Random stream keyed by ``(seed, stream_id)``.

    Backed by the Philox counter-based generator: the key is the pair itself, so
    any stream can be constructed directly without replaying other streams.
    Instances are single-owner; build one per unit of parallel work.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def uniform(self, n: int | tuple[int, ...]) -> np.ndarray:
        """Draws strictly inside (0, 1): 53-bit integers offset by half an ulp."""
        k = self._gen.integers(0, 1 << 53, size=n, dtype=np.int64)
        return (k.astype(np.float64) + 0.5) * (1.0 / (1 << 53))

    def normal(self, n) -> np.ndarray:
        return self._gen.standard_normal(n)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, n=None):
        return self._gen.integers(low, high, size=n)


def uniform(stream: RngStream, n: int) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be non-negative")
    return stream.uniform(n)


def grad_check(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    analytic: np.ndarray,
    h: float = 1e-6,
) -> float:
    """Max relative error between ``analytic`` and central differences of ``f`` at ``x``.

    Relative error per coordinate is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.array(x, dtype=np.float64).ravel()
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    if analytic.shape != x.shape:
        raise ShapeError(f"gradient shape {analytic.shape} does not match point {x.shape}",
                         analytic.shape, x.shape)
    f0 = f(x)
    if not np.isfinite(f0):
        raise FloatingPointError(f"f(x) is not finite ({f0})")
    numeric = np.empty_like(x)
    for i in range(x.size):
        orig = x[i]
        x[i] = orig + h
        fp = f(x)
        x[i] = orig - h
        fm = f(x)
        x[i] = orig
        numeric[i] = (fp - fm) / (2.0 * h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom)) if x.size else 0.0
