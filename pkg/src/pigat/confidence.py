"""Additive confidence vectors for neighbor windows.

A neighbor at window position l out of L live slots gets a vector added
to its embedding before attention. The recency-decay surface makes that
vector's scale grow exponentially toward the most recent slot, encoding
"recent interactions say more about the current interest". Variants:

  none  zero vectors (baseline)
  pe    classic sinusoidal position encoding, frozen
  fce   the recency-decay surface, frozen
  rce   small random vectors, trainable
  ce    the recency-decay surface as initialization, trainable

Vectors live in a (k, k, width) tensor indexed by [L-1, l-1]; only the
l <= L triangle is ever applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError

Array = np.ndarray

VARIANTS = ("none", "pe", "fce", "rce", "ce")


def recency_profile(k: int, width: int) -> Array:
    """Fixed decay-times-cosine surface.

    Entry [L-1, l-1, i] is exp(l - L - 1) * cos(i * pi / width) with
    1-based l and L; positions beyond L stay zero.
    """
    cos_vec = np.cos(np.arange(width) * np.pi / width)
    out = np.zeros((k, k, width))
    for live in range(1, k + 1):
        decay = np.exp(np.arange(1, live + 1) - live - 1.0)
        out[live - 1, :live] = decay[:, None] * cos_vec[None, :]
    return out


def positional_profile(k: int, width: int) -> Array:
    """Sinusoidal position encoding, identical for every live length."""
    pos = np.arange(k, dtype=np.float64)[:, None]
    j = np.arange(width)
    angle = pos / np.power(10000.0, (j - (j % 2)) / width)
    row = np.where(j % 2 == 0, np.sin(angle), np.cos(angle))
    return np.broadcast_to(row, (k, k, width)).copy()


@dataclass
class ConfidenceTable:
    variant: str
    rows: Array  # (k, k, width)
    trainable: bool
    grad: Array | None = None

    @property
    def window(self) -> int:
        return self.rows.shape[0]

    @property
    def width(self) -> int:
        return self.rows.shape[2]


def build_confidence(
    variant: str, k: int, width: int, rng: np.random.Generator | None = None
) -> ConfidenceTable:
    if variant not in VARIANTS:
        raise DomainError(f"unknown confidence variant {variant!r}, expected one of {VARIANTS}")
    if k < 1 or width < 1:
        raise DomainError(f"window {k} and width {width} must be positive")
    if variant == "none":
        rows, trainable = np.zeros((k, k, width)), False
    elif variant == "pe":
        rows, trainable = positional_profile(k, width), False
    elif variant == "fce":
        rows, trainable = recency_profile(k, width), False
    elif variant == "rce":
        if rng is None:
            raise DomainError("rce needs a random generator")
        rows, trainable = rng.uniform(-0.01, 0.01, size=(k, k, width)), True
    else:  # ce: recency-initialized, then learned
        rows, trainable = recency_profile(k, width), True
    grad = np.zeros_like(rows) if trainable else None
    return ConfidenceTable(variant, rows, trainable, grad)


def live_lengths(mask: Array) -> Array:
    return np.asarray(mask, dtype=bool).sum(axis=-1).astype(np.int64)


def apply_confidence(table: ConfidenceTable, neighbors: Array, mask: Array) -> Array:
    """Add the (l, L) vector to each live neighbor slot.

    neighbors is (..., k, width) with live slots first; dead slots pass
    through untouched. Live length L is read off the mask.
    """
    neighbors = np.asarray(neighbors, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if neighbors.shape[-1] != table.width:
        raise ShapeError(
            f"neighbor width {neighbors.shape[-1]} != confidence width {table.width}"
        )
    if neighbors.shape[:-1] != mask.shape or mask.shape[-1] != table.window:
        raise ShapeError(
            f"mask {mask.shape} does not match neighbors {neighbors.shape} "
            f"with window {table.window}"
        )
    lengths = live_lengths(mask)
    rows = table.rows[np.maximum(lengths - 1, 0)]  # (..., k, width)
    return neighbors + np.where(mask[..., None], rows, 0.0)


def scatter_confidence_gradient(table: ConfidenceTable, mask: Array, upstream: Array) -> None:
    """Accumulate d(loss)/d(rows) given the grad flowing into the addition."""
    if not table.trainable:
        return
    mask = np.asarray(mask, dtype=bool)
    contrib = np.where(mask[..., None], upstream, 0.0)
    idx = np.maximum(live_lengths(mask) - 1, 0)
    if contrib.ndim == 2:  # single instance
        table.grad[idx] += contrib
    else:
        np.add.at(table.grad, idx, contrib)


def zero_confidence_gradient(table: ConfidenceTable) -> None:
    if table.grad is not None:
        table.grad[...] = 0.0
