"""Axis-separated sinusoidal encoding of planar positions.

Each axis gets a length ``d = c/2`` vector of interleaved ``sin``/``cos``
pairs; the x and y vectors are concatenated to length ``c`` so the result
can be added directly to a ``c``-dimensional feature. Height is ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Position


@dataclass(frozen=True)
class PosEncConfig:
    feat_dim: int
    base: float = 10000.0

    def __post_init__(self) -> None:
        if self.feat_dim < 4 or self.feat_dim % 4:
            raise ValueError(
                f"feat_dim must be a positive multiple of 4 (c even, c/2 even), got {self.feat_dim}"
            )
        if not (math.isfinite(self.base) and self.base > 0):
            raise ValueError(f"base must be finite and positive, got {self.base}")

    @property
    def axis_dim(self) -> int:
        return self.feat_dim // 2


@dataclass(frozen=True, eq=False)
class AffineFusion:
    """``weight @ x + bias``; identity when constructed via :meth:`identity`."""

    weight: np.ndarray
    bias: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        w = np.asarray(self.weight, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"weight must be square, got shape {w.shape}")
        b = np.zeros(w.shape[0]) if self.bias is None else np.asarray(self.bias, dtype=np.float64)
        if b.shape != (w.shape[0],):
            raise ValueError(f"bias shape {b.shape} does not match weight {w.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("fusion parameters must be finite")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @classmethod
    def identity(cls, c: int) -> "AffineFusion":
        return cls(np.eye(c), np.zeros(c))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.weight @ x + self.bias


def frequencies(cfg: PosEncConfig) -> np.ndarray:
    """omega_k = exp(-2k ln(base) / d) for k = 0 .. d/2 - 1."""
    d = cfg.axis_dim
    k = np.arange(d // 2, dtype=np.float64)
    return np.exp(-2.0 * k * math.log(cfg.base) / d)


def encode_axis(v: float, cfg: PosEncConfig) -> np.ndarray:
    if not math.isfinite(v):
        raise ValueError(f"cannot encode non-finite coordinate {v}")
    omega = frequencies(cfg)
    out = np.empty(cfg.axis_dim)
    out[0::2] = np.sin(v * omega)
    out[1::2] = np.cos(v * omega)
    return out


def encode_2d(x: float, y: float, cfg: PosEncConfig) -> np.ndarray:
    return np.concatenate([encode_axis(x, cfg), encode_axis(y, cfg)])


def fuse_position(
    feature: np.ndarray,
    rel_pos: Position,
    cfg: PosEncConfig,
    fusion: AffineFusion | None = None,
) -> np.ndarray:
    """Add the encoding of ``rel_pos`` (x, y only) to ``feature`` and apply ``fusion``."""
    feature = np.asarray(feature, dtype=np.float64)
    if feature.shape != (cfg.feat_dim,):
        raise ValueError(f"feature shape {feature.shape} != ({cfg.feat_dim},)")
    if fusion is None:
        fusion = AffineFusion.identity(cfg.feat_dim)
    elif fusion.weight.shape[0] != cfg.feat_dim:
        raise ValueError(f"fusion size {fusion.weight.shape[0]} != feat_dim {cfg.feat_dim}")
    return fusion(feature + encode_2d(rel_pos.x, rel_pos.y, cfg))


def position_enhanced(
    features: np.ndarray, rel_positions: np.ndarray, cfg: PosEncConfig, fusion: AffineFusion | None = None
) -> np.ndarray:
    """Row-wise :func:`fuse_position` over a sampled window."""
    return np.stack(
        [
            fuse_position(f, Position.from_seq(p), cfg, fusion)
            for f, p in zip(np.asarray(features), np.asarray(rel_positions))
        ]
    )
