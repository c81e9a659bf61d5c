"""Adaptive 3D-aware history sampling.

Frames are visited newest to oldest. A frame is dropped when some already
selected frame is both spatially adjacent (relative-position distance
below ``epsilon_m``) and semantically similar (cosine above ``tau``).
Survivors are max-pooled to one vector; the window is then padded to
``window_w`` by repeating the last selected entry.

``sample_history`` is the production path. ``oracle_sample`` is a plain
list-based transliteration kept only as an equivalence reference.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import SampledHistory, SamplerConfig, Trajectory

__all__ = [
    "RedundancyStats",
    "cosine_similarity",
    "max_pool",
    "oracle_sample",
    "redundancy_stats",
    "sample_history",
]


def max_pool(features: np.ndarray) -> np.ndarray:
    """Reduce a (n_tokens, feat_dim) token matrix to one vector by per-dimension max."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim == 1:
        feats = feats[None, :]
    if feats.ndim != 2 or feats.shape[0] == 0 or feats.shape[1] == 0:
        raise ValueError(f"cannot max-pool an empty token matrix of shape {feats.shape}")
    return feats.max(axis=0)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between ``a`` and ``b``, clamped to [-1, 1].

    Raises:
        ValueError: on length mismatch or if either vector has zero norm.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for a zero-norm vector")
    return min(1.0, max(-1.0, float(np.dot(a, b)) / (na * nb)))


def _dummy_history(cfg: SamplerConfig, feat_dim: int | None) -> SampledHistory:
    w = cfg.window_w
    return SampledHistory(
        features=np.zeros((w, feat_dim or 1)),
        rel_positions=np.zeros((w, 3)),
        source_t=(-1,) * w,
        n_valid=0,
    )


def _pad(
    feats: list[np.ndarray], rels: list[np.ndarray], src: list[int], w: int
) -> SampledHistory:
    n_valid = len(src)
    while len(src) < w:
        feats.append(feats[-1])
        rels.append(rels[-1])
        src.append(src[-1])
    return SampledHistory(
        features=np.stack(feats), rel_positions=np.stack(rels), source_t=tuple(src), n_valid=n_valid
    )


def sample_history(traj: Trajectory, cfg: SamplerConfig) -> SampledHistory:
    """Select up to ``cfg.window_w`` non-redundant frames, newest first.

    The spatial gate is evaluated over all selected entries at once; the
    cosine test only runs for entries that pass it. An empty trajectory
    yields the all-dummy history.
    """
    n = len(traj)
    if n == 0:
        return _dummy_history(cfg, traj.feat_dim)

    w = cfg.window_w
    eps = cfg.epsilon_m
    tau = cfg.tau
    pos = traj.positions()
    ref = pos[-1]
    dim = traj.feat_dim

    sel_v = np.empty((w, dim))
    sel_norm = np.empty(w)
    sel_p = np.empty((w, 3))
    src: list[int] = []

    for i in range(n - 1, -1, -1):
        rel = pos[i] - ref
        k = len(src)
        tokens = traj[i].features
        pooled = tokens.max(axis=0)
        if k:
            d = rel - sel_p[:k]
            dist = np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2])
            near = np.flatnonzero(dist < eps)
            if near.size and _any_similar(tokens, pooled, sel_v, sel_norm, near, tau, cfg):
                continue
        sel_v[k] = pooled
        sel_norm[k] = np.sqrt(pooled @ pooled)
        sel_p[k] = rel
        src.append(traj[i].t)
        if len(src) == w:
            break

    k = len(src)
    feats = list(sel_v[:k])
    rels = list(sel_p[:k])
    return _pad(feats, rels, src, w)


def _any_similar(
    tokens: np.ndarray,
    pooled: np.ndarray,
    sel_v: np.ndarray,
    sel_norm: np.ndarray,
    idx: np.ndarray,
    tau: float,
    cfg: SamplerConfig,
) -> bool:
    # zero-norm operands count as dissimilar (cosine 0)
    cands = pooled[None, :] if cfg.pool_before_compare else tokens
    c_norm = np.sqrt(np.einsum("ij,ij->i", cands, cands))
    ref_v = sel_v[idx]
    denom = c_norm[:, None] * sel_norm[idx][None, :]
    dots = cands @ ref_v.T
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(denom > 0, dots / np.where(denom > 0, denom, 1.0), 0.0)
    cos = np.clip(cos, -1.0, 1.0)
    return bool(np.any(cos > tau))


# ---------------------------------------------------------------------------
# reference implementation


def _oracle_cos(a: list[float], b: list[float]) -> float:
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a, b):
        dot += x * y
        na += x * x
        nb += y * y
    if na == 0.0 or nb == 0.0:
        return 0.0
    c = dot / (math.sqrt(na) * math.sqrt(nb))
    return min(1.0, max(-1.0, c))


def oracle_sample(traj: Trajectory, cfg: SamplerConfig) -> SampledHistory:
    """Straight scan over the selected list for every candidate; no vectorisation."""
    G = traj.observations
    W = cfg.window_w
    if not G:
        return _dummy_history(cfg, traj.feat_dim)

    p_ref = G[-1].position
    V: list[list[float]] = []
    P: list[tuple[float, float, float]] = []
    T: list[int] = []
    k = 0
    for i in range(len(G) - 1, -1, -1):
        g = G[i]
        p_rel = (g.position.x - p_ref.x, g.position.y - p_ref.y, g.position.z - p_ref.z)
        rows = g.features.tolist()
        pooled = [max(col) for col in zip(*rows)]
        if i < len(G) - 1:
            redundant = False
            for j in range(k):
                dx = p_rel[0] - P[j][0]
                dy = p_rel[1] - P[j][1]
                dz = p_rel[2] - P[j][2]
                if not math.sqrt(dx * dx + dy * dy + dz * dz) < cfg.epsilon_m:
                    continue
                if cfg.pool_before_compare:
                    cos = _oracle_cos(pooled, V[j])
                else:
                    cos = max(_oracle_cos(r, V[j]) for r in rows)
                if cos > cfg.tau:
                    redundant = True
                    break
            if redundant:
                continue
        V.append(pooled)
        P.append(p_rel)
        T.append(g.t)
        k += 1
        if k == W:
            break
    n_valid = k
    while k < W:
        V.append(V[-1])
        P.append(P[-1])
        T.append(T[-1])
        k += 1
    return SampledHistory(
        features=np.array(V, dtype=np.float64),
        rel_positions=np.array(P, dtype=np.float64),
        source_t=tuple(T),
        n_valid=n_valid,
    )


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class RedundancyStats:
    n_total: int
    n_selected: int
    n_padded: int
    retained_fraction: float
    n_pairs: int
    min_pairwise_dist_m: float
    mean_pairwise_cos: float

    def to_json(self) -> dict:
        return {
            "n_total": self.n_total,
            "n_selected": self.n_selected,
            "n_padded": self.n_padded,
            "retained_fraction": self.retained_fraction,
            "n_pairs": self.n_pairs,
            "min_pairwise_dist_m": self.min_pairwise_dist_m,
            "mean_pairwise_cos": self.mean_pairwise_cos,
        }


def redundancy_stats(traj: Trajectory, history: SampledHistory) -> RedundancyStats:
    """Counts and pairwise statistics over the non-padded entries of ``history``.

    With fewer than two selected entries there are no pairs; both pairwise
    fields are then 0.0 and ``n_pairs`` is 0.
    """
    n_total = len(traj)
    k = history.n_valid
    dists: list[float] = []
    coss: list[float] = []
    for a, b in itertools.combinations(range(k), 2):
        d = history.rel_positions[a] - history.rel_positions[b]
        dists.append(math.sqrt(float(d @ d)))
        va, vb = history.features[a], history.features[b]
        if np.any(va) and np.any(vb):
            coss.append(cosine_similarity(va, vb))
        else:
            coss.append(0.0)
    return RedundancyStats(
        n_total=n_total,
        n_selected=k,
        n_padded=history.n_padded,
        retained_fraction=k / n_total if n_total else 0.0,
        n_pairs=len(dists),
        min_pairwise_dist_m=min(dists) if dists else 0.0,
        mean_pairwise_cos=math.fsum(coss) / len(coss) if coss else 0.0,
    )
