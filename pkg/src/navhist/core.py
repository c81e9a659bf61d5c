"""Domain types and on-disk formats for observation histories.

Trajectories are stored as JSON lines, one observation per line, with an
optional ``{"meta": {...}}`` header on line 1. Sampled histories are a
single JSON object. Floats are written with ``repr`` precision so a
save/load cycle is bit-exact.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

Z_TOLERANCE = 1e-9


class TrajectoryFormatError(ValueError):
    """Raised when a trajectory or history file violates the format."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite position {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @classmethod
    def from_seq(cls, p: Sequence[float]) -> "Position":
        if len(p) != 3:
            raise ValueError(f"position needs 3 coordinates, got {len(p)}")
        return cls(float(p[0]), float(p[1]), float(p[2]))


@dataclass(frozen=True, eq=False)
class Observation:
    """One timestep: feature tokens of shape (n_tokens, feat_dim) plus pose."""

    t: int
    position: Position
    heading_deg: float
    features: np.ndarray
    room_id: str | None = None
    action: str | None = None

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim == 1:
            feats = feats[None, :]
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError(f"feature tokens must be a non-empty matrix, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValueError("feature tokens contain non-finite values")
        if self.t < 0:
            raise ValueError("timestep must be non-negative")
        if not (0.0 <= self.heading_deg < 360.0):
            raise ValueError(f"heading {self.heading_deg} outside [0, 360)")
        object.__setattr__(self, "features", _frozen(feats))

    @property
    def feat_dim(self) -> int:
        return self.features.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Observation):
            return NotImplemented
        return (
            self.t == other.t
            and self.position == other.position
            and self.heading_deg == other.heading_deg
            and self.room_id == other.room_id
            and self.action == other.action
            and self.features.shape == other.features.shape
            and bool(np.array_equal(self.features, other.features))
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Chronological observation queue; index 0 is the oldest frame.

    ``feat_dim`` only matters for empty trajectories, where it sizes the
    dummy history. For non-empty ones it is inferred and checked.
    """

    observations: tuple[Observation, ...] = ()
    meta: Mapping[str, str] = field(default_factory=dict)
    feat_dim: int | None = None

    def __post_init__(self) -> None:
        obs = tuple(self.observations)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "meta", dict(self.meta))
        if not obs:
            return
        dim = obs[0].feat_dim
        if self.feat_dim is not None and self.feat_dim != dim:
            raise ValueError(f"declared feat_dim {self.feat_dim} != observed {dim}")
        object.__setattr__(self, "feat_dim", dim)
        z0 = obs[0].position.z
        for k, o in enumerate(obs):
            if o.t != k:
                raise ValueError(f"non-contiguous timestep {o.t} at index {k}")
            if o.feat_dim != dim:
                raise ValueError(f"varying feat_dim at t={o.t}")
            if abs(o.position.z - z0) > Z_TOLERANCE:
                raise ValueError(f"non-constant height at t={o.t}")

    def __len__(self) -> int:
        return len(self.observations)

    def __getitem__(self, i: int) -> Observation:
        return self.observations[i]

    def __iter__(self):
        return iter(self.observations)

    def positions(self) -> np.ndarray:
        """(n, 3) array of absolute positions."""
        return np.array(
            [(o.position.x, o.position.y, o.position.z) for o in self.observations],
            dtype=np.float64,
        ).reshape(len(self.observations), 3)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.meta == other.meta
            and self.feat_dim == other.feat_dim
            and self.observations == other.observations
        )


@dataclass(frozen=True)
class SamplerConfig:
    window_w: int = 60
    epsilon_m: float = 0.1
    tau: float = 0.95
    pool_before_compare: bool = True

    def __post_init__(self) -> None:
        if int(self.window_w) != self.window_w or self.window_w < 1:
            raise ValueError(f"window_w must be a positive integer, got {self.window_w}")
        if not math.isfinite(self.epsilon_m) or self.epsilon_m < 0:
            raise ValueError(f"epsilon_m must be finite and >= 0, got {self.epsilon_m}")
        if not math.isfinite(self.tau) or not -1.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [-1, 1], got {self.tau}")


@dataclass(frozen=True, eq=False)
class SampledHistory:
    """Fixed-length window of pooled features with positions relative to the newest frame.

    Entries ``0..n_valid-1`` are selected frames, newest first. The rest
    replicate the last valid entry. An all-dummy history has ``n_valid == 0``
    and ``source_t`` filled with -1.
    """

    features: np.ndarray
    rel_positions: np.ndarray
    source_t: tuple[int, ...]
    n_valid: int

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        rel = np.asarray(self.rel_positions, dtype=np.float64)
        src = tuple(int(s) for s in self.source_t)
        w = len(src)
        if w < 1:
            raise ValueError("history window must be >= 1")
        if feats.ndim != 2 or feats.shape[0] != w:
            raise ValueError(f"features shape {feats.shape} does not match window {w}")
        if rel.shape != (w, 3):
            raise ValueError(f"rel_positions shape {rel.shape} does not match window {w}")
        if not 0 <= self.n_valid <= w:
            raise ValueError(f"n_valid {self.n_valid} outside [0, {w}]")
        object.__setattr__(self, "features", _frozen(feats))
        object.__setattr__(self, "rel_positions", _frozen(rel))
        object.__setattr__(self, "source_t", src)

    @property
    def window_w(self) -> int:
        return len(self.source_t)

    @property
    def n_padded(self) -> int:
        return self.window_w - self.n_valid if self.n_valid else 0

    def __len__(self) -> int:
        return self.window_w

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampledHistory):
            return NotImplemented
        return (
            self.n_valid == other.n_valid
            and self.source_t == other.source_t
            and self.features.shape == other.features.shape
            and bool(np.array_equal(self.features, other.features))
            and bool(np.array_equal(self.rel_positions, other.rel_positions))
        )

    def to_json(self) -> dict:
        return {
            "w": self.window_w,
            "n_valid": self.n_valid,
            "source_t": list(self.source_t),
            "rel_positions": self.rel_positions.tolist(),
            "features": self.features.tolist(),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "SampledHistory":
        try:
            hist = cls(
                features=np.array(obj["features"], dtype=np.float64),
                rel_positions=np.array(obj["rel_positions"], dtype=np.float64),
                source_t=tuple(obj["source_t"]),
                n_valid=int(obj["n_valid"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TrajectoryFormatError(f"invalid sampled history: {exc}") from exc
        if int(obj["w"]) != hist.window_w:
            raise TrajectoryFormatError(f"w={obj['w']} but {hist.window_w} entries present")
        return hist


@dataclass(frozen=True)
class Episode:
    success: bool
    shortest_len: float
    episode_len: float
    rooms_visited: frozenset[str] = frozenset()
    total_rooms: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "rooms_visited", frozenset(self.rooms_visited))
        if self.total_rooms < 1:
            raise ValueError("total_rooms must be >= 1")
        if len(self.rooms_visited) > self.total_rooms:
            raise ValueError(
                f"{len(self.rooms_visited)} rooms visited exceeds total_rooms={self.total_rooms}"
            )

    def to_json(self) -> dict:
        return {
            "success": bool(self.success),
            "w": self.shortest_len,
            "e": self.episode_len,
            "rooms_visited": sorted(self.rooms_visited),
            "total_rooms": self.total_rooms,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Episode":
        return cls(
            success=bool(obj["success"]),
            shortest_len=obj["w"],
            episode_len=obj["e"],
            rooms_visited=frozenset(obj.get("rooms_visited", ())),
            total_rooms=int(obj["total_rooms"]),
        )


# ---------------------------------------------------------------------------
# file I/O


def observation_to_json(o: Observation) -> dict:
    return {
        "t": o.t,
        "p": [o.position.x, o.position.y, o.position.z],
        "heading_deg": o.heading_deg,
        "feature": o.features.tolist(),
        "room_id": o.room_id,
        "action": o.action,
    }


def _parse_observation(rec: Mapping, lineno: int) -> Observation:
    try:
        return Observation(
            t=int(rec["t"]),
            position=Position.from_seq([float(v) for v in rec["p"]]),
            heading_deg=float(rec["heading_deg"]),
            features=np.array(rec["feature"], dtype=np.float64),
            room_id=rec.get("room_id"),
            action=rec.get("action"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TrajectoryFormatError(f"malformed observation at line {lineno}: {exc}") from exc


def load_trajectory(path: str | os.PathLike) -> Trajectory:
    """Read a JSON-lines trajectory file, validating every invariant.

    Errors name the offending line number (1-based, header included).
    """
    meta: dict[str, str] = {}
    feat_dim: int | None = None
    observations: list[Observation] = []
    z0: float | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TrajectoryFormatError(f"malformed line {lineno}: {exc.msg}") from exc
            if not isinstance(rec, dict):
                raise TrajectoryFormatError(f"malformed line {lineno}: expected an object")
            if "meta" in rec:
                if lineno != 1:
                    raise TrajectoryFormatError(f"meta header must be line 1, found at line {lineno}")
                meta = {str(k): str(v) for k, v in rec["meta"].items()}
                if "feat_dim" in meta:
                    feat_dim = int(meta["feat_dim"])
                continue
            obs = _parse_observation(rec, lineno)
            if obs.t != len(observations):
                raise TrajectoryFormatError(f"non-contiguous timestep at line {lineno}")
            if z0 is None:
                z0 = obs.position.z
            elif abs(obs.position.z - z0) > Z_TOLERANCE:
                raise TrajectoryFormatError(f"non-constant height at line {lineno}")
            if feat_dim is None:
                feat_dim = obs.feat_dim
            elif obs.feat_dim != feat_dim:
                raise TrajectoryFormatError(
                    f"varying feat_dim at line {lineno}: {obs.feat_dim} != {feat_dim}"
                )
            observations.append(obs)
    return Trajectory(tuple(observations), meta=meta, feat_dim=feat_dim)


def dump_trajectory_lines(traj: Trajectory) -> Iterable[str]:
    meta = dict(traj.meta)
    if not traj.observations and traj.feat_dim is not None:
        meta.setdefault("feat_dim", str(traj.feat_dim))
    if meta:
        yield json.dumps({"meta": meta}, sort_keys=True)
    for o in traj.observations:
        yield json.dumps(observation_to_json(o))


def save_trajectory(traj: Trajectory, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in dump_trajectory_lines(traj):
            fh.write(line + "\n")


def save_sampled(history: SampledHistory, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(history.to_json(), fh)
        fh.write("\n")


def load_sampled(path: str | os.PathLike) -> SampledHistory:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TrajectoryFormatError(f"malformed sampled history: {exc.msg}") from exc
    return SampledHistory.from_json(obj)


def load_episodes(path: str | os.PathLike) -> list[Episode]:
    episodes = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                episodes.append(Episode.from_json(json.loads(line)))
            except (KeyError, TypeError, ValueError) as exc:
                raise TrajectoryFormatError(f"malformed episode at line {lineno}: {exc}") from exc
    return episodes


def save_episodes(episodes: Iterable[Episode], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ep in episodes:
            fh.write(json.dumps(ep.to_json()) + "\n")
