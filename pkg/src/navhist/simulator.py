"""Deterministic grid-world houses and scripted trajectories.

Houses are square occupancy grids with 0.2 m cells, partitioned into
rectangular rooms by a binary space partition. Each partition wall gets
one doorway, so every free cell is reachable. Observations carry smooth
synthetic features: nearby poses with similar headings produce nearly
parallel vectors, distant poses decorrelate.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import Episode, Observation, Position, Trajectory

CELL_SIZE_M = 0.2
HEIGHT_M = 0.9
SUCCESS_RADIUS_M = 2.0
MIN_ROOM_CELLS = 3

POLICIES = ("revisit_loop", "random_walk", "shortest_path")
TARGET_CATEGORIES = ("laptop", "vase", "apple", "bed", "sofa", "television", "chair", "toilet")

Cell = tuple[int, int]

# (dx, dy) -> heading in degrees
_MOVES: tuple[tuple[int, int, float], ...] = ((1, 0, 0.0), (0, 1, 90.0), (-1, 0, 180.0), (0, -1, 270.0))


@dataclass(frozen=True)
class Room:
    label: str
    x0: int
    y0: int
    x1: int  # exclusive
    y1: int  # exclusive

    def contains(self, cell: Cell) -> bool:
        return self.x0 <= cell[0] < self.x1 and self.y0 <= cell[1] < self.y1


@dataclass(frozen=True, eq=False)
class House:
    """Occupancy grid indexed ``grid[ix, iy]`` (True = free) with labelled rooms.

    ``room_map`` holds the room index of every free cell (doorways belong to
    the room on their lower-coordinate side) and -1 for walls.
    """

    grid: np.ndarray
    rooms: tuple[Room, ...]
    room_map: np.ndarray
    seed: int = 0

    @classmethod
    def open(cls, nx: int, ny: int, label: str = "room_0") -> "House":
        grid = np.ones((nx, ny), dtype=bool)
        return cls(grid, (Room(label, 0, 0, nx, ny),), np.zeros((nx, ny), dtype=int))

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def is_free(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.grid.shape[0] and 0 <= y < self.grid.shape[1] and bool(self.grid[x, y])

    def neighbors(self, cell: Cell) -> list[tuple[Cell, float]]:
        out = []
        for dx, dy, heading in _MOVES:
            nxt = (cell[0] + dx, cell[1] + dy)
            if self.is_free(nxt):
                out.append((nxt, heading))
        return out

    def room_of(self, cell: Cell) -> str:
        idx = int(self.room_map[cell])
        if idx < 0:
            raise ValueError(f"cell {cell} is a wall")
        return self.rooms[idx].label

    def bfs(self, start: Cell) -> dict[Cell, Cell | None]:
        """Breadth-first parent map over free cells reachable from ``start``."""
        parent: dict[Cell, Cell | None] = {start: None}
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            for nxt, _ in self.neighbors(cur):
                if nxt not in parent:
                    parent[nxt] = cur
                    queue.append(nxt)
        return parent

    def shortest_path(self, start: Cell, goal: Cell) -> list[Cell]:
        parent = self.bfs(start)
        if goal not in parent:
            raise ValueError(f"goal {goal} unreachable from {start}")
        path = [goal]
        while path[-1] != start:
            path.append(parent[path[-1]])  # type: ignore[arg-type]
        return path[::-1]

    def free_cells(self) -> list[Cell]:
        return [(int(x), int(y)) for x, y in zip(*np.nonzero(self.grid))]

    def is_connected(self) -> bool:
        cells = self.free_cells()
        return bool(cells) and len(self.bfs(cells[0])) == len(cells)

    def to_json(self) -> dict:
        return {
            "shape": list(self.grid.shape),
            "cell_size_m": CELL_SIZE_M,
            "seed": self.seed,
            "grid_rle": _rle(self.grid.astype(int).ravel().tolist()),
            "room_map_rle": _rle(self.room_map.ravel().tolist()),
            "rooms": [[r.label, r.x0, r.y0, r.x1, r.y1] for r in self.rooms],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "House":
        shape = tuple(obj["shape"])
        grid = np.array(_unrle(obj["grid_rle"]), dtype=bool).reshape(shape)
        room_map = np.array(_unrle(obj["room_map_rle"]), dtype=int).reshape(shape)
        rooms = tuple(Room(r[0], *r[1:]) for r in obj["rooms"])
        return cls(grid, rooms, room_map, int(obj.get("seed", 0)))


def _rle(values: list[int]) -> list[list[int]]:
    runs: list[list[int]] = []
    for v in values:
        if runs and runs[-1][0] == v:
            runs[-1][1] += 1
        else:
            runs.append([v, 1])
    return runs


def _unrle(runs: list[list[int]]) -> list[int]:
    out: list[int] = []
    for v, n in runs:
        out.extend([v] * n)
    return out


def cell_position(cell: Cell) -> Position:
    return Position(cell[0] * CELL_SIZE_M, cell[1] * CELL_SIZE_M, HEIGHT_M)


# ---------------------------------------------------------------------------
# house generation


def _split_options(rect, axis: int, doors: list[Cell]) -> list[int]:
    x0, y0, x1, y1 = rect
    lo, hi = (x0, x1) if axis == 0 else (y0, y1)
    opts = []
    for s in range(lo + MIN_ROOM_CELLS, hi - MIN_ROOM_CELLS):
        blocked = False
        for dx, dy in doors:
            # a new wall must not end right next to an existing doorway
            if axis == 0 and dx == s and (dy == y0 - 1 or dy == y1):
                blocked = True
            if axis == 1 and dy == s and (dx == x0 - 1 or dx == x1):
                blocked = True
        if not blocked:
            opts.append(s)
    return opts


def generate_house(seed: int, n_rooms: int, extent_m: float) -> House:
    """Partition a square of side ``extent_m`` into ``n_rooms`` connected rooms.

    Raises:
        ValueError: if ``n_rooms < 1`` or the extent cannot hold that many
            rooms of at least 3x3 cells.
    """
    if n_rooms < 1:
        raise ValueError("n_rooms must be >= 1")
    n = int(round(extent_m / CELL_SIZE_M))
    if n < MIN_ROOM_CELLS:
        raise ValueError(f"infeasible: extent {extent_m} m too small for a single room")
    rng = np.random.default_rng(seed)
    grid = np.ones((n, n), dtype=bool)
    leaves: list[tuple[int, int, int, int]] = [(0, 0, n, n)]
    doors: list[Cell] = []

    while len(leaves) < n_rooms:
        # split the largest splittable leaf; ties resolved by list order
        order = sorted(range(len(leaves)), key=lambda i: -_area(leaves[i]))
        for li in order:
            rect = leaves[li]
            w, h = rect[2] - rect[0], rect[3] - rect[1]
            axes = (0, 1) if w > h or (w == h and rng.random() < 0.5) else (1, 0)
            done = False
            for axis in axes:
                opts = _split_options(rect, axis, doors)
                if not opts:
                    continue
                s = int(opts[rng.integers(len(opts))])
                x0, y0, x1, y1 = rect
                if axis == 0:
                    grid[s, y0:y1] = False
                    door = (s, int(rng.integers(y0, y1)))
                    children = [(x0, y0, s, y1), (s + 1, y0, x1, y1)]
                else:
                    grid[x0:x1, s] = False
                    door = (int(rng.integers(x0, x1)), s)
                    children = [(x0, y0, x1, s), (x0, s + 1, x1, y1)]
                grid[door] = True
                doors.append(door)
                leaves[li : li + 1] = children
                done = True
                break
            if done:
                break
        else:
            raise ValueError(
                f"infeasible: extent {extent_m} m cannot hold {n_rooms} rooms of "
                f"{MIN_ROOM_CELLS}x{MIN_ROOM_CELLS} cells"
            )

    leaves.sort()
    rooms = tuple(Room(f"room_{k}", *r) for k, r in enumerate(leaves))
    room_map = np.full((n, n), -1, dtype=int)
    for k, r in enumerate(rooms):
        room_map[r.x0 : r.x1, r.y0 : r.y1] = k
    for dx, dy in doors:
        # doorway joins the room on its lower-coordinate side
        low = (dx - 1, dy) if dx > 0 and room_map[dx - 1, dy] >= 0 else (dx, dy - 1)
        room_map[dx, dy] = room_map[low]
    house = House(grid, rooms, room_map, seed)
    if not house.is_connected():  # pragma: no cover - guarded by the door rule above
        raise RuntimeError(f"generated house (seed={seed}) is disconnected")
    return house


def _area(rect) -> int:
    return (rect[2] - rect[0]) * (rect[3] - rect[1])


# ---------------------------------------------------------------------------
# synthetic features


@dataclass(frozen=True)
class FeatureSynthConfig:
    feat_dim: int = 32
    n_basis: int = 128
    length_scale_m: float = 0.5
    heading_scale_deg: float = 45.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.feat_dim < 1 or self.n_basis < 1:
            raise ValueError("feat_dim and n_basis must be positive")
        for v in (self.length_scale_m, self.heading_scale_deg):
            if not (math.isfinite(v) and v > 0):
                raise ValueError("length and heading scales must be finite and positive")


@lru_cache(maxsize=64)
def _basis(cfg: FeatureSynthConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    omega = rng.standard_normal((cfg.n_basis, 4))
    phase = rng.uniform(0.0, 2.0 * np.pi, cfg.n_basis)
    proj = rng.standard_normal((cfg.feat_dim, cfg.n_basis))
    for a in (omega, phase, proj):
        a.setflags(write=False)
    return omega, phase, proj


def synth_features(position: Position, heading_deg: float, cfg: FeatureSynthConfig) -> np.ndarray:
    """Unit-norm (1, feat_dim) feature for a pose, via random cosine basis functions.

    The pose is embedded as (x/l, y/l, cos h/s, sin h/s), so the implied
    kernel is approximately Gaussian in planar distance and heading chord.
    """
    h = math.radians(heading_deg)
    s = math.radians(cfg.heading_scale_deg)
    z = np.array(
        [
            position.x / cfg.length_scale_m,
            position.y / cfg.length_scale_m,
            math.cos(h) / s,
            math.sin(h) / s,
        ]
    )
    omega, phase, proj = _basis(cfg)
    phi = np.cos(omega @ z + phase)
    v = proj @ phi
    norm = np.linalg.norm(v)
    if norm == 0.0:  # pragma: no cover - measure-zero event
        v = np.ones(cfg.feat_dim)
        norm = np.linalg.norm(v)
    return (v / norm)[None, :]


# ---------------------------------------------------------------------------
# policies


def default_tour(house: House, start: Cell) -> list[Cell]:
    """Perimeter of a free 3x3 block with ``start`` as a corner (8 cells, closed loop)."""
    for sx, sy in ((1, 1), (-1, 1), (1, -1), (-1, -1)):
        block = [(start[0] + sx * i, start[1] + sy * j) for i in range(3) for j in range(3)]
        if all(house.is_free(c) for c in block):
            ring = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)]
            return [(start[0] + sx * i, start[1] + sy * j) for i, j in ring]
    raise ValueError(f"no free 3x3 block with a corner at {start}")


def _heading(a: Cell, b: Cell) -> float:
    d = (b[0] - a[0], b[1] - a[1])
    for dx, dy, heading in _MOVES:
        if (dx, dy) == d:
            return heading
    return math.degrees(math.atan2(d[1], d[0])) % 360.0


def run_policy(
    house: House,
    policy: str,
    start: Cell,
    goal: Cell | None = None,
    steps: int = 100,
    fcfg: FeatureSynthConfig | None = None,
    seed: int = 0,
    tour: Sequence[Cell] | None = None,
    meta: dict[str, str] | None = None,
) -> tuple[Trajectory, Episode]:
    """Drive a scripted policy through ``house`` and record observations.

    ``steps`` is the number of observations for ``revisit_loop`` and
    ``random_walk`` and the move budget for ``shortest_path``. The episode
    length is the number of moves taken (at least 1).
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    if not house.is_free(start):
        raise ValueError(f"start {start} is not a free cell")
    if goal is not None and not house.is_free(goal):
        raise ValueError(f"goal {goal} is not a free cell")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    fcfg = fcfg or FeatureSynthConfig()

    bfs_dist: int | None = None
    if goal is not None:
        path = house.shortest_path(start, goal)
        bfs_dist = len(path) - 1
    elif policy == "shortest_path":
        raise ValueError("shortest_path requires a goal")

    cells: list[Cell]
    headings: list[float]
    if policy == "revisit_loop":
        loop = list(tour) if tour is not None else default_tour(house, start)
        for c in loop:
            if not house.is_free(c):
                raise ValueError(f"tour cell {c} is not free")
        m = len(loop)
        loop_headings = [_heading(loop[k - 1], loop[k]) if m > 1 else 0.0 for k in range(m)]
        cells = [loop[k % m] for k in range(steps)]
        headings = [loop_headings[k % m] for k in range(steps)]
    elif policy == "random_walk":
        rng = np.random.default_rng(seed)
        cells, headings = [start], [0.0]
        while len(cells) < steps:
            nbrs = house.neighbors(cells[-1])
            if not nbrs:
                break
            nxt, h = nbrs[int(rng.integers(len(nbrs)))]
            cells.append(nxt)
            headings.append(h)
        if len(headings) > 1:
            headings[0] = headings[1]
    else:
        cells = path[: steps + 1]
        headings = [_heading(cells[k], cells[k + 1]) for k in range(len(cells) - 1)]
        headings.append(headings[-1] if headings else 0.0)

    observations = []
    for t, (cell, h) in enumerate(zip(cells, headings)):
        pos = cell_position(cell)
        observations.append(
            Observation(
                t=t,
                position=pos,
                heading_deg=h,
                features=synth_features(pos, h, fcfg),
                room_id=house.room_of(cell),
                action=None if t == 0 else f"move_{int(h)}",
            )
        )
    traj = Trajectory(tuple(observations), meta=dict(meta or {}), feat_dim=fcfg.feat_dim)

    moves = max(1, len(cells) - 1)
    success = False
    if goal is not None:
        dx = (cells[-1][0] - goal[0]) * CELL_SIZE_M
        dy = (cells[-1][1] - goal[1]) * CELL_SIZE_M
        success = math.hypot(dx, dy) <= SUCCESS_RADIUS_M
    episode = Episode(
        success=success,
        shortest_len=max(1, bfs_dist) if bfs_dist is not None else moves,
        episode_len=moves,
        rooms_visited=frozenset(house.room_of(c) for c in cells),
        total_rooms=len(house.rooms),
    )
    return traj, episode


def simulate(
    seed: int,
    n_rooms: int,
    policy: str,
    steps: int,
    extent_m: float = 8.0,
    fcfg: FeatureSynthConfig | None = None,
) -> tuple[House, Trajectory, Episode]:
    """Generate a house and run ``policy`` from seeded start and goal cells."""
    house = generate_house(seed, n_rooms, extent_m)
    rng = np.random.default_rng(seed + 1)
    free = house.free_cells()
    if policy == "revisit_loop":
        candidates = [c for c in free if _has_block(house, c)]
        start = candidates[int(rng.integers(len(candidates)))]
    else:
        start = free[int(rng.integers(len(free)))]
    goal = free[int(rng.integers(len(free)))]
    if goal == start:
        goal = free[(free.index(start) + 1) % len(free)]
    category = TARGET_CATEGORIES[int(rng.integers(len(TARGET_CATEGORIES)))]
    meta = {
        "house_seed": str(seed),
        "policy": policy,
        "target": category,
        "instruction": f"go to a {category} in the {house.room_of(goal).replace('_', ' ')}",
    }
    traj, ep = run_policy(house, policy, start, goal, steps, fcfg, seed=seed, meta=meta)
    return house, traj, ep


def _has_block(house: House, c: Cell) -> bool:
    try:
        default_tour(house, c)
    except ValueError:
        return False
    return True


def bundled_trajectories() -> list[tuple[str, Trajectory]]:
    """Fixed synthetic set used by the sweep harness when no inputs are given."""
    out = []
    specs = [
        ("revisit_s1", 1, 4, "revisit_loop", 120),
        ("walk_s2", 2, 4, "random_walk", 300),
        ("walk_s3", 3, 6, "random_walk", 500),
        ("path_s4", 4, 4, "shortest_path", 200),
    ]
    for name, seed, rooms, policy, steps in specs:
        _, traj, _ = simulate(seed, rooms, policy, steps)
        out.append((name, traj))
    return out


def house_json(house: House) -> str:
    return json.dumps(house.to_json(), sort_keys=True)
