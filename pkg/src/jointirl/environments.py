"""Zone gridworlds, the warehouse tele-operation map, and their JSON form.

Cells are ``(x, y)`` with the origin at the top-left and ``y`` growing
downward. Actions are the four cardinal moves in the order of ``ACTIONS``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .mdp import TabularMdp

ACTIONS = ("north", "south", "east", "west")
MOVES = {0: (0, -1), 1: (0, 1), 2: (1, 0), 3: (-1, 0)}
OPPOSITE = {0: 1, 1: 0, 2: 3, 3: 2}
DIRECTION_INDEX = {name: i for i, name in enumerate(ACTIONS)}

ZONE_KINDS = ("avoid", "road", "slow", "high_traffic", "obstacle")
WAREHOUSE_KINDS = ("road", "restricted")
MAX_ZONES_PER_KIND = 4
HORIZONTAL, VERTICAL = 0, 1


class GenerationError(RuntimeError):
    pass


class EnvironmentFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Zone:
    kind: str
    rect: tuple[int, int, int, int]
    direction: str | None = None

    def cells(self):
        x, y, w, h = self.rect
        for yy in range(y, y + h):
            for xx in range(x, x + w):
                yield (xx, yy)

    def contains(self, cell) -> bool:
        x, y, w, h = self.rect
        return x <= cell[0] < x + w and y <= cell[1] < y + h


@dataclass(frozen=True)
class ZoneGridEnvironment:
    width: int
    height: int
    zones: tuple[Zone, ...]
    goal: tuple[int, int]
    seed: int | None = None
    kind: str = field(default="zone_grid", init=False)

    def __post_init__(self):
        object.__setattr__(self, "zones", tuple(self.zones))
        object.__setattr__(self, "goal", tuple(int(v) for v in self.goal))
        _check_zones(self.zones, self.width, self.height, ZONE_KINDS, "zones")
        counts = {}
        for z in self.zones:
            counts[z.kind] = counts.get(z.kind, 0) + 1
        for k, n in counts.items():
            if n > MAX_ZONES_PER_KIND:
                raise EnvironmentFormatError(f"zones: {n} zones of kind {k!r} (max 4)")
        _check_cell(self.goal, self.width, self.height, "goal")
        if self.goal in self.obstacles():
            raise EnvironmentFormatError("goal: lies inside an obstacle")

    def members(self, kind: str) -> frozenset:
        return frozenset(c for z in self.zones if z.kind == kind for c in z.cells())

    def obstacles(self) -> frozenset:
        return self.members("obstacle")

    def free_cells(self) -> list[tuple[int, int]]:
        blocked = self.obstacles()
        return [
            (x, y)
            for y in range(self.height)
            for x in range(self.width)
            if (x, y) not in blocked
        ]

    def road_directions(self) -> dict:
        dirs: dict = {}
        for z in self.zones:
            if z.kind == "road":
                for c in z.cells():
                    dirs.setdefault(c, set()).add(DIRECTION_INDEX[z.direction])
        return dirs


@dataclass(frozen=True)
class WarehouseEnvironment:
    width: int
    height: int
    zones: tuple[Zone, ...]
    goals: tuple[tuple[int, int], ...]
    seed: int | None = None
    kind: str = field(default="warehouse", init=False)

    def __post_init__(self):
        object.__setattr__(self, "zones", tuple(self.zones))
        object.__setattr__(self, "goals", tuple(tuple(int(v) for v in g) for g in self.goals))
        _check_zones(self.zones, self.width, self.height, WAREHOUSE_KINDS, "zones")
        if not self.goals:
            raise EnvironmentFormatError("goal: at least one goal cell is required")
        for i, g in enumerate(self.goals):
            _check_cell(g, self.width, self.height, f"goal[{i}]")

    def restricted(self) -> frozenset:
        return frozenset(c for z in self.zones if z.kind == "restricted" for c in z.cells())

    def road_directions(self) -> dict:
        dirs: dict = {}
        for z in self.zones:
            if z.kind == "road":
                for c in z.cells():
                    dirs.setdefault(c, set()).add(DIRECTION_INDEX[z.direction])
        return dirs

    def state_index(self, cell, heading: int) -> int:
        return (cell[1] * self.width + cell[0]) * 2 + heading


def _check_cell(cell, width, height, path):
    if len(cell) != 2 or not (0 <= cell[0] < width and 0 <= cell[1] < height):
        raise EnvironmentFormatError(f"{path}: cell {list(cell)} out of bounds")


def _check_zones(zones, width, height, kinds, path):
    if width < 1 or height < 1:
        raise EnvironmentFormatError("width/height: must be positive")
    for i, z in enumerate(zones):
        p = f"{path}[{i}]"
        if z.kind not in kinds:
            raise EnvironmentFormatError(f"{p}.kind: unknown zone kind {z.kind!r}")
        x, y, w, h = z.rect
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > width or y + h > height:
            raise EnvironmentFormatError(f"{p}.rect: {list(z.rect)} out of bounds")
        if z.kind == "road":
            if z.direction not in DIRECTION_INDEX:
                raise EnvironmentFormatError(f"{p}.direction: road needs a direction")
        elif z.direction is not None:
            raise EnvironmentFormatError(f"{p}.direction: only roads carry a direction")


def _step(cell, action, width, height, blocked=frozenset()):
    dx, dy = MOVES[action]
    nx, ny = cell[0] + dx, cell[1] + dy
    if 0 <= nx < width and 0 <= ny < height and (nx, ny) not in blocked:
        return (nx, ny)
    return cell


def reachable_fraction(env: ZoneGridEnvironment) -> float:
    """Fraction of free cells from which the goal is reachable (BFS)."""
    free = set(env.free_cells())
    seen = {env.goal}
    queue = deque([env.goal])
    while queue:
        c = queue.popleft()
        for dx, dy in MOVES.values():
            n = (c[0] + dx, c[1] + dy)
            if n in free and n not in seen:
                seen.add(n)
                queue.append(n)
    return len(seen) / len(free)


def _sample_zone(rng, kind, width, height):
    if kind == "road":
        direction = ACTIONS[int(rng.integers(4))]
        if direction in ("east", "west"):
            w = int(rng.integers(3, width + 1))
            h = int(rng.integers(1, 3))
        else:
            w = int(rng.integers(1, 3))
            h = int(rng.integers(3, height + 1))
    else:
        cap = 4 if kind != "obstacle" else 3
        w = int(rng.integers(1, min(cap, width) + 1))
        h = int(rng.integers(1, min(cap, height) + 1))
        direction = None
    x = int(rng.integers(0, width - w + 1))
    y = int(rng.integers(0, height - h + 1))
    return Zone(kind, (x, y, w, h), direction)


def generate_environment(
    seed: int,
    size_range: tuple[int, int] = (8, 12),
    max_retries: int = 200,
    min_reachable: float = 1.0,
) -> ZoneGridEnvironment:
    """Sample a zone gridworld; a pure function of ``(seed, size_range)``."""
    lo, hi = size_range
    if lo < 5 or hi < lo:
        raise ValueError(f"size_range must satisfy 5 <= min <= max, got {size_range}")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        width = int(rng.integers(lo, hi + 1))
        height = int(rng.integers(lo, hi + 1))
        zones = []
        for kind in ZONE_KINDS:
            for _ in range(int(rng.integers(0, MAX_ZONES_PER_KIND + 1))):
                zones.append(_sample_zone(rng, kind, width, height))
        blocked = {c for z in zones if z.kind == "obstacle" for c in z.cells()}
        free = [
            (x, y) for y in range(height) for x in range(width) if (x, y) not in blocked
        ]
        if len(free) < 2:
            continue
        goal = free[int(rng.integers(len(free)))]
        env = ZoneGridEnvironment(width, height, tuple(zones), goal, seed)
        if reachable_fraction(env) >= min_reachable:
            return env
    raise GenerationError(f"no valid environment for seed {seed} after {max_retries} tries")


def zone_feature_map(env: ZoneGridEnvironment) -> Callable:
    """Transition features ``[path, road, avoid, slow, high_traffic]``.

    Path cost is -1 per step. Road is +1 when the move ends on a road cell in
    the road's direction, -1 against it, 0 otherwise (including blocked
    moves). Avoid and high-traffic are -1 when the move crosses the zone
    boundary; slow is -1 when the move ends inside a slow zone.
    """
    avoid = env.members("avoid")
    slow = env.members("slow")
    traffic = env.members("high_traffic")
    roads = env.road_directions()

    def phi(cell, action, cell2):
        road = 0.0
        if cell2 != cell and cell2 in roads:
            dirs = roads[cell2]
            if action in dirs:
                road = 1.0
            elif OPPOSITE[action] in dirs:
                road = -1.0
        return np.array(
            [
                -1.0,
                road,
                -1.0 if (cell in avoid) != (cell2 in avoid) else 0.0,
                -1.0 if cell2 in slow else 0.0,
                -1.0 if (cell in traffic) != (cell2 in traffic) else 0.0,
            ]
        )

    return phi


def build_zone_mdp(
    env: ZoneGridEnvironment, discount: float = 0.95, goal_bonus: float = 0.0
) -> TabularMdp:
    """One state per free cell (row-major), four actions, absorbing goal.

    Moves into obstacles or off the grid leave the agent in place and still
    pay the path cost. ``goal_bonus`` adds a constant reward on arrival.
    """
    cells = env.free_cells()
    index = {c: i for i, c in enumerate(cells)}
    blocked = env.obstacles()
    phi = zone_feature_map(env)
    S, A = len(cells), len(ACTIONS)
    nxt = np.zeros((S, A), dtype=np.int64)
    feats = np.zeros((S, A, 5))
    offset = np.zeros((S, A)) if goal_bonus else None
    for i, c in enumerate(cells):
        for a in range(A):
            c2 = _step(c, a, env.width, env.height, blocked)
            nxt[i, a] = index[c2]
            feats[i, a] = phi(c, a, c2)
            if offset is not None and c2 == env.goal and c != env.goal:
                offset[i, a] = goal_bonus
    terminal = np.zeros(S, dtype=bool)
    g = index[env.goal]
    terminal[g] = True
    nxt[g] = g
    return TabularMdp(
        next_state=nxt,
        features=feats,
        terminal=terminal,
        discount=discount,
        offset=offset,
        action_names=ACTIONS,
        state_labels=tuple(cells),
    )


def _axis(action: int) -> int:
    return VERTICAL if action in (0, 1) else HORIZONTAL


def warehouse_feature_map(env: WarehouseEnvironment, offroad_penalty: bool = True):
    """Transition features ``[path, restricted, road]`` on (cell, heading) states.

    Path cost is -1 for moves along the current heading and -2 for moves that
    turn. Restricted is -1 whenever the move ends in a restricted cell. Road
    is +1 for a move ending on a road cell along its direction, -1 against
    it, 0 when crossing it; off-road moves give -1, or 0 with
    ``offroad_penalty=False``.
    """
    restricted = env.restricted()
    roads = env.road_directions()

    def phi(cell, heading, action, cell2):
        path = -2.0 if _axis(action) != heading else -1.0
        if cell2 in roads and cell2 != cell:
            dirs = roads[cell2]
            if action in dirs:
                road = 1.0
            elif OPPOSITE[action] in dirs:
                road = -1.0
            else:
                road = 0.0
        elif cell2 == cell:
            road = 0.0
        else:
            road = -1.0 if offroad_penalty else 0.0
        return np.array([path, -1.0 if cell2 in restricted else 0.0, road])

    return phi


def build_warehouse_mdp(
    env: WarehouseEnvironment, discount: float = 0.95, offroad_penalty: bool = True
) -> TabularMdp:
    """States are (cell, heading); a move along the other axis flips the heading."""
    W, H = env.width, env.height
    S, A = W * H * 2, len(ACTIONS)
    phi = warehouse_feature_map(env, offroad_penalty)
    goals = set(env.goals)
    nxt = np.zeros((S, A), dtype=np.int64)
    feats = np.zeros((S, A, 3))
    terminal = np.zeros(S, dtype=bool)
    labels = []
    for y in range(H):
        for x in range(W):
            for h in (HORIZONTAL, VERTICAL):
                s = env.state_index((x, y), h)
                labels.append(((x, y), "hv"[h]))
                terminal[s] = (x, y) in goals
                for a in range(A):
                    c2 = _step((x, y), a, W, H)
                    nxt[s, a] = env.state_index(c2, _axis(a))
                    feats[s, a] = phi((x, y), h, a, c2)
    # absorbing goals keep their heading
    for s in np.nonzero(terminal)[0]:
        nxt[s] = s
    return TabularMdp(
        next_state=nxt,
        features=feats,
        terminal=terminal,
        discount=discount,
        action_names=ACTIONS,
        state_labels=tuple(labels),
    )


def synthetic_warehouse(width: int, height: int, seed: int) -> WarehouseEnvironment:
    """A random aisle layout with a few directed roads and restricted blocks."""
    rng = np.random.default_rng(seed)
    zones = []
    for _ in range(int(rng.integers(1, 4))):
        zones.append(_sample_zone(rng, "road", width, height))
    for _ in range(int(rng.integers(0, 3))):
        z = _sample_zone(rng, "avoid", width, height)
        zones.append(Zone("restricted", z.rect))
    goal = (int(rng.integers(width)), int(rng.integers(height)))
    return WarehouseEnvironment(width, height, tuple(zones), (goal,), seed)


def build_mdp(env, discount: float = 0.95, **kwargs) -> TabularMdp:
    if isinstance(env, WarehouseEnvironment):
        return build_warehouse_mdp(env, discount, **kwargs)
    return build_zone_mdp(env, discount, **kwargs)


# -- serialization -----------------------------------------------------------


def environment_to_dict(env) -> dict:
    zones = []
    for z in env.zones:
        d = {"kind": z.kind, "rect": list(z.rect)}
        if z.direction is not None:
            d["direction"] = z.direction
        zones.append(d)
    goal = list(env.goal) if env.kind == "zone_grid" else [list(g) for g in env.goals]
    return {
        "kind": env.kind,
        "width": env.width,
        "height": env.height,
        "goal": goal,
        "zones": zones,
        "seed": env.seed,
    }


def environment_from_dict(data: dict):
    def need(key, typ):
        if key not in data:
            raise EnvironmentFormatError(f"{key}: missing field")
        val = data[key]
        if not isinstance(val, typ) or isinstance(val, bool):
            raise EnvironmentFormatError(f"{key}: expected {typ.__name__}")
        return val

    if not isinstance(data, dict):
        raise EnvironmentFormatError("<root>: expected an object")
    kind = need("kind", str)
    width, height = need("width", int), need("height", int)
    zones = []
    for i, z in enumerate(need("zones", list)):
        p = f"zones[{i}]"
        if not isinstance(z, dict):
            raise EnvironmentFormatError(f"{p}: expected an object")
        rect = z.get("rect")
        if (
            not isinstance(rect, list)
            or len(rect) != 4
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in rect)
        ):
            raise EnvironmentFormatError(f"{p}.rect: expected [x, y, w, h] integers")
        if not isinstance(z.get("kind"), str):
            raise EnvironmentFormatError(f"{p}.kind: expected a string")
        zones.append(Zone(z["kind"], tuple(rect), z.get("direction")))
    seed = data.get("seed")
    goal = data.get("goal")
    if kind == "zone_grid":
        if not isinstance(goal, list) or len(goal) != 2:
            raise EnvironmentFormatError("goal: expected [x, y]")
        return ZoneGridEnvironment(width, height, tuple(zones), tuple(goal), seed)
    if kind == "warehouse":
        if not isinstance(goal, list) or not goal:
            raise EnvironmentFormatError("goal: expected a list of [x, y] cells")
        if isinstance(goal[0], int):
            goal = [goal]
        return WarehouseEnvironment(
            width, height, tuple(zones), tuple(tuple(g) for g in goal), seed
        )
    raise EnvironmentFormatError(f"kind: unknown environment kind {kind!r}")


def dumps_environment(env) -> str:
    return json.dumps(environment_to_dict(env), indent=2) + "\n"


def save_environment(env, path) -> None:
    Path(path).write_text(dumps_environment(env))


def load_environment(path):
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EnvironmentFormatError(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    try:
        return environment_from_dict(data)
    except EnvironmentFormatError as exc:
        raise EnvironmentFormatError(f"{path}: {exc}") from exc
