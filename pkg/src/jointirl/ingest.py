"""Turning recorded state sequences into (state, action) trajectories, and
summarising trajectories the way the tele-operation study reports them."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .environments import (
    HORIZONTAL,
    OPPOSITE,
    VERTICAL,
    WarehouseEnvironment,
    _axis,
)
from .mdp import TabularMdp, Trajectory, TrajectoryError, validate_trajectory
from .simulator import sample_episode
from .solver import SolverConfig, soft_value_iteration


class IngestionError(TrajectoryError):
    pass


def read_raw(path) -> list[dict]:
    """JSONL records ``{"t": seconds, "cell": [x, y], "heading": "h"|"v"?}``."""
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                cell = tuple(int(v) for v in rec["cell"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise IngestionError(f"{path}:{lineno}: malformed record ({exc})")
            if len(cell) != 2:
                raise IngestionError(f"{path}:{lineno}: cell must be [x, y]")
            heading = rec.get("heading")
            if heading not in (None, "h", "v"):
                raise IngestionError(f"{path}:{lineno}: heading must be 'h' or 'v'")
            records.append({"t": rec.get("t"), "cell": cell, "heading": heading})
    return records


def _heading_code(h):
    return None if h is None else (HORIZONTAL if h == "h" else VERTICAL)


def ingest_records(records, env, mdp: TabularMdp, downsample: int = 1) -> Trajectory:
    """Keep every ``downsample``-th record and recover the connecting actions.

    Consecutive identical records (the operator pausing) are merged. Two
    kept records that no single action connects raise ``IngestionError``
    naming the original record indices. A final non-terminal state has no
    observed action and is dropped.
    """
    if downsample < 1:
        raise ValueError("downsample factor must be >= 1")
    kept = [(i, r) for i, r in enumerate(records)][::downsample]
    merged = []
    for i, r in kept:
        key = (r["cell"], r.get("heading"))
        if merged and merged[-1][1] == key:
            continue
        merged.append((i, key))
    if not merged:
        return Trajectory(np.zeros(0), np.zeros(0))

    warehouse = isinstance(env, WarehouseEnvironment)
    if warehouse:
        index = {}
        for s, (cell, h) in enumerate(mdp.state_labels):
            index[(tuple(cell), h)] = s
    else:
        index = {tuple(c): s for s, c in enumerate(mdp.state_labels)}

    def lookup(i, cell, heading):
        key = (cell, heading) if warehouse else cell
        if key not in index:
            raise IngestionError(f"record {i}: cell {list(cell)} is not a state of the environment")
        return index[key]

    def candidates(s, cell2, heading2):
        out = []
        for a in range(mdp.num_actions):
            if not mdp.action_mask[s, a]:
                continue
            lab = mdp.state_labels[mdp.next_state[s, a]]
            if warehouse:
                if tuple(lab[0]) == cell2 and (heading2 is None or lab[1] == heading2):
                    out.append(a)
            elif tuple(lab) == cell2:
                out.append(a)
        return out

    known = {_cell_of(mdp, s, warehouse) for s in range(mdp.num_states)}
    for i, (cell, _) in merged:
        if cell not in known:
            raise IngestionError(f"record {i}: cell {list(cell)} is not a state of the environment")

    i0, (cell0, h0) = merged[0]
    if warehouse and h0 is None:
        if len(merged) > 1:
            nxt = merged[1][1][0]
            h0 = "v" if nxt[0] == cell0[0] else "h"
        else:
            h0 = "h"
    s = lookup(i0, cell0, h0)
    states, actions = [], []
    for (i, _), (j, (cell2, h2)) in zip(merged, merged[1:]):
        if mdp.terminal[s]:
            break
        acts = candidates(s, cell2, h2)
        if not acts:
            raise IngestionError(
                f"records {i} and {j}: no single action connects {mdp.state_labels[s]} to {list(cell2)}"
            )
        a = acts[0]
        states.append(s)
        actions.append(a)
        s = int(mdp.next_state[s, a])
    traj = Trajectory(np.asarray(states, dtype=np.int64), np.asarray(actions, dtype=np.int64))
    report = validate_trajectory(mdp, traj)
    if not report.passed:
        raise IngestionError(f"reconstructed trajectory fails at step {report.first_failure}")
    return traj


@dataclass(frozen=True)
class TrajectorySummary:
    path_length: int
    wrong_direction: int
    restricted_entries: int
    road_steps: int
    direction_changes: int
    reached_goal: bool

    @property
    def road_usage(self) -> float:
        return self.road_steps / self.path_length if self.path_length else 0.0

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["road_usage"] = self.road_usage
        return d


def _cell_of(mdp, s, warehouse):
    lab = mdp.state_labels[s]
    return tuple(lab[0]) if warehouse else tuple(lab)


def summarize_trajectory(env, mdp: TabularMdp, traj: Trajectory) -> TrajectorySummary:
    """Path length, wrong-way road moves, restricted entries, road usage, turns.

    Restricted zones are the warehouse's restricted cells, or the avoid
    zones of a zone grid. Road usage counts steps that end on a road cell.
    """
    warehouse = isinstance(env, WarehouseEnvironment)
    roads = env.road_directions()
    restricted = env.restricted() if warehouse else env.members("avoid")
    wrong = entries = on_road = turns = 0
    prev_axis = None
    if warehouse and len(traj):
        prev_axis = HORIZONTAL if mdp.state_labels[traj.states[0]][1] == "h" else VERTICAL
    s_end = None
    for s, a in traj.steps:
        cell = _cell_of(mdp, s, warehouse)
        s2 = int(mdp.next_state[s, a])
        cell2 = _cell_of(mdp, s2, warehouse)
        dirs = roads.get(cell2, set())
        if cell2 != cell and OPPOSITE[a] in dirs and a not in dirs:
            wrong += 1
        if cell2 in restricted and cell not in restricted:
            entries += 1
        if cell2 in roads:
            on_road += 1
        ax = _axis(a)
        if prev_axis is not None and ax != prev_axis:
            turns += 1
        prev_axis = ax
        s_end = s2
    reached = bool(s_end is not None and mdp.terminal[s_end])
    return TrajectorySummary(len(traj), wrong, entries, on_road, turns, reached)


def optimal_rollout(
    mdp: TabularMdp,
    theta,
    start: int,
    beta: float = 0.001,
    horizon_cap: int = 500,
    seed: int = 0,
    solver_cfg: SolverConfig | None = None,
):
    """Near-deterministic rollout of the inferred preferences."""
    sol = soft_value_iteration(mdp, theta, beta, solver_cfg)
    rng = np.random.default_rng(seed)
    return sample_episode(sol, start, horizon_cap, rng), sol
