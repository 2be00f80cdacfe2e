"""Independent reference implementations used as test oracles.

Written with plain loops and none of the package's vectorised helpers, so
agreement is evidence rather than tautology.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np


def hard_value_iteration(mdp, theta, tol=1e-10, max_sweeps=100_000):
    """Bellman optimality by per-state loops (Gauss-Seidel)."""
    S, A = mdp.num_states, mdp.num_actions
    theta = [float(t) for t in theta]
    r = [[0.0] * A for _ in range(S)]
    for s in range(S):
        for a in range(A):
            r[s][a] = sum(t * float(f) for t, f in zip(theta, mdp.features[s, a]))
            if mdp.offset is not None:
                r[s][a] += float(mdp.offset[s, a])
    v = [0.0] * S
    for _ in range(max_sweeps):
        worst = 0.0
        for s in range(S):
            if mdp.terminal[s]:
                continue
            best = -math.inf
            for a in range(A):
                if mdp.action_mask[s, a]:
                    best = max(best, r[s][a] + mdp.discount * v[int(mdp.next_state[s, a])])
            worst = max(worst, abs(best - v[s]))
            v[s] = best
        if worst < tol:
            break
    return np.array(v)


def bfs_reachable(width, height, blocked, goal):
    """Cells from which ``goal`` can be reached with 4-connected moves."""
    seen = {goal}
    queue = deque([goal])
    while queue:
        x, y = queue.popleft()
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if 0 <= nx < width and 0 <= ny < height and (nx, ny) not in blocked:
                if (nx, ny) not in seen:
                    seen.add((nx, ny))
                    queue.append((nx, ny))
    return seen


def brute_force_log_likelihood(sol, trajectories):
    """Product over steps of exp(Q/beta) / sum exp(Q/beta), computed per step."""
    total = 0.0
    mdp = sol.mdp
    for traj in trajectories:
        for s, a in traj.steps:
            if mdp.terminal[s]:
                total += -math.log(int(mdp.action_mask[s].sum()))
                continue
            qs = [float(sol.q_table[s, b]) for b in range(mdp.num_actions) if mdp.action_mask[s, b]]
            top = max(qs)
            z = sum(math.exp((q - top) / sol.beta) for q in qs)
            total += (float(sol.q_table[s, a]) - top) / sol.beta - math.log(z)
    return total


def grid_walk_mean(n_points, start, steps, move_prob=1.0):
    """Exact expected running mean of the clamped +-1 walk on 0..n-1.

    Each step proposes up or down with equal probability (with probability
    ``move_prob``) and is always accepted; off-grid proposals stay put.
    Returns the expectation of the average position over ``steps`` samples,
    scaled to [0, 1].
    """
    P = np.zeros((n_points, n_points))
    for i in range(n_points):
        P[i, min(i + 1, n_points - 1)] += 0.5 * move_prob
        P[i, max(i - 1, 0)] += 0.5 * move_prob
        P[i, i] += 1.0 - move_prob
    x = np.arange(n_points) / (n_points - 1)
    p = np.zeros(n_points)
    p[start] = 1.0
    acc = 0.0
    for _ in range(steps):
        p = p @ P
        acc += p @ x
    return acc / steps


def stationary_distribution(P, iters=100_000, tol=1e-14):
    """Power iteration on a row-stochastic matrix."""
    p = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(iters):
        q = p @ P
        if np.abs(q - p).max() < tol:
            return q
        p = q
    return p


def summary_by_lookup(env, cells, actions):
    """Per-step zone lookup over an explicit cell path.

    ``cells`` has one more entry than ``actions``. Counts wrong-way road
    moves, entries into restricted/avoid cells, steps ending on a road, and
    changes between horizontal and vertical movement.
    """
    if env.kind == "warehouse":
        bad = {c for z in env.zones if z.kind == "restricted" for c in z.cells()}
    else:
        bad = {c for z in env.zones if z.kind == "avoid" for c in z.cells()}
    names = ("north", "south", "east", "west")
    opposite = {"north": "south", "south": "north", "east": "west", "west": "east"}
    road_dirs = {}
    for z in env.zones:
        if z.kind == "road":
            for c in z.cells():
                road_dirs.setdefault(c, set()).add(z.direction)
    wrong = entries = on_road = turns = 0
    prev = None
    for i, a in enumerate(actions):
        name = names[a]
        c, c2 = cells[i], cells[i + 1]
        here = road_dirs.get(c2, set())
        if c2 != c and opposite[name] in here and name not in here:
            wrong += 1
        if c2 in bad and c not in bad:
            entries += 1
        if c2 in road_dirs:
            on_road += 1
        axis = "v" if name in ("north", "south") else "h"
        if prev is not None and axis != prev:
            turns += 1
        prev = axis
    return {"wrong_direction": wrong, "restricted_entries": entries, "road_steps": on_road,
            "direction_changes": turns, "path_length": len(actions)}
