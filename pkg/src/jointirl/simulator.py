"""Simulated demonstrator: rollouts of the MaxEnt policy for known (theta*, beta*)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import EpisodeSet, TabularMdp, Trajectory
from .solver import SoftSolution, SolverConfig, soft_value_iteration


@dataclass(frozen=True)
class SimulatorConfig:
    num_episodes: int = 20
    horizon_cap: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.num_episodes < 1:
            raise ValueError("num_episodes must be at least 1")
        if self.horizon_cap < 1:
            raise ValueError("horizon_cap must be at least 1")


def episode_rng(seed: int, index: int) -> np.random.Generator:
    # one stream per episode so that adding episodes leaves earlier ones intact
    return np.random.default_rng([int(seed), int(index)])


def sample_episode(
    sol: SoftSolution, start: int, horizon_cap: int, rng: np.random.Generator
) -> Trajectory:
    mdp = sol.mdp
    policy = sol.policy
    cdf = np.cumsum(policy, axis=1)
    states, actions = [], []
    s = int(start)
    while not mdp.terminal[s] and len(states) < horizon_cap:
        a = int(np.searchsorted(cdf[s], rng.random() * cdf[s, -1], side="right"))
        a = min(a, mdp.num_actions - 1)
        while not mdp.action_mask[s, a]:
            a -= 1
        states.append(s)
        actions.append(a)
        s = int(mdp.next_state[s, a])
    return Trajectory(np.asarray(states, dtype=np.int64), np.asarray(actions, dtype=np.int64))


def generate_episode_set(
    mdp: TabularMdp,
    theta,
    beta: float,
    cfg: SimulatorConfig | None = None,
    solver_cfg: SolverConfig | None = None,
    solution: SoftSolution | None = None,
) -> EpisodeSet:
    """Solve once for (theta*, beta*) and roll out from uniform non-terminal starts."""
    cfg = cfg or SimulatorConfig()
    sol = solution or soft_value_iteration(mdp, theta, beta, solver_cfg)
    warnings = ()
    if not sol.converged:
        warnings = (
            f"soft value iteration did not converge in {sol.iterations_used} sweeps",
        )
    starts = mdp.non_terminal_states()
    trajs = []
    for i in range(cfg.num_episodes):
        rng = episode_rng(cfg.seed, i)
        start = int(starts[rng.integers(len(starts))])
        trajs.append(sample_episode(sol, start, cfg.horizon_cap, rng))
    meta = {
        "seed": cfg.seed,
        "theta_star": [float(v) for v in np.asarray(theta)],
        "beta_star": float(beta),
    }
    return EpisodeSet(tuple(trajs), warnings, meta)
