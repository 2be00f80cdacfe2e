"""Soft (MaxEnt) value iteration, Boltzmann policies and demo likelihoods."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import EpisodeSet, TabularMdp, Trajectory, TrajectoryError, check_beta

# below this temperature exp(Q/beta) is replaced by its hard-max limit
HARD_MAX_BETA = 1e-6


class NumericError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class SoftSolution:
    q_table: np.ndarray
    v_table: np.ndarray
    theta: np.ndarray
    beta: float
    iterations_used: int
    converged: bool
    log_policy: np.ndarray = field(repr=False)
    residuals: tuple[float, ...] = field(default=(), repr=False)
    mdp: TabularMdp | None = field(default=None, repr=False)

    @property
    def policy(self) -> np.ndarray:
        return np.exp(self.log_policy)


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-6
    max_sweeps: int = 10_000
    warm_start: SoftSolution | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")


def _soft_max_rows(q: np.ndarray, mask: np.ndarray, beta: float) -> np.ndarray:
    """beta * log sum_a exp(q/beta) per row, shifted by the row maximum."""
    qm = np.where(mask, q, -np.inf)
    m = qm.max(axis=1)
    if beta < HARD_MAX_BETA:
        return m
    z = np.exp((qm - m[:, None]) / beta).sum(axis=1)
    return m + beta * np.log(z)


def _log_policy(q: np.ndarray, v: np.ndarray, mask: np.ndarray, terminal, beta):
    qm = np.where(mask, q, -np.inf)
    if beta < HARD_MAX_BETA:
        m = qm.max(axis=1, keepdims=True)
        greedy = mask & (qm >= m - 1e-9 * (1.0 + np.abs(m)))
        counts = greedy.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore"):
            logp = np.where(greedy, -np.log(counts), -np.inf)
    else:
        with np.errstate(invalid="ignore"):
            logp = (qm - v[:, None]) / beta
        logp = np.where(mask, logp, -np.inf)
    if terminal.any():
        n_adm = mask[terminal].sum(axis=1, keepdims=True)
        logp[terminal] = np.where(mask[terminal], -np.log(n_adm), -np.inf)
    return logp


def soft_value_iteration(
    mdp: TabularMdp, theta, beta: float, cfg: SolverConfig | None = None
) -> SoftSolution:
    """Synchronous soft Bellman sweeps until the value change is below tolerance.

    Non-convergence is reported through ``converged`` rather than raised.
    Terminal states keep zero value and zero Q rows.
    """
    cfg = cfg or SolverConfig()
    beta = check_beta(beta)
    theta = np.asarray(theta, dtype=np.float64)
    rewards = mdp.reward_table(theta)
    mask = mdp.action_mask
    bad = mask & ~np.isfinite(rewards)
    if bad.any():
        s, a = map(int, np.argwhere(bad)[0])
        raise NumericError(
            f"non-finite reward {rewards[s, a]} on transition "
            f"({s}, {a}) -> {int(mdp.next_state[s, a])}"
        )
    nxt = mdp.next_state
    term = mdp.terminal
    gamma = mdp.discount

    if cfg.warm_start is not None:
        v = np.array(cfg.warm_start.v_table, dtype=np.float64)
        if v.shape != (mdp.num_states,):
            raise ValueError("warm start does not match the MDP")
    else:
        v = np.zeros(mdp.num_states)

    residuals = []
    converged = False
    q = None
    sweeps = 0
    for sweeps in range(1, cfg.max_sweeps + 1):
        q = rewards + gamma * v[nxt]
        q[term] = 0.0
        v_new = _soft_max_rows(q, mask, beta)
        v_new[term] = 0.0
        delta = float(np.max(np.abs(v_new - v)))
        v = v_new
        residuals.append(delta)
        if not np.isfinite(delta):
            raise NumericError(f"value iteration diverged at sweep {sweeps}")
        if delta < cfg.tolerance:
            converged = True
            break

    q = np.where(mask, q, -np.inf)
    logp = _log_policy(q, v, mask, term, beta)
    for arr in (q, v, logp, theta):
        arr.setflags(write=False)
    return SoftSolution(
        q_table=q,
        v_table=v,
        theta=theta,
        beta=beta,
        iterations_used=sweeps,
        converged=converged,
        log_policy=logp,
        residuals=tuple(residuals),
        mdp=mdp,
    )


def maxent_policy(sol: SoftSolution, s: int) -> np.ndarray:
    """Action probabilities at ``s`` over its admissible actions, in index order."""
    n = sol.log_policy.shape[0]
    if not 0 <= s < n:
        raise IndexError(f"state {s} out of range [0, {n})")
    row = sol.log_policy[s]
    if sol.mdp is None:
        return np.exp(row)
    return np.exp(row[sol.mdp.action_mask[s]])


def _check_steps(sol: SoftSolution, states, actions):
    S, A = sol.log_policy.shape
    if len(states) == 0:
        return
    if states.min() < 0 or states.max() >= S or actions.min() < 0 or actions.max() >= A:
        raise TrajectoryError("trajectory step outside the state/action space")
    if sol.mdp is not None:
        adm = sol.mdp.action_mask[states, actions]
        if not adm.all():
            i = int(np.argmin(adm))
            raise TrajectoryError(
                f"inadmissible action {int(actions[i])} at step {i} (state {int(states[i])})"
            )


def trajectory_log_likelihood(sol: SoftSolution, traj: Trajectory) -> float:
    """Sum over steps of log pi(a|s) = (Q(s,a) - V(s)) / beta."""
    _check_steps(sol, traj.states, traj.actions)
    if len(traj) == 0:
        return 0.0
    return float(sol.log_policy[traj.states, traj.actions].sum())


def set_log_likelihood(sol: SoftSolution, demos: EpisodeSet) -> float:
    if len(demos) == 0:
        raise ValueError("inference needs at least one trajectory")
    states, actions = demos.all_steps()
    _check_steps(sol, states, actions)
    if len(states) == 0:
        return 0.0
    return float(sol.log_policy[states, actions].sum())
