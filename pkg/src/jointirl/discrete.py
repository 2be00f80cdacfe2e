"""Bayesian filter over a finite set of (theta, beta) hypotheses."""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .mdp import TabularMdp, Trajectory, TrajectoryError
from .solver import SoftSolution, SolverConfig, soft_value_iteration

DEFAULT_COMPONENT_VALUES = (0.0, 0.3, 0.5, 0.7, 1.0)
DEFAULT_BETAS = (0.01, 0.09, 0.5, 1.0, 5.0, 10.0)
# variant with 0.05 as the second high-expertise value
ALT_BETAS = (0.01, 0.05, 0.5, 1.0, 5.0, 10.0)


class DegenerateEvidenceError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class HypothesisSet:
    thetas: np.ndarray
    betas: np.ndarray
    seed: int | None = None
    sampled_k: int | None = None

    def __post_init__(self):
        thetas = np.atleast_2d(np.asarray(self.thetas, dtype=np.float64))
        betas = np.atleast_1d(np.asarray(self.betas, dtype=np.float64))
        if thetas.shape[0] == 0 or betas.shape[0] == 0:
            raise ValueError("hypothesis set axes must be non-empty")
        if np.any(thetas < 0):
            raise ValueError("theta components must be non-negative")
        if np.any(~(betas > 0)):
            raise ValueError("betas must be positive")
        thetas.setflags(write=False)
        betas.setflags(write=False)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "betas", betas)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.thetas), len(self.betas))

    def __len__(self):
        return len(self.thetas) * len(self.betas)

    def pairs(self):
        """Cross product in theta-major order, matching ``log_belief``."""
        for th in self.thetas:
            for b in self.betas:
                yield th, float(b)

    def index(self, theta, beta) -> int:
        ti = np.nonzero(np.all(np.isclose(self.thetas, theta, atol=1e-12), axis=1))[0]
        bi = np.nonzero(np.isclose(self.betas, beta, rtol=0, atol=1e-12))[0]
        if len(ti) == 0 or len(bi) == 0:
            raise KeyError("pair not in hypothesis set")
        return int(ti[0]) * len(self.betas) + int(bi[0])


def preference_vectors(component_values, dim: int, dedupe: bool = False) -> np.ndarray:
    """l1-normalised grid vectors, all-zero vector dropped, product order kept."""
    values = [float(v) for v in component_values]
    if not values or max(values) <= 0:
        raise ValueError("component values need at least one positive entry")
    grid = np.array(list(itertools.product(values, repeat=dim)), dtype=np.float64)
    norms = np.abs(grid).sum(axis=1)
    grid = grid[norms > 0] / norms[norms > 0, None]
    if dedupe:
        _, first = np.unique(np.round(grid, 12), axis=0, return_index=True)
        grid = grid[np.sort(first)]
    return grid


def build_hypothesis_set(
    component_values=DEFAULT_COMPONENT_VALUES,
    dim: int = 5,
    betas=DEFAULT_BETAS,
    sample_k: int | None = None,
    seed: int | None = None,
    dedupe: bool = False,
) -> HypothesisSet:
    thetas = preference_vectors(component_values, dim, dedupe)
    if sample_k is not None:
        if sample_k > len(thetas) or sample_k < 1:
            raise ValueError(f"cannot sample {sample_k} of {len(thetas)} preference vectors")
        idx = np.random.default_rng(seed).choice(len(thetas), size=sample_k, replace=False)
        thetas = thetas[idx]
    return HypothesisSet(thetas, np.asarray(betas, dtype=np.float64), seed, sample_k)


def restrict_set(hs: HypothesisSet, fixed_theta=None, fixed_beta=None) -> HypothesisSet:
    """Collapse one axis to a single value (Fixed-theta / Fixed-beta baselines)."""
    if (fixed_theta is None) == (fixed_beta is None):
        raise ValueError("give exactly one of fixed_theta or fixed_beta")
    if fixed_theta is not None:
        return HypothesisSet(np.asarray(fixed_theta, dtype=np.float64)[None, :], hs.betas)
    return HypothesisSet(hs.thetas, np.array([float(fixed_beta)]))


def _key(theta: np.ndarray, beta: float) -> tuple[bytes, float]:
    return (np.ascontiguousarray(theta, dtype=np.float64).tobytes(), float(beta))


def _digest(theta: np.ndarray, beta: float) -> str:
    h = hashlib.sha1(np.ascontiguousarray(theta, dtype=np.float64).tobytes())
    h.update(np.float64(beta).tobytes())
    return h.hexdigest()


class SolutionCache:
    """Memoised soft-VI solutions keyed by (theta, beta) value."""

    def __init__(self, mdp: TabularMdp, solver_cfg: SolverConfig | None = None):
        self.mdp = mdp
        self.solver_cfg = solver_cfg or SolverConfig()
        self._store: dict = {}
        self.solves = 0

    def get(self, theta, beta) -> SoftSolution:
        theta = np.asarray(theta, dtype=np.float64)
        key = _key(theta, beta)
        hit = self._store.get(key)
        if hit is None:
            sol = soft_value_iteration(self.mdp, theta, beta, self.solver_cfg)
            self.solves += 1
            hit = (sol, _digest(theta, beta))
            self._store[key] = hit
        sol, digest = hit
        if digest != _digest(sol.theta, sol.beta):
            raise RuntimeError("solution cache entry does not match its key")
        return sol

    def __len__(self):
        return len(self._store)


@dataclass(frozen=True, eq=False)
class HypothesisBelief:
    hypothesis_set: HypothesisSet
    log_belief: np.ndarray
    solutions: SolutionCache = field(repr=False)
    degenerate_floor: float | None = -700.0

    @property
    def belief(self) -> np.ndarray:
        return np.exp(self.log_belief)

    @property
    def mdp(self) -> TabularMdp:
        return self.solutions.mdp

    def solution(self, i: int) -> SoftSolution:
        nb = len(self.hypothesis_set.betas)
        return self.solutions.get(self.hypothesis_set.thetas[i // nb], self.hypothesis_set.betas[i % nb])

    def log_policy_stack(self) -> np.ndarray:
        """(hypotheses, states, actions) table of log pi."""
        return np.stack([self.solution(i).log_policy for i in range(len(self.hypothesis_set))])

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.belief.reshape(self.hypothesis_set.shape)
        return p.sum(axis=1), p.sum(axis=0)


def init_belief(
    hs: HypothesisSet,
    mdp: TabularMdp,
    solver_cfg: SolverConfig | None = None,
    cache: SolutionCache | None = None,
    degenerate_floor: float | None = -700.0,
) -> HypothesisBelief:
    """Uniform prior; solutions are computed on first use."""
    n = len(hs)
    log_b = np.full(n, -np.log(n))
    log_b.setflags(write=False)
    if cache is not None and cache.mdp is not mdp:
        raise ValueError("solution cache belongs to another MDP")
    return HypothesisBelief(hs, log_b, cache or SolutionCache(mdp, solver_cfg), degenerate_floor)


def _apply(bel: HypothesisBelief, increments: np.ndarray) -> HypothesisBelief:
    finite = np.isfinite(increments)
    if not finite.any():
        raise DegenerateEvidenceError("every hypothesis assigns zero probability to the evidence")
    top = increments[finite].max()
    if bel.degenerate_floor is not None and top < bel.degenerate_floor:
        raise DegenerateEvidenceError(
            f"largest log-likelihood increment {top:.1f} is below {bel.degenerate_floor}"
        )
    new = bel.log_belief + increments
    new = new - logsumexp(new)
    new.setflags(write=False)
    return HypothesisBelief(bel.hypothesis_set, new, bel.solutions, bel.degenerate_floor)


def _check_mdp(bel, mdp):
    if mdp is not None and mdp is not bel.mdp:
        raise ValueError("belief was initialised for a different MDP")


def trajectory_increments(bel: HypothesisBelief, traj: Trajectory) -> np.ndarray:
    mdp = bel.mdp
    if len(traj) and not mdp.action_mask[traj.states, traj.actions].all():
        raise TrajectoryError("trajectory contains an inadmissible action")
    out = np.empty(len(bel.hypothesis_set))
    for i in range(len(out)):
        out[i] = bel.solution(i).log_policy[traj.states, traj.actions].sum()
    return out


def update_belief_trajectory(
    bel: HypothesisBelief, mdp: TabularMdp | None, traj: Trajectory
) -> HypothesisBelief:
    """Bayes update with one whole trajectory; returns a new belief."""
    _check_mdp(bel, mdp)
    return _apply(bel, trajectory_increments(bel, traj))


def update_belief_action(bel: HypothesisBelief, s: int, a: int) -> HypothesisBelief:
    """Bayes update with a single observed (state, action)."""
    if not bel.mdp.action_mask[s, a]:
        raise TrajectoryError(f"action {a} is not admissible in state {s}")
    inc = np.array([bel.solution(i).log_policy[s, a] for i in range(len(bel.hypothesis_set))])
    return _apply(bel, inc)


def point_estimates(bel: HypothesisBelief) -> tuple[np.ndarray, float]:
    """Posterior-mean theta and beta from the two marginals."""
    p_theta, p_beta = bel.marginals()
    theta_hat = p_theta @ bel.hypothesis_set.thetas
    beta_hat = float(p_beta @ bel.hypothesis_set.betas)
    return theta_hat, beta_hat


def map_hypothesis(bel: HypothesisBelief) -> tuple[np.ndarray, float]:
    i = int(np.argmax(bel.log_belief))
    nb = len(bel.hypothesis_set.betas)
    return bel.hypothesis_set.thetas[i // nb], float(bel.hypothesis_set.betas[i % nb])
