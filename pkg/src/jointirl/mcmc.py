"""Grid-walk Metropolis sampler over continuous (theta, beta).

The chain moves on a lattice of spacing ``theta_step`` / ``beta_step``,
re-solving the soft values at every proposal with a warm start from the
current point, and reports posterior-mean point estimates.

Note that the MaxEnt policy of ``(c * theta, c * beta)`` is the same for any
``c > 0``, so the likelihood is flat along rays. ``canonical`` estimates map
every sample to the representative with ``sum(theta) == 1`` before
averaging; that is what makes the expertise estimate comparable with the
l1-normalised discrete hypotheses.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

import numpy as np
from scipy.stats import norm

from .mdp import EpisodeSet, TabularMdp
from .solver import SoftSolution, SolverConfig, soft_value_iteration


@dataclass(frozen=True)
class McmcConfig:
    theta_step: float = 0.05
    beta_step: float = 0.25
    theta_max: float = 1.0
    beta_min: float = 0.01
    beta_max: float = 10.0
    max_iterations: int = 1000
    burn_in_fraction: float = 0.2
    sparsity_bound: float | None = None  # None: the feature dimension, i.e. inactive
    seed: int = 0
    warm_start_sweep_cap: int = 50
    kernel: str = "single"  # "single": one coordinate; "joint": theta and beta together
    beta_move_prob: float = 0.5
    max_redraws: int = 20
    canonical_estimates: bool = True

    def __post_init__(self):
        if self.theta_step <= 0 or self.beta_step < 0:
            raise ValueError("step sizes must be positive")
        if not 0 < self.beta_min < self.beta_max:
            raise ValueError("need 0 < beta_min < beta_max")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if not 0 <= self.burn_in_fraction < 1:
            raise ValueError("burn_in_fraction must lie in [0, 1)")
        if self.sparsity_bound is not None and self.sparsity_bound <= 0:
            raise ValueError("sparsity_bound must be positive")
        if self.kernel not in ("single", "joint"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if not 0 <= self.beta_move_prob <= 1:
            raise ValueError("beta_move_prob must lie in [0, 1]")

    def bound(self, dim: int) -> float:
        return float(dim) if self.sparsity_bound is None else self.sparsity_bound


@dataclass(frozen=True)
class PriorSpec:
    """Uniform prior on the theta box times a (truncated normal | uniform) beta prior."""

    theta_max: float = 1.0
    beta_min: float = 0.01
    beta_max: float = 10.0
    beta_family: str = "truncnorm"
    beta_mean: float = 5.005
    beta_std: float = 1.5

    def __post_init__(self):
        if self.beta_family not in ("truncnorm", "uniform"):
            raise ValueError(f"unknown beta prior {self.beta_family!r}")

    def log_beta_density(self, beta: float) -> float:
        if not self.beta_min <= beta <= self.beta_max:
            return -np.inf
        if self.beta_family == "uniform":
            return -np.log(self.beta_max - self.beta_min)
        a = (self.beta_min - self.beta_mean) / self.beta_std
        b = (self.beta_max - self.beta_mean) / self.beta_std
        mass = norm.cdf(b) - norm.cdf(a)
        return float(norm.logpdf(beta, self.beta_mean, self.beta_std) - np.log(mass))

    def log_theta_density(self, theta) -> float:
        theta = np.asarray(theta)
        if np.any(theta < 0) or np.any(theta > self.theta_max):
            return -np.inf
        return -len(theta) * np.log(self.theta_max)

    def log_density(self, theta, beta) -> float:
        return self.log_theta_density(theta) + self.log_beta_density(beta)


@dataclass
class McmcChainState:
    theta: np.ndarray
    beta: float
    log_posterior: float
    solution: SoftSolution | None = None
    accepted: int = 0
    history: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class ChainResult:
    samples: np.ndarray  # (K, d + 1): theta components then beta
    log_posteriors: np.ndarray
    accepted: np.ndarray
    initial: np.ndarray
    initial_log_posterior: float
    burn_in_fraction: float
    canonical: bool
    map_sample: np.ndarray
    map_log_posterior: float
    sweeps: int = 0

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if len(self.accepted) else 0.0

    @property
    def estimate(self) -> tuple[np.ndarray, float]:
        return point_estimate(self, canonical=self.canonical)


def _clamp(theta, beta, cfg):
    return np.clip(theta, 0.0, cfg.theta_max), float(np.clip(beta, cfg.beta_min, cfg.beta_max))


def propose(state, cfg: McmcConfig, rng: np.random.Generator):
    """Step to a lattice neighbour, clamped to the box and the l1 bound.

    Proposals over the l1 bound are redrawn; after ``max_redraws`` failures
    the current point is proposed again.
    """
    theta = np.asarray(state.theta, dtype=np.float64)
    beta = float(state.beta)
    bound = cfg.bound(len(theta)) + 1e-12
    for _ in range(cfg.max_redraws):
        th = theta.copy()
        b = beta
        move_beta = cfg.kernel == "single" and rng.random() < cfg.beta_move_prob
        if cfg.kernel == "joint" or not move_beta:
            i = int(rng.integers(len(th)))
            th[i] += cfg.theta_step if rng.random() < 0.5 else -cfg.theta_step
        if cfg.kernel == "joint" or move_beta:
            b += cfg.beta_step if rng.random() < 0.5 else -cfg.beta_step
        th, b = _clamp(th, b, cfg)
        if th.sum() <= bound:
            return th, b
    return theta.copy(), beta


def solve_warm(
    mdp: TabularMdp,
    theta,
    beta: float,
    solver_cfg: SolverConfig,
    warm: SoftSolution | None,
    sweep_cap: int,
) -> SoftSolution:
    """Capped warm start; continues to full tolerance if the cap is not enough."""
    if warm is None:
        return soft_value_iteration(mdp, theta, beta, replace(solver_cfg, warm_start=None))
    quick = soft_value_iteration(
        mdp, theta, beta, replace(solver_cfg, warm_start=warm, max_sweeps=sweep_cap)
    )
    if quick.converged:
        return quick
    full = soft_value_iteration(mdp, theta, beta, replace(solver_cfg, warm_start=quick))
    return replace_sweeps(full, quick.iterations_used + full.iterations_used)


def replace_sweeps(sol: SoftSolution, sweeps: int) -> SoftSolution:
    return replace(sol, iterations_used=sweeps)


def log_posterior(
    mdp: TabularMdp,
    demos: EpisodeSet,
    theta,
    beta: float,
    prior: PriorSpec,
    solver_cfg: SolverConfig | None = None,
    warm: SoftSolution | None = None,
    sweep_cap: int = 50,
) -> tuple[float, SoftSolution | None]:
    """Demo log-likelihood plus log prior; -inf (and no solve) outside the prior."""
    if len(demos) == 0:
        raise ValueError("inference needs at least one trajectory")
    lp = prior.log_density(theta, beta)
    if not np.isfinite(lp):
        return -np.inf, None
    sol = solve_warm(mdp, theta, beta, solver_cfg or SolverConfig(), warm, sweep_cap)
    states, actions = demos.all_steps()
    return float(sol.log_policy[states, actions].sum()) + lp, sol


def metropolis_accept(delta: float, u: float) -> bool:
    return bool(u < min(1.0, np.exp(min(delta, 0.0))))


LogTarget = Callable[[np.ndarray, float, object], tuple[float, object]]


def walk(
    log_target: LogTarget,
    theta0,
    beta0: float,
    cfg: McmcConfig,
    rng: np.random.Generator,
    u_stream: Iterator[float] | None = None,
) -> ChainResult:
    """Metropolis grid walk for any log target ``f(theta, beta, aux) -> (value, aux)``.

    ``aux`` is whatever the target wants cached for the current point (the
    soft solution for the MDP posterior) and is passed back for warm starts.
    """
    theta = np.asarray(theta0, dtype=np.float64).copy()
    beta = float(beta0)
    cur, aux = log_target(theta, beta, None)
    state = McmcChainState(theta, beta, cur, aux)
    K = cfg.max_iterations
    d = len(theta)
    samples = np.empty((K, d + 1))
    lps = np.empty(K)
    acc = np.zeros(K, dtype=bool)
    initial = np.append(theta, beta)
    best, best_lp = initial.copy(), cur
    for k in range(K):
        th, b = propose(state, cfg, rng)
        same = b == state.beta and np.array_equal(th, state.theta)
        if same:
            new, new_aux = state.log_posterior, state.solution
        else:
            new, new_aux = log_target(th, b, state.solution)
        u = next(u_stream) if u_stream is not None else rng.random()
        if metropolis_accept(new - state.log_posterior, u):
            state.theta, state.beta = th, b
            state.log_posterior, state.solution = new, new_aux
            state.accepted += 1
            acc[k] = True
            if new > best_lp:
                best_lp = new
                best = np.append(th, b)
        samples[k, :d] = state.theta
        samples[k, d] = state.beta
        lps[k] = state.log_posterior
    return ChainResult(
        samples=samples,
        log_posteriors=lps,
        accepted=acc,
        initial=initial,
        initial_log_posterior=float(cur),
        burn_in_fraction=cfg.burn_in_fraction,
        canonical=cfg.canonical_estimates,
        map_sample=best,
        map_log_posterior=float(best_lp),
    )


def initial_point(dim: int, cfg: McmcConfig, rng: np.random.Generator):
    bound = cfg.bound(dim)
    theta = rng.uniform(0.0, cfg.theta_max, size=dim)
    for _ in range(100):
        if theta.sum() <= bound:
            break
        theta = rng.uniform(0.0, cfg.theta_max, size=dim)
    else:
        theta *= bound / theta.sum()
    beta = float(rng.uniform(cfg.beta_min, cfg.beta_max))
    return theta, beta


def run_chain(
    mdp: TabularMdp,
    demos: EpisodeSet,
    prior: PriorSpec,
    cfg: McmcConfig | None = None,
    solver_cfg: SolverConfig | None = None,
    u_stream: Iterator[float] | None = None,
) -> ChainResult:
    """Random start in the box, then ``max_iterations`` Metropolis steps."""
    cfg = cfg or McmcConfig()
    solver_cfg = solver_cfg or SolverConfig()
    if len(demos) == 0:
        raise ValueError("inference needs at least one trajectory")
    rng = np.random.default_rng(cfg.seed)
    theta0, beta0 = initial_point(mdp.feature_dim, cfg, rng)
    states, actions = demos.all_steps()
    sweeps = [0]

    def target(theta, beta, warm):
        lp = prior.log_density(theta, beta)
        if not np.isfinite(lp):
            return -np.inf, warm
        sol = solve_warm(mdp, theta, beta, solver_cfg, warm, cfg.warm_start_sweep_cap)
        sweeps[0] += sol.iterations_used
        return float(sol.log_policy[states, actions].sum()) + lp, sol

    result = walk(target, theta0, beta0, cfg, rng, u_stream)
    return replace(result, sweeps=sweeps[0])


def canonicalize(samples: np.ndarray) -> np.ndarray:
    """Rescale each (theta, beta) row so that sum(theta) == 1."""
    norms = samples[:, :-1].sum(axis=1)
    ok = norms > 0
    out = samples[ok] / norms[ok, None]
    return out


def point_estimate(
    result: ChainResult, burn_in_fraction: float | None = None, canonical: bool = False
) -> tuple[np.ndarray, float]:
    """Mean of post-burn-in samples; the initial point when the chain is empty."""
    frac = result.burn_in_fraction if burn_in_fraction is None else burn_in_fraction
    samples = result.samples
    if len(samples) == 0:
        samples = result.initial[None, :]
    else:
        start = int(np.floor(frac * len(samples)))
        samples = samples[start:]
        if len(samples) == 0:
            raise ValueError("burn-in discards every sample")
    if canonical:
        canon = canonicalize(samples)
        if len(canon):
            samples = canon
    mean = samples.mean(axis=0)
    return mean[:-1], float(mean[-1])
