"""Evaluation metrics and permutation-tested Pearson correlation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import TabularMdp
from .solver import SolverConfig, soft_value_iteration


class UndefinedCorrelationError(ValueError):
    pass


class DegenerateNormalizerError(ArithmeticError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    expertise_distance: float
    preference_similarity: float
    policy_regret: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = (self.expertise_distance, self.preference_similarity, self.policy_regret)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("metrics must be finite")
        if self.policy_regret < 0:
            raise ValueError("regret cannot be negative")


def expertise_distance(beta_star: float, beta_hat: float) -> float:
    return abs(float(beta_star) - float(beta_hat))


def preference_similarity(theta_star, theta_hat, printed_form: bool = False) -> float:
    """Cosine similarity.

    ``printed_form=True`` gives ``1 - a.b / (|a|^2 |b|^2)``, kept only for
    comparison with the squared-norm variant; it is not a similarity.
    """
    a = np.asarray(theta_star, dtype=np.float64)
    b = np.asarray(theta_hat, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("vectors differ in dimension")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity of a zero vector is undefined")
    if printed_form:
        return float(1.0 - a @ b / (na**2 * nb**2))
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def regret_from_values(v_star: np.ndarray, v_hat: np.ndarray) -> float:
    """Mean absolute value gap normalised by max |V*|."""
    v_star = np.asarray(v_star, dtype=np.float64)
    v_hat = np.asarray(v_hat, dtype=np.float64)
    scale = np.max(np.abs(v_star))
    if scale == 0:
        if np.all(v_hat == 0):
            return 0.0
        raise DegenerateNormalizerError("true value function is identically zero")
    return float(np.mean(np.abs(v_star - v_hat)) / scale)


def policy_regret(
    mdp: TabularMdp,
    theta_star,
    beta_star: float,
    theta_hat,
    solver_cfg: SolverConfig | None = None,
) -> float:
    """Value gap between true and estimated preferences, both at the true beta."""
    v_star = soft_value_iteration(mdp, theta_star, beta_star, solver_cfg).v_table
    v_hat = soft_value_iteration(mdp, theta_hat, beta_star, solver_cfg).v_table
    return regret_from_values(v_star, v_hat)


def pearson(xs, ys, permutations: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """Sample Pearson rho with a two-sided permutation p-value (+1 smoothed)."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D and of equal length")
    if len(x) < 3:
        raise ValueError("need at least three pairs")
    xc, yc = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(xc @ xc), np.sqrt(yc @ yc)
    if sx == 0 or sy == 0:
        raise UndefinedCorrelationError("correlation with a constant sequence is undefined")
    xz, yz = xc / sx, yc / sy
    rho = float(np.clip(xz @ yz, -1.0, 1.0))
    if permutations <= 0:
        return rho, float("nan")
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = 2000
    done = 0
    while done < permutations:
        n = min(chunk, permutations - done)
        idx = rng.permuted(np.tile(np.arange(len(y)), (n, 1)), axis=1)
        perm = yz[idx] @ xz
        hits += int(np.sum(np.abs(perm) >= abs(rho) - 1e-12))
        done += n
    return rho, (hits + 1) / (permutations + 1)
