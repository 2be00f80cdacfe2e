"""Tabular MDP, linear reward and trajectory containers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Raised when parameters do not fit the MDP they are used with."""


class TrajectoryError(ValueError):
    """Raised when a trajectory is not consistent with an MDP."""


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Deterministic tabular MDP with a transition-level feature table.

    ``next_state[s, a]`` is the successor of taking ``a`` in ``s`` and
    ``features[s, a]`` is phi(s, a, next_state[s, a]). ``action_mask`` marks
    admissible actions; ``offset`` is an optional reward term that does not
    depend on theta (used for the goal bonus).
    """

    next_state: np.ndarray
    features: np.ndarray
    terminal: np.ndarray
    discount: float = 0.95
    action_mask: np.ndarray | None = None
    offset: np.ndarray | None = None
    action_names: tuple[str, ...] = ()
    state_labels: tuple = ()

    def __post_init__(self):
        ns = np.asarray(self.next_state, dtype=np.int64)
        feats = np.asarray(self.features, dtype=np.float64)
        term = np.asarray(self.terminal, dtype=bool)
        if ns.ndim != 2:
            raise ConfigurationError("next_state must be a (states, actions) table")
        S, A = ns.shape
        if feats.shape[:2] != (S, A) or feats.ndim != 3:
            raise ConfigurationError(
                f"features must have shape ({S}, {A}, d), got {feats.shape}"
            )
        if term.shape != (S,):
            raise ConfigurationError("terminal must be a boolean vector over states")
        mask = (
            np.ones((S, A), dtype=bool)
            if self.action_mask is None
            else np.asarray(self.action_mask, dtype=bool)
        )
        if mask.shape != (S, A):
            raise ConfigurationError("action_mask shape mismatch")
        if not mask.any(axis=1).all():
            raise ConfigurationError("every state needs at least one admissible action")
        # inadmissible entries must still index a state so table gathers stay valid
        if np.any((ns < 0) | (ns >= S)):
            raise ConfigurationError("transition leads outside the state space")
        if not 0.0 < self.discount < 1.0:
            raise ConfigurationError(f"discount must lie in (0, 1), got {self.discount}")
        if not np.all(np.isfinite(feats)):
            raise ConfigurationError("features must be finite")
        rows = np.nonzero(term)[0]
        if len(rows):
            for t in rows:
                if np.any(ns[t][mask[t]] != t):
                    raise ConfigurationError(f"terminal state {t} is not absorbing")
            feats = feats.copy()
            feats[rows] = 0.0
        off = None
        if self.offset is not None:
            off = np.asarray(self.offset, dtype=np.float64)
            if off.shape != (S, A):
                raise ConfigurationError("offset must be a (states, actions) table")
            off = off.copy()
            off[rows] = 0.0
        for name, value in (
            ("next_state", ns),
            ("features", feats),
            ("terminal", term),
            ("action_mask", mask),
            ("offset", off),
        ):
            if value is not None:
                value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def num_actions(self) -> int:
        return self.next_state.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[2]

    def actions(self, s: int) -> np.ndarray:
        return np.nonzero(self.action_mask[s])[0]

    def transition(self, s: int, a: int) -> int:
        if not self.action_mask[s, a]:
            raise TrajectoryError(f"action {a} is not admissible in state {s}")
        return int(self.next_state[s, a])

    def feature_map(self, s: int, a: int, s2: int) -> np.ndarray:
        if self.transition(s, a) != s2:
            raise TrajectoryError(f"({s}, {a}) does not lead to {s2}")
        return self.features[s, a]

    def reward_table(self, theta) -> np.ndarray:
        """Rewards for every (s, a) under weights ``theta``."""
        theta = check_theta(theta, self.feature_dim)
        r = self.features @ theta
        if self.offset is not None:
            r = r + self.offset
        return r

    def non_terminal_states(self) -> np.ndarray:
        return np.nonzero(~self.terminal)[0]


def check_theta(theta, dim: int, theta_max: float | None = None) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (dim,):
        raise ConfigurationError(
            f"theta has shape {theta.shape}, the feature dimension is {dim}"
        )
    if not np.all(np.isfinite(theta)):
        raise ConfigurationError("theta must be finite")
    if np.any(theta < 0):
        raise ConfigurationError("theta components must be non-negative")
    if theta_max is not None and np.any(theta > theta_max):
        raise ConfigurationError(f"theta components must not exceed {theta_max}")
    return theta


def check_beta(beta: float) -> float:
    beta = float(beta)
    if not np.isfinite(beta) or beta <= 0:
        raise ValueError(f"beta must be a positive finite number, got {beta}")
    return beta


def reward_of_transition(mdp: TabularMdp, theta, s: int, a: int, s2: int) -> float:
    """theta . phi(s, a, s2); all sign conventions live in the features."""
    phi = mdp.feature_map(s, a, s2)
    theta = check_theta(theta, mdp.feature_dim)
    r = float(theta @ phi)
    if mdp.offset is not None:
        r += float(mdp.offset[s, a])
    return r


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        st = np.asarray(self.states, dtype=np.int64).reshape(-1)
        ac = np.asarray(self.actions, dtype=np.int64).reshape(-1)
        if st.shape != ac.shape:
            raise TrajectoryError("states and actions must have equal length")
        st.setflags(write=False)
        ac.setflags(write=False)
        object.__setattr__(self, "states", st)
        object.__setattr__(self, "actions", ac)

    @classmethod
    def from_steps(cls, steps: Iterable[Sequence[int]]) -> "Trajectory":
        steps = list(steps)
        if not steps:
            return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
        arr = np.asarray(steps, dtype=np.int64)
        return cls(arr[:, 0], arr[:, 1])

    @property
    def steps(self) -> list[tuple[int, int]]:
        return list(zip(self.states.tolist(), self.actions.tolist()))

    def __len__(self):
        return len(self.states)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return np.array_equal(self.states, other.states) and np.array_equal(
            self.actions, other.actions
        )

    __hash__ = None


@dataclass(frozen=True)
class EpisodeSet:
    trajectories: tuple[Trajectory, ...]
    warnings: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))

    def __len__(self):
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return EpisodeSet(self.trajectories[idx], self.warnings, dict(self.meta))
        return self.trajectories[idx]

    def all_steps(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.trajectories:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return (
            np.concatenate([t.states for t in self.trajectories]),
            np.concatenate([t.actions for t in self.trajectories]),
        )


@dataclass(frozen=True)
class StepCheck:
    index: int
    admissible: bool
    consistent: bool

    @property
    def ok(self) -> bool:
        return self.admissible and self.consistent


@dataclass(frozen=True)
class ValidationReport:
    steps: tuple[StepCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.steps)

    @property
    def first_failure(self) -> int | None:
        for c in self.steps:
            if not c.ok:
                return c.index
        return None

    def __bool__(self):
        return self.passed


def validate_trajectory(mdp: TabularMdp, traj: Trajectory) -> ValidationReport:
    """Per-step admissibility and successor consistency.

    Step i is consistent when the next recorded state equals
    transition(s_i, a_i); the final step has no successor to check.
    """
    checks = []
    n = len(traj)
    for i in range(n):
        s, a = int(traj.states[i]), int(traj.actions[i])
        in_range = 0 <= s < mdp.num_states and 0 <= a < mdp.num_actions
        admissible = bool(in_range and mdp.action_mask[s, a])
        consistent = admissible
        if admissible and i + 1 < n:
            consistent = int(mdp.next_state[s, a]) == int(traj.states[i + 1])
        checks.append(StepCheck(i, admissible, consistent))
    return ValidationReport(tuple(checks))
