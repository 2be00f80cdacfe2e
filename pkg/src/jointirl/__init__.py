"""Joint inference of reward preferences and expertise level from demonstrations."""

from .discrete import (
    HypothesisBelief,
    HypothesisSet,
    build_hypothesis_set,
    init_belief,
    map_hypothesis,
    point_estimates,
    restrict_set,
    update_belief_action,
    update_belief_trajectory,
)
from .environments import (
    WarehouseEnvironment,
    ZoneGridEnvironment,
    build_mdp,
    generate_environment,
    load_environment,
    save_environment,
)
from .mcmc import McmcConfig, PriorSpec, point_estimate, run_chain
from .mdp import EpisodeSet, TabularMdp, Trajectory, validate_trajectory
from .metrics import expertise_distance, pearson, policy_regret, preference_similarity
from .simulator import SimulatorConfig, generate_episode_set
from .solver import SolverConfig, SoftSolution, maxent_policy, soft_value_iteration

__version__ = "0.1.0"

__all__ = [
    "EpisodeSet",
    "HypothesisBelief",
    "HypothesisSet",
    "McmcConfig",
    "PriorSpec",
    "SimulatorConfig",
    "SoftSolution",
    "SolverConfig",
    "TabularMdp",
    "Trajectory",
    "WarehouseEnvironment",
    "ZoneGridEnvironment",
    "build_hypothesis_set",
    "build_mdp",
    "expertise_distance",
    "generate_environment",
    "generate_episode_set",
    "init_belief",
    "load_environment",
    "map_hypothesis",
    "maxent_policy",
    "pearson",
    "point_estimate",
    "point_estimates",
    "policy_regret",
    "preference_similarity",
    "restrict_set",
    "run_chain",
    "save_environment",
    "soft_value_iteration",
    "update_belief_action",
    "update_belief_trajectory",
    "validate_trajectory",
]
