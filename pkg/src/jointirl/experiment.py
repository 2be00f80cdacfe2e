"""Experiment orchestration: condition comparisons over seeded instances."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .discrete import (
    DEFAULT_BETAS,
    DEFAULT_COMPONENT_VALUES,
    HypothesisSet,
    SolutionCache,
    init_belief,
    point_estimates,
    preference_vectors,
    restrict_set,
    trajectory_increments,
    _apply,
)
from .environments import build_mdp, generate_environment, load_environment
from .mcmc import McmcConfig, PriorSpec, point_estimate, run_chain
from .metrics import (
    expertise_distance,
    pearson,
    preference_similarity,
    regret_from_values,
    UndefinedCorrelationError,
)
from .simulator import SimulatorConfig, generate_episode_set
from .solver import SolverConfig

CONDITIONS = ("full_set", "fixed_theta", "fixed_beta", "out_of_set")
BACKENDS = ("discrete", "mcmc")
DEFAULT_GROUPS = {"high": [0.01, 0.09], "medium": [0.5, 1.0], "low": [5.0, 10.0]}


@dataclass
class ExperimentConfig:
    environments: int | list = 5
    size_range: tuple = (8, 12)
    runs: int = 5
    ks: list = field(default_factory=lambda: [5, 10, 15, 20])
    component_values: list = field(default_factory=lambda: list(DEFAULT_COMPONENT_VALUES))
    dim: int = 5
    betas: list = field(default_factory=lambda: list(DEFAULT_BETAS))
    groups: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_GROUPS.items()})
    levels: list = field(default_factory=lambda: ["high", "medium", "low"])
    conditions: list = field(default_factory=lambda: ["full_set", "fixed_theta", "fixed_beta"])
    backends: list = field(default_factory=lambda: ["discrete"])
    schedule: list = field(default_factory=lambda: [5, 10, 15, 20])
    out_of_set_beta_range: tuple = (0.01, 10.0)
    discount: float = 0.95
    horizon_cap: int = 500
    solver: dict = field(default_factory=dict)
    mcmc: dict = field(default_factory=dict)
    prior: dict = field(default_factory=dict)
    degenerate_floor: float | None = None
    seed: int = 0
    out_dir: str = "results"
    jobs: int = 1

    def __post_init__(self):
        if not self.conditions:
            raise ValueError("at least one condition is required")
        for c in self.conditions:
            if c not in CONDITIONS:
                raise ValueError(f"unknown condition {c!r}")
        for b in self.backends:
            if b not in BACKENDS:
                raise ValueError(f"unknown back-end {b!r}")
        if any(b <= a for a, b in zip(self.schedule, self.schedule[1:])) or not self.schedule:
            raise ValueError("schedule must be non-empty and strictly increasing")
        for lv in self.levels:
            if lv not in self.groups:
                raise ValueError(f"level {lv!r} has no beta group")
        if isinstance(self.environments, list):
            for p in self.environments:
                if not Path(p).exists():
                    raise FileNotFoundError(p)
        self.size_range = tuple(self.size_range)
        self.out_of_set_beta_range = tuple(self.out_of_set_beta_range)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["size_range"] = list(self.size_range)
        d["out_of_set_beta_range"] = list(self.out_of_set_beta_range)
        return d

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**self.solver)

    def opposite_groups(self, level: str) -> list[str]:
        """Groups at the largest rank distance from ``level``, ranked by mean log beta.

        With high/medium/low this maps high to low, low to high, and medium
        to both extremes.
        """
        order = sorted(self.groups, key=lambda g: float(np.mean(np.log(self.groups[g]))))
        pos = order.index(level)
        far = max(abs(i - pos) for i in range(len(order)))
        if far == 0:
            raise ValueError("the opposite-group rule needs at least two groups")
        return [g for i, g in enumerate(order) if abs(i - pos) == far]

    def group_of(self, beta: float) -> str:
        """Name of the group whose betas are nearest on a log scale."""
        best, name = math.inf, ""
        for g, vals in self.groups.items():
            d = min(abs(math.log(beta) - math.log(v)) for v in vals)
            if d < best:
                best, name = d, g
        return name


@dataclass
class ResultRow:
    environment: int
    run: int
    condition: str
    group: str
    k: int
    episodes: int
    theta_hat: str
    beta_hat: float
    expertise_distance: float
    preference_similarity: float
    policy_regret: float
    wall_seconds: float
    backend: str
    beta_star: float = float("nan")
    theta_star: str = ""
    num_states: int = 0
    mean_episode_length: float = float("nan")
    psi_size: int = 0
    error: str = ""


RESULT_FIELDS = [f.name for f in fields(ResultRow)]
TIMING_FIELDS = ("wall_seconds",)


@dataclass(frozen=True)
class Instance:
    env_index: int
    run: int
    k: int
    level: str
    k_index: int
    level_index: int


def derive_seed(*keys: int) -> int:
    """Hierarchical seed: master -> environment -> run -> instance -> ..."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def environment_seed(master: int, index: int) -> int:
    return derive_seed(master, 1, index)


def load_environments(cfg: ExperimentConfig) -> list:
    if isinstance(cfg.environments, list):
        return [load_environment(p) for p in cfg.environments]
    return [
        generate_environment(environment_seed(cfg.seed, i), cfg.size_range)
        for i in range(int(cfg.environments))
    ]


def instances(cfg: ExperimentConfig, n_envs: int) -> list[Instance]:
    out = []
    for e in range(n_envs):
        for r in range(cfg.runs):
            for ki, k in enumerate(cfg.ks):
                for li, lv in enumerate(cfg.levels):
                    out.append(Instance(e, r, k, lv, ki, li))
    return out


def _vec(v) -> str:
    return " ".join(repr(round(float(x), 12)) for x in v)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _draw_other(rng, pool: np.ndarray, exclude: np.ndarray) -> np.ndarray:
    mask = ~np.all(np.isclose(pool, exclude[None, :], atol=1e-12), axis=1)
    cands = pool[mask]
    return cands[int(rng.integers(len(cands)))]


class _Evaluator:
    """Metrics against one ground truth, with the true value table cached."""

    def __init__(self, mdp, theta_star, beta_star, solver_cfg, cache: SolutionCache):
        self.mdp = mdp
        self.theta_star = np.asarray(theta_star)
        self.beta_star = float(beta_star)
        self.solver_cfg = solver_cfg
        self.cache = cache
        self.v_star = cache.get(self.theta_star, self.beta_star).v_table

    def __call__(self, theta_hat, beta_hat):
        v_hat = self.cache.get(np.asarray(theta_hat, dtype=np.float64), self.beta_star).v_table
        return (
            expertise_distance(self.beta_star, beta_hat),
            preference_similarity(self.theta_star, theta_hat),
            regret_from_values(self.v_star, v_hat),
        )


def _discrete_rows(base, hs, mdp, demos, schedule, evaluator, solver_cfg, floor):
    # fresh cache: the timing column must include every solve
    rows = []
    t0 = time.perf_counter()
    bel = init_belief(hs, mdp, solver_cfg, cache=SolutionCache(mdp, solver_cfg), degenerate_floor=floor)
    seen = 0
    for n in schedule:
        while seen < n:
            bel = _apply(bel, trajectory_increments(bel, demos[seen]))
            seen += 1
        theta_hat, beta_hat = point_estimates(bel)
        elapsed = time.perf_counter() - t0
        dist, sim, reg = evaluator(theta_hat, beta_hat)
        rows.append(
            ResultRow(
                **base,
                episodes=n,
                theta_hat=_vec(theta_hat),
                beta_hat=float(beta_hat),
                expertise_distance=dist,
                preference_similarity=sim,
                policy_regret=reg,
                wall_seconds=elapsed,
                backend="discrete",
                psi_size=len(hs),
            )
        )
    return rows


def _mcmc_rows(base, mdp, demos, schedule, evaluator, cfg, seed):
    rows = []
    mc = dict(cfg.mcmc)
    prior = PriorSpec(**cfg.prior)
    for j, n in enumerate(schedule):
        mcfg = McmcConfig(**{**mc, "seed": derive_seed(seed, 7, j)})
        t0 = time.perf_counter()
        result = run_chain(mdp, demos[:n], prior, mcfg, cfg.solver_config())
        theta_hat, beta_hat = point_estimate(result, canonical=mcfg.canonical_estimates)
        elapsed = time.perf_counter() - t0
        dist, sim, reg = evaluator(theta_hat, beta_hat)
        rows.append(
            ResultRow(
                **base,
                episodes=n,
                theta_hat=_vec(theta_hat),
                beta_hat=float(beta_hat),
                expertise_distance=dist,
                preference_similarity=sim,
                policy_regret=reg,
                wall_seconds=elapsed,
                backend="mcmc",
                psi_size=0,
            )
        )
    return rows


def _error_rows(base, schedule, backend, exc):
    return [
        ResultRow(
            **base,
            episodes=n,
            theta_hat="",
            beta_hat=float("nan"),
            expertise_distance=float("nan"),
            preference_similarity=float("nan"),
            policy_regret=float("nan"),
            wall_seconds=0.0,
            backend=backend,
            error=f"{type(exc).__name__}: {exc}",
        )
        for n in schedule
    ]


def run_instance(cfg: ExperimentConfig, env, inst: Instance) -> list[ResultRow]:
    solver_cfg = cfg.solver_config()
    mdp = build_mdp(env, cfg.discount)
    theta_all = preference_vectors(cfg.component_values, cfg.dim)
    set_seed = derive_seed(cfg.seed, 2, inst.env_index, inst.run, inst.k_index)
    rng_set = np.random.default_rng(set_seed)
    idx = rng_set.choice(len(theta_all), size=inst.k, replace=False)
    theta_k = theta_all[idx]
    hs = HypothesisSet(theta_k, np.asarray(cfg.betas, dtype=np.float64), set_seed, inst.k)

    inst_seed = derive_seed(cfg.seed, 3, inst.env_index, inst.run, inst.k_index, inst.level_index)
    rng = np.random.default_rng(inst_seed)
    group_betas = [b for b in cfg.groups[inst.level] if b in cfg.betas] or cfg.groups[inst.level]
    theta_star = theta_k[int(rng.integers(inst.k))]
    beta_star = float(group_betas[int(rng.integers(len(group_betas)))])
    others = [b for g in cfg.opposite_groups(inst.level) for b in cfg.groups[g]]
    fixed_beta = float(others[int(rng.integers(len(others)))])
    pool = theta_k if inst.k > 1 else theta_all
    fixed_theta = _draw_other(rng, pool, theta_star)
    lo, hi = cfg.out_of_set_beta_range
    beta_out = float(rng.uniform(lo, hi))
    outside = ~np.any(
        np.all(np.isclose(theta_all[:, None, :], theta_k[None, :, :], atol=1e-12), axis=2), axis=1
    )
    theta_out = theta_all[outside][int(rng.integers(outside.sum()))]

    n_max = max(cfg.schedule)
    cache = SolutionCache(mdp, solver_cfg)
    sim_cfg = SimulatorConfig(n_max, cfg.horizon_cap, derive_seed(inst_seed, 4))
    demos_in = generate_episode_set(
        mdp, theta_star, beta_star, sim_cfg, solution=cache.get(theta_star, beta_star)
    )
    rows = []
    for cond in cfg.conditions:
        if cond == "out_of_set":
            truth = (theta_out, beta_out)
            sim_out = SimulatorConfig(n_max, cfg.horizon_cap, derive_seed(inst_seed, 5))
            demos = generate_episode_set(
                mdp, theta_out, beta_out, sim_out, solution=cache.get(theta_out, beta_out)
            )
            cond_hs = hs
        else:
            truth = (theta_star, beta_star)
            demos = demos_in
            if cond == "full_set":
                cond_hs = hs
            elif cond == "fixed_theta":
                cond_hs = restrict_set(hs, fixed_theta=fixed_theta)
            else:
                cond_hs = restrict_set(hs, fixed_beta=fixed_beta)
        evaluator = _Evaluator(mdp, truth[0], truth[1], solver_cfg, cache)
        group = inst.level if cond != "out_of_set" else cfg.group_of(truth[1])
        base = dict(
            environment=inst.env_index,
            run=inst.run,
            condition=cond,
            group=group,
            k=inst.k,
            beta_star=float(truth[1]),
            theta_star=_vec(truth[0]),
            num_states=mdp.num_states,
        )
        lengths = [len(t) for t in demos]
        for backend in cfg.backends:
            if backend == "mcmc" and cond not in ("full_set", "out_of_set"):
                continue
            try:
                if backend == "discrete":
                    new = _discrete_rows(
                        base, cond_hs, mdp, demos, cfg.schedule, evaluator, solver_cfg,
                        cfg.degenerate_floor,
                    )
                else:
                    new = _mcmc_rows(base, mdp, demos, cfg.schedule, evaluator, cfg, inst_seed)
            except Exception as exc:  # recorded per row; the run continues
                new = _error_rows(base, cfg.schedule, backend, exc)
            for row in new:
                row.mean_episode_length = float(np.mean(lengths[: row.episodes]))
            rows.extend(new)
    return rows


def _run_one(args):
    cfg, env, inst = args
    return run_instance(cfg, env, inst)


def run_experiment(cfg: ExperimentConfig, out_path=None, jobs: int | None = None) -> list[ResultRow]:
    envs = load_environments(cfg)
    todo = [(cfg, envs[i.env_index], i) for i in instances(cfg, len(envs))]
    jobs = jobs or cfg.jobs
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_one, todo))
    else:
        chunks = [_run_one(t) for t in todo]
    rows = [r for chunk in chunks for r in chunk]
    if out_path is not None:
        write_results(rows, out_path)
    return rows


def write_results(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in RESULT_FIELDS])


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


ANALYSIS_FACTORS = ("episodes", "psi_size", "num_states", "mean_episode_length", "beta_star")
ANALYSIS_METRICS = ("preference_similarity", "expertise_distance", "policy_regret")


def analyze(rows: list[dict], factors=ANALYSIS_FACTORS, metrics=ANALYSIS_METRICS,
            permutations: int = 10_000, seed: int = 0) -> list[dict]:
    """Pearson rho and permutation p for every (factor, metric) pair."""
    usable = [r for r in rows if not r.get("error")]
    if usable:
        missing = [f for f in (*factors, *metrics) if f not in usable[0]]
        if missing:
            raise KeyError(f"columns not in results: {missing}")
    table = []
    for f in factors:
        for m in metrics:
            pairs = [
                (float(r[f]), float(r[m]))
                for r in usable
                if not (math.isnan(float(r[f])) or math.isnan(float(r[m])))
            ]
            entry = {"factor": f, "metric": m, "n": len(pairs), "rho": "", "p_value": "", "note": ""}
            try:
                xs, ys = zip(*pairs) if pairs else ((), ())
                rho, p = pearson(xs, ys, permutations, seed)
                entry["rho"], entry["p_value"] = repr(rho), repr(p)
            except UndefinedCorrelationError:
                entry["note"] = "undefined (constant column)"
            except ValueError as exc:
                entry["note"] = f"undefined ({exc})"
            table.append(entry)
    return table


def write_analysis(table, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["factor", "metric", "n", "rho", "p_value", "note"])
        w.writeheader()
        w.writerows(table)
