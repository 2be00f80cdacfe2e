"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 validation error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


from . import experiment as exp
from .discrete import (
    DegenerateEvidenceError,
    build_hypothesis_set,
    init_belief,
    map_hypothesis,
    point_estimates,
    update_belief_action,
    update_belief_trajectory,
)
from .environments import (
    EnvironmentFormatError,
    GenerationError,
    WarehouseEnvironment,
    build_mdp,
    generate_environment,
    load_environment,
    save_environment,
)
from .formats import (
    load_hypothesis_set,
    read_trajectories,
    write_belief_csv,
    write_trace_csv,
    write_trajectories,
)
from .ingest import IngestionError, ingest_records, optimal_rollout, read_raw, summarize_trajectory
from .mcmc import McmcConfig, PriorSpec, run_chain
from .mdp import ConfigurationError, EpisodeSet, TrajectoryError, check_theta
from .metrics import DegenerateNormalizerError, UndefinedCorrelationError
from .simulator import SimulatorConfig, generate_episode_set
from .solver import NumericError, SolverConfig

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _load_json(path) -> dict:
    if path is None:
        return {}
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return data


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def _seed(args, default: int = 0) -> int:
    return default if args.seed is None else args.seed


# -- subcommands -------------------------------------------------------------


def cmd_gen_env(args) -> int:
    out = Path(args.out or "environments")
    out.mkdir(parents=True, exist_ok=True)
    master = _seed(args)
    paths = []
    for i in range(args.count):
        env = generate_environment(exp.environment_seed(master, i), (args.min_size, args.max_size))
        path = out / f"env_{i:03d}.json"
        save_environment(env, path)
        paths.append(str(path))
    _emit({"environments": paths})
    return EXIT_OK


def cmd_simulate(args) -> int:
    env = load_environment(args.env)
    mdp = build_mdp(env, args.discount)
    theta = check_theta(args.theta, mdp.feature_dim)
    cfg = SimulatorConfig(args.episodes, args.horizon_cap, _seed(args))
    demos = generate_episode_set(mdp, theta, args.beta, cfg)
    for w in demos.warnings:
        print(f"warning: {w}", file=sys.stderr)
    out = args.out or "trajectories.jsonl"
    write_trajectories(out, demos)
    _emit({"trajectories": out, "episodes": len(demos)})
    return EXIT_OK


def _hypotheses(args, conf: dict, dim: int):
    if args.hypotheses:
        return load_hypothesis_set(args.hypotheses)
    spec = conf.get("hypotheses", {})
    return build_hypothesis_set(
        spec.get("component_values", exp.DEFAULT_COMPONENT_VALUES),
        spec.get("dim", dim),
        spec.get("betas", exp.DEFAULT_BETAS),
        args.k if args.k is not None else spec.get("k"),
        _seed(args),
        spec.get("dedupe", False),
    )


def cmd_infer(args) -> int:
    if args.backend == "mcmc" and args.granularity == "action":
        raise UsageError("per-action granularity is only available for the discrete back-end")
    conf = _load_json(args.config)
    env = load_environment(args.env)
    mdp = build_mdp(env, args.discount)
    demos = read_trajectories(args.trajectories, mdp)
    solver_cfg = SolverConfig(**conf.get("solver", {}))
    out = Path(args.out or "inference")
    out.mkdir(parents=True, exist_ok=True)
    if args.backend == "discrete":
        hs = _hypotheses(args, conf, mdp.feature_dim)
        bel = init_belief(hs, mdp, solver_cfg, degenerate_floor=conf.get("degenerate_floor", -700.0))
        for traj in demos:
            if args.granularity == "action":
                for s, a in traj.steps:
                    bel = update_belief_action(bel, s, a)
            else:
                bel = update_belief_trajectory(bel, mdp, traj)
        theta_hat, beta_hat = point_estimates(bel)
        theta_map, beta_map = map_hypothesis(bel)
        write_belief_csv(bel, out / "belief.csv")
        result = {
            "backend": "discrete",
            "theta_hat": theta_hat.tolist(),
            "beta_hat": beta_hat,
            "theta_map": theta_map.tolist(),
            "beta_map": beta_map,
            "belief_csv": str(out / "belief.csv"),
        }
    else:
        mc = dict(conf.get("mcmc", {}))
        mc["seed"] = _seed(args, mc.get("seed", 0))
        if args.iterations is not None:
            mc["max_iterations"] = args.iterations
        cfg = McmcConfig(**mc)
        chain = run_chain(mdp, demos, PriorSpec(**conf.get("prior", {})), cfg, solver_cfg)
        theta_hat, beta_hat = chain.estimate
        write_trace_csv(chain, out / "trace.csv")
        result = {
            "backend": "mcmc",
            "theta_hat": theta_hat.tolist(),
            "beta_hat": beta_hat,
            "theta_max_posterior": chain.map_sample[:-1].tolist(),
            "beta_max_posterior": float(chain.map_sample[-1]),
            "acceptance_rate": chain.acceptance_rate,
            "trace_csv": str(out / "trace.csv"),
        }
    (out / "estimates.json").write_text(json.dumps(result, indent=2) + "\n")
    _emit(result)
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.config is None:
        raise UsageError("experiment needs --config")
    data = _load_json(args.config)
    if args.seed is not None:
        data["seed"] = args.seed
    cfg = exp.ExperimentConfig.from_dict(data)
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # keep the exact configuration next to the results
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    rows = exp.run_experiment(cfg, out / "results.csv", args.jobs)
    failed = sum(1 for r in rows if r.error)
    _emit({"results": str(out / "results.csv"), "rows": len(rows), "failed_rows": failed})
    return EXIT_OK


def cmd_analyze(args) -> int:
    rows = exp.read_results(args.results)
    if not rows:
        raise ValueError(f"{args.results}: no result rows")
    factors = args.factors or list(exp.ANALYSIS_FACTORS)
    table = exp.analyze(rows, factors, permutations=args.permutations, seed=_seed(args))
    out = args.out or "correlations.csv"
    exp.write_analysis(table, out)
    _emit({"table": out, "rows": len(table)})
    return EXIT_OK


def cmd_ingest(args) -> int:
    env = load_environment(args.env)
    mdp = build_mdp(env, args.discount)
    traj = ingest_records(read_raw(args.raw), env, mdp, args.downsample)
    out = args.out or "ingested.jsonl"
    write_trajectories(out, EpisodeSet((traj,)), include_truth=False)
    _emit({"trajectories": out, "steps": len(traj)})
    return EXIT_OK


def _start_state(mdp, env, cell, heading) -> int:
    if isinstance(env, WarehouseEnvironment):
        key = (tuple(cell), heading or "h")
        labels = [(tuple(c), h) for c, h in mdp.state_labels]
    else:
        key = tuple(cell)
        labels = [tuple(c) for c in mdp.state_labels]
    if key not in labels:
        raise ValueError(f"start {list(cell)} is not a state of the environment")
    return labels.index(key)


def cmd_optimal_rollout(args) -> int:
    env = load_environment(args.env)
    mdp = build_mdp(env, args.discount)
    theta = check_theta(args.theta, mdp.feature_dim)
    if len(args.start) != 2:
        raise ValueError("--start expects x,y")
    start = _start_state(mdp, env, [int(v) for v in args.start], args.heading)
    traj, _ = optimal_rollout(mdp, theta, start, args.beta, args.horizon_cap, _seed(args))
    summary = summarize_trajectory(env, mdp, traj).as_dict()
    out = args.out or "rollout.jsonl"
    write_trajectories(out, EpisodeSet((traj,)), include_truth=False)
    if not summary["reached_goal"]:
        print("warning: horizon cap reached before the goal", file=sys.stderr)
    _emit({"trajectory": out, "summary": summary})
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _add_globals(p, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=default, help="master seed")
    p.add_argument("--out", default=default, help="output file or directory")
    p.add_argument("--config", default=default, help="JSON configuration file")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS if suppress else 1,
                   help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointirl", description=__doc__.splitlines()[0])
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        _add_globals(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("gen-env", cmd_gen_env, "generate seeded zone gridworlds")
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--min-size", type=int, default=8)
    p.add_argument("--max-size", type=int, default=12)

    p = add("simulate", cmd_simulate, "roll out demonstrations for known (theta, beta)")
    p.add_argument("--env", required=True)
    p.add_argument("--theta", type=_floats, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--horizon-cap", type=int, default=500)
    p.add_argument("--discount", type=float, default=0.95)

    p = add("infer", cmd_infer, "estimate (theta, beta) from trajectories")
    p.add_argument("--backend", choices=("discrete", "mcmc"), default="discrete")
    p.add_argument("--env", required=True)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--hypotheses", help="hypothesis-set JSON (discrete back-end)")
    p.add_argument("--k", type=int, help="sample k preference vectors for the hypothesis set")
    p.add_argument("--granularity", choices=("trajectory", "action"), default="trajectory")
    p.add_argument("--iterations", type=int, help="MCMC iterations")
    p.add_argument("--discount", type=float, default=0.95)

    add("experiment", cmd_experiment, "run a condition comparison from a JSON config")

    p = add("analyze", cmd_analyze, "Pearson correlations between factors and metrics")
    p.add_argument("--results", required=True)
    p.add_argument("--factors", nargs="+")
    p.add_argument("--permutations", type=int, default=10_000)

    p = add("ingest", cmd_ingest, "convert recorded cell sequences into trajectories")
    p.add_argument("--raw", required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--downsample", type=int, default=1)
    p.add_argument("--discount", type=float, default=0.95)

    p = add("optimal-rollout", cmd_optimal_rollout, "near-deterministic rollout of theta")
    p.add_argument("--env", required=True)
    p.add_argument("--theta", type=_floats, required=True)
    p.add_argument("--start", type=_floats, required=True, help="x,y")
    p.add_argument("--heading", choices=("h", "v"))
    p.add_argument("--beta", type=float, default=0.001)
    p.add_argument("--horizon-cap", type=int, default=500)
    p.add_argument("--discount", type=float, default=0.95)
    return parser


VALIDATION_ERRORS = (
    TrajectoryError,
    IngestionError,
    ConfigurationError,
    EnvironmentFormatError,
    GenerationError,
    UndefinedCorrelationError,
    FileNotFoundError,
    PermissionError,
    IsADirectoryError,
    json.JSONDecodeError,
    KeyError,
    TypeError,
    ValueError,
)
NUMERIC_ERRORS = (NumericError, DegenerateEvidenceError, DegenerateNormalizerError, ArithmeticError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
