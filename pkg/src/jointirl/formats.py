"""File formats: trajectory JSONL, hypothesis-set JSON, belief and trace CSV."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .discrete import HypothesisBelief, HypothesisSet
from .mcmc import ChainResult
from .mdp import EpisodeSet, TabularMdp, Trajectory, TrajectoryError, validate_trajectory


def write_trajectories(path, episodes: EpisodeSet, include_truth: bool = True) -> None:
    meta = episodes.meta or {}
    with open(path, "w") as fh:
        for i, traj in enumerate(episodes):
            m = {}
            if "seed" in meta:
                m["seed"] = int(meta["seed"])
                m["episode"] = i
            if include_truth:
                for key in ("theta_star", "beta_star"):
                    if key in meta:
                        m[key] = meta[key]
            line = {"steps": [[int(s), int(a)] for s, a in traj.steps], "meta": m}
            fh.write(json.dumps(line) + "\n")


def read_trajectories(path, mdp: TabularMdp | None = None) -> EpisodeSet:
    """Parse JSONL; with ``mdp`` every trajectory must validate."""
    trajs, metas = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                steps = rec["steps"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise TrajectoryError(f"{path}:{lineno}: malformed trajectory line ({exc})")
            traj = Trajectory.from_steps(steps)
            if mdp is not None:
                report = validate_trajectory(mdp, traj)
                if not report.passed:
                    raise TrajectoryError(
                        f"{path}:{lineno}: step {report.first_failure} does not match the environment"
                    )
            trajs.append(traj)
            metas.append(rec.get("meta", {}))
    if not trajs:
        raise TrajectoryError(f"{path}: no trajectories")
    meta = {}
    first = metas[0]
    for key in ("seed", "theta_star", "beta_star"):
        if key in first:
            meta[key] = first[key]
    return EpisodeSet(tuple(trajs), (), meta)


def hypothesis_set_to_dict(hs: HypothesisSet) -> dict:
    d = {"thetas": hs.thetas.tolist(), "betas": hs.betas.tolist()}
    if hs.seed is not None:
        d["seed"] = hs.seed
    if hs.sampled_k is not None:
        d["sampled_k"] = hs.sampled_k
    return d


def save_hypothesis_set(hs: HypothesisSet, path) -> None:
    Path(path).write_text(json.dumps(hypothesis_set_to_dict(hs)) + "\n")


def load_hypothesis_set(path) -> HypothesisSet:
    data = json.loads(Path(path).read_text())
    return HypothesisSet(
        np.asarray(data["thetas"], dtype=np.float64),
        np.asarray(data["betas"], dtype=np.float64),
        data.get("seed"),
        data.get("sampled_k"),
    )


def write_belief_csv(bel: HypothesisBelief, path) -> None:
    hs = bel.hypothesis_set
    d = hs.thetas.shape[1]
    probs = bel.belief
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"theta_{i}" for i in range(d)] + ["beta", "belief"])
        for i, (th, b) in enumerate(hs.pairs()):
            w.writerow([repr(float(v)) for v in th] + [repr(b), repr(float(probs[i]))])


def write_trace_csv(result: ChainResult, path) -> None:
    d = result.samples.shape[1] - 1 if result.samples.size else len(result.initial) - 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration"] + [f"theta_{i}" for i in range(d)] + ["beta", "log_posterior", "accepted"])
        w.writerow([0] + [repr(float(v)) for v in result.initial] + [repr(result.initial_log_posterior), 1])
        for k, row in enumerate(result.samples, start=1):
            w.writerow(
                [k]
                + [repr(float(v)) for v in row]
                + [repr(float(result.log_posteriors[k - 1])), int(result.accepted[k - 1])]
            )
