"""Run one experiment config, then print median metrics per condition and back-end.

    python scripts/run_experiment.py scripts/configs/joint_vs_fixed.json [--jobs 2] [--analyze]
"""

import argparse
import json
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from jointirl import experiment as exp
from jointirl.cli import main as cli_main


def summarize(results_path) -> list[dict]:
    groups = defaultdict(list)
    for row in exp.read_results(results_path):
        if row["error"]:
            continue
        groups[(row["condition"], row["backend"], int(row["episodes"]))].append(row)
    table = []
    for (cond, backend, episodes), rows in sorted(groups.items()):
        med = lambda key: float(np.median([float(r[key]) for r in rows]))
        table.append({
            "condition": cond,
            "backend": backend,
            "episodes": episodes,
            "n": len(rows),
            "expertise_distance": med("expertise_distance"),
            "preference_similarity": med("preference_similarity"),
            "policy_regret": med("policy_regret"),
            "wall_seconds": float(np.mean([float(r["wall_seconds"]) for r in rows])),
        })
    return table


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--analyze", action="store_true", help="also write the correlation table")
    args = ap.parse_args(argv)

    out = Path(args.out or json.loads(Path(args.config).read_text()).get("out_dir", "results"))
    code = cli_main(["experiment", "--config", args.config, "--out", str(out), "--jobs", str(args.jobs)])
    if code:
        return code
    for t in summarize(out / "results.csv"):
        print(
            f"{t['condition']:>11} {t['backend']:>8} ep={t['episodes']:<3} n={t['n']:<4}"
            f" dist={t['expertise_distance']:.3f} sim={t['preference_similarity']:.3f}"
            f" regret={t['policy_regret']:.4g} t={t['wall_seconds']:.2f}s"
        )
    if args.analyze:
        return cli_main(["analyze", "--results", str(out / "results.csv"), "--out", str(out / "correlations.csv")])
    return 0


if __name__ == "__main__":
    sys.exit(main())
