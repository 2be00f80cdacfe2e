import csv

import numpy as np
import pytest

from jointirl import experiment as exp
from jointirl.experiment import ExperimentConfig


def tiny(**kw):
    base = dict(
        environments=2, size_range=(6, 6), runs=2, ks=[3], levels=["high", "medium", "low"],
        conditions=["full_set"], schedule=[1, 2], horizon_cap=40, seed=5,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_needs_condition(self):
        with pytest.raises(ValueError):
            tiny(conditions=[])

    def test_schedule_increasing(self):
        with pytest.raises(ValueError):
            tiny(schedule=[2, 2])

    def test_unknown_condition(self):
        with pytest.raises(ValueError):
            tiny(conditions=["half_set"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            tiny(environments=[str(tmp_path / "none.json")])

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            ExperimentConfig.from_dict({"bogus": 1})

    def test_json_round_trip(self, tmp_path):
        cfg = tiny()
        import json

        (tmp_path / "c.json").write_text(json.dumps(cfg.to_dict()))
        assert ExperimentConfig.load(tmp_path / "c.json") == cfg

    def test_opposite_groups(self):
        cfg = tiny()
        assert cfg.opposite_groups("high") == ["low"]
        assert cfg.opposite_groups("low") == ["high"]
        assert sorted(cfg.opposite_groups("medium")) == ["high", "low"]

    def test_group_of(self):
        cfg = tiny()
        assert cfg.group_of(0.03) == "high"
        assert cfg.group_of(0.7) == "medium"
        assert cfg.group_of(7.0) == "low"


class TestSeeds:
    def test_hierarchical(self):
        assert exp.derive_seed(1, 2, 3) == exp.derive_seed(1, 2, 3)
        assert exp.derive_seed(1, 2, 3) != exp.derive_seed(1, 3, 2)

    def test_instance_count(self):
        assert len(exp.instances(tiny(), 2)) == 12


@pytest.fixture(scope="module")
def rows():
    return exp.run_experiment(tiny(conditions=["full_set", "fixed_theta", "fixed_beta"]))


class TestRun:
    def test_row_count(self, rows):
        # 12 instances x 2 schedule points x 3 conditions x 1 back-end
        assert len(rows) == 72
        assert not any(r.error for r in rows)

    def test_fixed_beta_opposite(self, rows):
        cfg = tiny()
        for r in rows:
            if r.condition == "fixed_beta":
                assert cfg.group_of(r.beta_hat) in cfg.opposite_groups(r.group)

    def test_fixed_theta_excludes_truth(self, rows):
        for r in rows:
            if r.condition == "fixed_theta":
                assert r.theta_hat != r.theta_star

    def test_in_set_truth(self, rows):
        for r in rows:
            assert r.beta_star in tiny().groups[r.group]
            assert r.psi_size in (3 * 6, 6, 3)

    def test_metrics_finite(self, rows):
        for r in rows:
            assert np.isfinite([r.expertise_distance, r.preference_similarity, r.policy_regret]).all()
            assert r.policy_regret >= 0

    def test_out_of_set(self):
        rows = exp.run_experiment(tiny(conditions=["out_of_set"], runs=1, levels=["medium"],
                                       out_of_set_beta_range=(0.01, 5.0)))
        cfg = tiny()
        for r in rows:
            assert 0.01 <= r.beta_star <= 5.0
            assert r.group == cfg.group_of(r.beta_star)

    def test_mcmc_rows(self):
        cfg = tiny(environments=1, runs=1, levels=["high"], backends=["discrete", "mcmc"],
                   conditions=["full_set", "fixed_beta"], mcmc={"max_iterations": 5})
        rows = exp.run_experiment(cfg)
        kinds = sorted((r.condition, r.backend) for r in rows)
        assert kinds.count(("full_set", "mcmc")) == 2
        assert ("fixed_beta", "mcmc") not in kinds

    def test_error_rows(self, monkeypatch):
        def boom(*a, **k):
            raise FloatingPointError("synthetic failure")

        monkeypatch.setattr(exp, "_discrete_rows", boom)
        rows = exp.run_experiment(tiny(environments=1, runs=1, levels=["low"]))
        assert len(rows) == 2
        assert all("synthetic failure" in r.error for r in rows)


class TestPersistence:
    def test_csv_deterministic(self, tmp_path):
        cfg = tiny(environments=1, runs=1)
        exp.run_experiment(cfg, tmp_path / "a.csv")
        exp.run_experiment(cfg, tmp_path / "b.csv")
        strip = lambda p: [
            {k: v for k, v in r.items() if k not in exp.TIMING_FIELDS} for r in exp.read_results(p)
        ]
        assert strip(tmp_path / "a.csv") == strip(tmp_path / "b.csv")
        header = next(csv.reader(open(tmp_path / "a.csv")))
        assert header == exp.RESULT_FIELDS

    def test_parallel_matches_serial(self, tmp_path):
        cfg = tiny(environments=1, runs=2, levels=["high"])
        a = exp.run_experiment(cfg, jobs=1)
        b = exp.run_experiment(cfg, jobs=2)
        assert [r.theta_hat for r in a] == [r.theta_hat for r in b]


class TestAnalyze:
    def test_table_shape(self, rows, tmp_path):
        exp.write_results(rows, tmp_path / "r.csv")
        table = exp.analyze(exp.read_results(tmp_path / "r.csv"), permutations=200)
        assert len(table) == len(exp.ANALYSIS_FACTORS) * 3

    def test_constant_factor_flagged(self, rows, tmp_path):
        exp.write_results(rows, tmp_path / "r.csv")
        table = exp.analyze(exp.read_results(tmp_path / "r.csv"), factors=["k"], permutations=100)
        assert all(t["note"].startswith("undefined") for t in table)

    def test_identical_columns(self):
        data = [{"x": str(v), "m": str(v)} for v in (1.0, 2.0, 5.0, 7.0)]
        table = exp.analyze(data, factors=["x"], metrics=["m"], permutations=100)
        assert float(table[0]["rho"]) == pytest.approx(1.0)

    def test_missing_column(self, rows, tmp_path):
        exp.write_results(rows, tmp_path / "r.csv")
        with pytest.raises(KeyError):
            exp.analyze(exp.read_results(tmp_path / "r.csv"), factors=["nope"])
