import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import line_mdp
from jointirl.metrics import (
    DegenerateNormalizerError,
    MetricsReport,
    UndefinedCorrelationError,
    expertise_distance,
    pearson,
    policy_regret,
    preference_similarity,
    regret_from_values,
)
from jointirl.solver import soft_value_iteration

vec = st.lists(st.floats(0.01, 1), min_size=3, max_size=6)


class TestExpertiseDistance:
    def test_examples(self):
        assert expertise_distance(1.0, 1.0) == 0
        assert expertise_distance(0.01, 10) == pytest.approx(9.99)
        assert expertise_distance(0.09, 0.01) == pytest.approx(0.08)

    @given(st.floats(0.01, 10), st.floats(0.01, 10))
    def test_symmetric(self, a, b):
        assert expertise_distance(a, b) == expertise_distance(b, a)


class TestSimilarity:
    def test_examples(self):
        assert preference_similarity([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
        assert preference_similarity([1, 0], [0, 1]) == 0.0
        assert preference_similarity([0.6, 0.8], [1, 0]) == pytest.approx(0.6)

    def test_printed_form(self):
        # 1 - a.b / (|a|^2 |b|^2) with |a| = |b| = 1
        assert preference_similarity([0.6, 0.8], [1, 0], printed_form=True) == pytest.approx(0.4)

    def test_zero_vector(self):
        with pytest.raises(ValueError):
            preference_similarity([0, 0], [1, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            preference_similarity([1, 0], [1, 0, 0])

    @given(vec, st.floats(0.01, 100))
    def test_scale_invariant(self, v, c):
        w = list(reversed(v))
        a = preference_similarity(np.asarray(v) * c, w)
        assert a == pytest.approx(preference_similarity(v, w), abs=1e-12)
        assert -1 <= a <= 1


class TestRegret:
    def test_five_state_fixture(self):
        mdp = line_mdp(5)
        v_star = soft_value_iteration(mdp, [1.0], 1.0).v_table
        v_hat = soft_value_iteration(mdp, [0.5], 1.0).v_table
        # hand-summed values: 0, -1, -1.95, -2.8525, -3.709875 and their halves
        true = np.array([-3.709875, -2.8525, -1.95, -1.0, 0.0])
        oracle = sum(abs(t - 0.5 * t) for t in true) / 5 / 3.709875
        assert oracle == pytest.approx(0.2564068870, abs=1e-9)
        assert regret_from_values(v_star, v_hat) == pytest.approx(oracle, abs=1e-6)
        assert policy_regret(mdp, [1.0], 1.0, [0.5]) == pytest.approx(oracle, abs=1e-6)

    def test_identity_is_zero(self, mdp10):
        assert policy_regret(mdp10, [0.3, 0.1, 0.2, 0.2, 0.2], 0.5, [0.3, 0.1, 0.2, 0.2, 0.2]) == 0.0

    def test_scaled_theta_nonzero(self, mdp10):
        theta = np.array([0.3, 0.1, 0.2, 0.2, 0.2])
        assert policy_regret(mdp10, theta, 0.5, 2 * theta) > 0

    def test_uses_true_beta(self, mdp10):
        theta, other = [0.3, 0.1, 0.2, 0.2, 0.2], [0.6, 0.1, 0.1, 0.1, 0.1]
        v_star = soft_value_iteration(mdp10, theta, 2.0).v_table
        v_hat = soft_value_iteration(mdp10, other, 2.0).v_table
        assert policy_regret(mdp10, theta, 2.0, other) == pytest.approx(regret_from_values(v_star, v_hat))

    def test_zero_normaliser(self):
        assert regret_from_values(np.zeros(3), np.zeros(3)) == 0.0
        with pytest.raises(DegenerateNormalizerError):
            regret_from_values(np.zeros(3), np.ones(3))

    def test_report_validation(self):
        MetricsReport(0.1, 0.9, 0.0)
        with pytest.raises(ValueError):
            MetricsReport(0.1, 0.9, -0.1)
        with pytest.raises(ValueError):
            MetricsReport(float("nan"), 0.9, 0.1)


class TestPearson:
    def test_linear(self):
        xs = np.arange(10.0)
        assert pearson(xs, 2 * xs + 3, permutations=200)[0] == pytest.approx(1.0)
        assert pearson(xs, -xs, permutations=200)[0] == pytest.approx(-1.0)

    def test_constant(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1, 1, 1, 1], [1, 2, 3, 4])

    def test_length(self):
        with pytest.raises(ValueError):
            pearson([1, 2], [1, 2])
        with pytest.raises(ValueError):
            pearson([1, 2, 3], [1, 2])

    def test_p_value_smoothing(self):
        xs = np.arange(30.0)
        _, p = pearson(xs, xs, permutations=99, seed=1)
        assert p == pytest.approx(1 / 100)

    def test_seeded(self):
        rng = np.random.default_rng(0)
        x, y = rng.random(20), rng.random(20)
        assert pearson(x, y, 500, seed=3) == pearson(x, y, 500, seed=3)

    @settings(max_examples=50)
    @given(st.lists(st.floats(-100, 100), min_size=3, max_size=20, unique=True),
           st.floats(0.1, 10), st.floats(-10, 10), st.booleans())
    def test_affine_sign(self, xs, a, b, neg):
        xs = np.asarray(xs)
        if np.ptp(xs) < 1e-6:
            return
        a = -a if neg else a
        rho, _ = pearson(xs, a * xs + b, permutations=0)
        assert rho == pytest.approx(np.sign(a), abs=1e-9)
