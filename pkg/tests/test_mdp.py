import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import line_mdp
from jointirl.mdp import (
    ConfigurationError,
    EpisodeSet,
    TabularMdp,
    Trajectory,
    TrajectoryError,
    check_beta,
    reward_of_transition,
    validate_trajectory,
)


class TestTabularMdp:
    def test_shapes(self, mdp10):
        assert mdp10.num_actions == 4
        assert mdp10.feature_dim == 5
        assert mdp10.features.shape == (mdp10.num_states, 4, 5)

    def test_terminal_must_absorb(self):
        nxt = np.array([[1], [0]])
        term = np.array([False, True])
        with pytest.raises(ConfigurationError, match="absorbing"):
            TabularMdp(nxt, np.zeros((2, 1, 1)), term)

    def test_terminal_features_zeroed(self):
        nxt = np.array([[1], [1]])
        feats = np.ones((2, 1, 2))
        mdp = TabularMdp(nxt, feats, np.array([False, True]))
        assert np.all(mdp.features[1] == 0)
        assert np.all(mdp.features[0] == 1)

    def test_arrays_read_only(self, mdp10):
        with pytest.raises(ValueError):
            mdp10.next_state[0, 0] = 0

    @pytest.mark.parametrize("gamma", [0.0, 1.0, -0.5])
    def test_discount_range(self, gamma):
        with pytest.raises(ConfigurationError):
            line_mdp(gamma=gamma)

    def test_state_without_actions(self):
        mask = np.array([[True], [False]])
        with pytest.raises(ConfigurationError):
            TabularMdp(np.array([[1], [1]]), np.zeros((2, 1, 1)), np.zeros(2, bool), action_mask=mask)


class TestReward:
    def test_linear_reward(self, open_mdp):
        theta = np.array([1.0, 0.5, 0.2, 0.3, 0.1])
        s, a = 0, 2
        s2 = open_mdp.transition(s, a)
        expected = float(theta @ open_mdp.features[s, a])
        assert reward_of_transition(open_mdp, theta, s, a, s2) == pytest.approx(expected)

    def test_wrong_dimension(self, open_mdp):
        with pytest.raises(ConfigurationError):
            reward_of_transition(open_mdp, [1.0, 0.0], 0, 0, open_mdp.transition(0, 0))

    def test_negative_theta(self, open_mdp):
        with pytest.raises(ConfigurationError):
            open_mdp.reward_table([-0.1, 0, 0, 0, 0])

    def test_inconsistent_successor(self, open_mdp):
        wrong = (open_mdp.transition(0, 2) + 1) % open_mdp.num_states
        with pytest.raises(TrajectoryError):
            reward_of_transition(open_mdp, np.ones(5), 0, 2, wrong)

    @pytest.mark.parametrize("beta", [0.0, -1.0, float("nan"), float("inf")])
    def test_bad_beta(self, beta):
        with pytest.raises(ValueError):
            check_beta(beta)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=5, max_size=5), st.floats(0.1, 10))
    def test_reward_is_linear(self, theta, c):
        mdp = line_mdp(dim=5)
        r1 = mdp.reward_table(theta)
        r2 = mdp.reward_table(np.asarray(theta) * c)
        np.testing.assert_allclose(r2, c * r1, atol=1e-12)


class TestTrajectory:
    def test_from_steps_round_trip(self):
        t = Trajectory.from_steps([(0, 1), (2, 3)])
        assert t.steps == [(0, 1), (2, 3)]
        assert len(t) == 2

    def test_length_mismatch(self):
        with pytest.raises(TrajectoryError):
            Trajectory([0, 1], [0])

    def test_episode_set_slicing(self):
        ts = [Trajectory.from_steps([(i, 0)]) for i in range(4)]
        es = EpisodeSet(tuple(ts), (), {"seed": 3})
        sub = es[:2]
        assert len(sub) == 2 and sub.meta["seed"] == 3
        s, a = es.all_steps()
        assert s.tolist() == [0, 1, 2, 3]


class TestValidation:
    def test_valid_path(self, open_mdp):
        s = 0
        steps = []
        for a in (2, 2, 1):
            steps.append((s, a))
            s = open_mdp.transition(s, a)
        assert validate_trajectory(open_mdp, Trajectory.from_steps(steps)).passed

    def test_first_failure_index(self, open_mdp):
        s1 = open_mdp.transition(0, 2)
        bad = (s1 + 3) % open_mdp.num_states
        traj = Trajectory.from_steps([(0, 2), (s1, 2), (bad, 1)])
        report = validate_trajectory(open_mdp, traj)
        assert not report.passed
        assert report.first_failure == 1

    def test_out_of_range_action(self, open_mdp):
        report = validate_trajectory(open_mdp, Trajectory.from_steps([(0, 7)]))
        assert report.first_failure == 0
