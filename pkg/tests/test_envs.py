import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barvf.envs import (
    CONFLUENCE_RIVERS,
    ENV_NAMES,
    FORWARD,
    LEFT,
    NOOP,
    RIGHT,
    TabularMdp,
    bellman_backup,
    confluence_swim,
    describe,
    grid_env,
    greedy_policy,
    make_env,
    optimal_q,
    policy_episode_return,
    reset,
    river_swim,
    step,
)
from barvf.exceptions import ConfigError, ContractViolation, InvalidInputError


def chain_to_goal(gamma=0.5):
    # state 0 --right--> state 1 (terminal), reward 1
    T = np.zeros((2, 2, 2))
    T[0, 0, 0] = 1.0
    T[0, 1, 1] = 1.0
    T[1, :, 1] = 1.0
    R = np.zeros((2, 2))
    R[0, 1] = 1.0
    return TabularMdp(T, R, [1.0, 0.0], gamma, 5, frozenset({1}))


class TestTabularMdp:
    @pytest.mark.parametrize("name", ENV_NAMES)
    def test_builtin_invariants(self, name):
        mdp = make_env(name)
        np.testing.assert_allclose(mdp.transitions.sum(axis=2), 1.0, atol=1e-12)
        assert mdp.rewards.min() >= 0 and mdp.rewards.max() <= 1
        assert mdp.initial_dist.sum() == pytest.approx(1.0)
        assert 0 <= mdp.gamma < 1

    def test_rejects_non_stochastic_rows(self):
        T = np.full((2, 1, 2), 0.6)
        with pytest.raises(InvalidInputError):
            TabularMdp(T, np.zeros((2, 1)), [1.0, 0.0], 0.9, 3)

    def test_rejects_reward_outside_unit_interval(self):
        T = np.ones((1, 1, 1))
        with pytest.raises(InvalidInputError):
            TabularMdp(T, [[1.5]], [1.0], 0.9, 3)

    @pytest.mark.parametrize("gamma", [-0.1, 1.0])
    def test_rejects_bad_gamma(self, gamma):
        with pytest.raises(InvalidInputError):
            TabularMdp(np.ones((1, 1, 1)), [[0.0]], [1.0], gamma, 3)

    def test_with_gamma(self):
        mdp = river_swim().with_gamma(0.5)
        assert mdp.gamma == 0.5
        assert mdp.num_states == 6


class TestRiverSwim:
    def test_deterministic_two_chain(self):
        mdp = river_swim(n_states=2, p_right=1.0, p_stay=0.0)
        assert mdp.transitions[0, RIGHT, 1] == 1.0
        assert mdp.transitions[1, RIGHT, 1] == 1.0

    def test_interior_pattern(self):
        mdp = river_swim()
        for s in range(1, 5):
            expected = np.zeros(6)
            expected[[s - 1, s, s + 1]] = [0.1, 0.6, 0.3]
            np.testing.assert_allclose(mdp.transitions[s, RIGHT], expected)
            assert mdp.transitions[s, LEFT, s - 1] == 1.0

    def test_ends_fold_into_stay(self):
        mdp = river_swim()
        np.testing.assert_allclose(mdp.transitions[0, RIGHT, :2], [0.7, 0.3])
        np.testing.assert_allclose(mdp.transitions[5, RIGHT, 4:], [0.1, 0.9])

    def test_rewards(self):
        mdp = river_swim()
        assert mdp.rewards[0, LEFT] == 0.005
        assert mdp.rewards[5, RIGHT] == 1.0
        assert np.count_nonzero(mdp.rewards) == 2
        assert not mdp.terminal_states

    def test_no_current_means_stay_home(self):
        mdp = river_swim(p_right=0.0)
        policy = greedy_policy(optimal_q(mdp))
        assert policy[0] == LEFT
        # the start state is the only one reachable; every state left of the
        # rewarding end also prefers drifting home
        assert np.all(policy[:-1] == LEFT)

    def test_optimal_policy_swims_right(self):
        assert np.all(greedy_policy(optimal_q(river_swim())) == RIGHT)

    @pytest.mark.parametrize("kwargs", [dict(n_states=1), dict(p_right=0.7, p_stay=0.6), dict(p_right=-0.1),
                                        dict(right_reward=2.0)])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidInputError):
            river_swim(**kwargs)


class TestConfluence:
    def test_state_count(self):
        mdp = confluence_swim()
        assert mdp.num_states == 16
        assert mdp.num_actions == 3
        assert mdp.horizon == 24

    def test_hub_entries(self):
        mdp = confluence_swim()
        for i in range(3):
            assert mdp.transitions[0, i, 1 + 5 * i] == 1.0

    def test_entry_is_irreversible(self):
        T = confluence_swim().transitions
        assert np.all(T[1:, :, 0] == 0.0)

    def test_noop_self_loop(self):
        mdp = confluence_swim()
        for s in range(1, 16):
            assert mdp.transitions[s, NOOP, s] == 1.0
            assert mdp.rewards[s, NOOP] == 0.0

    def test_hard_river_matches_riverswim_dynamics(self):
        mdp = confluence_swim()
        np.testing.assert_allclose(mdp.transitions[12, RIGHT, 11:14], [0.1, 0.6, 0.3])

    def test_rewards_grow_with_difficulty(self):
        ends = [r for _, _, r in CONFLUENCE_RIVERS]
        assert ends == sorted(ends) and ends[-1] == 1.0

    def test_optimal_enters_hard_river_and_swims(self):
        mdp = confluence_swim()
        q = optimal_q(mdp)
        policy = greedy_policy(q)
        assert policy[0] == 2
        assert np.all(policy[11:16] == RIGHT)
        # each easier river is worth strictly less from the hub, and still something
        assert 0 < q[0, 0] < q[0, 1] < q[0, 2]

    def test_easy_ceiling(self):
        # deterministic easy river: 1 hub step + 4 swims, then paid every remaining step
        mdp = confluence_swim(rivers=((1.0, 0.0, 0.1), (0.6, 0.3, 0.3), (0.3, 0.6, 1.0)))
        policy = np.full(mdp.num_states, RIGHT)
        policy[0] = 0
        assert policy_episode_return(mdp, policy) == pytest.approx(0.1 * (24 - 5))
        stochastic = confluence_swim()
        assert policy_episode_return(stochastic, policy) < 0.1 * 19

    def test_short_horizon(self):
        with pytest.raises(InvalidInputError):
            confluence_swim(horizon=11)


class TestGrid:
    def test_empty_size(self):
        mdp = grid_env("empty")
        assert mdp.num_states == 256
        assert mdp.horizon == 100
        assert len(mdp.terminal_states) == 4

    def test_wall_bump(self, rng):
        mdp = grid_env("empty")
        # start cell (0, 0) facing east; rotating left faces north, into the wall
        north = step(mdp, 0, 0, rng).next_state
        out = step(mdp, north, FORWARD, rng)
        assert out.next_state == north
        assert out.reward == 0.0

    def test_empty_goal_reachable(self):
        mdp = grid_env("empty")
        assert policy_episode_return(mdp, greedy_policy(optimal_q(mdp))) == pytest.approx(1.0)

    def test_corridor_rewards_by_distance(self):
        mdp = grid_env("corridor")
        np.testing.assert_allclose(sorted(set(mdp.rewards[mdp.rewards > 0])), [1 / 3, 2 / 3, 1.0])

    def test_corridor_prefers_farthest_goal(self):
        mdp = grid_env("corridor")
        assert policy_episode_return(mdp, greedy_policy(optimal_q(mdp))) == pytest.approx(1.0)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            grid_env("maze")


class TestResetStep:
    def test_point_mass_reset(self, rng):
        mdp = river_swim()
        assert all(reset(mdp, rng) == 0 for _ in range(50))

    def test_uniform_reset_frequencies(self, rng):
        T = np.ones((2, 1, 2)) / 2
        mdp = TabularMdp(T, np.zeros((2, 1)), [0.5, 0.5], 0.9, 3)
        draws = np.array([reset(mdp, rng) for _ in range(10_000)])
        assert 0.49 <= draws.mean() <= 0.51

    def test_reset_reproducible(self):
        mdp = TabularMdp(np.ones((3, 1, 3)) / 3, np.zeros((3, 1)), [0.2, 0.3, 0.5], 0.9, 3)
        a = [reset(mdp, np.random.default_rng(7)) for _ in range(2)]
        assert a[0] == a[1]

    def test_advance_frequency(self, rng):
        mdp = river_swim()
        nxt = np.array([step(mdp, 2, RIGHT, rng).next_state for _ in range(10_000)])
        assert abs(np.mean(nxt == 3) - 0.3) < 0.02

    def test_reward_readback(self, rng):
        mdp = river_swim()
        assert step(mdp, 5, RIGHT, rng).reward == mdp.rewards[5, RIGHT]
        assert step(mdp, 0, LEFT, rng).reward == mdp.rewards[0, LEFT]

    def test_deterministic_row(self, rng):
        mdp = chain_to_goal()
        out = step(mdp, 0, 1, rng)
        assert out.next_state == 1 and out.done and out.reward == 1.0

    def test_terminal_input(self, rng):
        with pytest.raises(ContractViolation):
            step(chain_to_goal(), 1, 0, rng)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 15), st.integers(0, 2), st.integers(0, 2**32 - 1))
    def test_step_reproducible(self, s, a, seed):
        mdp = confluence_swim()
        x = step(mdp, s, a, np.random.default_rng(seed))
        y = step(mdp, s, a, np.random.default_rng(seed))
        assert x == y


class TestOptimalQ:
    def test_myopic(self):
        mdp = river_swim().with_gamma(0.0)
        np.testing.assert_array_equal(optimal_q(mdp), mdp.rewards)

    def test_hand_solved_chain(self):
        q = optimal_q(chain_to_goal(0.5))
        assert q[0, 1] == pytest.approx(1.0)
        assert q[0, 0] == pytest.approx(0.5)
        np.testing.assert_array_equal(q[1], 0.0)

    @pytest.mark.parametrize("name", ENV_NAMES)
    @pytest.mark.parametrize("tol", [1e-3, 1e-8])
    def test_residual_bound(self, name, tol):
        mdp = make_env(name)
        q = optimal_q(mdp, tol)
        assert np.max(np.abs(q - bellman_backup(mdp, q))) < tol

    def test_bad_tol(self):
        with pytest.raises(InvalidInputError):
            optimal_q(river_swim(), tol=0.0)


class TestMakeEnv:
    def test_unknown(self):
        with pytest.raises(ConfigError):
            make_env("cartpole")

    def test_gamma_override(self):
        assert make_env("confluence", gamma=0.9).gamma == 0.9

    def test_describe_is_json(self):
        info = describe(make_env("corridor-grid"))
        assert json.loads(json.dumps(info)) == info
        assert info["num_states"] == 60 and info["num_actions"] == 3
        assert 0 < info["reward_sparsity"] < 1
