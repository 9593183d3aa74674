import os
import sys
import unittest
from dataclasses import replace

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from core import agent
from core.digital_mind import DigitalMind
from core.errors import DimensionError
from core.gridworld import parse_ascii_layout
from core.models import A2CConfig, Action, LawId
from core.policy import (
    AdamState, a2c_loss_and_grads, adam_step, apply_gradients, clip_by_global_norm, entropy, global_norm,
    init_policy, policy_value_forward,
)
from core.scenarios import causal_law

LAYOUT = """
#######
#s....#
#.d.C.#
#.....#
#...G.#
#.....#
#######
"""


def random_batch(rng, batch=6, obs_dim=3):
    obs = rng.normal(size=(batch, obs_dim))
    actions = rng.integers(0, 4, size=batch)
    returns = rng.normal(size=batch)
    advantages = rng.normal(size=batch)
    return obs, actions, returns, advantages


class TestObservation(unittest.TestCase):

    def setUp(self):
        self.state = parse_ascii_layout(LAYOUT)
        self.history = agent.ActionHistory()

    def test_lengths(self):
        self.assertEqual(agent.observation_dim(False), 30)
        self.assertEqual(agent.observation_dim(True), 34)
        self.assertEqual(agent.build_observation(self.state, None, False, self.history).shape, (30,))
        self.assertEqual(agent.build_observation(self.state, DigitalMind(), True, self.history).shape, (34,))

    def test_goal_offset_is_zero_on_goal(self):
        on_goal = replace(self.state, agent_pos=self.state.goal_pos)
        obs = agent.build_observation(on_goal, None, False, self.history)
        np.testing.assert_array_equal(obs[2:4], [0.0, 0.0])

    def test_normalised_entries(self):
        obs = agent.build_observation(self.state, None, False, self.history)
        self.assertTrue(np.all(np.abs(obs) <= 1.0))
        np.testing.assert_allclose(obs[0:2], [2 / 6 - 1, 2 / 6 - 1])
        self.assertEqual(obs[4 + 0], 1.0)  # wall ahead
        self.assertEqual(obs[4:13].sum(), 1.0)

    def test_oracle_slots(self):
        obs = agent.build_observation(self.state, None, True, self.history, causal_law(LawId.TEXTURE_ONLY))
        np.testing.assert_array_equal(obs[30:34], [0.0, 0.0, 1.0, 1.0])
        strict = agent.causal_slots(None, causal_law(LawId.TEXTURE_AND_SHAPE))
        np.testing.assert_array_equal(strict, [0.0, 0.0, 1.0, 0.0])

    def test_unformed_mind_gives_half(self):
        obs = agent.build_observation(self.state, DigitalMind(), True, self.history)
        np.testing.assert_array_equal(obs[30:34], [0.5] * 4)

    def test_history_most_recent_first(self):
        self.history.push(Action.LEFT)
        self.history.push(Action.RIGHT)
        obs = agent.build_observation(self.state, None, False, self.history)
        history = obs[14:30].reshape(4, 4)
        np.testing.assert_array_equal(history[0], [0, 0, 0, 1])
        np.testing.assert_array_equal(history[1], [0, 0, 1, 0])
        np.testing.assert_array_equal(history[2:], np.zeros((2, 4)))
        for _ in range(6):
            self.history.push(Action.FORWARD)
        self.assertEqual(len(self.history), 4)

    def test_collision_flag(self):
        bumped = replace(self.state, last_collision=True)
        self.assertEqual(agent.build_observation(bumped, None, False, self.history)[13], 1.0)


class TestForward(unittest.TestCase):

    def test_zero_heads_are_uniform(self):
        p = init_policy(30, (64, 64), np.random.default_rng(0))
        probs, values = policy_value_forward(p, np.random.default_rng(1).normal(size=(5, 30)))
        np.testing.assert_allclose(probs, 0.25)
        np.testing.assert_array_equal(values, np.zeros(5))

    def test_probabilities_form_a_simplex(self):
        rng = np.random.default_rng(2)
        p = init_policy(34, (64, 64), rng, head_scale=3.0)
        probs, _ = policy_value_forward(p, rng.normal(scale=3.0, size=(1000, 34)))
        self.assertTrue(np.all(probs >= 0.0))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_entropy_bounds(self):
        rng = np.random.default_rng(3)
        p = init_policy(4, (8,), rng, head_scale=10.0)
        probs, _ = policy_value_forward(p, rng.normal(scale=5.0, size=(200, 4)))
        ent = entropy(probs, np.log(np.clip(probs, 1e-300, None)))
        self.assertTrue(np.all(ent >= -1e-12))
        self.assertTrue(np.all(ent <= np.log(4) + 1e-12))

    def test_width_mismatch(self):
        p = init_policy(30, (8,), np.random.default_rng(0))
        with self.assertRaises(DimensionError):
            policy_value_forward(p, np.zeros(34))


class TestGradients(unittest.TestCase):

    def test_full_loss_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        p = init_policy(3, (5, 4), rng, head_scale=1.0)
        obs, actions, returns, advantages = random_batch(rng)
        _, grads = a2c_loss_and_grads(p, obs, actions, returns, advantages, ent_coef=0.01, vf_coef=0.5)

        def loss_at(params):
            report, _ = a2c_loss_and_grads(params, obs, actions, returns, advantages, 0.01, 0.5)
            return report.total_loss

        eps = 1e-6
        for name, array in p.arrays.items():
            numeric = np.zeros_like(array)
            for index in np.ndindex(array.shape):
                plus, minus = p.copy(), p.copy()
                plus.arrays[name][index] += eps
                minus.arrays[name][index] -= eps
                numeric[index] = (loss_at(plus) - loss_at(minus)) / (2 * eps)
            np.testing.assert_allclose(grads[name], numeric, rtol=1e-4, atol=1e-8, err_msg=name)

    def test_zero_advantage_exact_values(self):
        rng = np.random.default_rng(5)
        p = init_policy(3, (6,), rng, head_scale=1.0)
        obs, actions, _, _ = random_batch(rng)
        _, values = policy_value_forward(p, obs)
        zeros = np.zeros(len(actions))
        _, grads = a2c_loss_and_grads(p, obs, actions, values, zeros, ent_coef=0.0, vf_coef=0.5)
        self.assertAlmostEqual(global_norm(grads), 0.0, places=12)
        _, grads = a2c_loss_and_grads(p, obs, actions, values, zeros, ent_coef=0.1, vf_coef=0.5)
        np.testing.assert_allclose(grads["Wv"], 0.0, atol=1e-12)
        self.assertGreater(np.abs(grads["Wpi"]).sum(), 0.0)

    def test_clipping(self):
        grads = {"a": np.array([3.0, 4.0]), "b": np.zeros(2)}
        clipped, norm = clip_by_global_norm(grads, 1.0)
        self.assertEqual(norm, 5.0)
        self.assertAlmostEqual(global_norm(clipped), 1.0, places=9)
        untouched, _ = clip_by_global_norm({"a": np.array([0.3])}, 1.0)
        np.testing.assert_array_equal(untouched["a"], [0.3])

    def test_report_carries_pre_clip_norm(self):
        rng = np.random.default_rng(6)
        p = init_policy(3, (4,), rng, head_scale=1.0)
        obs, actions, returns, advantages = random_batch(rng)
        report, grads = a2c_loss_and_grads(p, obs, actions, 100 * returns, 100 * advantages, 0.0, 0.5)
        _, _, norm = apply_gradients(p, AdamState.for_params(p), grads, A2CConfig(), report)
        self.assertEqual(report.grad_norm, norm)
        self.assertGreater(norm, 1.0)
        self.assertAlmostEqual(report.clipped_grad_norm, 1.0, places=9)

    def test_adam_first_step_moves_by_learning_rate(self):
        p = init_policy(2, (3,), np.random.default_rng(0))
        grads = {name: np.ones_like(a) for name, a in p.arrays.items()}
        new_p, opt = adam_step(p, AdamState.for_params(p), grads, lr=0.01)
        self.assertEqual(opt.t, 1)
        for name in p.arrays:
            np.testing.assert_allclose(p.arrays[name] - new_p.arrays[name], 0.01, rtol=1e-5)


class TestReturns(unittest.TestCase):

    def buffer(self, rewards, dones, bootstrap=0.0):
        b = agent.RolloutBuffer(len(rewards), 1, 2)
        for r, d in zip(rewards, dones):
            b.add(np.zeros((1, 2)), np.zeros(1), np.array([r]), np.array([d]), np.zeros(1))
        b.set_bootstrap(np.array([bootstrap]))
        return b

    def test_terminal_reward(self):
        returns, advantages = agent.compute_returns_advantages(self.buffer([0, 0, 15], [0, 0, 1], 99.0))
        np.testing.assert_allclose(returns[:, 0], [14.8503750, 14.925, 15.0], rtol=1e-7)
        np.testing.assert_array_equal(advantages, returns)

    def test_bootstrap(self):
        gamma = 0.995
        returns, _ = agent.compute_returns_advantages(self.buffer([0, 0, 0], [0, 0, 0], 2.0))
        np.testing.assert_allclose(returns[:, 0], [gamma ** 3 * 2, gamma ** 2 * 2, gamma * 2])

    def test_no_leak_across_episode_boundary(self):
        a, _ = agent.compute_returns_advantages(self.buffer([5, 0, 1, 2], [0, 1, 0, 0], 3.0))
        b, _ = agent.compute_returns_advantages(self.buffer([-7, 9, 1, 2], [0, 1, 0, 0], 3.0))
        np.testing.assert_array_equal(a[2:], b[2:])
        self.assertEqual(a[1, 0], 0.0)

    def test_requires_full_buffer(self):
        b = agent.RolloutBuffer(2, 1, 2)
        with self.assertRaises(ValueError):
            agent.compute_returns_advantages(b)
        b.add(np.zeros((1, 2)), np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1))
        b.add(np.zeros((1, 2)), np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1))
        with self.assertRaises(IndexError):
            b.add(np.zeros((1, 2)), np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1))
        with self.assertRaises(DimensionError):
            agent.RolloutBuffer(2, 1, 2).add(np.zeros((1, 3)), np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1))


class TestUpdate(unittest.TestCase):

    def fill(self, b, p, rng):
        obs = np.ones((b.n_envs, b.obs_dim))
        while not b.full:
            actions, values = agent.act(p, obs, rng)
            rewards = (actions == 0).astype(np.float64)
            b.add(obs, actions, rewards, np.ones(b.n_envs), values)

    def test_bandit_converges(self):
        cfg = A2CConfig(n_steps=1, learning_rate=0.01, hidden_sizes=(16,))
        rng = np.random.default_rng(0)
        p = init_policy(3, cfg.hidden_sizes, rng)
        opt = AdamState.for_params(p)
        b = agent.RolloutBuffer(1, 16, 3)
        for _ in range(2000):
            self.fill(b, p, rng)
            p, opt, report = agent.a2c_update(p, opt, b, cfg)
            self.assertEqual(b.pos, 0)
        probs, _ = policy_value_forward(p, np.ones((1, 3)))
        self.assertGreater(probs[0, 0], 0.9)

    def test_update_is_deterministic(self):
        cfg = A2CConfig(n_steps=4, hidden_sizes=(8,))
        rng = np.random.default_rng(1)
        p = init_policy(3, cfg.hidden_sizes, rng, head_scale=0.5)
        b1, b2 = agent.RolloutBuffer(4, 2, 3), agent.RolloutBuffer(4, 2, 3)
        self.fill(b1, p, np.random.default_rng(7))
        self.fill(b2, p, np.random.default_rng(7))
        opt = AdamState.for_params(p)
        p1, o1, _ = agent.a2c_update(p.copy(), opt.copy(), b1, cfg)
        p2, o2, _ = agent.a2c_update(p.copy(), opt.copy(), b2, cfg)
        for name in p1.arrays:
            np.testing.assert_array_equal(p1.arrays[name], p2.arrays[name])
            np.testing.assert_array_equal(o1.m[name], o2.m[name])

    def test_value_regression_improves(self):
        curves = []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            obs = rng.normal(size=(64, 3))
            targets = obs @ np.array([0.5, -0.3, 0.2]) + 1.0
            p = init_policy(3, (16,), rng)
            opt = AdamState.for_params(p)
            cfg = A2CConfig(learning_rate=1e-3)
            losses = []
            for _ in range(50):
                report, grads = a2c_loss_and_grads(p, obs, np.zeros(64, dtype=np.int64), targets,
                                                   np.zeros(64), ent_coef=0.0, vf_coef=0.5)
                losses.append(report.value_loss)
                p, opt, _ = apply_gradients(p, opt, grads, cfg, report)
            curves.append(losses)
        mean_curve = np.mean(curves, axis=0)
        self.assertTrue(np.all(np.diff(mean_curve) < 0.0))

    def test_greedy_and_sampled_actions(self):
        probs = np.array([[0.1, 0.7, 0.1, 0.1], [0.0, 0.0, 0.0, 1.0]])
        np.testing.assert_array_equal(agent.greedy_actions(probs), [1, 3])
        rng = np.random.default_rng(0)
        draws = np.concatenate([agent.sample_actions(probs, rng) for _ in range(2000)]).reshape(-1, 2)
        self.assertTrue(np.all(draws[:, 1] == 3))
        self.assertAlmostEqual(float(np.mean(draws[:, 0] == 1)), 0.7, delta=0.05)


if __name__ == "__main__":
    unittest.main()
