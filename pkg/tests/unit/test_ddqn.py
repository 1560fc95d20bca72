# tests/unit/test_ddqn.py

import os
import tempfile
import unittest
from dataclasses import replace
from unittest import mock

import numpy as np
from scipy.stats import chisquare

from uavmec.logic.ddqn import (
    CURVE_COLUMNS, TRAIN_STREAM, Batch, GreedyPolicy, QNetwork, ReplayMemory, batch_targets,
    ddqn_target, dqn_target, forward, gradient_step, load_checkpoint, save_checkpoint,
    select_action, sync_target, train, train_step,
)
from uavmec.logic.verification import (
    TOY_TRAIN, TwoStateChain, gradient_error, overestimation_pair, toy_q_table, value_iteration,
)
from uavmec.utils.errors import UavMecError


def zero_net(inputs=3, actions=4):
    return QNetwork([np.zeros((inputs, actions))], [np.zeros(actions)])


class TestQNetwork(unittest.TestCase):
    def test_zero_network(self):
        q = forward(zero_net(), np.array([0.3, 0.2, 0.9]))
        np.testing.assert_array_equal(q, np.zeros(4))

    def test_identity_layers_rectify_hidden_units(self):
        net = QNetwork([np.eye(3), np.eye(3)], [np.zeros(3), np.zeros(3)])
        np.testing.assert_array_equal(forward(net, np.array([0.1, -0.5, 0.3])), [0.1, 0.0, 0.3])
        linear = QNetwork([np.eye(3)], [np.zeros(3)])
        np.testing.assert_array_equal(forward(linear, np.array([0.1, -0.5, 0.3])),
                                      [0.1, -0.5, 0.3])

    def test_initialize_bounds_and_sizes(self):
        net = QNetwork.initialize((16, 8, 5), np.random.default_rng(0))
        self.assertEqual(net.sizes, (16, 8, 5))
        self.assertEqual(net.weights[0].shape, (16, 8))
        self.assertTrue(np.all(np.abs(net.weights[0]) <= 0.25))
        self.assertTrue(np.all(np.abs(net.biases[1]) <= 1 / np.sqrt(8)))

    def test_mismatched_layers_rejected(self):
        with self.assertRaises(ValueError):
            QNetwork([np.eye(2)], [])

    def test_copy_is_independent(self):
        net = QNetwork.initialize((3, 2), np.random.default_rng(0))
        twin = net.copy()
        twin.weights[0][0, 0] += 1.0
        self.assertNotEqual(twin.weights[0][0, 0], net.weights[0][0, 0])
        self.assertTrue(net.is_finite())
        twin.biases[0][1] = np.nan
        self.assertFalse(twin.is_finite())

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(4)
        net = QNetwork.initialize((4, 6, 3), rng)
        X = rng.normal(size=(10, 4))
        actions = rng.integers(3, size=10)
        targets = rng.normal(size=10)
        self.assertLess(gradient_error(net, X, actions, targets), 1e-5)


class TestActionSelection(unittest.TestCase):
    def test_greedy_takes_argmax(self):
        net = QNetwork([np.eye(3)], [np.zeros(3)])
        rng = np.random.default_rng(0)
        self.assertEqual(select_action(net, np.array([0.1, 0.5, 0.3]), 0.0, rng), 1)

    def test_ties_go_to_lowest_index(self):
        rng = np.random.default_rng(0)
        self.assertEqual(select_action(zero_net(), np.ones(3), 0.0, rng), 0)
        net = QNetwork([np.eye(3)], [np.zeros(3)])
        self.assertEqual(GreedyPolicy(net).act(np.array([0.2, 0.7, 0.7])), 1)

    def test_full_exploration_is_uniform(self):
        rng = np.random.default_rng(12)
        draws = [select_action(zero_net(), np.ones(3), 1.0, rng) for _ in range(4000)]
        counts = np.bincount(draws, minlength=4)
        self.assertEqual(counts.sum(), 4000)
        self.assertGreater(chisquare(counts).pvalue, 1e-3)

    def test_policy_maps_every_observation(self):
        net = QNetwork([np.eye(3)], [np.zeros(3)])
        observations = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])]
        self.assertEqual(GreedyPolicy(net)(observations), [0, 2])


class TestTargets(unittest.TestCase):
    def test_double_target_scores_the_online_choice(self):
        online, target = overestimation_pair()
        obs = np.array([1.0])
        self.assertAlmostEqual(dqn_target(-1.0, obs, False, target, 0.9), 0.8)
        self.assertAlmostEqual(ddqn_target(-1.0, obs, False, online, target, 0.9), -1.0)

    def test_terminal_transition_is_just_the_reward(self):
        online, target = overestimation_pair()
        obs = np.array([1.0])
        self.assertEqual(ddqn_target(-1.0, obs, True, online, target, 0.9), -1.0)
        self.assertEqual(dqn_target(-1.0, obs, True, target, 0.9), -1.0)

    def test_equal_networks_agree(self):
        _, target = overestimation_pair()
        obs = np.array([1.0])
        self.assertAlmostEqual(ddqn_target(0.5, obs, False, target, target, 0.9),
                               dqn_target(0.5, obs, False, target, 0.9))

    def test_unknown_rule(self):
        net = zero_net()
        with self.assertRaises(ValueError):
            batch_targets(np.zeros(1), np.zeros((1, 3)), np.zeros(1), net, net, 0.9, "sarsa")


class TestReplayMemory(unittest.TestCase):
    def fill(self, memory, count):
        for i in range(count):
            memory.store(np.full(2, i), i % 3, float(i), np.full(2, i + 1), i % 2 == 0)

    def test_sampling_before_full_raises(self):
        memory = ReplayMemory(5, 2, np.random.default_rng(0))
        self.fill(memory, 4)
        self.assertFalse(memory.full)
        with self.assertRaises(RuntimeError):
            memory.sample(2)

    def test_sample_without_replacement(self):
        memory = ReplayMemory(10, 2, np.random.default_rng(0))
        self.fill(memory, 10)
        batch = memory.sample(10)
        self.assertEqual(sorted(batch.rewards), [float(i) for i in range(10)])
        np.testing.assert_array_equal(batch.states[:, 0], batch.rewards)
        with self.assertRaises(ValueError):
            memory.sample(11)

    def test_ring_buffer_overwrites_oldest(self):
        memory = ReplayMemory(4, 2, np.random.default_rng(0))
        self.fill(memory, 6)
        self.assertEqual(len(memory), 4)
        self.assertEqual(sorted(memory.rewards), [2.0, 3.0, 4.0, 5.0])

    def test_capacity_must_be_positive(self):
        with self.assertRaises(ValueError):
            ReplayMemory(0, 2, np.random.default_rng(0))


class TestTrainStep(unittest.TestCase):
    def batch(self, size=4):
        rng = np.random.default_rng(1)
        return Batch(rng.random((size, 3)), rng.integers(4, size=size), np.zeros(size),
                     rng.random((size, 3)), np.zeros(size, dtype=bool))

    def test_zero_error_leaves_network_unchanged(self):
        online, target = zero_net(), zero_net()
        loss = train_step(online, target, self.batch(), 0.1, 0.9)
        self.assertEqual(loss, 0.0)
        np.testing.assert_array_equal(online.weights[0], np.zeros((3, 4)))

    def test_gradient_descent_lowers_loss(self):
        rng = np.random.default_rng(2)
        net = QNetwork.initialize((3, 8, 4), rng)
        X = rng.random((16, 3))
        actions = rng.integers(4, size=16)
        targets = rng.normal(size=16)
        losses = [gradient_step(net, X, actions, targets, 0.05) for _ in range(50)]
        self.assertLess(net.loss(X, actions, targets), losses[0])

    def test_short_batch_rejected(self):
        with self.assertRaises(ValueError):
            train_step(zero_net(), zero_net(), self.batch(3), 0.1, 0.9, batch_size=4)

    def test_sync_copies_parameters(self):
        online = QNetwork.initialize((3, 5, 4), np.random.default_rng(0))
        target = QNetwork.initialize((3, 5, 4), np.random.default_rng(1))
        sync_target(online, target)
        for a, b in zip(online.weights + online.biases, target.weights + target.biases):
            np.testing.assert_array_equal(a, b)
        online.weights[0][0, 0] += 1.0
        self.assertNotEqual(online.weights[0][0, 0], target.weights[0][0, 0])


class TestCheckpoint(unittest.TestCase):
    def test_round_trip(self):
        net = QNetwork.initialize((5, 7, 3), np.random.default_rng(0))
        with tempfile.TemporaryDirectory() as tmp:
            path = save_checkpoint(net, os.path.join(tmp, "nested", "policy"))
            self.assertTrue(str(path).endswith(".npz"))
            loaded = load_checkpoint(path)
        self.assertEqual(loaded.sizes, net.sizes)
        for a, b in zip(net.weights + net.biases, loaded.weights + loaded.biases):
            np.testing.assert_array_equal(a, b)

    def test_unknown_version_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "old.npz")
            np.savez(path, version=np.array(99), sizes=np.array([2, 2]),
                     w0=np.eye(2), b0=np.zeros(2))
            with self.assertRaises(UavMecError):
                load_checkpoint(path)


class TestTrain(unittest.TestCase):
    def test_value_iteration_on_toy_chain(self):
        q = value_iteration(TwoStateChain.NEXT, TwoStateChain.REWARD, 0.5)
        np.testing.assert_allclose(q, [[5 / 6, 5 / 3], [4 / 3, 2 / 3]], atol=1e-9)

    def test_learns_toy_chain(self):
        q_star = value_iteration(TwoStateChain.NEXT, TwoStateChain.REWARD, TOY_TRAIN.discount)
        result = train(TwoStateChain(), TOY_TRAIN, "ddqn", seed=0)
        q = toy_q_table(result.policy.net)
        self.assertLess(np.abs(q - q_star).max(), 0.05)
        np.testing.assert_array_equal(q.argmax(axis=1), [1, 0])
        self.assertAlmostEqual(result.epsilon, TOY_TRAIN.epsilon_floor)

    def test_zero_learning_rate_keeps_initial_network(self):
        cfg = replace(TOY_TRAIN, learning_rate=0.0, episodes=10)
        result = train(TwoStateChain(), cfg, "ddqn", seed=3)
        initial = QNetwork.initialize((2, 2), np.random.default_rng([3, TRAIN_STREAM]))
        np.testing.assert_array_equal(result.policy.net.weights[0], initial.weights[0])
        self.assertGreater(result.train_steps, 0)

    def test_same_seed_same_run(self):
        cfg = replace(TOY_TRAIN, episodes=10)
        a = train(TwoStateChain(), cfg, "dqn", seed=7)
        b = train(TwoStateChain(), cfg, "dqn", seed=7)
        np.testing.assert_array_equal(a.policy.net.weights[0], b.policy.net.weights[0])
        self.assertTrue(a.curve.equals(b.curve))

    def test_curve_and_callbacks(self):
        cfg = replace(TOY_TRAIN, episodes=4)
        progress = mock.Mock()
        log = mock.Mock()
        result = train(TwoStateChain(horizon=60), cfg, seed=0, update_progress=progress,
                       update_log=log)
        self.assertEqual(list(result.curve.columns), CURVE_COLUMNS)
        self.assertEqual(len(result.curve), 4)
        progress.assert_called_with(100)
        self.assertEqual(log.call_count, 4)
        self.assertTrue(np.isnan(result.curve["loss"].iloc[0]))
        self.assertFalse(np.isnan(result.curve["loss"].iloc[-1]))

    def test_warm_start_continues_from_given_network(self):
        cfg = replace(TOY_TRAIN, learning_rate=0.0, episodes=5)
        start = QNetwork([np.array([[1.0, 2.0], [3.0, 4.0]])], [np.zeros(2)])
        result = train(TwoStateChain(), cfg, seed=0, warm_start=start)
        np.testing.assert_array_equal(result.policy.net.weights[0], start.weights[0])
        self.assertIsNot(result.policy.net, start)

    def test_invalid_configuration(self):
        with self.assertRaises(ValueError):
            train(TwoStateChain(), TOY_TRAIN, "sarsa")
        with self.assertRaises(ValueError):
            train(TwoStateChain(), replace(TOY_TRAIN, batch_size=500), "ddqn")


if __name__ == '__main__':
    unittest.main()
