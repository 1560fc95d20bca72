# src/uavmec/logic/ddqn.py

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from uavmec.models.training import TARGET_RULES, TrainConfig
from uavmec.utils.errors import UavMecError

CHECKPOINT_VERSION = 1
CURVE_COLUMNS = ["episode", "total_reward", "epsilon", "loss"]
# Stream id mixed into the training seed; keeps exploration apart from the scenario streams.
TRAIN_STREAM = 1

logger = logging.getLogger(__name__)


class QNetwork:
    """
    Fully connected value network: rectifier on hidden layers, identity output.
    weights[i] has shape (fan_in, fan_out).
    """

    def __init__(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]):
        if len(weights) != len(biases) or not weights:
            raise ValueError("QNetwork needs one bias vector per weight matrix")
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]

    @classmethod
    def initialize(cls, sizes: Sequence[int], rng: np.random.Generator) -> "QNetwork":
        """
        Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].

        :param sizes: Layer widths, input first and action count last
        :param rng: Random stream
        :return: QNetwork
        """
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(weights, biases)

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights])

    def _forward_all(self, X: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        activations = [X]
        pre = []
        last = len(self.weights) - 1
        a = X
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            pre.append(z)
            a = np.maximum(z, 0.0) if i < last else z
            activations.append(a)
        return pre, activations

    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        return self._forward_all(np.atleast_2d(X))[1][-1]

    def loss(self, X: np.ndarray, actions: np.ndarray, targets: np.ndarray) -> float:
        q = self.forward_batch(X)
        err = q[np.arange(len(q)), actions] - targets
        return float(np.mean(err * err))

    def gradients(self, X: np.ndarray, actions: np.ndarray,
                  targets: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray], float]:
        """
        Gradient of the mean squared error between targets and the Q-value of
        the taken action; other outputs contribute nothing.

        :param X: Observations, shape (P, input)
        :param actions: Taken actions, shape (P,)
        :param targets: Regression targets, shape (P,)
        :return: (weight grads, bias grads, loss)
        """
        pre, acts = self._forward_all(np.atleast_2d(X))
        q = acts[-1]
        P = len(q)
        rows = np.arange(P)
        err = q[rows, actions] - targets
        delta = np.zeros_like(q)
        delta[rows, actions] = 2.0 * err / P
        grad_w: List[np.ndarray] = [np.empty(0)] * len(self.weights)
        grad_b: List[np.ndarray] = [np.empty(0)] * len(self.weights)
        for i in reversed(range(len(self.weights))):
            grad_w[i] = acts[i].T @ delta
            grad_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (pre[i - 1] > 0)
        return grad_w, grad_b, float(np.mean(err * err))

    def apply(self, grad_w: Sequence[np.ndarray], grad_b: Sequence[np.ndarray],
              learning_rate: float) -> None:
        for i in range(len(self.weights)):
            self.weights[i] -= learning_rate * grad_w[i]
            self.biases[i] -= learning_rate * grad_b[i]

    def copy(self) -> "QNetwork":
        return QNetwork([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def is_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.weights + self.biases)


def forward(net: QNetwork, obs: np.ndarray) -> np.ndarray:
    """Q-values of one observation."""
    return net.forward_batch(obs)[0]


def select_action(net: QNetwork, obs: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """
    Epsilon-greedy action. np.argmax returns the first maximum, so ties go to
    the lowest index.
    """
    if rng.random() < epsilon:
        return int(rng.integers(net.sizes[-1]))
    return int(np.argmax(forward(net, obs)))


def batch_targets(rewards: np.ndarray, next_states: np.ndarray, dones: np.ndarray,
                  online: QNetwork, target: QNetwork, discount: float,
                  rule: str = "ddqn") -> np.ndarray:
    """
    Bootstrapped regression targets for a batch.

    ddqn picks the next action with the online network and scores it with the
    target network; dqn takes the target network's maximum.
    """
    q_next = target.forward_batch(next_states)
    if rule == "ddqn":
        best = np.argmax(online.forward_batch(next_states), axis=1)
        bootstrap = q_next[np.arange(len(q_next)), best]
    elif rule == "dqn":
        bootstrap = q_next.max(axis=1)
    else:
        raise ValueError(f"Unknown target rule '{rule}' (choose from {', '.join(TARGET_RULES)})")
    return rewards + discount * (1.0 - dones.astype(float)) * bootstrap


def ddqn_target(reward: float, next_obs: np.ndarray, done: bool, online: QNetwork,
                target: QNetwork, discount: float) -> float:
    return float(batch_targets(np.array([reward]), np.atleast_2d(next_obs), np.array([done]),
                               online, target, discount, "ddqn")[0])


def dqn_target(reward: float, next_obs: np.ndarray, done: bool, target: QNetwork,
               discount: float) -> float:
    return float(batch_targets(np.array([reward]), np.atleast_2d(next_obs), np.array([done]),
                               target, target, discount, "dqn")[0])


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)


class ReplayMemory:
    """Ring buffer of transitions; sampled only once it has filled up."""

    def __init__(self, capacity: int, observation_size: int, rng: np.random.Generator):
        if capacity <= 0:
            raise ValueError("Replay capacity must be positive")
        self.capacity = capacity
        self.rng = rng
        self.states = np.zeros((capacity, observation_size))
        self.next_states = np.zeros((capacity, observation_size))
        self.actions = np.zeros(capacity, dtype=int)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.count = 0

    def __len__(self) -> int:
        return min(self.count, self.capacity)

    @property
    def full(self) -> bool:
        return self.count >= self.capacity

    def store(self, state: np.ndarray, action: int, reward: float, next_state: np.ndarray,
              done: bool) -> None:
        i = self.count % self.capacity
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = done
        self.count += 1

    def sample(self, batch_size: int) -> Batch:
        if not self.full:
            raise RuntimeError(f"Replay memory holds {len(self)} of {self.capacity}; not full yet")
        if batch_size > self.capacity:
            raise ValueError(f"Batch size {batch_size} exceeds capacity {self.capacity}")
        idx = self.rng.choice(self.capacity, size=batch_size, replace=False)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.dones[idx])


def gradient_step(net: QNetwork, states: np.ndarray, actions: np.ndarray, targets: np.ndarray,
                  learning_rate: float) -> float:
    grad_w, grad_b, loss = net.gradients(states, actions, targets)
    net.apply(grad_w, grad_b, learning_rate)
    return loss


def train_step(online: QNetwork, target: QNetwork, batch: Batch, learning_rate: float,
               discount: float, rule: str = "ddqn", batch_size: Optional[int] = None) -> float:
    """
    One plain gradient-descent step on the online network.

    :param online: Predicted network, updated in place
    :param target: Target network
    :param batch: Sampled transitions
    :param learning_rate: Step size
    :param discount: Discount factor
    :param rule: "ddqn" or "dqn"
    :param batch_size: Required batch size; a smaller batch is rejected
    :return: Loss before the update
    """
    if batch_size is not None and len(batch) < batch_size:
        raise ValueError(f"Batch of {len(batch)} is smaller than the configured {batch_size}")
    targets = batch_targets(batch.rewards, batch.next_states, batch.dones, online, target,
                            discount, rule)
    return gradient_step(online, batch.states, batch.actions, targets, learning_rate)


def sync_target(online: QNetwork, target: QNetwork) -> QNetwork:
    """Copy the online parameters into the target network in place."""
    for i in range(len(online.weights)):
        target.weights[i] = online.weights[i].copy()
        target.biases[i] = online.biases[i].copy()
    return target


class GreedyPolicy:
    def __init__(self, net: QNetwork):
        self.net = net

    def act(self, obs: np.ndarray) -> int:
        return int(np.argmax(forward(self.net, obs)))

    def __call__(self, observations: Sequence[np.ndarray]) -> List[int]:
        return [self.act(o) for o in observations]


@dataclass
class TrainResult:
    policy: GreedyPolicy
    curve: pd.DataFrame
    train_steps: int
    epsilon: float


def train(env, cfg: TrainConfig, target_rule: str = "ddqn", seed: int = 0,
          warm_start: Optional[QNetwork] = None,
          update_progress: Optional[Callable[[int], None]] = None,
          update_log: Optional[Callable[[str], None]] = None) -> TrainResult:
    """
    Experience-replay training loop shared by every MTU.

    The environment follows the learner protocol: observation_size, action_count,
    begin_episode(episode), observations() and advance(actions). Every MTU
    sub-step of a slot becomes one transition; one gradient step runs per slot
    once the memory is full, and epsilon drops by its decrement per slot.

    :param env: Environment
    :param cfg: Training hyperparameters
    :param target_rule: "ddqn" or "dqn"
    :param seed: Seed for initialization, exploration and replay sampling
    :param warm_start: Network to continue training from
    :param update_progress: Callback receiving the completed percentage
    :param update_log: Callback receiving log lines
    :return: TrainResult with the greedy policy and the learning curve
    """
    if target_rule not in TARGET_RULES:
        raise ValueError(f"Unknown target rule '{target_rule}'")
    if cfg.batch_size > cfg.memory_size:
        raise ValueError("batch_size must not exceed memory_size")
    rng = np.random.default_rng([seed, TRAIN_STREAM])
    sizes = (env.observation_size, *cfg.hidden_layers, env.action_count)
    if warm_start is not None and warm_start.sizes != sizes:
        raise UavMecError(f"Warm-start network has layer sizes {warm_start.sizes}, "
                          f"the environment needs {sizes}")
    online = warm_start.copy() if warm_start is not None else QNetwork.initialize(sizes, rng)
    target = online.copy()
    memory = ReplayMemory(cfg.memory_size, env.observation_size, rng)
    epsilon = cfg.epsilon_init
    steps = 0
    rows = []

    for episode in range(cfg.episodes):
        env.begin_episode(episode)
        total_reward = 0.0
        losses = []
        done = False
        while not done:
            observations = env.observations()
            actions = [select_action(online, obs, epsilon, rng) for obs in observations]
            feedback = env.advance(actions)
            for obs, action, reward, nxt in zip(observations, actions, feedback.rewards,
                                                feedback.next_observations):
                memory.store(obs, action, reward, nxt, feedback.terminal)
            total_reward += feedback.slot_reward
            if memory.full:
                batch = memory.sample(cfg.batch_size)
                losses.append(train_step(online, target, batch, cfg.learning_rate,
                                         cfg.discount, target_rule, cfg.batch_size))
                steps += 1
                if steps % cfg.target_sync_interval == 0:
                    sync_target(online, target)
            epsilon = max(epsilon - cfg.epsilon_decrement, cfg.epsilon_floor)
            done = feedback.done

        loss = float(np.mean(losses)) if losses else float("nan")
        rows.append({"episode": episode, "total_reward": total_reward, "epsilon": epsilon,
                     "loss": loss})
        logger.debug(f"Episode {episode}: reward {total_reward:.6g}, epsilon {epsilon:.4f}")
        if update_progress:
            update_progress(int((episode + 1) / cfg.episodes * 100))
        if update_log:
            update_log(f"Episode {episode + 1}/{cfg.episodes}: reward {total_reward:.4f}")

    if not online.is_finite():
        logger.error("Training produced non-finite network parameters")
    logger.info(f"Training finished: {cfg.episodes} episodes, {steps} gradient steps")
    curve = pd.DataFrame(rows, columns=CURVE_COLUMNS)
    return TrainResult(GreedyPolicy(online), curve, steps, epsilon)


def save_checkpoint(net: QNetwork, path: Union[str, Path]) -> Path:
    """
    Write layer sizes and parameters to a .npz file.

    :param net: Network to save
    :param path: Destination; ".npz" is appended when missing
    :return: Path written
    """
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(".npz")
    arrays = {"version": np.array(CHECKPOINT_VERSION), "sizes": np.array(net.sizes)}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **arrays)
    return path


def load_checkpoint(path: Union[str, Path]) -> QNetwork:
    with np.load(Path(path)) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise UavMecError(f"Unsupported checkpoint version {version} in {path}")
        sizes = tuple(int(s) for s in data["sizes"])
        layers = len(sizes) - 1
        net = QNetwork([data[f"w{i}"] for i in range(layers)],
                       [data[f"b{i}"] for i in range(layers)])
    if net.sizes != sizes:
        raise UavMecError(f"Checkpoint {path} has inconsistent layer sizes")
    return net
