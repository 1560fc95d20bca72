# src/uavmec/logic/verification.py

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from uavmec.logic.baselines import run_design
from uavmec.logic.capacity_alloc import solve_capacity
from uavmec.logic.compute_model import actual_compute_time, estimated_time, latency_gap
from uavmec.logic.ddqn import QNetwork, ddqn_target, dqn_target, forward, train
from uavmec.logic.environment import SlotFeedback
from uavmec.logic.experiments import apply_sweep_value
from uavmec.logic.joint_optimizer import optimize_allocations, run_joint
from uavmec.logic.mobility import step_velocity
from uavmec.logic.power_alloc import (
    optimal_power_bs, optimal_power_device, optimal_power_uav, transmission_energy,
    verify_optimality,
)
from uavmec.logic.radio import rate, rates
from uavmec.logic.scenario import build_world
from uavmec.models.decision import (
    Allocation, LinkBudget, OffloadDecision, Placement, TaskContext,
)
from uavmec.models.geometry import Location
from uavmec.models.scenario import MobilityConfig, NodeProfile, ScenarioConfig, TaskSpec
from uavmec.models.training import DesignId, JointConfig, Settings, TrainConfig

logger = logging.getLogger(__name__)

Z_99 = 2.576


@dataclass
class OracleResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


class TwoStateChain:
    """
    Deterministic two-state, two-action MDP speaking the learner protocol.

    From either state action 0 leads to state 0 and action 1 to state 1.
    Rewards: (s0, a0) 0, (s0, a1) 1, (s1, a0) 0.5, (s1, a1) 0.
    """

    NEXT = np.array([[0, 1], [0, 1]])
    REWARD = np.array([[0.0, 1.0], [0.5, 0.0]])
    observation_size = 2
    action_count = 2

    def __init__(self, horizon: int = 50):
        self.horizon = horizon
        self.state = 0
        self.t = 0

    @staticmethod
    def encode(state: int) -> np.ndarray:
        obs = np.zeros(2)
        obs[state] = 1.0
        return obs

    def begin_episode(self, episode: int) -> None:
        self.state = episode % 2
        self.t = 0

    def observations(self) -> List[np.ndarray]:
        return [self.encode(self.state)]

    def advance(self, actions: Sequence[int]) -> SlotFeedback:
        a = int(actions[0])
        reward = float(self.REWARD[self.state, a])
        self.state = int(self.NEXT[self.state, a])
        self.t += 1
        done = self.t >= self.horizon
        # Truncated, never terminal: the bootstrap stays on at the horizon
        return SlotFeedback([reward], [self.encode(self.state)], False, done, reward)


def value_iteration(next_state: np.ndarray, reward: np.ndarray, discount: float,
                    tol: float = 1e-12) -> np.ndarray:
    """Optimal Q of a deterministic tabular MDP."""
    q = np.zeros_like(reward, dtype=float)
    while True:
        updated = reward + discount * q.max(axis=1)[next_state]
        if np.abs(updated - q).max() < tol:
            return updated
        q = updated


TOY_TRAIN = TrainConfig(
    epsilon_init=1.0, epsilon_decrement=1e-3, epsilon_floor=0.1, discount=0.5,
    learning_rate=0.1, batch_size=32, memory_size=200, target_sync_interval=25,
    episodes=100, hidden_layers=(),
)


def check_dt_identity(rng: np.random.Generator, draws: int = 10_000) -> Tuple[bool, str]:
    D = rng.uniform(1e6, 1e8, draws)
    C = rng.uniform(1.0, 100.0, draws)
    f_est = rng.uniform(1e9, 1e10, draws)
    f_dev = rng.uniform(-0.5, 0.5, draws) * f_est
    worst = 0.0
    for i in range(draws):
        total = estimated_time(D[i], C[i], f_est[i]) + latency_gap(D[i], C[i], f_est[i], f_dev[i])
        exact = D[i] * C[i] / (f_est[i] - f_dev[i])
        worst = max(worst, abs(total - exact) / exact)
    return worst <= 1e-12, f"max relative error {worst:.3g} over {draws} draws"


def _power_instance(rng: np.random.Generator):
    task = TaskSpec(rng.uniform(1e7, 1e8), rng.uniform(5.0, 20.0), rng.uniform(0.2, 1.0))
    gain = 1e-3 / rng.uniform(20.0, 800.0) ** 2
    return task, LinkBudget(distance=0.0, gain=gain)


def check_theorems(rng: np.random.Generator, instances: int = 1000,
                   bandwidth: float = 100e6, noise: float = 1e-11) -> Tuple[bool, str]:
    """Uncapped p* meets the deadline with equality and beats every grid power."""
    failures = 0
    for theorem in ("device", "uav", "bs"):
        for _ in range(instances):
            task, link = _power_instance(rng)
            if theorem == "bs":
                first_hop = rng.uniform(0.05, 0.5) * task.deadline
                sol = optimal_power_bs(task, first_hop, link, bandwidth, noise, math.inf)
                used = first_hop
            else:
                # compute time between 10% and 60% of the deadline
                t_c = rng.uniform(0.1, 0.6) * task.deadline
                f_actual = task.cycles / t_c
                f_dev = rng.uniform(-0.1, 0.1) * f_actual
                solver = optimal_power_device if theorem == "device" else optimal_power_uav
                sol = solver(task, link, f_actual + f_dev, f_dev, bandwidth, noise, math.inf)
                used = actual_compute_time(task.data_bits, task.cycles_per_bit,
                                           f_actual + f_dev, f_dev)
            t_tx = task.data_bits / rate(sol.p_star, link.gain, bandwidth, noise)
            budget = task.deadline - used
            if abs(used + t_tx - task.deadline) > 1e-9 * task.deadline:
                failures += 1
                continue
            p_max = sol.p_star * rng.uniform(1.5, 4.0)
            if not verify_optimality(sol, task.data_bits, budget, link.gain, bandwidth, noise,
                                     p_max):
                failures += 1
    return failures == 0, f"{failures} failures over {3 * instances} instances"


def check_monotonicity(rng: np.random.Generator, links: int = 100,
                       points: int = 1000) -> Tuple[bool, str]:
    violations = 0
    for _ in range(links):
        task, link = _power_instance(rng)
        grid = np.linspace(1e-4, 1.0, points)
        energy = transmission_energy(task.data_bits, grid, link.gain, 100e6, 1e-11)
        violations += int(np.sum(np.diff(energy) < -1e-12 * energy[:-1]))
    return violations == 0, f"{violations} decreasing steps over {links} links"


def _profile(id: int, f_max: float, f_dev: float, kappa: float, p_max: float = 0.2,
             z: float = 0.0) -> NodeProfile:
    return NodeProfile(id, Location(0.0, 0.0, z), f_max, f_dev, f_max, kappa, p_max, 1e9)


def check_capacity(rng: np.random.Generator, instances: int = 50,
                   step: float = 1e6) -> Tuple[bool, str]:
    """solve_capacity against an exhaustive frequency grid."""
    cfg = ScenarioConfig()
    worst_f, worst_e = 0.0, 0.0
    for i in range(instances):
        placement = (Placement.LOCAL, Placement.DEVICE, Placement.UAV)[i % 3]
        f_max = 1e10
        f_dev = rng.uniform(-0.05, 0.05) * f_max
        task = TaskSpec(rng.uniform(8e7, 1e8), 20.0, rng.uniform(0.3, 0.45))
        mtu = _profile(0, f_max, f_dev if placement is Placement.LOCAL else 0.0, 1e-27)
        if placement is Placement.LOCAL:
            ctx = TaskContext(0, 0, task, OffloadDecision(placement), mtu)
            alloc = Allocation()
        else:
            server = _profile(0, f_max, f_dev, 1e-27)
            link = LinkBudget(100.0, 1e-7)
            ctx = TaskContext(0, 0, task, OffloadDecision(placement, 0), mtu, server, link, 0.2)
            alloc = Allocation(p_device=0.2, p_uav=0.2)
        result = solve_capacity([ctx], [alloc], cfg)
        assignment = result.assignments[0]
        if not assignment.feasible:
            continue
        budget = task.deadline - (result.outcomes[0].total_latency
                                  - result.outcomes[0].compute_time)
        grid = np.arange(step, f_max + step, step)
        actual = grid - f_dev
        t_c = np.where(actual > 0, task.cycles / np.where(actual > 0, actual, 1.0), np.inf)
        ok = t_c <= budget * (1 + 1e-12)
        energy = 1e-27 * actual ** 2 * task.cycles
        if not ok.any():
            continue
        j = int(np.argmin(np.where(ok, energy, np.inf)))
        mine = result.outcomes[0].compute_time
        e_mine = 1e-27 * (assignment.frequency - f_dev) ** 2 * task.cycles
        worst_f = max(worst_f, abs(assignment.frequency - grid[j]))
        worst_e = max(worst_e, abs(e_mine - energy[j]) / energy[j])
        if mine > budget * (1 + 1e-9):
            worst_e = math.inf
    passed = worst_f <= step and worst_e <= 1e-3
    return passed, f"max frequency gap {worst_f:.3g} Hz, max energy gap {worst_e:.3g}"


def gradient_error(net: QNetwork, X: np.ndarray, actions: np.ndarray, targets: np.ndarray,
                   h: float = 1e-6) -> float:
    """Relative error between analytic and central-difference gradients."""
    grad_w, grad_b, _ = net.gradients(X, actions, targets)
    analytic, numeric = [], []
    for params, grads in ((net.weights, grad_w), (net.biases, grad_b)):
        for p, g in zip(params, grads):
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + h
                up = net.loss(X, actions, targets)
                p[idx] = old - h
                down = net.loss(X, actions, targets)
                p[idx] = old
                analytic.append(g[idx])
                numeric.append((up - down) / (2 * h))
    a, n = np.array(analytic), np.array(numeric)
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12))


def check_gradients(rng: np.random.Generator, nets: int = 20) -> Tuple[bool, str]:
    worst = 0.0
    for _ in range(nets):
        sizes = (int(rng.integers(2, 6)), int(rng.integers(3, 7)), int(rng.integers(2, 5)))
        net = QNetwork.initialize(sizes, rng)
        X = rng.normal(size=(8, sizes[0]))
        actions = rng.integers(sizes[-1], size=8)
        targets = rng.normal(size=8)
        worst = max(worst, gradient_error(net, X, actions, targets))
    return worst <= 1e-4, f"max relative error {worst:.3g} over {nets} networks"


def toy_q_table(net: QNetwork) -> np.ndarray:
    return np.array([forward(net, TwoStateChain.encode(s)) for s in (0, 1)])


def check_toy_mdp(seeds: Sequence[int] = (0, 1, 2, 3, 4),
                  cfg: TrainConfig = TOY_TRAIN) -> Tuple[bool, str]:
    q_star = value_iteration(TwoStateChain.NEXT, TwoStateChain.REWARD, cfg.discount)
    optimal = q_star.argmax(axis=1)
    passed, worst = True, 0.0
    for seed in seeds:
        result = train(TwoStateChain(), cfg, "ddqn", seed=seed)
        q = toy_q_table(result.policy.net)
        err = float(np.abs(q - q_star).max())
        worst = max(worst, err)
        if err > 0.05 or not np.array_equal(q.argmax(axis=1), optimal):
            passed = False
    return passed, f"max |Q - Q*| {worst:.3g} over {len(seeds)} seeds"


def overestimation_pair() -> Tuple[QNetwork, QNetwork]:
    """Online prefers action 0 while the target values action 1 higher."""
    online = QNetwork([np.array([[1.0, 0.0]])], [np.zeros(2)])
    target = QNetwork([np.array([[0.0, 2.0]])], [np.zeros(2)])
    return online, target


def check_targets() -> Tuple[bool, str]:
    online, target = overestimation_pair()
    obs = np.array([1.0])
    double = ddqn_target(-1.0, obs, False, online, target, 0.9)
    single = dqn_target(-1.0, obs, False, target, 0.9)
    same_double = ddqn_target(-1.0, obs, False, target, target, 0.9)
    passed = double < single and abs(same_double - single) <= 1e-15
    return passed, f"ddqn {double:.3g} < dqn {single:.3g}; equal nets {same_double:.3g}"


def check_gmrm_mean(rng: np.random.Generator, steps: int = 100_000,
                    mean_speed: float = 10.0, std: float = 1.0) -> Tuple[bool, str]:
    details, passed = [], True
    for mu in (0.0, 0.5, 0.99):
        cfg = MobilityConfig(mu1=mu, mean_speed=mean_speed, speed_noise_std=std)
        v, total = mean_speed, 0.0
        for _ in range(steps):
            v = step_velocity(v, cfg, rng)
            total += v
        mean = total / steps
        half_width = Z_99 * std * math.sqrt((1 + mu) / ((1 - mu) * steps))
        ok = abs(mean - mean_speed) <= half_width
        passed = passed and ok
        details.append(f"mu1={mu}: {mean:.4f} (+-{half_width:.3g})")
    return passed, "; ".join(details)


def small_settings(seed: int = 0) -> Settings:
    """A seconds-scale scenario for convergence checks."""
    return Settings().with_overrides(
        seed=seed, num_mtus=2, num_devices=2, fhp_rows=2, fhp_cols=2, num_slots=5,
        episodes=3, hidden_layers=(16,), batch_size=8, memory_size=16,
    )


def check_joint_convergence(seeds: Sequence[int] = tuple(range(20))) -> Tuple[bool, str]:
    bad = []
    for seed in seeds:
        log = run_joint(small_settings(seed)).log
        decreasing = all(b <= a for a, b in zip(log.objectives, log.objectives[1:]))
        if not decreasing or log.iterations > JointConfig().max_iterations:
            bad.append(seed)
    return not bad, f"{len(seeds) - len(bad)}/{len(seeds)} runs nonincreasing"


def single_device_context(deadline: float = 0.5) -> Tuple[TaskContext, ScenarioConfig]:
    cfg = ScenarioConfig(num_mtus=1, num_devices=1)
    task = TaskSpec(1e8, 10.0, deadline)
    mtu = _profile(0, cfg.mtu_f_max, 0.0, cfg.mtu_kappa)
    device = _profile(0, cfg.device_f_max, 0.0, cfg.device_kappa)
    link = LinkBudget(50.0, cfg.beta0 / 50.0 ** 2)
    ctx = TaskContext(0, 0, task, OffloadDecision(Placement.DEVICE, 0), mtu, device, link,
                      cfg.mtu_p_max)
    return ctx, cfg


def grid_optimum(ctx: TaskContext, cfg: ScenarioConfig, points: int = 400) -> float:
    """Lowest device-mode energy over a (p, f) grid that meets the deadline."""
    task = ctx.task
    p = np.linspace(ctx.uplink_p_max / points, ctx.uplink_p_max, points)[:, None]
    f = np.linspace(ctx.server.f_max / points, ctx.server.f_max, points)[None, :]
    t_tx = task.data_bits / rates(p, ctx.uplink.gain, cfg.bandwidth, cfg.noise_power)
    t_c = task.cycles / f
    energy = p * t_tx + ctx.server.kappa * f ** 2 * task.cycles
    energy = np.where(t_tx + t_c <= task.deadline, energy, np.inf)
    return float(energy.min())


def check_joint_vs_grid() -> Tuple[bool, str]:
    ctx, cfg = single_device_context()
    _, outcomes, log = optimize_allocations([ctx], cfg, JointConfig())
    mine = outcomes[0].total_energy
    best = grid_optimum(ctx, cfg)
    passed = log.iterations <= 3 and mine <= best * (1 + 1e-9) and best <= mine * 1.05
    return passed, f"joint {mine:.6g} J vs grid {best:.6g} J in {log.iterations} iterations"


TREND_SEEDS = tuple(range(5))
TREND_SWEEPS = (
    ("L", (50.0, 100.0, 150.0), "nondecreasing"),
    ("M", (2.0, 4.0, 6.0), "nondecreasing"),
    ("f_max_mtu", (4.0, 6.0, 8.0), "nonincreasing"),
    ("deviation_delta", (0.0, 0.05, 0.1), "decreasing"),
)
TREND_ORDER = (DesignId.PROPOSED, DesignId.DQN, DesignId.NO_F_OPT, DesignId.GREEDY_DEVICES)


def trend_settings(seed: int = 0) -> Settings:
    """Reduced-scale scenario with enough training for the learned orderings to show."""
    return Settings().with_overrides(
        seed=seed, num_mtus=4, num_devices=4, fhp_rows=2, fhp_cols=3, num_slots=20,
        episodes=60, hidden_layers=(32,), batch_size=32, memory_size=256,
    )


def _follows(values: Sequence[float], trend: str) -> bool:
    pairs = list(zip(values, values[1:]))
    slack = 1e-9 * max(abs(v) for v in values) if values else 0.0
    if trend == "nondecreasing":
        return all(b >= a - slack for a, b in pairs)
    if trend == "nonincreasing":
        return all(b <= a + slack for a, b in pairs)
    return all(b < a for a, b in pairs)


def check_trends(seeds: Sequence[int] = TREND_SEEDS,
                 base: Callable[[int], Settings] = trend_settings) -> Tuple[bool, str]:
    """
    Design ordering and sweep trends of the proposed design, majority of seeds.

    Orderings compare penalized energy, so a design that saves energy by missing
    deadlines ranks behind one that meets them. Sweep trends compare total energy.
    """
    votes: Dict[str, int] = {}

    def vote(criterion: str, ok: bool) -> None:
        votes[criterion] = votes.get(criterion, 0) + int(ok)

    for seed in seeds:
        settings = base(seed)
        world = build_world(settings.scenario)
        penalty = settings.reward.penalty
        scores = {d: run_design(d, settings, world).penalized(penalty)
                  for d in TREND_ORDER + (DesignId.NO_DT,)}
        ordered = [scores[d] for d in TREND_ORDER]
        vote("ordering", _follows(ordered, "nondecreasing"))
        vote("proposed<no_dt", scores[DesignId.PROPOSED] < scores[DesignId.NO_DT])
        for variable, values, trend in TREND_SWEEPS:
            energies = [run_design(DesignId.PROPOSED,
                                   apply_sweep_value(settings, variable, v)).objective
                        for v in values]
            vote(variable, _follows(energies, trend))
        logger.info(f"Trend seed {seed}: {votes}")

    majority = len(seeds) // 2 + 1
    passed = all(count >= majority for count in votes.values())
    detail = ", ".join(f"{name} {count}/{len(seeds)}" for name, count in votes.items())
    return passed, detail


ORACLES: List[Tuple[str, Callable[[np.random.Generator], Tuple[bool, str]]]] = [
    ("dt_identity", check_dt_identity),
    ("theorems", check_theorems),
    ("monotonicity", check_monotonicity),
    ("capacity", check_capacity),
    ("gradients", check_gradients),
    ("toy_mdp", lambda rng: check_toy_mdp()),
    ("targets", lambda rng: check_targets()),
    ("gmrm_mean", check_gmrm_mean),
    ("joint_vs_grid", lambda rng: check_joint_vs_grid()),
    ("joint_convergence", lambda rng: check_joint_convergence()),
    ("trend", lambda rng: check_trends()),
]
# Run only when named explicitly
OPT_IN_ORACLES = ("trend",)


def run_oracle(name: str, seed: int = 0) -> OracleResult:
    checks = dict(ORACLES)
    if name not in checks:
        raise KeyError(f"Unknown oracle '{name}'")
    start = time.perf_counter()
    try:
        passed, detail = checks[name](np.random.default_rng(seed))
    except Exception as e:
        logger.error(f"Oracle {name} raised: {e}")
        passed, detail = False, f"raised {type(e).__name__}: {e}"
    return OracleResult(name, passed, detail, time.perf_counter() - start)


def run_all(names: Optional[Sequence[str]] = None, seed: int = 0,
            update_progress: Optional[Callable[[int], None]] = None,
            update_log: Optional[Callable[[str], None]] = None) -> List[OracleResult]:
    """
    Run the property oracles in order.

    :param names: Subset to run; every oracle except the opt-in ones when omitted
    :param seed: Seed for every randomized oracle
    :param update_progress: Callback receiving the completed percentage
    :param update_log: Callback receiving one line per oracle
    :return: One OracleResult per oracle
    """
    selected = list(names) if names else [name for name, _ in ORACLES
                                          if name not in OPT_IN_ORACLES]
    results = []
    for i, name in enumerate(selected):
        result = run_oracle(name, seed)
        results.append(result)
        status = "PASS" if result.passed else "FAIL"
        logger.info(f"{status} {name}: {result.detail} ({result.seconds:.2f} s)")
        if update_log:
            update_log(f"{status} {name}: {result.detail}")
        if update_progress:
            update_progress(int((i + 1) / len(selected) * 100))
    return results
