# src/uavmec/logic/joint_optimizer.py

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import pandas as pd

from uavmec.logic.allocation import (
    AllocationRule, DeviationBlindRule, InitialRule, JointRule, balance_split, initial_allocation,
    plan_powers, without_deviation,
)
from uavmec.logic.capacity_alloc import BudgetReport, budget_report, solve_capacity
from uavmec.logic.compute_model import evaluate_mode
from uavmec.logic.ddqn import GreedyPolicy, QNetwork, TrainResult, train
from uavmec.logic.environment import OffloadingEnv
from uavmec.models.decision import Allocation, ModeOutcome, TaskContext
from uavmec.models.scenario import ScenarioConfig, World
from uavmec.models.training import ConvergenceLog, JointConfig, Settings
from uavmec.utils.errors import ConvergenceError

# Every design is scored on this episode; training never reaches it.
EVAL_EPISODE = 1_000_000
# Relative slack when checking that the objective did not increase
MONOTONE_RTOL = 1e-12
CONVERGENCE_COLUMNS = ["iteration", "objective", "frac_decrease"]

logger = logging.getLogger(__name__)

Chooser = Callable[[OffloadingEnv], Sequence[int]]


def learned(policy: GreedyPolicy) -> Chooser:
    return lambda env: policy(env.observations())


@dataclass
class EpisodeTrace:
    """Decisions and contexts of one evaluated episode, in TDMA order."""

    contexts: List[TaskContext] = field(default_factory=list)
    actions: List[int] = field(default_factory=list)
    reward: float = 0.0
    env_violations: int = 0
    frame: Optional[pd.DataFrame] = None

    def __len__(self) -> int:
        return len(self.contexts)


def rollout(env: OffloadingEnv, choose: Chooser, episode: int = EVAL_EPISODE) -> EpisodeTrace:
    """
    Run one full episode with a fixed chooser and record every sub-step.

    :param env: Environment created with record=True
    :param choose: Maps the environment to one action per MTU
    :param episode: Episode index
    :return: EpisodeTrace
    """
    env.record = True
    env.reset(episode)
    trace = EpisodeTrace()
    done = False
    while not done:
        result = env.step(list(choose(env)))
        for sub in result.info["substeps"]:
            trace.contexts.append(sub.context)
            trace.actions.append(sub.action)
        trace.reward += result.reward
        trace.env_violations += result.info["violations"]
        done = result.done
    trace.frame = env.trace_frame()
    return trace


def objective(outcomes: Sequence[ModeOutcome]) -> float:
    """Total system energy over every task of the trace; 0 for an empty trace."""
    return float(sum(o.total_energy for o in outcomes))


def evaluate_all(contexts: Sequence[TaskContext], allocations: Sequence[Allocation],
                 cfg: ScenarioConfig) -> List[ModeOutcome]:
    return [evaluate_mode(c, a, cfg) for c, a in zip(contexts, allocations)]


def count_violations(contexts: Sequence[TaskContext], outcomes: Sequence[ModeOutcome],
                     cfg: ScenarioConfig) -> int:
    """Deadline misses plus entities whose cumulative draw exceeds their budget."""
    misses = sum(1 for c, o in zip(contexts, outcomes) if not o.meets(c.task.deadline))
    return misses + len(budget_report(contexts, outcomes, cfg).breaches)


def _accept(ctx: TaskContext, current: ModeOutcome, candidate: ModeOutcome) -> bool:
    if current.meets(ctx.task.deadline) and not candidate.meets(ctx.task.deadline):
        return False
    return candidate.total_energy <= current.total_energy


def optimize_allocations(contexts: Sequence[TaskContext], cfg: ScenarioConfig,
                         joint: JointConfig, blind: bool = False,
                         update_log: Optional[Callable[[str], None]] = None,
                         ) -> Tuple[List[Allocation], List[ModeOutcome], ConvergenceLog]:
    """
    Alternate closed-form powers and capacity allocation over fixed decisions.

    Each outer iteration runs the power step given the current frequencies, the
    capacity step given the new powers and, with split refinement on, a per-task
    re-split of the deadline. A task takes a new allocation only when its
    planned energy does not rise, so the planned objective never increases.

    When blind, the whole loop plans on contexts with zero DT deviation and only
    the returned outcomes and the logged violation counts use the true ones.

    :param contexts: Task contexts of the evaluated episode
    :param cfg: Scenario constants
    :param joint: Threshold, iteration cap and refinement switch
    :param blind: Plan with zero DT deviation
    :param update_log: Callback receiving log lines
    :return: (allocations, true outcomes, convergence log)
    """
    planning = [without_deviation(c) for c in contexts] if blind else list(contexts)

    def true_violations(allocs: Sequence[Allocation], planned: Sequence[ModeOutcome]) -> int:
        outs = evaluate_all(contexts, allocs, cfg) if blind else planned
        return count_violations(contexts, outs, cfg)

    allocations = [initial_allocation(p, cfg) for p in planning]
    planned = evaluate_all(planning, allocations, cfg)
    log = ConvergenceLog()
    phi = objective(planned)
    log.record(phi, true_violations(allocations, planned))
    logger.info(f"Joint loop start: objective {phi:.6g} J over {len(contexts)} tasks")

    for r in range(1, joint.max_iterations + 1):
        powered = [plan_powers(p, a, cfg) for p, a in zip(planning, allocations)]
        capacity = solve_capacity(planning, powered, cfg)
        next_allocs, next_planned = [], []
        for i, plan in enumerate(planning):
            best_alloc, best_out = allocations[i], planned[i]
            candidates = [powered[i], capacity.allocations[i]]
            if joint.split_refinement:
                candidates.append(balance_split(plan, cfg))
            for cand in candidates:
                out = evaluate_mode(plan, cand, cfg)
                if _accept(plan, best_out, out):
                    best_alloc, best_out = cand, out
            next_allocs.append(best_alloc)
            next_planned.append(best_out)

        new_phi = objective(next_planned)
        if new_phi > phi * (1.0 + MONOTONE_RTOL):
            raise ConvergenceError(f"Objective rose from {phi:.12g} to {new_phi:.12g} "
                                   f"at iteration {r}")
        allocations, planned = next_allocs, next_planned
        log.record(new_phi, true_violations(allocations, planned))
        decrease = (phi - new_phi) / phi if phi > 0 else 0.0
        phi = new_phi
        logger.info(f"Iteration {r}: objective {phi:.6g} J, fractional decrease {decrease:.3g}")
        if update_log:
            update_log(f"Iteration {r}: objective {phi:.6g} J")
        if decrease < joint.threshold:
            break
    outcomes = evaluate_all(contexts, allocations, cfg) if blind else planned
    return allocations, outcomes, log


@dataclass
class JointResult:
    trace: EpisodeTrace
    allocations: List[Allocation]
    outcomes: List[ModeOutcome]
    log: ConvergenceLog
    budget: BudgetReport
    violations: int = 0
    training: Optional[TrainResult] = None

    @property
    def policy(self) -> Optional[GreedyPolicy]:
        return self.training.policy if self.training else None

    @property
    def powers(self) -> List[Tuple[float, float, float]]:
        return [(a.p_device, a.p_uav, a.p_bs) for a in self.allocations]

    @property
    def frequencies(self) -> List[Tuple[float, float, float]]:
        return [(a.f_local, a.f_device, a.f_uav) for a in self.allocations]

    @property
    def objective(self) -> float:
        return objective(self.outcomes)

    def penalized(self, penalty: float) -> float:
        """Energy plus the violation penalty; ranks designs at unequal violation counts."""
        return self.objective + penalty * self.violations


def finish_allocations(settings: Settings, trace: EpisodeTrace,
                       rule: Optional[AllocationRule] = None, optimize: bool = True,
                       blind: bool = False,
                       update_log: Optional[Callable[[str], None]] = None) -> JointResult:
    """
    Allocate powers and frequencies over the fixed decisions of a trace.

    :param settings: Full settings
    :param trace: Rolled-out episode
    :param rule: Per-task rule used when optimize is off
    :param optimize: Run the power/capacity alternation
    :param blind: Plan with zero DT deviation
    :param update_log: Log line callback
    :return: JointResult without training
    """
    cfg = settings.scenario
    if optimize:
        allocations, outcomes, log = optimize_allocations(trace.contexts, cfg, settings.joint,
                                                          blind=blind, update_log=update_log)
    else:
        rule = rule or InitialRule()
        if blind:
            rule = DeviationBlindRule(rule)
        allocations = [rule.allocate(c, cfg) for c in trace.contexts]
        outcomes = evaluate_all(trace.contexts, allocations, cfg)
        log = ConvergenceLog()
        log.record(objective(outcomes), count_violations(trace.contexts, outcomes, cfg))
    return JointResult(trace, allocations, outcomes, log,
                       budget_report(trace.contexts, outcomes, cfg),
                       violations=count_violations(trace.contexts, outcomes, cfg))


def evaluate_fixed(settings: Settings, choose: Chooser, world: Optional[World] = None,
                   rule: Optional[AllocationRule] = None, optimize: bool = True,
                   blind: bool = False, env_rule: Optional[AllocationRule] = None,
                   update_log: Optional[Callable[[str], None]] = None) -> JointResult:
    """
    Roll out a fixed chooser under the initial allocation (P0, F0), then
    allocate over its decisions with finish_allocations.
    """
    env = OffloadingEnv(settings, rule=env_rule or InitialRule(), world=world, record=True)
    trace = rollout(env, choose)
    return finish_allocations(settings, trace, rule, optimize, blind, update_log)


def retrain_rule(rule: Optional[AllocationRule], optimize: bool, blind: bool) -> AllocationRule:
    """Rule the environment applies while the policy is retrained inside the joint loop."""
    inner = JointRule() if optimize else (rule or InitialRule())
    return DeviationBlindRule(inner) if blind else inner


def run_joint(settings: Settings, target_rule: str = "ddqn", world: Optional[World] = None,
              rule: Optional[AllocationRule] = None, optimize: bool = True,
              blind: bool = False, warm_start: Optional[QNetwork] = None,
              update_progress: Optional[Callable[[int], None]] = None,
              update_log: Optional[Callable[[str], None]] = None) -> JointResult:
    """
    Train the offloading policy under the initial allocation (P0, F0), roll it
    out on the evaluation episode and alternate powers and frequencies over its
    decisions until the fractional decrease of the objective drops below the
    threshold.

    With joint.retrain_policy the policy is warm-start retrained after each
    pass with the optimized allocation rule inside the environment; a retrained
    trace replaces the current one only when its objective is not higher.

    :param settings: Full settings
    :param target_rule: "ddqn" or "dqn"
    :param world: Static layout shared across designs
    :param rule: Per-task rule used when optimize is off
    :param optimize: Run the power/capacity alternation after the rollout
    :param blind: Plan allocations with zero DT deviation
    :param warm_start: Network to continue training from
    :param update_progress: Training progress callback (percent)
    :param update_log: Log line callback
    :return: JointResult
    """
    env = OffloadingEnv(settings, rule=InitialRule(), world=world)
    training = train(env, settings.train, target_rule, seed=settings.scenario.seed,
                     warm_start=warm_start, update_progress=update_progress,
                     update_log=update_log)
    result = evaluate_fixed(settings, learned(training.policy), env.world, rule, optimize,
                            blind, update_log=update_log)
    result.training = training

    if settings.joint.retrain_policy:
        retrain_env = OffloadingEnv(settings, rule=retrain_rule(rule, optimize, blind),
                                    world=env.world)
        retrain_cfg = settings.with_overrides(episodes=settings.joint.retrain_episodes).train
        for r in range(1, settings.joint.max_iterations + 1):
            warm = train(retrain_env, retrain_cfg, target_rule, seed=settings.scenario.seed + r,
                         warm_start=training.policy.net)
            candidate = evaluate_fixed(settings, learned(warm.policy), env.world, rule,
                                       optimize, blind, update_log=update_log)
            if candidate.objective > result.objective:
                logger.info(f"Retrain round {r} rejected: {candidate.objective:.6g} J "
                            f"> {result.objective:.6g} J")
                break
            decrease = (result.objective - candidate.objective) / result.objective \
                if result.objective > 0 else 0.0
            result.log.record(candidate.objective, candidate.violations)
            result = JointResult(candidate.trace, candidate.allocations, candidate.outcomes,
                                 result.log, candidate.budget, candidate.violations, warm)
            training = warm
            logger.info(f"Retrain round {r} accepted: objective {result.objective:.6g} J")
            if decrease < settings.joint.threshold:
                break
    return result


def convergence_frame(log: ConvergenceLog) -> pd.DataFrame:
    decreases = [float("nan")] + log.fractional_decreases
    rows = [{"iteration": i, "objective": obj, "frac_decrease": dec}
            for i, (obj, dec) in enumerate(zip(log.objectives, decreases))]
    return pd.DataFrame(rows, columns=CONVERGENCE_COLUMNS)
