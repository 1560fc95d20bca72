# src/uavmec/logic/capacity_alloc.py

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

from uavmec.logic.compute_model import evaluate_mode, transmit_outcome
from uavmec.models.decision import (
    Allocation, FrequencyAssignment, ModeOutcome, Placement, TaskContext,
)
from uavmec.models.scenario import ScenarioConfig
from uavmec.utils.errors import InfeasibleError

# Lower bound on an allocated frequency, as a fraction of f_max
FREQUENCY_FLOOR = 1e-3

logger = logging.getLogger(__name__)


def minimal_feasible_frequency(data_bits: float, cycles_per_bit: float, time_budget: float,
                               f_dev: float, f_max: float) -> float:
    """
    Smallest allocated frequency whose actual computing time D C / (f - f_dev)
    fits the budget. Compute energy grows with f - f_dev, so this is also the
    energy minimizer at this server.

    :param data_bits: Payload in bits
    :param cycles_per_bit: CPU cycles per bit
    :param time_budget: Time left for computing
    :param f_dev: DT deviation of the server
    :param f_max: Server frequency cap
    :return: Frequency in Hz
    :raises InfeasibleError: when the required frequency exceeds f_max
    """
    if not time_budget > 0:
        raise InfeasibleError(f"No time left for computing (budget {time_budget:.6g} s)")
    f = data_bits * cycles_per_bit / time_budget + f_dev
    if f > f_max:
        raise InfeasibleError(f"Needs {f:.6g} Hz but the server caps at {f_max:.6g} Hz")
    return max(f, FREQUENCY_FLOOR * f_max)


def transmit_time(ctx: TaskContext, alloc: Allocation, cfg: ScenarioConfig) -> float:
    """Transmission time implied by the powers for device and UAV modes."""
    placement = ctx.decision.placement
    if placement is Placement.DEVICE:
        return transmit_outcome(ctx.task.data_bits, alloc.p_device, ctx.uplink,
                                cfg.bandwidth, cfg.noise_power)[0]
    if placement is Placement.UAV:
        return transmit_outcome(ctx.task.data_bits, alloc.p_uav, ctx.uplink,
                                cfg.bandwidth, cfg.noise_power)[0]
    return 0.0


def plan_frequency(ctx: TaskContext, alloc: Allocation, cfg: ScenarioConfig) -> FrequencyAssignment:
    """
    Frequency for one task at its decided server given the transmit time its powers imply.
    Relay tasks compute at the BS and get no assignment frequency.
    """
    placement = ctx.decision.placement
    if placement is Placement.BS_RELAY:
        return FrequencyAssignment(ctx.mtu, ctx.slot, placement, 0.0, True)
    profile = ctx.mtu_profile if placement is Placement.LOCAL else ctx.server
    budget = ctx.task.deadline - transmit_time(ctx, alloc, cfg)
    try:
        f = minimal_feasible_frequency(ctx.task.data_bits, ctx.task.cycles_per_bit, budget,
                                       profile.f_dev, profile.f_max)
        return FrequencyAssignment(ctx.mtu, ctx.slot, placement, f, True)
    except InfeasibleError as e:
        logger.debug(f"Task ({ctx.mtu}, {ctx.slot}) at {ctx.decision.label()}: {e}")
        return FrequencyAssignment(ctx.mtu, ctx.slot, placement, profile.f_max, False)


def with_frequency(alloc: Allocation, assignment: FrequencyAssignment) -> Allocation:
    if assignment.placement is Placement.LOCAL:
        return replace(alloc, f_local=assignment.frequency)
    if assignment.placement is Placement.DEVICE:
        return replace(alloc, f_device=assignment.frequency)
    if assignment.placement is Placement.UAV:
        return replace(alloc, f_uav=assignment.frequency)
    return alloc


@dataclass
class BudgetReport:
    """Cumulative energy drawn per entity against its budget (constraints on E_max)."""

    usage: Dict[str, float] = field(default_factory=dict)
    budgets: Dict[str, float] = field(default_factory=dict)

    @property
    def breaches(self) -> List[str]:
        return sorted(k for k, used in self.usage.items() if used > self.budgets[k])

    def draw(self, entity: str, budget: float, energy: float) -> None:
        self.budgets.setdefault(entity, budget)
        self.usage[entity] = self.usage.get(entity, 0.0) + energy


def budget_report(contexts: Sequence[TaskContext], outcomes: Sequence[ModeOutcome],
                  cfg: ScenarioConfig, uav_budget: Optional[float] = None) -> BudgetReport:
    """
    Tally each MTU, device and UAV energy draw, including UAV idle hover while a
    task does not use it.

    :param contexts: Task contexts in TDMA order
    :param outcomes: Matching outcomes
    :param cfg: Scenario constants
    :param uav_budget: UAV budget override; cfg.uav_energy_budget by default
    :return: BudgetReport
    """
    report = BudgetReport()
    uav_budget = cfg.uav_energy_budget if uav_budget is None else uav_budget
    report.draw("uav", uav_budget, 0.0)
    for ctx, out in zip(contexts, outcomes):
        report.draw(f"mtu:{ctx.mtu}", ctx.mtu_profile.energy_budget, out.mtu_energy)
        placement = ctx.decision.placement
        if placement is Placement.DEVICE:
            report.draw(f"device:{ctx.server.id}", ctx.server.energy_budget, out.server_energy)
        elif ctx.decision.uses_uav:
            report.draw("uav", uav_budget,
                        out.server_energy + out.uav_fly_energy + out.uav_hover_energy)
        else:
            report.draw("uav", uav_budget, cfg.hover_power * cfg.slot_share)
    return report


@dataclass
class CapacityResult:
    allocations: List[Allocation]
    assignments: List[FrequencyAssignment]
    outcomes: List[ModeOutcome]
    objective: float
    budget: BudgetReport

    @property
    def infeasible(self) -> List[int]:
        return [i for i, a in enumerate(self.assignments) if not a.feasible]


def solve_capacity(contexts: Sequence[TaskContext], allocations: Sequence[Allocation],
                   cfg: ScenarioConfig) -> CapacityResult:
    """
    Frequency allocation for fixed decisions and powers.

    Tasks share no frequency variable under TDMA, so the problem decouples into
    per-task minimal feasible frequencies; budgets are checked afterwards.

    :param contexts: Task contexts (decisions fixed)
    :param allocations: Current allocations carrying the powers
    :param cfg: Scenario constants
    :return: CapacityResult with total system energy as objective
    """
    new_allocs, assignments, outcomes = [], [], []
    for ctx, alloc in zip(contexts, allocations):
        assignment = plan_frequency(ctx, alloc, cfg)
        new_alloc = with_frequency(alloc, assignment)
        assignments.append(assignment)
        new_allocs.append(new_alloc)
        outcomes.append(evaluate_mode(ctx, new_alloc, cfg))
    objective = sum(o.total_energy for o in outcomes)
    report = budget_report(contexts, outcomes, cfg)
    for entity in report.breaches:
        logger.info(f"Energy budget exceeded for {entity}: "
                    f"{report.usage[entity]:.6g} J > {report.budgets[entity]:.6g} J")
    return CapacityResult(new_allocs, assignments, outcomes, objective, report)
