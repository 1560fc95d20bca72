# src/uavmec/logic/allocation.py

import logging
import math
from dataclasses import replace
from typing import Callable, Tuple

from scipy.optimize import minimize_scalar

from uavmec.logic.capacity_alloc import minimal_feasible_frequency
from uavmec.logic.compute_model import evaluate_mode, transmit_outcome
from uavmec.logic.power_alloc import (
    optimal_power_bs, optimal_power_device, optimal_power_uav, power_for_budget,
)
from uavmec.logic.radio import rate
from uavmec.models.decision import Allocation, Placement, TaskContext
from uavmec.models.scenario import ScenarioConfig
from uavmec.utils.errors import InfeasibleError

logger = logging.getLogger(__name__)


def _uplink_field(ctx: TaskContext) -> str:
    return "p_device" if ctx.decision.placement is Placement.DEVICE else "p_uav"


def _frequency_field(ctx: TaskContext) -> str:
    return {
        Placement.LOCAL: "f_local",
        Placement.DEVICE: "f_device",
        Placement.UAV: "f_uav",
    }[ctx.decision.placement]


def capped_allocation(ctx: TaskContext) -> Allocation:
    """Every power and frequency of the task's mode at its cap."""
    placement = ctx.decision.placement
    if placement is Placement.LOCAL:
        return Allocation(f_local=ctx.mtu_profile.f_max)
    if placement is Placement.BS_RELAY:
        return Allocation(p_uav=ctx.uplink_p_max, p_bs=ctx.backhaul_p_max)
    return Allocation(**{_uplink_field(ctx): ctx.uplink_p_max,
                         _frequency_field(ctx): ctx.server.f_max})


def initial_allocation(ctx: TaskContext, cfg: ScenarioConfig) -> Allocation:
    """
    Starting point of the joint loop: half the power cap and full frequency,
    raised to the power cap when half power misses the deadline.
    """
    full = capped_allocation(ctx)
    if ctx.decision.placement is Placement.LOCAL:
        return full
    half = Allocation(
        p_device=full.p_device / 2, p_uav=full.p_uav / 2, p_bs=full.p_bs / 2,
        f_local=full.f_local, f_device=full.f_device, f_uav=full.f_uav,
    )
    if evaluate_mode(ctx, half, cfg).meets(ctx.task.deadline):
        return half
    return full


def plan_powers(ctx: TaskContext, alloc: Allocation, cfg: ScenarioConfig) -> Allocation:
    """
    Closed-form powers for the frequencies already in alloc.

    :param ctx: Task context
    :param alloc: Allocation whose frequencies (and relay first-hop power) are kept
    :param cfg: Scenario constants
    :return: Allocation with updated powers; capped when the deadline cannot be met
    """
    task = ctx.task
    placement = ctx.decision.placement
    try:
        if placement is Placement.DEVICE:
            sol = optimal_power_device(task, ctx.uplink, alloc.f_device, ctx.server.f_dev,
                                       cfg.bandwidth, cfg.noise_power, ctx.uplink_p_max)
            return replace(alloc, p_device=sol.p_star)
        if placement is Placement.UAV:
            sol = optimal_power_uav(task, ctx.uplink, alloc.f_uav, ctx.server.f_dev,
                                    cfg.bandwidth, cfg.noise_power, ctx.uplink_p_max)
            return replace(alloc, p_uav=sol.p_star)
        if placement is Placement.BS_RELAY:
            first_hop, _ = transmit_outcome(task.data_bits, alloc.p_uav, ctx.uplink,
                                            cfg.bandwidth, cfg.noise_power)
            sol = optimal_power_bs(task, first_hop, ctx.backhaul, cfg.bandwidth,
                                   cfg.noise_power, ctx.backhaul_p_max)
            return replace(alloc, p_bs=sol.p_star)
    except InfeasibleError as e:
        logger.debug(f"Task ({ctx.mtu}, {ctx.slot}) power capped: {e}")
        if placement is Placement.BS_RELAY:
            return replace(alloc, p_bs=ctx.backhaul_p_max)
        return replace(alloc, **{_uplink_field(ctx): ctx.uplink_p_max})
    return alloc


def _transmission_energy_for_time(data_bits: float, t: float, gain: float,
                                  cfg: ScenarioConfig) -> float:
    xi = math.expm1(data_bits / (cfg.bandwidth * t) * math.log(2.0))
    return t * xi * cfg.noise_power / gain


def _minimize_split(energy: Callable[[float], float], lo: float, hi: float,
                    deadline: float) -> float:
    if hi - lo <= 1e-12 * deadline:
        return lo
    res = minimize_scalar(energy, bounds=(lo, hi), method='bounded',
                          options={'xatol': 1e-10 * deadline})
    candidates = [lo, hi, float(res.x)]
    return min(candidates, key=energy)


def _split_bounds(ctx: TaskContext, cfg: ScenarioConfig) -> Tuple[float, float]:
    D = ctx.task.data_bits
    lo = D / rate(ctx.uplink_p_max, ctx.uplink.gain, cfg.bandwidth, cfg.noise_power)
    if ctx.decision.placement is Placement.BS_RELAY:
        rest = D / rate(ctx.backhaul_p_max, ctx.backhaul.gain, cfg.bandwidth, cfg.noise_power)
    else:
        server = ctx.server
        rest = ctx.task.cycles / (server.f_max - server.f_dev)
    return lo, ctx.task.deadline - rest


def balance_split(ctx: TaskContext, cfg: ScenarioConfig) -> Allocation:
    """
    Energy-optimal allocation for one task: split its deadline between the
    transmission and computing segments (or the two relay hops), then apply
    the closed-form power and the minimal feasible frequency to each segment.

    Both segment energies are convex and decreasing in their own duration, so the
    split is a bounded one-dimensional convex problem.

    :param ctx: Task context
    :param cfg: Scenario constants
    :return: Allocation; capped when no split meets the deadline
    """
    task = ctx.task
    placement = ctx.decision.placement
    if placement is Placement.LOCAL:
        try:
            f = minimal_feasible_frequency(task.data_bits, task.cycles_per_bit, task.deadline,
                                           ctx.mtu_profile.f_dev, ctx.mtu_profile.f_max)
            return Allocation(f_local=f)
        except InfeasibleError:
            return capped_allocation(ctx)

    lo, hi = _split_bounds(ctx, cfg)
    if lo > hi:
        return capped_allocation(ctx)
    D, T = task.data_bits, task.deadline

    if placement is Placement.BS_RELAY:
        def relay_energy(t1: float) -> float:
            return (_transmission_energy_for_time(D, t1, ctx.uplink.gain, cfg)
                    + _transmission_energy_for_time(D, T - t1, ctx.backhaul.gain, cfg))

        t1 = _minimize_split(relay_energy, lo, hi, T)
        p_uav = power_for_budget(D, t1, ctx.uplink.gain, cfg.bandwidth, cfg.noise_power,
                                 ctx.uplink_p_max).p_star
        alloc = Allocation(p_uav=p_uav, p_bs=ctx.backhaul_p_max)
        return plan_powers(ctx, alloc, cfg)

    server = ctx.server

    def offload_energy(t: float) -> float:
        actual = task.cycles / (T - t)
        return (_transmission_energy_for_time(D, t, ctx.uplink.gain, cfg)
                + server.kappa * actual * actual * task.cycles)

    t = _minimize_split(offload_energy, lo, hi, T)
    p = power_for_budget(D, t, ctx.uplink.gain, cfg.bandwidth, cfg.noise_power,
                         ctx.uplink_p_max).p_star
    t_tx, _ = transmit_outcome(D, p, ctx.uplink, cfg.bandwidth, cfg.noise_power)
    try:
        f = minimal_feasible_frequency(D, task.cycles_per_bit, T - t_tx, server.f_dev, server.f_max)
    except InfeasibleError:
        f = server.f_max
    return Allocation(**{_uplink_field(ctx): p, _frequency_field(ctx): f})


def without_deviation(ctx: TaskContext) -> TaskContext:
    server = replace(ctx.server, f_dev=0.0) if ctx.server is not None else None
    return replace(ctx, mtu_profile=replace(ctx.mtu_profile, f_dev=0.0), server=server)


class AllocationRule:
    """Maps a task context to powers and frequencies while the environment runs."""

    name = "base"

    def allocate(self, ctx: TaskContext, cfg: ScenarioConfig) -> Allocation:
        raise NotImplementedError


class InitialRule(AllocationRule):
    name = "initial"

    def allocate(self, ctx: TaskContext, cfg: ScenarioConfig) -> Allocation:
        return initial_allocation(ctx, cfg)


class JointRule(AllocationRule):
    name = "joint"

    def allocate(self, ctx: TaskContext, cfg: ScenarioConfig) -> Allocation:
        return balance_split(ctx, cfg)


class PinnedFrequencyRule(AllocationRule):
    """Frequencies stay at f_max; powers follow the closed forms."""

    name = "pinned"

    def allocate(self, ctx: TaskContext, cfg: ScenarioConfig) -> Allocation:
        if ctx.decision.placement is Placement.BS_RELAY:
            return balance_split(ctx, cfg)
        return plan_powers(ctx, capped_allocation(ctx), cfg)


class DeviationBlindRule(AllocationRule):
    """Plans as if every DT deviation were zero; outcomes still use the true ones."""

    def __init__(self, inner: AllocationRule):
        self.inner = inner
        self.name = f"blind-{inner.name}"

    def allocate(self, ctx: TaskContext, cfg: ScenarioConfig) -> Allocation:
        return self.inner.allocate(without_deviation(ctx), cfg)
