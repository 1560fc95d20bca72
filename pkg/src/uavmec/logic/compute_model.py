# src/uavmec/logic/compute_model.py

from typing import Iterable, Optional, Tuple

from uavmec.logic.radio import horizontal_distance, rate
from uavmec.models.decision import Allocation, LinkBudget, ModeOutcome, Placement, TaskContext
from uavmec.models.geometry import Location
from uavmec.models.scenario import ScenarioConfig


def estimated_time(data_bits: float, cycles_per_bit: float, f_est: float) -> float:
    """DT-estimated computing time D C / f."""
    if not f_est > 0:
        raise ValueError(f"Estimated frequency must be positive, got {f_est}")
    return data_bits * cycles_per_bit / f_est


def latency_gap(data_bits: float, cycles_per_bit: float, f_est: float, f_dev: float) -> float:
    """
    Gap between actual and estimated computing time caused by the DT deviation.
    Negative when the twin underestimates the available frequency (f_dev < 0).
    """
    if not f_est - f_dev > 0:
        raise ValueError(f"Actual frequency f_est - f_dev = {f_est - f_dev} must be positive")
    return data_bits * cycles_per_bit * f_dev / (f_est * (f_est - f_dev))


def actual_compute_time(data_bits: float, cycles_per_bit: float, f_est: float, f_dev: float) -> float:
    return estimated_time(data_bits, cycles_per_bit, f_est) + latency_gap(
        data_bits, cycles_per_bit, f_est, f_dev
    )


def compute_energy(data_bits: float, cycles_per_bit: float, f_est: float, f_dev: float,
                   kappa: float) -> float:
    actual = f_est - f_dev
    return kappa * actual * actual * cycles_per_bit * data_bits


def transmit_outcome(data_bits: float, p: float, link: LinkBudget, bandwidth: float,
                     noise: float) -> Tuple[float, float]:
    """
    Transmission time and energy of pushing D bits over a link.

    :param data_bits: Payload in bits
    :param p: Transmit power in W
    :param link: Link distance and gain
    :param bandwidth: Bandwidth in Hz
    :param noise: Noise power in W
    :return: (time in s, energy in J)
    """
    if not p > 0:
        raise ValueError("Zero transmit power gives an infinite transmission time")
    time = data_bits / rate(p, link.gain, bandwidth, noise)
    return time, p * time


def uav_fly_energy(prev: Location, nxt: Location, fly_power: float, speed: float) -> float:
    return fly_power * horizontal_distance(prev, nxt) / speed


def uav_hover_energy(times: Iterable[float], hover_power: float) -> float:
    return hover_power * sum(times)


def _fly(ctx: TaskContext, cfg: ScenarioConfig) -> float:
    if ctx.fly_from is None or ctx.fly_to is None:
        return 0.0
    return uav_fly_energy(ctx.fly_from, ctx.fly_to, cfg.fly_power, cfg.uav_speed)


def _require_link(link: Optional[LinkBudget], ctx: TaskContext) -> LinkBudget:
    if link is None:
        raise ValueError(f"Task ({ctx.mtu}, {ctx.slot}) decided {ctx.decision.label()} without a link")
    return link


def evaluate_mode(ctx: TaskContext, alloc: Allocation, cfg: ScenarioConfig) -> ModeOutcome:
    """
    Latency chain and energy breakdown of one task under its decision and allocation.

    :param ctx: Task, decision, profiles and links
    :param alloc: Powers and frequencies
    :param cfg: Scenario physical constants
    :return: ModeOutcome with every component filled in
    """
    task = ctx.task
    D, C = task.data_bits, task.cycles_per_bit
    placement = ctx.decision.placement

    if placement is Placement.LOCAL:
        mtu = ctx.mtu_profile
        t = actual_compute_time(D, C, alloc.f_local, mtu.f_dev)
        e = compute_energy(D, C, alloc.f_local, mtu.f_dev, mtu.kappa)
        return ModeOutcome(compute_time=t, total_latency=t, mtu_energy=e, total_energy=e)

    if placement is Placement.DEVICE:
        server = ctx.server
        t_tx, e_tx = transmit_outcome(D, alloc.p_device, _require_link(ctx.uplink, ctx),
                                      cfg.bandwidth, cfg.noise_power)
        t_c = actual_compute_time(D, C, alloc.f_device, server.f_dev)
        e_c = compute_energy(D, C, alloc.f_device, server.f_dev, server.kappa)
        return ModeOutcome(
            transmit_time=t_tx, compute_time=t_c, total_latency=t_tx + t_c,
            mtu_energy=e_tx, server_energy=e_c, total_energy=e_tx + e_c,
        )

    fly = _fly(ctx, cfg)
    if placement is Placement.UAV:
        uav = ctx.server
        t_tx, e_tx = transmit_outcome(D, alloc.p_uav, _require_link(ctx.uplink, ctx),
                                      cfg.bandwidth, cfg.noise_power)
        t_c = actual_compute_time(D, C, alloc.f_uav, uav.f_dev)
        e_c = compute_energy(D, C, alloc.f_uav, uav.f_dev, uav.kappa)
        hover = uav_hover_energy((t_tx, t_c), cfg.hover_power)
        return ModeOutcome(
            transmit_time=t_tx, compute_time=t_c, total_latency=t_tx + t_c,
            mtu_energy=e_tx, server_energy=e_c, uav_fly_energy=fly, uav_hover_energy=hover,
            total_energy=e_tx + e_c + fly + hover,
        )

    # BS relay: BS computing is external, only the two hops, hover and fly count
    t1, e1 = transmit_outcome(D, alloc.p_uav, _require_link(ctx.uplink, ctx),
                              cfg.bandwidth, cfg.noise_power)
    t2, e2 = transmit_outcome(D, alloc.p_bs, _require_link(ctx.backhaul, ctx),
                              cfg.bandwidth, cfg.noise_power)
    hover = uav_hover_energy((t1, t2), cfg.hover_power)
    return ModeOutcome(
        transmit_time=t1 + t2, total_latency=t1 + t2,
        mtu_energy=e1, server_energy=e2, uav_fly_energy=fly, uav_hover_energy=hover,
        total_energy=e1 + e2 + fly + hover,
    )
