# src/uavmec/logic/power_alloc.py

import logging
import math

import numpy as np

from uavmec.logic.compute_model import actual_compute_time
from uavmec.logic.radio import rates
from uavmec.models.decision import LinkBudget, PowerSolution
from uavmec.models.scenario import TaskSpec
from uavmec.utils.errors import InfeasibleError

# Beyond this the SNR threshold 2^x - 1 overflows a double.
MAX_EXPONENT = 1024.0
GRID_POINTS = 1000

logger = logging.getLogger(__name__)


def snr_threshold(data_bits: float, bandwidth: float, time_budget: float) -> float:
    """
    xi = 2^(D / (B T)) - 1, the SNR that pushes D bits through in exactly T seconds.

    :raises InfeasibleError: when the budget is non-positive or the exponent overflows
    """
    if not time_budget > 0:
        raise InfeasibleError(f"No time left for transmission (budget {time_budget:.6g} s)")
    exponent = data_bits / (bandwidth * time_budget)
    if exponent > MAX_EXPONENT:
        raise InfeasibleError(f"SNR exponent {exponent:.6g} exceeds {MAX_EXPONENT}")
    return math.expm1(exponent * math.log(2.0))


def power_for_budget(data_bits: float, time_budget: float, gain: float, bandwidth: float,
                     noise: float, p_max: float) -> PowerSolution:
    """
    Smallest power that meets a transmission-time budget, clamped at p_max.

    Transmission energy is nondecreasing in power, so the deadline binds at the optimum.
    """
    xi = snr_threshold(data_bits, bandwidth, time_budget)
    p = xi * noise / gain
    if p > p_max:
        return PowerSolution(p_star=p_max, capped=True, xi=xi)
    return PowerSolution(p_star=p, capped=False, xi=xi)


def optimal_power_device(task: TaskSpec, link: LinkBudget, f_est: float, f_dev: float,
                         bandwidth: float, noise: float, p_max: float) -> PowerSolution:
    """
    Closed-form MTU-to-device power given the device's allocated frequency.

    :param task: The task
    :param link: MTU-to-device link
    :param f_est: Frequency allocated at the device (DT estimate)
    :param f_dev: DT deviation of the device
    :param bandwidth: Bandwidth in Hz
    :param noise: Noise power in W
    :param p_max: MTU power cap
    :return: PowerSolution
    """
    t_rem = task.deadline - actual_compute_time(task.data_bits, task.cycles_per_bit, f_est, f_dev)
    return power_for_budget(task.data_bits, t_rem, link.gain, bandwidth, noise, p_max)


def optimal_power_uav(task: TaskSpec, link: LinkBudget, f_est: float, f_dev: float,
                      bandwidth: float, noise: float, p_max: float) -> PowerSolution:
    """Closed-form MTU-to-UAV power given the UAV's allocated frequency."""
    t_rem = task.deadline - actual_compute_time(task.data_bits, task.cycles_per_bit, f_est, f_dev)
    return power_for_budget(task.data_bits, t_rem, link.gain, bandwidth, noise, p_max)


def optimal_power_bs(task: TaskSpec, first_hop_time: float, link: LinkBudget,
                     bandwidth: float, noise: float, p_max_uav: float) -> PowerSolution:
    """Closed-form UAV-to-BS relay power given the MTU-to-UAV hop duration."""
    return power_for_budget(task.data_bits, task.deadline - first_hop_time, link.gain,
                            bandwidth, noise, p_max_uav)


def transmission_energy(data_bits: float, p: np.ndarray, gain: float, bandwidth: float,
                        noise: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(p > 0, p * data_bits / rates(p, gain, bandwidth, noise), 0.0)


def verify_optimality(solution: PowerSolution, data_bits: float, time_budget: float, gain: float,
                      bandwidth: float, noise: float, p_max: float,
                      grid_points: int = GRID_POINTS) -> bool:
    """
    Brute-force check that no deadline-feasible grid power beats p* on energy.

    :param solution: Closed-form solution to check
    :param data_bits: Payload in bits
    :param time_budget: Time available for the transmission
    :param gain: Link gain
    :param bandwidth: Bandwidth in Hz
    :param noise: Noise power in W
    :param p_max: Power cap bounding the grid
    :param grid_points: Grid resolution
    :return: True when p* is optimal on the grid (vacuously when nothing is feasible)
    """
    grid = np.linspace(p_max / grid_points, p_max, grid_points)
    times = data_bits / rates(grid, gain, bandwidth, noise)
    feasible = times <= time_budget * (1.0 + 1e-12)
    if not feasible.any():
        return True
    best = transmission_energy(data_bits, grid[feasible], gain, bandwidth, noise).min()
    at_star = float(transmission_energy(data_bits, np.array([solution.p_star]), gain,
                                        bandwidth, noise)[0])
    ok = at_star <= best * (1.0 + 1e-9)
    if not ok:
        logger.error(f"p*={solution.p_star:.6g} W uses {at_star:.6g} J but grid reaches {best:.6g} J")
    return ok
