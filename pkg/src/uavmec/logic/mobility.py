# src/uavmec/logic/mobility.py

import math
from typing import List

import numpy as np
import pandas as pd

from uavmec.models.geometry import Location, Region
from uavmec.models.scenario import MobilityConfig, MtuKinematics


def wrap_angle(theta: float) -> float:
    """Wrap into (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


def reflect(value: float, lo: float, hi: float) -> float:
    """Mirror a coordinate back into [lo, hi], folding as many times as needed."""
    width = hi - lo
    u = (value - lo) % (2.0 * width)
    return lo + (u if u <= width else 2.0 * width - u)


def step_velocity(prev_v: float, cfg: MobilityConfig, rng: np.random.Generator) -> float:
    """
    Gauss-Markov speed update, clamped at zero.

    :param prev_v: Speed in the previous slot
    :param cfg: Mobility parameters
    :param rng: Random stream
    :return: New speed in m/s
    """
    mu = cfg.mu1
    noise = rng.normal(cfg.speed_noise_mean, cfg.speed_noise_std)
    v = mu * prev_v + (1.0 - mu) * cfg.mean_speed + math.sqrt(1.0 - mu * mu) * noise
    return max(v, 0.0)


def step_direction(prev_theta: float, mean_theta: float, cfg: MobilityConfig,
                   rng: np.random.Generator, prev_v: float = 0.0) -> float:
    """
    Gauss-Markov heading update. With literal_eq7 the memory term multiplies the
    previous speed instead of the previous heading.
    """
    mu = cfg.mu2
    noise = rng.normal(cfg.direction_noise_mean, cfg.direction_noise_std)
    memory = prev_v if cfg.literal_eq7 else prev_theta
    theta = mu * memory + (1.0 - mu) * mean_theta + math.sqrt(1.0 - mu * mu) * noise
    return wrap_angle(theta)


def update_position(kin: MtuKinematics, t: float, region: Region) -> Location:
    if not t > 0:
        raise ValueError(f"Step duration must be positive, got {t}")
    x = kin.location.x + kin.v * math.cos(kin.theta) * t
    y = kin.location.y + kin.v * math.sin(kin.theta) * t
    return Location(reflect(x, region.x_min, region.x_max),
                    reflect(y, region.y_min, region.y_max), 0.0)


def simulate(initial: List[MtuKinematics], cfg: MobilityConfig, region: Region, steps: int,
             t: float, rng: np.random.Generator) -> List[List[MtuKinematics]]:
    """
    Advance every MTU for a number of slots.

    :param initial: Kinematics at slot 0
    :param cfg: Mobility parameters
    :param region: Movement region
    :param steps: Number of slots to produce (including slot 0)
    :param t: Per-MTU TDMA share used as the displacement duration
    :param rng: Random stream
    :return: trace[n][m]
    """
    num = len(initial)
    trace = [list(initial)]
    for _ in range(1, steps):
        prev = trace[-1]
        nxt = []
        for m in range(num):
            kin = prev[m]
            mean_theta = cfg.mean_direction(m, num)
            nxt.append(MtuKinematics(
                location=update_position(kin, t, region),
                v=step_velocity(kin.v, cfg, rng),
                theta=step_direction(kin.theta, mean_theta, cfg, rng, prev_v=kin.v),
            ))
        trace.append(nxt)
    return trace


def initial_kinematics(num_mtus: int, cfg: MobilityConfig, region: Region,
                       rng: np.random.Generator) -> List[MtuKinematics]:
    """MTUs start uniformly in the region at the mean speed and their mean heading."""
    xs = rng.uniform(region.x_min, region.x_max, size=num_mtus)
    ys = rng.uniform(region.y_min, region.y_max, size=num_mtus)
    return [
        MtuKinematics(Location(float(xs[m]), float(ys[m]), 0.0), cfg.mean_speed,
                      cfg.mean_direction(m, num_mtus))
        for m in range(num_mtus)
    ]


def trajectory_frame(trace: List[List[MtuKinematics]]) -> pd.DataFrame:
    rows = [
        {"slot": n, "mtu": m, "x": k.location.x, "y": k.location.y, "v": k.v, "theta": k.theta}
        for n, slot in enumerate(trace) for m, k in enumerate(slot)
    ]
    return pd.DataFrame(rows, columns=["slot", "mtu", "x", "y", "v", "theta"])
