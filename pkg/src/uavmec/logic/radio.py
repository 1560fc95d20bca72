# src/uavmec/logic/radio.py

import math

import numpy as np

from uavmec.models.decision import LinkBudget
from uavmec.models.geometry import Location

# beta0 is the gain at the 1 m reference distance
MIN_DISTANCE = 1.0


def distance(a: Location, b: Location) -> float:
    """
    Euclidean distance in 3-D.

    :param a: First location
    :param b: Second location
    :return: Distance in meters
    """
    d = math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)
    if d == 0.0:
        raise ValueError(f"Zero distance between {a} and {b}: channel gain is singular")
    return d


def horizontal_distance(a: Location, b: Location) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def channel_gain(d: float, beta0: float) -> float:
    """Free-space LoS power gain beta0 * d^-2 with a 1 m floor."""
    if not d > 0:
        raise ValueError(f"Distance must be positive, got {d}")
    d = max(d, MIN_DISTANCE)
    return beta0 / (d * d)


def rate(p: float, gain: float, bandwidth: float, noise: float) -> float:
    """
    Shannon rate B log2(1 + p g / sigma^2).

    :param p: Transmit power in W
    :param gain: Linear channel power gain
    :param bandwidth: Bandwidth in Hz
    :param noise: Noise power in W
    :return: Rate in bit/s
    """
    if p < 0:
        raise ValueError(f"Transmit power must be non-negative, got {p}")
    return bandwidth * math.log1p(p * gain / noise) / math.log(2.0)


def rates(p: np.ndarray, gain: float, bandwidth: float, noise: float) -> np.ndarray:
    """Vectorized rate() over a power grid."""
    return bandwidth * np.log1p(np.asarray(p, dtype=float) * gain / noise) / np.log(2.0)


def link_budget(a: Location, b: Location, beta0: float) -> LinkBudget:
    d = distance(a, b)
    return LinkBudget(distance=d, gain=channel_gain(d, beta0))


def uav_bs_gain(fhp: Location, bs: Location, beta0: float) -> float:
    # Same inverse-square LoS law as the ground and air-to-ground links.
    return channel_gain(distance(fhp, bs), beta0)
