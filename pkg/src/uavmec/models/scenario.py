# src/uavmec/models/scenario.py

import math
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from uavmec.models.geometry import Location, Region

DEVIATION_MODES = ("symmetric", "positive")
UAV_MOVEMENTS = ("sequential", "single")


@dataclass(frozen=True)
class TaskSpec:
    """One computation task U_m[n]."""

    data_bits: float
    cycles_per_bit: float
    deadline: float

    def __post_init__(self) -> None:
        for name in ("data_bits", "cycles_per_bit", "deadline"):
            if not getattr(self, name) > 0:
                raise ValueError(f"TaskSpec.{name} must be strictly positive")

    @property
    def cycles(self) -> float:
        return self.data_bits * self.cycles_per_bit


@dataclass(frozen=True)
class NodeProfile:
    """
    An MTU, resource device or the UAV as mirrored by its digital twin.

    f_est is the DT-estimated available CPU frequency and f_dev the signed
    deviation between estimate and reality; the actual frequency is f_est - f_dev.
    """

    id: int
    location: Location
    f_est: float
    f_dev: float
    f_max: float
    kappa: float
    p_max: float
    energy_budget: float

    def __post_init__(self) -> None:
        if not self.f_est - self.f_dev > 0:
            raise ValueError(f"node {self.id}: actual frequency f_est - f_dev must be positive")
        if not 0 <= self.f_est <= self.f_max:
            raise ValueError(f"node {self.id}: f_est must lie in [0, f_max]")
        if not self.kappa > 0:
            raise ValueError(f"node {self.id}: kappa must be positive")
        if not self.energy_budget > 0:
            raise ValueError(f"node {self.id}: energy_budget must be positive")

    @property
    def f_actual(self) -> float:
        return self.f_est - self.f_dev


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 42
    num_mtus: int = 6
    num_devices: int = 10
    fhp_rows: int = 3
    fhp_cols: int = 5
    num_slots: int = 100
    slot_length: float = 3.0
    uav_altitude: float = 500.0
    bandwidth: float = 100e6
    noise_power: float = 1e-11
    beta0: float = 1e-3
    fly_power: float = 0.11
    hover_power: float = 0.08
    uav_speed: float = 20.0
    region_x_min: float = 0.0
    region_x_max: float = 1000.0
    region_y_min: float = 0.0
    region_y_max: float = 1000.0
    fhp_min_spacing: float = 1.0
    bs_x: float = 1100.0
    bs_y: float = 500.0
    initial_fhp: int = 0
    device_locations: Tuple[Tuple[float, float], ...] = ()
    task_bits_min: float = 50e6
    task_bits_max: float = 150e6
    task_cycles_per_bit: float = 10.0
    deadline_min: float = 0.25
    deadline_max: float = 0.5
    mtu_f_max: float = 6e9
    device_f_max: float = 8e9
    uav_f_max: float = 10e9
    mtu_kappa: float = 1e-28
    device_kappa: float = 1e-28
    uav_kappa: float = 1e-26
    mtu_p_max: float = 0.2
    mtu_p_max_uav: float = 0.2
    uav_p_max: float = 1.0
    mtu_energy_budget: float = 1000.0
    device_energy_budget: float = 2000.0
    uav_energy_budget: float = 5000.0
    deviation_delta: float = 0.1
    deviation_mode: str = "symmetric"
    uav_movement: str = "sequential"

    @property
    def num_fhps(self) -> int:
        return self.fhp_rows * self.fhp_cols

    @property
    def slot_share(self) -> float:
        """Equal TDMA share t_m[n] = tau / M."""
        return self.slot_length / self.num_mtus

    @property
    def region(self) -> Region:
        return Region(self.region_x_min, self.region_x_max, self.region_y_min, self.region_y_max)

    @property
    def bs_location(self) -> Location:
        return Location(self.bs_x, self.bs_y, 0.0)

    @property
    def action_count(self) -> int:
        return self.num_devices + self.num_fhps + 2


@dataclass(frozen=True)
class MobilityConfig:
    mu1: float = 0.99
    mu2: float = 0.95
    mean_speed: float = 2.0
    mean_directions: Tuple[float, ...] = ()
    speed_noise_mean: float = 0.0
    speed_noise_std: float = 0.5
    direction_noise_mean: float = 0.0
    direction_noise_std: float = 0.2
    literal_eq7: bool = False

    def mean_direction(self, mtu: int, num_mtus: int) -> float:
        # Spread evenly over the circle when no per-MTU direction is configured.
        if self.mean_directions:
            return self.mean_directions[mtu % len(self.mean_directions)]
        return -math.pi + 2.0 * math.pi * (mtu + 0.5) / num_mtus


@dataclass(frozen=True)
class MtuKinematics:
    location: Location
    v: float
    theta: float


@dataclass(frozen=True)
class TaskTable:
    """Task parameters indexed by (mtu, slot)."""

    data_bits: np.ndarray
    cycles_per_bit: np.ndarray
    deadline: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data_bits.shape

    def task(self, m: int, n: int) -> TaskSpec:
        return TaskSpec(
            float(self.data_bits[m, n]),
            float(self.cycles_per_bit[m, n]),
            float(self.deadline[m, n]),
        )


@dataclass(frozen=True)
class World:
    region: Region
    devices: Tuple[Location, ...]
    fhps: Tuple[Location, ...]
    bs: Location


@dataclass(frozen=True)
class Profiles:
    """Per-episode DT mirror of every computing entity."""

    mtus: Tuple[NodeProfile, ...]
    devices: Tuple[NodeProfile, ...]
    uav: NodeProfile

    def without_deviation(self) -> "Profiles":
        return Profiles(
            mtus=tuple(replace(p, f_dev=0.0) for p in self.mtus),
            devices=tuple(replace(p, f_dev=0.0) for p in self.devices),
            uav=replace(self.uav, f_dev=0.0),
        )
