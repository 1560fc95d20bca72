# src/uavmec/logic/scenario.py

import logging
from typing import List, Tuple

import numpy as np

from uavmec.models.geometry import Location
from uavmec.models.scenario import NodeProfile, Profiles, ScenarioConfig, TaskTable, World
from uavmec.utils.errors import ConfigError

logger = logging.getLogger(__name__)


def generate_tasks(cfg: ScenarioConfig, rng: np.random.Generator) -> TaskTable:
    """
    Draw one task per (MTU, slot).

    Bits are uniform in [task_bits_min, task_bits_max], cycles per bit are fixed
    and deadlines are uniform in (deadline_min, deadline_max].

    :param cfg: Scenario config
    :param rng: Random stream
    :return: TaskTable of shape (M, N)
    """
    shape = (cfg.num_mtus, cfg.num_slots)
    data_bits = rng.uniform(cfg.task_bits_min, cfg.task_bits_max, size=shape)
    cycles = np.full(shape, cfg.task_cycles_per_bit)
    # 1 - U[0,1) lies in (0, 1], keeping the upper deadline bound attainable
    u = 1.0 - rng.random(size=shape)
    deadline = cfg.deadline_min + (cfg.deadline_max - cfg.deadline_min) * u
    return TaskTable(data_bits=data_bits, cycles_per_bit=cycles, deadline=deadline)


def fhp_grid(cfg: ScenarioConfig) -> Tuple[Location, ...]:
    """Cell centers of a rows x cols grid over the region, at the UAV altitude."""
    region = cfg.region
    dx = region.width / cfg.fhp_cols
    dy = region.height / cfg.fhp_rows
    if dx < cfg.fhp_min_spacing or dy < cfg.fhp_min_spacing:
        raise ConfigError("fhp_cols", "region too small for grid")
    points = []
    for row in range(cfg.fhp_rows):
        for col in range(cfg.fhp_cols):
            points.append(Location(region.x_min + (col + 0.5) * dx,
                                   region.y_min + (row + 0.5) * dy,
                                   cfg.uav_altitude))
    return tuple(points)


def _device_locations(cfg: ScenarioConfig) -> Tuple[Location, ...]:
    if cfg.device_locations:
        if len(set(cfg.device_locations)) != len(cfg.device_locations):
            raise ConfigError("device_locations", "duplicate device coordinates")
        return tuple(Location(x, y, 0.0) for x, y in cfg.device_locations)
    # Seeded from the scenario seed alone so the layout is fixed across episodes.
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    region = cfg.region
    xs = rng.uniform(region.x_min, region.x_max, size=cfg.num_devices)
    ys = rng.uniform(region.y_min, region.y_max, size=cfg.num_devices)
    return tuple(Location(float(x), float(y), 0.0) for x, y in zip(xs, ys))


def build_world(cfg: ScenarioConfig) -> World:
    """
    Lay out devices, FHPs and the BS; a pure function of the config.

    :param cfg: Scenario config
    :return: World
    """
    world = World(
        region=cfg.region,
        devices=_device_locations(cfg),
        fhps=fhp_grid(cfg),
        bs=cfg.bs_location,
    )
    logger.debug(f"World: {len(world.devices)} devices, {len(world.fhps)} FHPs, BS at {world.bs}")
    return world


def sample_deviations(f_est: np.ndarray, cfg: ScenarioConfig,
                      rng: np.random.Generator) -> np.ndarray:
    """Per-entity DT deviations, uniform in [-d, d] or [0, d] with d = delta * f_est."""
    scale = cfg.deviation_delta * f_est
    low = -scale if cfg.deviation_mode == "symmetric" else np.zeros_like(scale)
    return rng.uniform(low, scale)


def build_profiles(cfg: ScenarioConfig, world: World, mtu_locations: List[Location],
                   rng: np.random.Generator) -> Profiles:
    """
    DT profiles for one episode. Every entity reports its full capacity as
    available (f_est = f_max) with a deviation sampled once per episode.

    :param cfg: Scenario config
    :param world: Static layout
    :param mtu_locations: MTU positions at slot 0
    :param rng: Random stream for the deviations
    :return: Profiles
    """
    M, K = cfg.num_mtus, cfg.num_devices
    f_est = np.concatenate([
        np.full(M, cfg.mtu_f_max), np.full(K, cfg.device_f_max), [cfg.uav_f_max],
    ])
    dev = sample_deviations(f_est, cfg, rng)
    mtus = tuple(
        NodeProfile(m, mtu_locations[m], cfg.mtu_f_max, float(dev[m]), cfg.mtu_f_max,
                    cfg.mtu_kappa, cfg.mtu_p_max, cfg.mtu_energy_budget)
        for m in range(M)
    )
    devices = tuple(
        NodeProfile(k, world.devices[k], cfg.device_f_max, float(dev[M + k]), cfg.device_f_max,
                    cfg.device_kappa, 0.0, cfg.device_energy_budget)
        for k in range(K)
    )
    uav = NodeProfile(0, world.fhps[cfg.initial_fhp], cfg.uav_f_max, float(dev[-1]),
                      cfg.uav_f_max, cfg.uav_kappa, cfg.uav_p_max, cfg.uav_energy_budget)
    return Profiles(mtus=mtus, devices=devices, uav=uav)
