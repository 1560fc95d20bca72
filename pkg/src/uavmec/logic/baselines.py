# src/uavmec/logic/baselines.py

import logging
from typing import Callable, Dict, List, Optional

from uavmec.logic.allocation import PinnedFrequencyRule
from uavmec.logic.ddqn import QNetwork
from uavmec.logic.environment import OffloadingEnv
from uavmec.logic.joint_optimizer import JointResult, evaluate_fixed, run_joint
from uavmec.logic.radio import horizontal_distance
from uavmec.logic.scenario import build_world
from uavmec.models.decision import OffloadDecision, Placement
from uavmec.models.scenario import World
from uavmec.models.training import DesignId, Settings

METRIC_COLUMNS = ["design", "seed", "total_energy", "mtu_energy", "uav_energy", "violations"]
# Energy plus penalty x violations; designs are ranked on it
SCORE_COLUMNS = ["penalized_energy"]
BREAKDOWN_COLUMNS = ["device_energy", "transmit_energy", "compute_energy", "fly_energy",
                     "hover_energy"]

logger = logging.getLogger(__name__)


def local_actions(env: OffloadingEnv) -> List[int]:
    return [0] * env.cfg.num_mtus


def nearest_device(env: OffloadingEnv, mtu: int) -> int:
    """Closest resource device to the MTU; the lowest index wins a tie."""
    here = env.state.mtus[mtu].location
    distances = [horizontal_distance(here, d) for d in env.world.devices]
    return min(range(len(distances)), key=lambda k: (distances[k], k))


def nearest_device_actions(env: OffloadingEnv) -> List[int]:
    K = env.cfg.num_devices
    return [OffloadDecision(Placement.DEVICE, nearest_device(env, m)).to_index(K)
            for m in range(env.cfg.num_mtus)]


def metrics(result: JointResult, design: DesignId, seed: int,
            penalty: float = 0.0) -> Dict[str, float]:
    """
    Energy totals and breakdown of one design run.

    uav_energy counts what the UAV spends while serving tasks (computing or
    relaying, flying, hovering); idle hover only draws on its budget.

    :param penalty: Weight of one violation in penalized_energy
    """
    mtu = device = uav = transmit = compute = fly = hover = 0.0
    for ctx, out in zip(result.trace.contexts, result.outcomes):
        placement = ctx.decision.placement
        mtu += out.mtu_energy
        fly += out.uav_fly_energy
        hover += out.uav_hover_energy
        if placement is Placement.LOCAL:
            compute += out.mtu_energy
            continue
        transmit += out.mtu_energy
        if placement is Placement.DEVICE:
            device += out.server_energy
            compute += out.server_energy
        else:
            uav += out.server_energy + out.uav_fly_energy + out.uav_hover_energy
            if placement is Placement.BS_RELAY:
                transmit += out.server_energy
            else:
                compute += out.server_energy
    return {
        "design": design.value,
        "seed": seed,
        "total_energy": result.objective,
        "mtu_energy": mtu,
        "uav_energy": uav,
        "violations": result.violations,
        "penalized_energy": result.penalized(penalty),
        "device_energy": device,
        "transmit_energy": transmit,
        "compute_energy": compute,
        "fly_energy": fly,
        "hover_energy": hover,
    }


def run_design(design: DesignId, settings: Settings, world: Optional[World] = None,
               warm_start: Optional[QNetwork] = None,
               update_progress: Optional[Callable[[int], None]] = None,
               update_log: Optional[Callable[[str], None]] = None) -> JointResult:
    """
    Run one benchmark design on the scenario of settings.

    Every design evaluates the same episode (tasks, mobility and deviations),
    so results are paired across designs for a given seed. The ddqn designs
    share one training run under the initial allocation and differ only in
    how powers and frequencies are set over the learned decisions.

    :param design: Which design
    :param settings: Full settings
    :param world: Static layout; built from the config when omitted
    :param warm_start: Network the learned designs continue training from
    :param update_progress: Training progress callback (percent)
    :param update_log: Log line callback
    :return: JointResult
    """
    world = world or build_world(settings.scenario)
    logger.info(f"Running design '{design.value}' with seed {settings.scenario.seed}")
    learned_kwargs = dict(world=world, warm_start=warm_start,
                          update_progress=update_progress, update_log=update_log)
    if design is DesignId.PROPOSED:
        return run_joint(settings, "ddqn", **learned_kwargs)
    if design is DesignId.DQN:
        return run_joint(settings, "dqn", **learned_kwargs)
    if design is DesignId.NO_F_OPT:
        return run_joint(settings, "ddqn", rule=PinnedFrequencyRule(), optimize=False,
                         **learned_kwargs)
    if design is DesignId.NO_DT:
        return run_joint(settings, "ddqn", blind=True, **learned_kwargs)
    if design is DesignId.LOCAL_ONLY:
        return evaluate_fixed(settings, local_actions, world, PinnedFrequencyRule(),
                              optimize=False)
    if design is DesignId.GREEDY_DEVICES:
        return evaluate_fixed(settings, nearest_device_actions, world, update_log=update_log)
    raise ValueError(f"Unhandled design {design}")
