# src/uavmec/logic/environment.py

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from uavmec.logic.allocation import AllocationRule, JointRule, capped_allocation
from uavmec.logic.compute_model import evaluate_mode
from uavmec.logic.mobility import initial_kinematics, simulate
from uavmec.logic.radio import MIN_DISTANCE, link_budget
from uavmec.logic.scenario import build_profiles, build_world, generate_tasks
from uavmec.models.decision import (
    Allocation, LinkBudget, ModeOutcome, OffloadDecision, Placement, TaskContext,
)
from uavmec.models.geometry import Location
from uavmec.models.scenario import MtuKinematics, Profiles, TaskSpec, TaskTable, World
from uavmec.models.training import Settings

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["episode", "slot", "mtu", "action", "latency", "energy", "violation"]


@dataclass
class EnvState:
    slot: int
    mtus: List[MtuKinematics]
    uav_fhp: int
    uav_location: Location
    tasks: List[TaskSpec]
    mtu_budgets: np.ndarray
    device_budgets: np.ndarray
    uav_budget: float


@dataclass
class SubStep:
    """One MTU's share of a slot in TDMA order."""

    slot: int
    mtu: int
    action: int
    context: TaskContext
    allocation: Allocation
    outcome: ModeOutcome
    deadline_miss: bool
    budget_breach: bool

    @property
    def violations(self) -> int:
        return int(self.deadline_miss) + int(self.budget_breach)


@dataclass
class StepResult:
    state: EnvState
    reward: float
    done: bool
    info: Dict[str, Any] = field(default_factory=dict)


@dataclass
class SlotFeedback:
    """What the learner sees after one slot: one transition per MTU sub-step."""

    rewards: List[float]
    next_observations: List[np.ndarray]
    terminal: bool
    done: bool
    slot_reward: float


class OffloadingEnv:
    def __init__(self, settings: Settings, rule: Optional[AllocationRule] = None,
                 world: Optional[World] = None, record: bool = False):
        """
        Slot-stepped MDP over the offloading decisions of all MTUs.

        :param settings: Full settings
        :param rule: How powers and frequencies are chosen for each decided task
        :param world: Static layout; built from the config when omitted
        :param record: Keep every sub-step for trace export and the joint optimizer
        """
        self.settings = settings
        self.cfg = settings.scenario
        self.rule = rule or JointRule()
        self.world = world or build_world(self.cfg)
        self.record = record
        self.logger = logging.getLogger(__name__)
        M, K = self.cfg.num_mtus, self.cfg.num_devices
        self.observation_size = 7 * M + K + 3
        self.action_count = self.cfg.action_count
        self.horizon = self.cfg.num_slots
        self.episode = 0
        self.state: Optional[EnvState] = None
        self.tasks: Optional[TaskTable] = None
        self.profiles: Optional[Profiles] = None
        self.mobility_trace: List[List[MtuKinematics]] = []
        self.history: List[SubStep] = []
        self._trace_rows: List[Dict[str, Any]] = []

    # -- MDP ---------------------------------------------------------------

    def reset(self, episode: int = 0) -> EnvState:
        """
        Start an episode. Tasks, mobility and deviations are drawn from
        independent streams seeded by (seed, episode), so every design sees the
        same episode regardless of the actions it takes.

        :param episode: Episode index
        :return: Initial state
        """
        cfg = self.cfg
        self.episode = episode
        task_ss, mobility_ss, deviation_ss = np.random.SeedSequence([cfg.seed, episode]).spawn(3)
        self.tasks = generate_tasks(cfg, np.random.default_rng(task_ss))
        mobility_rng = np.random.default_rng(mobility_ss)
        kin0 = initial_kinematics(cfg.num_mtus, self.settings.mobility, cfg.region, mobility_rng)
        self.mobility_trace = simulate(kin0, self.settings.mobility, cfg.region, cfg.num_slots,
                                       cfg.slot_share, mobility_rng)
        self.profiles = build_profiles(cfg, self.world, [k.location for k in kin0],
                                       np.random.default_rng(deviation_ss))
        self.history = []
        self.state = EnvState(
            slot=0,
            mtus=list(kin0),
            uav_fhp=cfg.initial_fhp,
            uav_location=self.world.fhps[cfg.initial_fhp],
            tasks=self._slot_tasks(0),
            mtu_budgets=np.full(cfg.num_mtus, cfg.mtu_energy_budget),
            device_budgets=np.full(cfg.num_devices, cfg.device_energy_budget),
            uav_budget=cfg.uav_energy_budget,
        )
        return self.state

    def _slot_tasks(self, n: int) -> List[TaskSpec]:
        if n >= self.cfg.num_slots:
            return []
        return [self.tasks.task(m, n) for m in range(self.cfg.num_mtus)]

    def _link(self, a: Location, b: Location) -> LinkBudget:
        try:
            return link_budget(a, b, self.cfg.beta0)
        except ValueError:
            return LinkBudget(distance=MIN_DISTANCE, gain=self.cfg.beta0)

    def _context(self, m: int, decision: OffloadDecision, serve_at: Location,
                 fly_from: Optional[Location], fly_to: Optional[Location]) -> TaskContext:
        state, cfg = self.state, self.cfg
        mtu_loc = state.mtus[m].location
        base = dict(mtu=m, slot=state.slot, task=state.tasks[m], decision=decision,
                    mtu_profile=self.profiles.mtus[m])
        placement = decision.placement
        if placement is Placement.LOCAL:
            return TaskContext(**base)
        if placement is Placement.DEVICE:
            device = self.profiles.devices[decision.target]
            return TaskContext(**base, server=device, uplink=self._link(mtu_loc, device.location),
                               uplink_p_max=cfg.mtu_p_max)
        uplink = self._link(mtu_loc, serve_at)
        if placement is Placement.UAV:
            return TaskContext(**base, server=self.profiles.uav, uplink=uplink,
                               uplink_p_max=cfg.mtu_p_max_uav, fly_from=fly_from, fly_to=fly_to)
        return TaskContext(**base, server=self.profiles.uav, uplink=uplink,
                           uplink_p_max=cfg.mtu_p_max_uav,
                           backhaul=self._link(serve_at, self.world.bs),
                           backhaul_p_max=cfg.uav_p_max, fly_from=fly_from, fly_to=fly_to)

    def _evaluate(self, ctx: TaskContext) -> Tuple[Allocation, ModeOutcome]:
        alloc = self.rule.allocate(ctx, self.cfg)
        try:
            return alloc, evaluate_mode(ctx, alloc, self.cfg)
        except ValueError as e:
            self.logger.error(f"Allocation '{self.rule.name}' unusable for task "
                              f"({ctx.mtu}, {ctx.slot}): {e}")
            alloc = capped_allocation(ctx)
            return alloc, evaluate_mode(ctx, alloc, self.cfg)

    def step(self, joint_action: Sequence[int]) -> StepResult:
        """
        Serve every MTU of the current slot in TDMA order and advance to the next slot.

        :param joint_action: One action index per MTU
        :return: StepResult; reward = -(total energy + penalty * violations)
        """
        state, cfg = self.state, self.cfg
        if state is None or state.slot >= cfg.num_slots:
            raise RuntimeError("step() called on a finished or unstarted episode")
        if len(joint_action) != cfg.num_mtus:
            raise ValueError(f"Expected {cfg.num_mtus} actions, got {len(joint_action)}")
        decisions = [OffloadDecision.from_index(int(a), cfg.num_devices, cfg.num_fhps)
                     for a in joint_action]

        slot_fhp = state.uav_fhp
        if cfg.uav_movement == "single":
            slot_fhp = next((d.target for d in decisions if d.placement is Placement.UAV),
                            state.uav_fhp)
        flown = False

        substeps = []
        idle_hover = 0.0
        for m, (action, decision) in enumerate(zip(joint_action, decisions)):
            fly_from = fly_to = None
            serve_at = state.uav_location
            if decision.uses_uav:
                if cfg.uav_movement == "single":
                    serve_at = self.world.fhps[slot_fhp]
                    if not flown:
                        fly_from, fly_to, flown = state.uav_location, serve_at, True
                        state.uav_location, state.uav_fhp = serve_at, slot_fhp
                elif decision.placement is Placement.UAV:
                    serve_at = self.world.fhps[decision.target]
                    fly_from, fly_to = state.uav_location, serve_at
                    state.uav_location, state.uav_fhp = serve_at, decision.target
            ctx = self._context(m, decision, serve_at, fly_from, fly_to)
            alloc, outcome = self._evaluate(ctx)
            miss = not outcome.meets(ctx.task.deadline)
            breach = self._draw_budgets(ctx, outcome)
            if not decision.uses_uav:
                idle = cfg.hover_power * cfg.slot_share
                idle_hover += idle
                state.uav_budget -= idle
                breach = breach or state.uav_budget < 0
            substeps.append(SubStep(state.slot, m, int(action), ctx, alloc, outcome, miss, breach))

        energy = sum(s.outcome.total_energy for s in substeps)
        violations = sum(s.violations for s in substeps)
        reward = -(energy + self.settings.reward.penalty * violations)
        if self.record:
            self.history.extend(substeps)
            self._trace_rows.extend(
                {"episode": self.episode, "slot": s.slot, "mtu": s.mtu,
                 "action": s.context.decision.label(), "latency": s.outcome.total_latency,
                 "energy": s.outcome.total_energy, "violation": s.violations}
                for s in substeps
            )
        self.logger.debug(f"slot {state.slot}: energy {energy:.6g} J, {violations} violations")

        state.slot += 1
        if state.slot < cfg.num_slots:
            state.mtus = list(self.mobility_trace[state.slot])
        state.tasks = self._slot_tasks(state.slot)
        done = state.slot >= cfg.num_slots
        info = {"substeps": substeps, "energy": energy, "violations": violations,
                "idle_hover": idle_hover}
        return StepResult(state=state, reward=reward, done=done, info=info)

    def _draw_budgets(self, ctx: TaskContext, outcome: ModeOutcome) -> bool:
        state = self.state
        state.mtu_budgets[ctx.mtu] -= outcome.mtu_energy
        breach = state.mtu_budgets[ctx.mtu] < 0
        placement = ctx.decision.placement
        if placement is Placement.DEVICE:
            k = ctx.decision.target
            state.device_budgets[k] -= outcome.server_energy
            breach = breach or state.device_budgets[k] < 0
        elif ctx.decision.uses_uav:
            state.uav_budget -= (outcome.server_energy + outcome.uav_fly_energy
                                 + outcome.uav_hover_energy)
            breach = breach or state.uav_budget < 0
        return bool(breach)

    def encode_observation(self, state: EnvState, mtu: int) -> np.ndarray:
        """
        Fixed-length observation in [0, 1] for the MTU about to act.

        Layout: MTU x,y (2M) | UAV x,y (2) | task D,C,T (3M) | acting MTU one-hot (M)
        | remaining budget fractions of MTUs, devices, UAV (M + K + 1).
        """
        cfg = self.cfg
        region = cfg.region
        M = cfg.num_mtus
        mtu_xy = np.array([[(k.location.x - region.x_min) / region.width,
                            (k.location.y - region.y_min) / region.height] for k in state.mtus])
        uav_xy = np.array([(state.uav_location.x - region.x_min) / region.width,
                           (state.uav_location.y - region.y_min) / region.height])
        tasks = np.zeros((M, 3))
        for m, t in enumerate(state.tasks):
            tasks[m] = (t.data_bits / cfg.task_bits_max, t.cycles_per_bit / cfg.task_cycles_per_bit,
                        t.deadline / cfg.deadline_max)
        acting = np.zeros(M)
        acting[mtu] = 1.0
        budgets = np.concatenate([
            state.mtu_budgets / cfg.mtu_energy_budget,
            state.device_budgets / cfg.device_energy_budget,
            [state.uav_budget / cfg.uav_energy_budget],
        ])
        obs = np.concatenate([mtu_xy.ravel(), uav_xy, tasks.ravel(), acting, budgets])
        return np.clip(obs, 0.0, 1.0)

    # -- learner protocol ----------------------------------------------------

    def begin_episode(self, episode: int) -> None:
        self.reset(episode)

    def observations(self) -> List[np.ndarray]:
        return [self.encode_observation(self.state, m) for m in range(self.cfg.num_mtus)]

    def advance(self, actions: Sequence[int]) -> SlotFeedback:
        result = self.step(actions)
        scale = self.settings.reward.reward_scale
        penalty = self.settings.reward.penalty
        if self.settings.train.transition_reward == "slot_total":
            rewards = [result.reward / scale] * self.cfg.num_mtus
        else:
            rewards = [-(s.outcome.total_energy + penalty * s.violations) / scale
                       for s in result.info["substeps"]]
        return SlotFeedback(
            rewards=rewards,
            next_observations=self.observations(),
            terminal=result.done,
            done=result.done,
            slot_reward=result.reward,
        )

    # -- exports -------------------------------------------------------------

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self._trace_rows, columns=TRACE_COLUMNS)
