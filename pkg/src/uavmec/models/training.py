# src/uavmec/models/training.py

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Tuple

from uavmec.models.scenario import MobilityConfig, ScenarioConfig

TARGET_RULES = ("ddqn", "dqn")
TRANSITION_REWARDS = ("per_mtu", "slot_total")
SWEEP_VARIABLES = ("L", "M", "deviation_delta", "f_max_mtu", "learning_rate")


class DesignId(Enum):
    PROPOSED = "proposed"
    DQN = "dqn"
    NO_F_OPT = "no_f_opt"
    LOCAL_ONLY = "local_only"
    GREEDY_DEVICES = "greedy_devices"
    NO_DT = "no_dt"

    @classmethod
    def parse(cls, name: str) -> "DesignId":
        try:
            return cls(name)
        except ValueError:
            choices = ", ".join(d.value for d in cls)
            raise ValueError(f"Unknown design '{name}' (choose from {choices})") from None


@dataclass(frozen=True)
class RewardConfig:
    penalty: float = 50.0
    reward_scale: float = 10.0


@dataclass(frozen=True)
class TrainConfig:
    epsilon_init: float = 0.95
    epsilon_decrement: float = 1e-4
    epsilon_floor: float = 0.01
    discount: float = 0.9
    learning_rate: float = 0.001
    batch_size: int = 1000
    memory_size: int = 10000
    target_sync_interval: int = 200
    episodes: int = 300
    hidden_layers: Tuple[int, ...] = (128, 128)
    transition_reward: str = "per_mtu"


@dataclass(frozen=True)
class JointConfig:
    threshold: float = 1e-3
    max_iterations: int = 20
    split_refinement: bool = True
    retrain_policy: bool = False
    retrain_episodes: int = 50


@dataclass
class ConvergenceLog:
    """Objective value after each outer iteration; entry 0 is the initial (P, F)."""

    objectives: List[float] = field(default_factory=list)
    violations: List[int] = field(default_factory=list)

    def record(self, objective: float, violations: int) -> None:
        self.objectives.append(objective)
        self.violations.append(violations)

    @property
    def fractional_decreases(self) -> List[float]:
        out = []
        for prev, cur in zip(self.objectives, self.objectives[1:]):
            out.append((prev - cur) / prev if prev > 0 else 0.0)
        return out

    @property
    def iterations(self) -> int:
        return max(len(self.objectives) - 1, 0)


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: Tuple[float, ...]
    seeds: Tuple[int, ...]
    designs: Tuple[DesignId, ...]

    def __post_init__(self) -> None:
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"Unknown sweep variable '{self.variable}'")
        if not self.values or not self.seeds or not self.designs:
            raise ValueError("Sweep values, seeds and designs must be non-empty")


@dataclass(frozen=True)
class Settings:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    joint: JointConfig = field(default_factory=JointConfig)

    def with_overrides(self, **overrides) -> "Settings":
        """
        Return a copy with individual fields replaced, looked up by field name.

        :param overrides: field_name=value pairs from any section
        :return: New Settings
        """
        sections = {name: getattr(self, name) for name in SECTION_NAMES}
        for key, value in overrides.items():
            for name, section in sections.items():
                if key in section.__dataclass_fields__:
                    sections[name] = replace(section, **{key: value})
                    break
            else:
                raise KeyError(key)
        return Settings(**sections)


SECTION_NAMES = ("scenario", "mobility", "reward", "train", "joint")
