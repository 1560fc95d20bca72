# src/uavmec/models/decision.py

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from uavmec.models.geometry import Location
from uavmec.models.scenario import NodeProfile, TaskSpec


class Placement(Enum):
    LOCAL = "local"
    BS_RELAY = "bs_relay"
    DEVICE = "device"
    UAV = "uav"


@dataclass(frozen=True)
class OffloadDecision:
    """
    Where one task runs. Action indices are laid out as
    0 = local, 1 = BS relay, 2..K+1 = device k, K+2..K+Q+1 = FHP q.
    """

    placement: Placement
    target: int = 0

    @classmethod
    def from_index(cls, index: int, num_devices: int, num_fhps: int) -> "OffloadDecision":
        if index < 0 or index >= num_devices + num_fhps + 2:
            raise ValueError(f"Action index {index} outside [0, {num_devices + num_fhps + 2})")
        if index == 0:
            return cls(Placement.LOCAL)
        if index == 1:
            return cls(Placement.BS_RELAY)
        if index < num_devices + 2:
            return cls(Placement.DEVICE, index - 2)
        return cls(Placement.UAV, index - num_devices - 2)

    def to_index(self, num_devices: int) -> int:
        if self.placement is Placement.LOCAL:
            return 0
        if self.placement is Placement.BS_RELAY:
            return 1
        if self.placement is Placement.DEVICE:
            return 2 + self.target
        return 2 + num_devices + self.target

    @property
    def uses_uav(self) -> bool:
        return self.placement in (Placement.UAV, Placement.BS_RELAY)

    def label(self) -> str:
        if self.placement in (Placement.DEVICE, Placement.UAV):
            return f"{self.placement.value}:{self.target}"
        return self.placement.value


@dataclass(frozen=True)
class Allocation:
    """Power triple (P1, P2, P3) and frequency triple (F1, F2, F3) for one task."""

    p_device: float = 0.0
    p_uav: float = 0.0
    p_bs: float = 0.0
    f_local: float = 0.0
    f_device: float = 0.0
    f_uav: float = 0.0


@dataclass(frozen=True)
class LinkBudget:
    distance: float
    gain: float


@dataclass(frozen=True)
class TaskContext:
    """Everything needed to allocate and evaluate one task under a fixed decision."""

    mtu: int
    slot: int
    task: TaskSpec
    decision: OffloadDecision
    mtu_profile: NodeProfile
    server: Optional[NodeProfile] = None
    uplink: Optional[LinkBudget] = None
    uplink_p_max: float = 0.0
    backhaul: Optional[LinkBudget] = None
    backhaul_p_max: float = 0.0
    fly_from: Optional[Location] = None
    fly_to: Optional[Location] = None


@dataclass(frozen=True)
class ModeOutcome:
    transmit_time: float = 0.0
    compute_time: float = 0.0
    total_latency: float = 0.0
    mtu_energy: float = 0.0
    server_energy: float = 0.0
    uav_fly_energy: float = 0.0
    uav_hover_energy: float = 0.0
    total_energy: float = 0.0

    def meets(self, deadline: float, rtol: float = 1e-9) -> bool:
        return self.total_latency <= deadline * (1.0 + rtol)


@dataclass(frozen=True)
class PowerSolution:
    p_star: float
    capped: bool
    xi: float


@dataclass(frozen=True)
class FrequencyAssignment:
    """CPU frequency assigned to one task at the server that runs it."""

    mtu: int
    slot: int
    placement: Placement
    frequency: float
    feasible: bool
