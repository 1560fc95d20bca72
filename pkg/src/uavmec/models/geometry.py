# src/uavmec/models/geometry.py

from dataclasses import dataclass
from typing import Tuple


@dataclass(frozen=True)
class Location:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self) -> None:
        if self.z < 0:
            raise ValueError(f"Location altitude must be non-negative, got z={self.z}")

    def horizontal(self) -> Tuple[float, float]:
        return (self.x, self.y)

    def at_altitude(self, z: float) -> "Location":
        return Location(self.x, self.y, z)


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle in which the MTUs move."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max
