"""Episode, observation and station-keeping report models."""
from dataclasses import asdict, dataclass, field
from enum import IntEnum
from typing import List, Optional, Tuple

import numpy as np

from models.geo_models import GeoCoord
from utils.errors import EpisodeStateError

TWR_RADII_KM = (25.0, 50.0, 75.0)


class Action(IntEnum):
    """Altitude actions; values are the Q-network output indices."""
    DESCEND = 0
    STAY = 1
    ASCEND = 2


@dataclass(frozen=True)
class ColumnLevel:
    """One wind-column entry of an observation."""
    level_altitude: float
    magnitude: float
    relative_bearing: float


@dataclass(frozen=True)
class Observation:
    """Agent-visible slice of the state, in physical units."""
    altitude: float
    relative_distance: float
    relative_bearing: float
    wind_column: Tuple[ColumnLevel, ...]

    def as_array(self) -> np.ndarray:
        """Raw vector [altitude, distance, bearing, (level, magnitude, bearing) x N]."""
        values = [self.altitude, self.relative_distance, self.relative_bearing]
        for level in self.wind_column:
            values.extend((level.level_altitude, level.magnitude, level.relative_bearing))
        return np.array(values, dtype=np.float64)


@dataclass(frozen=True)
class TrajectoryRecord:
    """State after one step."""
    time: float
    latitude: float
    longitude: float
    altitude: float
    action: int
    reward: float
    distance_km: float


@dataclass
class EpisodeState:
    """Mutable simulator state; trajectory holds one record per completed step."""
    position: GeoCoord
    station: GeoCoord
    time: float
    start_time: float
    step_index: int = 0
    cumulative_reward: float = 0.0
    heading: Optional[float] = None
    done: bool = False
    trajectory: List[TrajectoryRecord] = field(default_factory=list)

    def require_active(self):
        if self.done:
            raise EpisodeStateError("episode is done; call reset() first")

    def to_dict(self) -> dict:
        return {
            "position": [self.position.latitude, self.position.longitude, self.position.altitude],
            "station": [self.station.latitude, self.station.longitude, self.station.altitude],
            "time": self.time,
            "start_time": self.start_time,
            "step_index": self.step_index,
            "cumulative_reward": self.cumulative_reward,
            "heading": self.heading,
            "done": self.done,
            "trajectory": [asdict(r) for r in self.trajectory],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EpisodeState":
        return cls(
            position=GeoCoord(*data["position"]),
            station=GeoCoord(*data["station"]),
            time=float(data["time"]),
            start_time=float(data["start_time"]),
            step_index=int(data["step_index"]),
            cumulative_reward=float(data["cumulative_reward"]),
            heading=data["heading"],
            done=bool(data["done"]),
            trajectory=[TrajectoryRecord(**r) for r in data["trajectory"]],
        )


@dataclass(frozen=True)
class StepResult:
    state: EpisodeState
    observation: Observation
    reward: float
    done: bool


@dataclass
class TWRReport:
    """Fractions of steps within 25/50/75 km of the station, plus episode metadata."""
    twr25: float
    twr50: float
    twr75: float
    seed: Optional[int] = None
    month: str = ""
    latitude: float = 0.0
    longitude: float = 0.0
    start_time: float = 0.0
    forecast_score: Optional[float] = None
    total_reward: float = 0.0

    @classmethod
    def from_distances(cls, distances_km, **metadata) -> "TWRReport":
        distances = np.asarray(distances_km, dtype=float)
        if distances.size == 0:
            raise EpisodeStateError("episode has no steps")
        fractions = [float(np.mean(distances <= radius)) for radius in TWR_RADII_KM]
        return cls(*fractions, **metadata)


@dataclass
class EpisodeResult:
    report: TWRReport
    trajectory: List[TrajectoryRecord]
    total_reward: float
