"""Radiosonde sounding data models."""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from models.geo_models import GeoCoord, WindGrid


@dataclass(frozen=True)
class SoundingSample:
    """One wind observation, m and m/s."""
    altitude: float
    u: float
    v: float


@dataclass
class RadiosondeSounding:
    """One station's vertical wind profile; samples ascend strictly in altitude."""
    station_id: str
    location: GeoCoord
    launch_time: int
    samples: List[SoundingSample] = field(default_factory=list)
    source: str = ""

    @property
    def altitudes(self) -> np.ndarray:
        return np.array([s.altitude for s in self.samples], dtype=float)

    @property
    def u(self) -> np.ndarray:
        return np.array([s.u for s in self.samples], dtype=float)

    @property
    def v(self) -> np.ndarray:
        return np.array([s.v for s in self.samples], dtype=float)


@dataclass
class BinnedProfile:
    """Sounding resampled to fixed bin centers; `observed` is False for filled bins."""
    station_id: str
    location: GeoCoord
    bin_centers: np.ndarray
    u: np.ndarray
    v: np.ndarray
    observed: np.ndarray

    @property
    def n_observed(self) -> int:
        return int(np.count_nonzero(self.observed))

    @property
    def fill_mask(self) -> List[str]:
        return ["observed" if flag else "interpolated" for flag in self.observed]


@dataclass
class RejectedSounding:
    station_id: str
    launch_time: int
    reason: str


@dataclass
class SynthesisResult:
    """Synthesized grid plus the per-run ingestion record."""
    grid: Optional[WindGrid]
    stations_used: dict = field(default_factory=dict)
    dropped_times: List[int] = field(default_factory=list)
    rejected: List[RejectedSounding] = field(default_factory=list)
