"""Forecast-score result models."""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from models.geo_models import GeoCoord
from utils.errors import DataError


@dataclass(frozen=True)
class BinHistogram:
    """Per-bin level counts; counts[0] is Bin 1."""
    counts: Tuple[int, ...]
    levels_counted: int

    def __post_init__(self):
        if sum(self.counts) != self.levels_counted:
            raise DataError("bin counts must sum to levels_counted")


@dataclass(frozen=True)
class OpposingScore:
    t_norm: float
    histogram: BinHistogram
    pairs: int = 0


@dataclass
class ForecastScore:
    """Mean opposing score over the evaluated timestamps."""
    value: float
    per_timestamp: List[float]
    coordinate: GeoCoord
    source_kind: str
    times: List[float] = field(default_factory=list)
    histograms: List[BinHistogram] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "coordinate": {"latitude": self.coordinate.latitude, "longitude": self.coordinate.longitude},
            "source_kind": self.source_kind,
            "fs": self.value,
            "per_timestamp": list(self.per_timestamp),
            "histogram": [list(h.counts) for h in self.histograms],
            "levels_counted": [h.levels_counted for h in self.histograms],
        }


@dataclass
class ScoreDistribution:
    """Scores of randomly sampled (lat, lon, start time) tuples for one grid.

    `raw_scores` keeps every sample in draw order; `scores` drops zeros when the
    distribution was filtered. `paired` holds the other grid's distribution over
    the same tuples.
    """
    kind: str
    raw_scores: np.ndarray
    scores: np.ndarray
    zero_fraction: float
    samples: List[Tuple[float, float, float]]
    filtered: bool = False
    paired: Optional["ScoreDistribution"] = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores)) if self.scores.size else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self.scores)) if self.scores.size else float("nan")
