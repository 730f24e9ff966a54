"""Opposing-winds forecast score.

Each level's wind bearing falls in one of N directional bins (Bin 1 centered on
north). A column's score counts matchable opposing level pairs, min(C_i,
C_{i+N/2}) summed over the N/2 opposing bin pairs, normalized by floor(N_a/2).
The forecast score averages that over evenly spaced timestamps.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from models.config_models import ScoreConfig
from models.geo_models import GeoCoord, WindGrid, WindVector
from models.score_models import BinHistogram, ForecastScore, OpposingScore, ScoreDistribution
from services.logging_service import get_logging_service
from services.wind_service import sample_column, wind_bearings
from utils.errors import CoverageError, EmptyInputError
from utils.timeutil import TimeLike, to_epoch


def bin_direction(bearing: float, cfg: ScoreConfig) -> int:
    """1-based bin index of a bearing; edges are lower-inclusive."""
    width = 360.0 / cfg.num_bins
    shifted = (bearing + cfg.center_offset) % 360.0
    return min(int(shifted // width), cfg.num_bins - 1) + 1


def bin_directions(bearings: np.ndarray, cfg: ScoreConfig) -> np.ndarray:
    width = 360.0 / cfg.num_bins
    shifted = np.mod(np.asarray(bearings, dtype=float) + cfg.center_offset, 360.0)
    return np.minimum((shifted // width).astype(int), cfg.num_bins - 1) + 1


def score_components(u: np.ndarray, v: np.ndarray, cfg: ScoreConfig) -> OpposingScore:
    """opposing_score on component arrays."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.size == 0:
        raise EmptyInputError("wind column has no levels")
    if cfg.exclude_calm:
        keep = np.hypot(u, v) >= cfg.calm_threshold
        u, v = u[keep], v[keep]
    bins = bin_directions(wind_bearings(u, v), cfg)
    counts = np.bincount(bins - 1, minlength=cfg.num_bins)
    n_a = int(counts.sum())
    half = cfg.num_bins // 2
    pairs = int(np.minimum(counts[:half], counts[half:]).sum())
    t_norm = pairs / (n_a // 2) if n_a >= 2 else 0.0
    histogram = BinHistogram(tuple(int(c) for c in counts), n_a)
    return OpposingScore(float(t_norm), histogram, pairs)


def opposing_score(column: Sequence[WindVector], cfg: ScoreConfig) -> OpposingScore:
    """Normalized opposing-pair score of one altitude column."""
    if len(column) == 0:
        raise EmptyInputError("wind column has no levels")
    u = np.array([w.u for w in column], dtype=float)
    v = np.array([w.v for w in column], dtype=float)
    return score_components(u, v, cfg)


def score_times(start: TimeLike, cfg: ScoreConfig) -> List[float]:
    """n_timestamps instants evenly spaced over window_hours from start."""
    begin = to_epoch(start)
    if cfg.n_timestamps == 1:
        return [begin]
    return list(np.linspace(begin, begin + cfg.window_hours * 3600.0, cfg.n_timestamps))


def forecast_score(grid: WindGrid, coordinate: GeoCoord, times: Sequence[TimeLike],
                   cfg: ScoreConfig) -> ForecastScore:
    """Mean opposing score of the column at a coordinate over the given times."""
    if len(times) == 0:
        raise EmptyInputError("forecast score needs at least one timestamp")
    low, high = cfg.altitude_window
    per_timestamp, histograms, epochs = [], [], []
    for when in times:
        column = sample_column(grid, coordinate, when, clamp=False)
        inside = (column.altitudes >= low) & (column.altitudes <= high)
        if not np.any(inside):
            raise EmptyInputError(f"no grid levels inside score window [{low:.0f}, {high:.0f}] m")
        result = score_components(column.u[inside], column.v[inside], cfg)
        per_timestamp.append(result.t_norm)
        histograms.append(result.histogram)
        epochs.append(to_epoch(when))
    value = float(np.mean(per_timestamp))
    return ForecastScore(value, per_timestamp, coordinate, grid.kind, epochs, histograms)


def sampling_region(grids: Sequence[WindGrid], cfg: ScoreConfig) -> Tuple[float, float, float, float, float, float]:
    """(lat_min, lat_max, lon_min, lon_max, t_min, t_max) valid as sample/window start for every grid."""
    box = grids[0].bounding_box
    for grid in grids[1:]:
        box = box.intersect(grid.bounding_box)
        if box is None:
            raise CoverageError("space", "grids do not overlap horizontally")
    t_min = max(g.time_span[0] for g in grids)
    t_max = min(g.time_span[1] for g in grids) - cfg.window_hours * 3600.0
    if t_max < t_min:
        raise CoverageError("time", f"grid span shorter than the {cfg.window_hours} h score window")
    return box.lat_min, box.lat_max, box.lon_min, box.lon_max, float(t_min), float(t_max)


def _draw(rng: np.random.Generator, region) -> Tuple[float, float, float]:
    lat_min, lat_max, lon_min, lon_max, t_min, t_max = region
    return (float(rng.uniform(lat_min, lat_max)), float(rng.uniform(lon_min, lon_max)),
            float(rng.uniform(t_min, t_max)) if t_max > t_min else t_min)


def _distribution(kind: str, raw: np.ndarray, samples, filter_zero: bool) -> ScoreDistribution:
    zero_fraction = float(np.mean(raw == 0.0))
    scores = raw[raw != 0.0] if filter_zero else raw
    return ScoreDistribution(kind, raw, scores, zero_fraction, samples, filter_zero)


def score_distribution(grid: WindGrid, samples: int, seed: int, cfg: ScoreConfig,
                       filter_zero: bool = False, paired: Optional[WindGrid] = None,
                       workers: int = 1) -> ScoreDistribution:
    """Forecast scores at uniformly random coordinates and window starts.

    Sample i uses its own generator spawned from the seed, so results do not
    depend on worker count. With `paired`, both grids are scored at the same
    (lat, lon, start time) tuples and the other grid's distribution is attached.
    """
    if samples < 1:
        raise EmptyInputError("score distribution needs at least one sample")
    grids = [grid] + ([paired] if paired is not None else [])
    region = sampling_region(grids, cfg)
    children = np.random.SeedSequence(seed).spawn(samples)
    draws = [_draw(np.random.default_rng(child), region) for child in children]

    def score_one(draw):
        lat, lon, start = draw
        where = GeoCoord(lat, lon)
        times = score_times(start, cfg)
        return tuple(forecast_score(g, where, times, cfg).value for g in grids)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(score_one, draws))
    else:
        results = [score_one(d) for d in draws]

    table = np.array(results, dtype=float)
    main = _distribution(grid.kind, table[:, 0], draws, filter_zero)
    if paired is not None:
        main.paired = _distribution(paired.kind, table[:, 1], draws, filter_zero)
    get_logging_service().info(
        f"Scored {samples} samples ({grid.kind}): zero fraction {main.zero_fraction:.3f}"
        + (f", paired {paired.kind} zero fraction {main.paired.zero_fraction:.3f}" if paired is not None else ""))
    return main
