"""Evaluation campaigns and report tables.

Campaign episodes are seeded from (seed, month index, episode index), so the
aggregated tables do not depend on worker count or completion order.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from agent.trainer import GridPair
from models.config_models import EvalConfig, RewardConfig, ScoreConfig, SimConfig
from models.episode_models import Observation, TrajectoryRecord
from models.geo_models import GeoCoord, WindGrid
from models.score_models import ScoreDistribution
from services.forecast_score_service import forecast_score, score_distribution, score_times
from services.logging_service import get_logging_service
from services.simulator_service import StationKeepingEnv, place_arena, run_episode, write_trajectory_csv
from services.wind_service import fold_angles, sample_column, wind_bearings
from utils.errors import ConfigurationError, CoverageError, EmptyInputError
from utils.timeutil import format_utc

PolicyFactory = Callable[[], Callable[[Observation], int]]

RECORD_COLUMNS = ["month", "episode", "latitude", "longitude", "start_time", "twr25", "twr50", "twr75",
                  "total_reward", "fs", "fs_truth"]
SUMMARY_COLUMNS = ["month", "episodes", "mean_twr50", "sd_twr50", "mean_fs", "sd_fs"]


@dataclass
class EvalCampaign:
    """Greedy-policy evaluation over a set of monthly grid pairs."""
    months: List[GridPair]
    episodes_per_month: int
    seed: int
    score_cfg: ScoreConfig = field(default_factory=ScoreConfig)
    checkpoint: str = ""

    def __post_init__(self):
        if not self.months:
            raise EmptyInputError("campaign needs at least one month")
        if self.episodes_per_month < 1:
            raise ConfigurationError("episodes_per_month must be at least 1")


@dataclass
class EpisodeRecord:
    month: str
    episode: int
    latitude: float
    longitude: float
    start_time: str
    twr25: float
    twr50: float
    twr75: float
    total_reward: float
    fs: float
    fs_truth: float


@dataclass
class CampaignResult:
    records: List[EpisodeRecord]


def episode_rng(seed: int, month_index: int, episode_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), month_index, episode_index]))


def run_campaign_episode(campaign: EvalCampaign, month_index: int, episode_index: int, policy,
                         sim_cfg: SimConfig, reward_cfg: RewardConfig
                         ) -> Tuple[EpisodeRecord, List[TrajectoryRecord]]:
    """One campaign episode; reruns with the same indices reproduce it exactly."""
    pair = campaign.months[month_index]
    cfg = campaign.score_cfg
    rng = episode_rng(campaign.seed, month_index, episode_index)
    station, start = place_arena(pair.truth, pair.forecast, sim_cfg, rng, duration=cfg.window_hours * 3600.0)
    env = StationKeepingEnv(pair.truth, pair.forecast, sim_cfg, reward_cfg)
    result = run_episode(policy, env, rng=rng, station=station, start_time=start, month=pair.label)
    times = score_times(start, cfg)
    fs = forecast_score(pair.forecast, station, times, cfg).value
    fs_truth = forecast_score(pair.truth, station, times, cfg).value
    report = result.report
    record = EpisodeRecord(pair.label, episode_index, station.latitude, station.longitude, format_utc(start),
                           report.twr25, report.twr50, report.twr75, result.total_reward, fs, fs_truth)
    return record, result.trajectory


def _trajectory_name(record: EpisodeRecord) -> str:
    return f"{record.month}_{record.episode:05d}.csv"


def run_campaign(campaign: EvalCampaign, policy, sim_cfg: SimConfig, reward_cfg: RewardConfig,
                 workers: int = 1, trajectory_dir=None, partial_path=None) -> CampaignResult:
    """Run every episode of every month with a greedy policy.

    `policy` must be safe to call from several threads when workers > 1. With
    `trajectory_dir`, every episode's trajectory CSV is written there. On
    KeyboardInterrupt the finished records are written to `partial_path` before
    the interrupt propagates.
    """
    logger = get_logging_service()
    tasks = [(m, e) for m in range(len(campaign.months)) for e in range(campaign.episodes_per_month)]
    done: dict = {}

    def run(task):
        record, trajectory = run_campaign_episode(campaign, task[0], task[1], policy, sim_cfg, reward_cfg)
        if trajectory_dir is not None:
            write_trajectory_csv(trajectory, Path(trajectory_dir) / _trajectory_name(record))
        done[task] = record
        if len(done) % 500 == 0:
            logger.info(f"Campaign progress: {len(done)}/{len(tasks)} episodes")
        return record

    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                records = list(pool.map(run, tasks))
        else:
            records = [run(t) for t in tasks]
    except KeyboardInterrupt:
        partial = [done[t] for t in sorted(done)]
        logger.warning(f"Campaign interrupted after {len(partial)}/{len(tasks)} episodes")
        if partial_path is not None:
            write_records(partial, partial_path)
            logger.info(f"Partial campaign records written to {partial_path}")
        raise
    logger.info(f"Campaign finished: {len(records)} episodes over {len(campaign.months)} months")
    return CampaignResult(records)


def export_top_trajectories(campaign: EvalCampaign, records: Sequence[EpisodeRecord], top_k: int, policy,
                            sim_cfg: SimConfig, reward_cfg: RewardConfig, out_dir) -> List[Path]:
    """Re-run the top_k episodes by TWR50 (ties by month, episode) and write their trajectories."""
    month_index = {pair.label: i for i, pair in enumerate(campaign.months)}
    ranked = sorted(records, key=lambda r: (-r.twr50, month_index[r.month], r.episode))[:top_k]
    paths = []
    for record in ranked:
        _, trajectory = run_campaign_episode(campaign, month_index[record.month], record.episode, policy,
                                             sim_cfg, reward_cfg)
        paths.append(write_trajectory_csv(trajectory, Path(out_dir) / _trajectory_name(record)))
    return paths


def records_frame(records: Sequence[EpisodeRecord]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in records], columns=RECORD_COLUMNS)


def write_records(records: Sequence[EpisodeRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_frame(records).to_csv(path, index=False, float_format="%.6f")
    return path


def month_summary(records: Sequence[EpisodeRecord]) -> pd.DataFrame:
    """Per-month mean/SD of TWR50 and forecast score (population SD), in first-seen month order."""
    frame = records_frame(records)
    if frame.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    grouped = frame.groupby("month", sort=False)
    summary = pd.DataFrame({
        "episodes": grouped.size(),
        "mean_twr50": grouped["twr50"].mean(),
        "sd_twr50": grouped["twr50"].std(ddof=0),
        "mean_fs": grouped["fs"].mean(),
        "sd_fs": grouped["fs"].std(ddof=0),
    }).reset_index()
    return summary[SUMMARY_COLUMNS]


# Heatmaps

@dataclass
class JointHistogram:
    """FS x TWR50 counts; `counts[i, j]` is FS bin i, TWR bin j."""
    fs_edges: np.ndarray
    twr_edges: np.ndarray
    counts: np.ndarray
    min_count: int
    excluded_fs_bins: np.ndarray
    records_binned: int

    @property
    def filtered_counts(self) -> np.ndarray:
        """Counts with cells below min_count (and excluded FS bins) set to 0."""
        filtered = np.where(self.counts >= self.min_count, self.counts, 0)
        filtered[self.excluded_fs_bins, :] = 0
        return filtered

    def to_frame(self) -> pd.DataFrame:
        """TWR50 bins as rows (highest first), FS bins as columns; filtered cells are empty."""
        def labels(edges):
            return [f"{lo:.2f}-{hi:.2f}" for lo, hi in zip(edges[:-1], edges[1:])]

        keep = (self.counts >= self.min_count) & ~self.excluded_fs_bins[:, None]
        values = np.where(keep, self.counts, np.nan).T[::-1]
        frame = pd.DataFrame(values, index=labels(self.twr_edges)[::-1], columns=labels(self.fs_edges))
        frame.index.name = "twr50_bin"
        return frame.astype("Int64")


def _check_edges(edges, name: str) -> np.ndarray:
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or not np.all(np.diff(edges) > 0):
        raise ConfigurationError(f"{name} bin edges must be at least 2 strictly increasing values")
    return edges


def joint_histogram(fs_values: Sequence[float], twr_values: Sequence[float], fs_edges, twr_edges,
                    min_count: int = 5, zero_threshold: Optional[float] = None) -> JointHistogram:
    """Bin (FS, TWR50) pairs.

    With zero_threshold, records whose FS is below it are dropped and the FS bins
    lying entirely below it are flagged excluded.
    """
    fs_edges = _check_edges(fs_edges, "forecast score")
    twr_edges = _check_edges(twr_edges, "TWR")
    fs = np.asarray(fs_values, dtype=float)
    twr = np.asarray(twr_values, dtype=float)
    if fs.size == 0:
        raise EmptyInputError("joint histogram needs at least one record")
    excluded = np.zeros(fs_edges.size - 1, dtype=bool)
    if zero_threshold is not None:
        keep = fs >= zero_threshold
        fs, twr = fs[keep], twr[keep]
        excluded = fs_edges[1:] <= zero_threshold + 1e-12
    counts, _, _ = np.histogram2d(fs, twr, bins=[fs_edges, twr_edges])
    return JointHistogram(fs_edges, twr_edges, counts.astype(np.int64), int(min_count), excluded, int(fs.size))


def campaign_histogram(records: Sequence[EpisodeRecord], cfg: EvalConfig, zero_filter: bool = True) -> JointHistogram:
    return joint_histogram([r.fs for r in records], [r.twr50 for r in records], cfg.fs_edges(), cfg.twr_edges(),
                           cfg.min_count, cfg.zero_threshold if zero_filter else None)


# Model comparison

@dataclass
class ModelDiffReport:
    """Per-level and aggregate direction/magnitude differences between two grids."""
    levels: pd.DataFrame
    aggregate: dict


LEVEL_COLUMNS = ["month", "level", "altitude_a", "altitude_b", "samples",
                 "angle_mean", "angle_std", "magnitude_mean", "magnitude_std"]


def map_levels(a: WindGrid, b: WindGrid) -> np.ndarray:
    """For each level of `a`, the index of the `b` level with the nearest mean altitude."""
    alt_a = a.mean_level_altitudes
    alt_b = b.mean_level_altitudes
    return np.argmin(np.abs(alt_a[:, None] - alt_b[None, :]), axis=1)


def compare_models(a: WindGrid, b: WindGrid, max_cells: int = 2000, seed: int = 0,
                   month: str = "") -> ModelDiffReport:
    """Folded angular and absolute speed differences of `b` against the nodes of `a`.

    Cells are the (time, lat, lon) nodes of `a` inside the overlap of both
    grids; above max_cells a seeded uniform subset is used.
    """
    box = a.bounding_box.intersect(b.bounding_box)
    if box is None:
        raise CoverageError("space", "grids do not overlap horizontally")
    t_low, t_high = max(a.time_span[0], b.time_span[0]), min(a.time_span[1], b.time_span[1])
    ti = np.flatnonzero((a.times >= t_low) & (a.times <= t_high))
    li = np.flatnonzero((a.latitudes >= box.lat_min) & (a.latitudes <= box.lat_max))
    oi = np.flatnonzero((a.longitudes >= box.lon_min) & (a.longitudes <= box.lon_max))
    if ti.size == 0 or li.size == 0 or oi.size == 0:
        raise CoverageError("time" if ti.size == 0 else "space", "no grid nodes of one model inside the overlap")

    cells = np.array(np.meshgrid(ti, li, oi, indexing="ij")).reshape(3, -1).T
    if cells.shape[0] > max_cells:
        rng = np.random.default_rng(seed)
        cells = cells[np.sort(rng.choice(cells.shape[0], size=max_cells, replace=False))]

    mapping = map_levels(a, b)
    ua = a.u[cells[:, 0], :, cells[:, 1], cells[:, 2]]
    va = a.v[cells[:, 0], :, cells[:, 1], cells[:, 2]]
    ub = np.empty_like(ua)
    vb = np.empty_like(va)
    for k, (t, i, j) in enumerate(cells):
        column = sample_column(b, GeoCoord(a.latitudes[i], a.longitudes[j]), int(a.times[t]))
        ub[k] = column.u[mapping]
        vb[k] = column.v[mapping]

    angle = fold_angles(wind_bearings(ua, va), wind_bearings(ub, vb))
    magnitude = np.abs(np.hypot(ua, va) - np.hypot(ub, vb))
    level_values = a.pressures if a.is_pressure_based else a.level_altitudes
    rows = []
    for level in range(a.n_levels):
        rows.append({
            "month": month,
            "level": float(level_values[level]),
            "altitude_a": float(a.mean_level_altitudes[level]),
            "altitude_b": float(b.mean_level_altitudes[mapping[level]]),
            "samples": int(cells.shape[0]),
            "angle_mean": float(angle[:, level].mean()),
            "angle_std": float(angle[:, level].std()),
            "magnitude_mean": float(magnitude[:, level].mean()),
            "magnitude_std": float(magnitude[:, level].std()),
        })
    aggregate = {
        "month": month,
        "samples": int(angle.size),
        "angle_mean": float(angle.mean()),
        "angle_std": float(angle.std()),
        "magnitude_mean": float(magnitude.mean()),
        "magnitude_std": float(magnitude.std()),
    }
    return ModelDiffReport(pd.DataFrame(rows, columns=LEVEL_COLUMNS), aggregate)


# Forecast-score studies

def _month_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), index]).generate_state(1)[0])


def paired_distributions(months: Sequence[GridPair], samples: int, seed: int, cfg: ScoreConfig,
                         workers: int = 1, filter_zero: bool = False
                         ) -> List[Tuple[str, ScoreDistribution]]:
    """Forecast-grid distributions with the truth grid scored at the same tuples."""
    return [(pair.label, score_distribution(pair.forecast, samples, _month_seed(seed, i), cfg,
                                            filter_zero=filter_zero, paired=pair.truth, workers=workers))
            for i, pair in enumerate(months)]


def zero_score_table(months: Sequence[GridPair], samples: int, seed: int, cfg: ScoreConfig,
                     workers: int = 1,
                     distributions: Optional[List[Tuple[str, ScoreDistribution]]] = None) -> pd.DataFrame:
    """Per-month fraction of zero forecast scores for both models."""
    if distributions is None:
        distributions = paired_distributions(months, samples, seed, cfg, workers)
    rows = [{
        "month": label,
        "samples": int(dist.raw_scores.size),
        "forecast_zero_fraction": dist.zero_fraction,
        "synthetic_zero_fraction": dist.paired.zero_fraction,
    } for label, dist in distributions]
    return pd.DataFrame(rows, columns=["month", "samples", "forecast_zero_fraction", "synthetic_zero_fraction"])


def score_means_table(distributions: Sequence[Tuple[str, ScoreDistribution]]) -> pd.DataFrame:
    """Per-month mean/SD of nonzero scores per model and of the paired difference (synthetic - forecast)."""
    rows = []
    for label, dist in distributions:
        forecast = dist.raw_scores
        synthetic = dist.paired.raw_scores
        nonzero_f = forecast[forecast != 0.0]
        nonzero_s = synthetic[synthetic != 0.0]
        diff = synthetic - forecast
        rows.append({
            "month": label,
            "forecast_mean": float(nonzero_f.mean()) if nonzero_f.size else np.nan,
            "forecast_std": float(nonzero_f.std()) if nonzero_f.size else np.nan,
            "synthetic_mean": float(nonzero_s.mean()) if nonzero_s.size else np.nan,
            "synthetic_std": float(nonzero_s.std()) if nonzero_s.size else np.nan,
            "diff_mean": float(diff.mean()),
            "diff_std": float(diff.std()),
        })
    return pd.DataFrame(rows, columns=["month", "forecast_mean", "forecast_std", "synthetic_mean",
                                       "synthetic_std", "diff_mean", "diff_std"])
