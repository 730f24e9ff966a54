"""Configuration data models."""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from models.geo_models import ArenaSpec
from utils.errors import ConfigurationError

REWARD_VARIANTS = ("loon", "piecewise", "euclidean")


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigurationError(message)


def _is_integral(value: float, tol: float = 1e-9) -> bool:
    return abs(value - round(value)) <= tol * max(1.0, abs(value))


@dataclass
class ActionModel:
    """Vertical-rate distributions (m/s) per action."""
    ascend_mean: float = 1.80
    ascend_std: float = 0.14
    descend_mean: float = -2.80
    descend_std: float = 0.30
    stay_mean: float = 0.00
    stay_std: float = 1.25

    def __post_init__(self):
        _require(min(self.ascend_std, self.descend_std, self.stay_std) >= 0,
                 "action standard deviations must be non-negative")


@dataclass
class SimConfig:
    """Episode simulator configuration."""
    step_dt: float = 60.0
    episode_hours: float = 20.0
    arena: ArenaSpec = field(default_factory=ArenaSpec)
    init_altitude_range: Tuple[float, float] = (15000.0, 25000.0)
    rng_seed: int = 0
    column_levels: int = 7
    column_pressure_range: Tuple[float, float] = (20.0, 150.0)
    speed_scale: float = 30.0
    observe_truth: bool = False  # perfect-forecast mode
    actions: ActionModel = field(default_factory=ActionModel)

    def __post_init__(self):
        _require(self.step_dt > 0, "sim.step_dt must be positive")
        _require(self.episode_hours > 0, "sim.episode_hours must be positive")
        _require(_is_integral(self.episode_hours * 3600.0 / self.step_dt),
                 "sim.episode_hours * 3600 / step_dt must be integral")
        low, high = self.init_altitude_range
        floor, ceiling = self.arena.vertical_range
        _require(floor <= low <= high <= ceiling,
                 "sim.init_altitude_range must lie inside arena.vertical_range")
        _require(self.column_levels >= 1, "sim.column_levels must be at least 1")
        p_low, p_high = self.column_pressure_range
        _require(0 < p_low < p_high, "sim.column_pressure_range must be increasing and positive")
        _require(self.speed_scale > 0, "sim.speed_scale must be positive")
        self.init_altitude_range = (float(low), float(high))
        self.column_pressure_range = (float(p_low), float(p_high))

    @property
    def episode_steps(self) -> int:
        return int(round(self.episode_hours * 3600.0 / self.step_dt))

    @property
    def episode_seconds(self) -> float:
        return self.episode_steps * self.step_dt


@dataclass
class RewardConfig:
    """Distance reward: loon, piecewise or euclidean variant."""
    variant: str = "piecewise"
    rho_50km: float = 50.0
    rho_25km: float = 25.0
    c_cliff: float = 0.4
    tau: float = 100.0

    def __post_init__(self):
        _require(self.variant in REWARD_VARIANTS,
                 f"reward.variant must be one of {', '.join(REWARD_VARIANTS)}")
        _require(0 < self.rho_25km < self.rho_50km, "reward radii must satisfy 0 < rho_25km < rho_50km")
        _require(0 < self.c_cliff <= 1, "reward.c_cliff must be in (0, 1]")
        _require(self.tau > 0, "reward.tau must be positive")


@dataclass
class SynthesisConfig:
    """Radiosonde-to-grid synthesis configuration."""
    bin_height: float = 250.0
    altitude_window: Tuple[float, float] = (15000.0, 26500.0)
    grid_resolution: float = 0.25
    smoothing_sigma: float = 2.0
    temporal_step: float = 3.0
    region: Tuple[float, float, float, float] = (31.5, 36.5, -113.0, -105.5)

    def __post_init__(self):
        floor, ceiling = self.altitude_window
        _require(self.bin_height > 0, "synthesis.bin_height must be positive")
        _require(floor < ceiling, "synthesis.altitude_window floor must be below ceiling")
        _require(_is_integral((ceiling - floor) / self.bin_height),
                 "synthesis.altitude_window span must be a multiple of bin_height")
        _require(self.grid_resolution > 0, "synthesis.grid_resolution must be positive")
        _require(self.smoothing_sigma >= 0, "synthesis.smoothing_sigma must be non-negative")
        _require(self.temporal_step > 0, "synthesis.temporal_step must be positive")
        lat_min, lat_max, lon_min, lon_max = self.region
        _require(lat_min <= lat_max and lon_min <= lon_max, "synthesis.region must be (lat_min, lat_max, lon_min, lon_max)")
        self.altitude_window = (float(floor), float(ceiling))
        self.region = tuple(float(x) for x in self.region)

    @property
    def n_bins(self) -> int:
        floor, ceiling = self.altitude_window
        return int(round((ceiling - floor) / self.bin_height))


@dataclass
class ScoreConfig:
    """Opposing-winds forecast score configuration."""
    num_bins: int = 8
    center_offset: float = 22.5
    altitude_window: Tuple[float, float] = (13000.0, 27000.0)
    n_timestamps: int = 5
    window_hours: float = 20.0
    calm_threshold: float = 2.0
    exclude_calm: bool = True

    def __post_init__(self):
        _require(self.num_bins >= 4 and self.num_bins % 2 == 0, "score.num_bins must be even and >= 4")
        _require(0 <= self.center_offset < 720.0 / self.num_bins,
                 "score.center_offset must be in [0, 2 * 360 / num_bins)")
        _require(self.altitude_window[0] < self.altitude_window[1], "score.altitude_window must be increasing")
        _require(self.n_timestamps >= 1, "score.n_timestamps must be at least 1")
        _require(self.window_hours >= 0, "score.window_hours must be non-negative")
        _require(self.calm_threshold >= 0, "score.calm_threshold must be non-negative")
        self.altitude_window = (float(self.altitude_window[0]), float(self.altitude_window[1]))


@dataclass
class DQNHyperparams:
    """DQN training hyperparameters."""
    gamma: float = 0.99
    learning_rate: float = 3e-5
    batch_size: int = 64
    target_update_interval: int = 5000
    epsilon_start: float = 0.4
    epsilon_end: float = 0.15
    epsilon_decay_fraction: float = 1.0 / 3.0
    total_steps: int = 200_000
    train_every: int = 4
    warmup_steps: int = 10_000
    hidden_sizes: Tuple[int, ...] = (128, 128)
    replay_capacity: int = 500_000
    eval_interval: int = 10_000
    eval_episodes: int = 20
    checkpoint_interval: int = 50_000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    double_dqn: bool = False
    min_forecast_score: float = 0.0
    max_arena_redraws: int = 20

    def __post_init__(self):
        _require(0 < self.gamma < 1, "dqn.gamma must be in (0, 1)")
        _require(0 < self.learning_rate < 1, "dqn.learning_rate must be in (0, 1)")
        _require(0 <= self.epsilon_end <= self.epsilon_start <= 1,
                 "dqn epsilons must satisfy 0 <= epsilon_end <= epsilon_start <= 1")
        _require(0 < self.epsilon_decay_fraction <= 1, "dqn.epsilon_decay_fraction must be in (0, 1]")
        for name in ("batch_size", "target_update_interval", "total_steps", "train_every",
                     "replay_capacity", "eval_interval", "eval_episodes", "checkpoint_interval"):
            _require(getattr(self, name) > 0, f"dqn.{name} must be positive")
        _require(self.warmup_steps >= 0, "dqn.warmup_steps must be non-negative")
        _require(len(self.hidden_sizes) >= 1 and all(h > 0 for h in self.hidden_sizes),
                 "dqn.hidden_sizes must be a non-empty list of positive sizes")
        _require(0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1 and self.adam_eps > 0,
                 "dqn adam parameters out of range")
        _require(0 <= self.min_forecast_score <= 1, "dqn.min_forecast_score must be in [0, 1]")
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)

    @property
    def epsilon_decay_steps(self) -> float:
        return self.total_steps * self.epsilon_decay_fraction


@dataclass
class SearchSpace:
    """Random hyperparameter search ranges."""
    learning_rate_range: Tuple[float, float] = (1e-5, 1e-4)
    epsilon_start_range: Tuple[float, float] = (0.25, 0.5)
    epsilon_end_range: Tuple[float, float] = (0.10, 0.20)
    trial_steps: int = 20_000
    budget: int = 8

    def __post_init__(self):
        lr_low, lr_high = self.learning_rate_range
        _require(0 < lr_low <= lr_high < 1, "search.learning_rate_range must be within (0, 1)")
        _require(self.epsilon_start_range[0] <= self.epsilon_start_range[1], "search.epsilon_start_range must be increasing")
        _require(self.epsilon_end_range[0] <= self.epsilon_end_range[1], "search.epsilon_end_range must be increasing")
        _require(self.epsilon_end_range[1] <= self.epsilon_start_range[0],
                 "search epsilon ranges must keep epsilon_end <= epsilon_start")
        _require(self.trial_steps > 0, "search.trial_steps must be positive")
        _require(self.budget >= 1, "search.budget must be at least 1")


@dataclass
class EvalConfig:
    """Evaluation campaign and report configuration."""
    episodes_per_month: int = 5000
    score_samples: int = 10_000
    fs_bin_width: float = 0.1
    twr_bin_width: float = 0.1
    min_count: int = 5
    zero_threshold: float = 0.2
    top_trajectories: int = 0
    compare_max_cells: int = 2000

    def __post_init__(self):
        _require(self.episodes_per_month >= 1, "eval.episodes_per_month must be at least 1")
        _require(self.score_samples >= 1, "eval.score_samples must be at least 1")
        _require(0 < self.fs_bin_width <= 1 and 0 < self.twr_bin_width <= 1,
                 "eval bin widths must be in (0, 1]")
        _require(_is_integral(1.0 / self.fs_bin_width) and _is_integral(1.0 / self.twr_bin_width),
                 "eval bin widths must divide 1")
        _require(self.min_count >= 0, "eval.min_count must be non-negative")
        _require(0 <= self.zero_threshold < 1, "eval.zero_threshold must be in [0, 1)")
        _require(self.top_trajectories >= 0, "eval.top_trajectories must be non-negative")
        _require(self.compare_max_cells >= 1, "eval.compare_max_cells must be at least 1")

    def fs_edges(self) -> List[float]:
        n = int(round(1.0 / self.fs_bin_width))
        return [round(i / n, 10) for i in range(n + 1)]

    def twr_edges(self) -> List[float]:
        n = int(round(1.0 / self.twr_bin_width))
        return [round(i / n, 10) for i in range(n + 1)]


@dataclass
class GridPairPaths:
    """Truth (synthetic) and forecast grid header paths for one month/library entry."""
    label: str = ""
    truth: str = ""
    forecast: str = ""

    def __post_init__(self):
        _require(bool(self.truth) and bool(self.forecast), "grid pairs need truth and forecast paths")


@dataclass
class PathsConfig:
    """File locations."""
    soundings_dir: str = ""
    output_dir: str = "runs"
    checkpoint: str = ""
    training_pairs: List[GridPairPaths] = field(default_factory=list)
    eval_months: List[GridPairPaths] = field(default_factory=list)


@dataclass
class RunConfig:
    """Root configuration document."""
    seed: Optional[int] = None
    workers: int = 1
    sim: SimConfig = field(default_factory=SimConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    score: ScoreConfig = field(default_factory=ScoreConfig)
    dqn: DQNHyperparams = field(default_factory=DQNHyperparams)
    search: SearchSpace = field(default_factory=SearchSpace)
    eval: EvalConfig = field(default_factory=EvalConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def __post_init__(self):
        _require(self.seed is None or (isinstance(self.seed, int) and self.seed >= 0),
                 "seed must be a non-negative integer")
        _require(self.workers >= 0, "workers must be non-negative (0 = one per core)")
        _require(not math.isnan(float(self.workers)), "workers must be a number")
