"""Discrete-time station-keeping simulator.

The balloon drifts with the truth (synthetic) grid while the agent observes the
forecast grid. Each step samples a vertical rate for the chosen action, advects
the balloon with the truth wind at its pre-step position and time, clamps the
altitude to the arena and scores the new distance to the station.
"""
import math
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from models.config_models import RewardConfig, SimConfig
from models.episode_models import (
    Action,
    ColumnLevel,
    EpisodeResult,
    EpisodeState,
    Observation,
    StepResult,
    TrajectoryRecord,
    TWRReport,
)
from models.geo_models import GeoCoord, WindGrid
from services.wind_service import (
    bearing_between,
    displace,
    fold_angle,
    haversine_distance,
    sample_column,
    sample_wind,
    wind_bearings,
)
from utils.errors import ConfigurationError, CoverageError
from utils.timeutil import format_utc, to_epoch

Policy = Callable[[Observation], int]

TRAJECTORY_COLUMNS = ["time_utc", "lat", "lon", "alt_m", "action", "reward", "distance_km"]


# Rewards

def reward(distance_km: float, cfg: RewardConfig) -> float:
    """Distance reward for the configured variant."""
    delta = float(distance_km)
    if cfg.variant == "piecewise":
        if delta <= cfg.rho_25km:
            return 2.0
        if delta <= cfg.rho_50km:
            return 1.0
    elif delta < cfg.rho_50km:
        return 1.0 if cfg.variant == "loon" else abs(delta)
    return cfg.c_cliff * 2.0 ** (-(delta - cfg.rho_50km) / cfg.tau)


# Observations

def select_column_levels(grid: WindGrid, cfg: SimConfig) -> np.ndarray:
    """Level indices of the observation wind column, ordered by altitude.

    Pressure grids use the levels inside column_pressure_range; altitude grids the
    levels inside the arena's vertical range. Extra candidates are thinned to
    evenly spaced indices.
    """
    if grid.is_pressure_based:
        low, high = cfg.column_pressure_range
        candidates = np.flatnonzero((grid.pressures >= low) & (grid.pressures <= high))
    else:
        floor, ceiling = cfg.arena.vertical_range
        altitudes = grid.mean_level_altitudes
        candidates = np.flatnonzero((altitudes >= floor) & (altitudes <= ceiling))
    if candidates.size < cfg.column_levels:
        raise ConfigurationError(
            f"observation grid has {candidates.size} candidate column levels, "
            f"sim.column_levels needs {cfg.column_levels}")
    picks = np.round(np.linspace(0, candidates.size - 1, cfg.column_levels)).astype(int)
    return candidates[picks]


def build_observation(grid: WindGrid, state: EpisodeState, level_indices: Sequence[int]) -> Observation:
    """Observation of the state from one grid; reads nothing but `grid` and `state`."""
    position = state.position
    distance = haversine_distance(position, state.station)
    to_station = bearing_between(position, state.station).degrees

    column = sample_column(grid, position, state.time)
    index = np.asarray(level_indices, dtype=int)
    u, v, altitudes = column.u[index], column.v[index], column.altitudes[index]
    bearings = wind_bearings(u, v)
    magnitudes = np.hypot(u, v)

    heading = state.heading
    if heading is None:
        here = sample_wind(grid, position, state.time)
        heading = here.direction
    levels = tuple(
        ColumnLevel(float(altitudes[i]), float(magnitudes[i]), fold_angle(float(bearings[i]), to_station))
        for i in range(index.size)
    )
    return Observation(position.altitude, distance, fold_angle(heading, to_station), levels)


class ObservationNormalizer:
    """Fixed affine map of observations to network inputs.

    Altitudes map [floor, ceiling] to [0, 1], distances are divided by rho_50km,
    bearings by 180 and magnitudes by speed_scale.
    """

    def __init__(self, floor: float, ceiling: float, distance_scale: float, speed_scale: float,
                 column_levels: int):
        self.floor = float(floor)
        self.ceiling = float(ceiling)
        self.distance_scale = float(distance_scale)
        self.speed_scale = float(speed_scale)
        self.column_levels = int(column_levels)
        span = self.ceiling - self.floor
        level_scale = [1.0 / span, 1.0 / self.speed_scale, 1.0 / 180.0]
        level_offset = [-self.floor / span, 0.0, 0.0]
        self.scale = np.array([1.0 / span, 1.0 / self.distance_scale, 1.0 / 180.0] + level_scale * self.column_levels)
        self.offset = np.array([-self.floor / span, 0.0, 0.0] + level_offset * self.column_levels)

    @classmethod
    def from_configs(cls, sim_cfg: SimConfig, reward_cfg: RewardConfig) -> "ObservationNormalizer":
        floor, ceiling = sim_cfg.arena.vertical_range
        return cls(floor, ceiling, reward_cfg.rho_50km, sim_cfg.speed_scale, sim_cfg.column_levels)

    @property
    def size(self) -> int:
        return self.scale.size

    def normalize(self, observation: Observation) -> np.ndarray:
        return (observation.as_array() * self.scale + self.offset).astype(np.float32)

    def denormalize(self, vector: np.ndarray) -> np.ndarray:
        return (np.asarray(vector, dtype=np.float64) - self.offset) / self.scale

    def to_dict(self) -> dict:
        return {
            "floor": self.floor, "ceiling": self.ceiling, "distance_scale": self.distance_scale,
            "speed_scale": self.speed_scale, "column_levels": self.column_levels,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ObservationNormalizer":
        return cls(data["floor"], data["ceiling"], data["distance_scale"], data["speed_scale"],
                   data["column_levels"])


# Environment

def check_coverage(grid: WindGrid, station: GeoCoord, start_time: float, sim_cfg: SimConfig,
                   label: str, duration: Optional[float] = None):
    """Raise CoverageError if the grid misses the arena box or the episode window."""
    box = sim_cfg.arena.bounding_box(station)
    grid_box = grid.bounding_box
    if box.lat_min < grid_box.lat_min or box.lat_max > grid_box.lat_max:
        raise CoverageError("latitude", f"{label} grid [{grid_box.lat_min}, {grid_box.lat_max}] "
                                        f"does not cover arena [{box.lat_min:.3f}, {box.lat_max:.3f}]")
    if box.lon_min < grid_box.lon_min or box.lon_max > grid_box.lon_max:
        raise CoverageError("longitude", f"{label} grid [{grid_box.lon_min}, {grid_box.lon_max}] "
                                         f"does not cover arena [{box.lon_min:.3f}, {box.lon_max:.3f}]")
    end_time = start_time + (sim_cfg.episode_seconds if duration is None else duration)
    t0, t1 = grid.time_span
    if start_time < t0 or end_time > t1:
        raise CoverageError("time", f"{label} grid {format_utc(t0)}..{format_utc(t1)} does not cover "
                                    f"{format_utc(start_time)}..{format_utc(end_time)}")


class StationKeepingEnv:
    """Episode simulator over a truth/forecast grid pair."""

    def __init__(self, truth: WindGrid, forecast: WindGrid, sim_cfg: SimConfig, reward_cfg: RewardConfig):
        self.truth = truth
        self.forecast = forecast
        self.sim_cfg = sim_cfg
        self.reward_cfg = reward_cfg
        self.observation_grid = truth if sim_cfg.observe_truth else forecast
        self.level_indices = select_column_levels(self.observation_grid, sim_cfg)
        self.rng = np.random.default_rng(sim_cfg.rng_seed)
        self._rates = {
            Action.ASCEND: (sim_cfg.actions.ascend_mean, sim_cfg.actions.ascend_std),
            Action.DESCEND: (sim_cfg.actions.descend_mean, sim_cfg.actions.descend_std),
            Action.STAY: (sim_cfg.actions.stay_mean, sim_cfg.actions.stay_std),
        }

    def observe(self, state: EpisodeState) -> Observation:
        return build_observation(self.observation_grid, state, self.level_indices)

    def reset(self, seed: Optional[int] = None, rng: Optional[np.random.Generator] = None,
              station: Optional[GeoCoord] = None, start_time=None) -> Tuple[EpisodeState, Observation]:
        """Start an episode at the station at a uniform-random initial altitude.

        `rng` (or a generator made from `seed`) becomes the episode's generator
        for the initial altitude and every action's vertical rate.
        """
        if rng is not None:
            self.rng = rng
        elif seed is not None:
            self.rng = np.random.default_rng(seed)
        station = station or self.sim_cfg.arena.center
        start = float(self.truth.times[0]) if start_time is None else to_epoch(start_time)
        check_coverage(self.truth, station, start, self.sim_cfg, "truth")
        check_coverage(self.forecast, station, start, self.sim_cfg, "forecast")

        low, high = self.sim_cfg.init_altitude_range
        altitude = float(self.rng.uniform(low, high))
        state = EpisodeState(
            position=station.with_altitude(altitude),
            station=station.with_altitude(0.0),
            time=start,
            start_time=start,
        )
        return state, self.observe(state)

    def vertical_rate(self, action: Action) -> float:
        mean, std = self._rates[Action(action)]
        return float(self.rng.normal(mean, std))

    def step(self, state: EpisodeState, action: int) -> StepResult:
        """Advance one step; `state` is updated in place and returned."""
        state.require_active()
        action = Action(int(action))
        dt = self.sim_cfg.step_dt

        rate = self.vertical_rate(action)
        wind = sample_wind(self.truth, state.position, state.time)
        moved = displace(state.position, wind, dt)
        altitude = self.sim_cfg.arena.clamp_altitude(state.position.altitude + rate * dt)
        new_position = moved.with_altitude(altitude)

        drift = bearing_between(state.position, new_position)
        if not drift.coincident:
            state.heading = drift.degrees
        state.position = new_position
        state.time += dt
        state.step_index += 1

        distance = haversine_distance(new_position, state.station)
        r = reward(distance, self.reward_cfg)
        state.cumulative_reward += r
        state.trajectory.append(TrajectoryRecord(
            state.time, new_position.latitude, new_position.longitude, altitude, int(action), r, distance))
        state.done = state.step_index >= self.sim_cfg.episode_steps
        return StepResult(state, self.observe(state), r, state.done)


def place_arena(truth: WindGrid, forecast: WindGrid, sim_cfg: SimConfig, rng: np.random.Generator,
                duration: Optional[float] = None) -> Tuple[GeoCoord, float]:
    """Random station coordinate and whole-hour start time fully covered by both grids."""
    box = truth.bounding_box.intersect(forecast.bounding_box)
    if box is None:
        raise CoverageError("space", "truth and forecast grids do not overlap")
    half_lat, _ = sim_cfg.arena.half_extent_degrees(0.0)
    worst_lat = max(abs(box.lat_min), abs(box.lat_max))
    _, half_lon = sim_cfg.arena.half_extent_degrees(min(worst_lat, 89.0))
    lat_low, lat_high = box.lat_min + half_lat, box.lat_max - half_lat
    lon_low, lon_high = box.lon_min + half_lon, box.lon_max - half_lon
    if lat_low > lat_high or lon_low > lon_high:
        raise CoverageError("space", "grid overlap is smaller than the arena")

    needed = sim_cfg.episode_seconds if duration is None else max(duration, sim_cfg.episode_seconds)
    t_low = max(truth.time_span[0], forecast.time_span[0])
    t_high = min(truth.time_span[1], forecast.time_span[1]) - needed
    first_hour = int(math.ceil(t_low / 3600.0))
    last_hour = int(math.floor(t_high / 3600.0))
    if last_hour < first_hour:
        raise CoverageError("time", "grid overlap is shorter than one episode")

    latitude = float(rng.uniform(lat_low, lat_high))
    longitude = float(rng.uniform(lon_low, lon_high))
    start = 3600.0 * int(rng.integers(first_hour, last_hour + 1))
    return GeoCoord(latitude, longitude), start


def run_episode(policy: Policy, env: StationKeepingEnv, seed: Optional[int] = None,
                rng: Optional[np.random.Generator] = None, station: Optional[GeoCoord] = None,
                start_time=None, **metadata) -> EpisodeResult:
    """Run one full episode with `policy` and report time within 25/50/75 km."""
    state, observation = env.reset(seed=seed, rng=rng, station=station, start_time=start_time)
    while not state.done:
        result = env.step(state, policy(observation))
        observation = result.observation
    report = TWRReport.from_distances(
        [r.distance_km for r in state.trajectory],
        seed=seed, latitude=state.station.latitude, longitude=state.station.longitude,
        start_time=state.start_time, total_reward=state.cumulative_reward, **metadata)
    return EpisodeResult(report, state.trajectory, state.cumulative_reward)


def random_policy(rng: np.random.Generator) -> Policy:
    """Uniform-random action policy."""
    return lambda observation: int(rng.integers(0, len(Action)))


def trajectory_frame(records: Sequence[TrajectoryRecord]) -> pd.DataFrame:
    return pd.DataFrame({
        "time_utc": [format_utc(r.time) for r in records],
        "lat": [r.latitude for r in records],
        "lon": [r.longitude for r in records],
        "alt_m": [r.altitude for r in records],
        "action": [Action(r.action).name.lower() for r in records],
        "reward": [r.reward for r in records],
        "distance_km": [r.distance_km for r in records],
    }, columns=TRAJECTORY_COLUMNS)


def write_trajectory_csv(records: Sequence[TrajectoryRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trajectory_frame(records).to_csv(path, index=False, float_format="%.6f")
    return path
