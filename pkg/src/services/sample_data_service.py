"""Constructed wind grids and the bundled sample day.

The builders produce altitude-based synthetic grids with analytically known
winds (constant, piecewise-linear layers, two opposing layers) for tests and
walkthroughs. `derive_forecast_grid` turns a synthetic grid into a coarse,
perturbed pressure-level grid that plays the forecast side of a pair.
"""
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from models.config_models import SynthesisConfig
from models.geo_models import KIND_FORECAST, KIND_SYNTHETIC, WindGrid
from models.sounding_models import SynthesisResult
from services.logging_service import get_logging_service
from services.synth_service import densify_time, load_sounding_dir, synthesize_forecast
from services.wind_service import pressure_to_altitude
from storage.grid_store import save_grid
from utils.errors import DataError
from utils.paths import get_sample_data_dir
from utils.timeutil import parse_utc, to_epoch

FORECAST_PRESSURES_HPA = (150.0, 125.0, 100.0, 70.0, 50.0, 30.0, 20.0)

DEFAULT_LATITUDES = np.arange(31.0, 35.0 + 1e-9, 0.25)
DEFAULT_LONGITUDES = np.arange(-112.0, -108.0 + 1e-9, 0.25)
DEFAULT_LEVELS = np.arange(15000.0, 25000.0 + 1e-9, 1000.0)
DEFAULT_START = "2023-08-23T00:00:00Z"


def default_times(start=DEFAULT_START, hours: float = 24.0, step_hours: float = 3.0) -> np.ndarray:
    t0 = int(to_epoch(parse_utc(start) if isinstance(start, str) else start))
    return t0 + np.arange(0, int(hours * 3600) + 1, int(step_hours * 3600), dtype=np.int64)


def _axes(latitudes, longitudes, times, level_altitudes):
    return (
        np.asarray(DEFAULT_LATITUDES if latitudes is None else latitudes, dtype=float),
        np.asarray(DEFAULT_LONGITUDES if longitudes is None else longitudes, dtype=float),
        default_times() if times is None else np.asarray(times, dtype=np.int64),
        np.asarray(DEFAULT_LEVELS if level_altitudes is None else level_altitudes, dtype=float),
    )


def layered_wind_grid(u_profile: Sequence[float], v_profile: Sequence[float], latitudes=None,
                      longitudes=None, times=None, level_altitudes=None,
                      kind: str = KIND_SYNTHETIC) -> WindGrid:
    """Grid whose winds vary only with level: u_profile[k], v_profile[k] everywhere."""
    lats, lons, times, levels = _axes(latitudes, longitudes, times, level_altitudes)
    u_profile = np.asarray(u_profile, dtype=float)
    v_profile = np.asarray(v_profile, dtype=float)
    if u_profile.shape != levels.shape or v_profile.shape != levels.shape:
        raise DataError(f"wind profiles need one value per level ({levels.size})")
    shape = (times.size, levels.size, lats.size, lons.size)
    u = np.broadcast_to(u_profile[None, :, None, None], shape)
    v = np.broadcast_to(v_profile[None, :, None, None], shape)
    return WindGrid(lats, lons, times, u, v, level_altitudes=levels, kind=kind)


def constant_wind_grid(u: float, v: float, latitudes=None, longitudes=None, times=None,
                       level_altitudes=None, kind: str = KIND_SYNTHETIC) -> WindGrid:
    levels = _axes(latitudes, longitudes, times, level_altitudes)[3]
    return layered_wind_grid(np.full(levels.size, float(u)), np.full(levels.size, float(v)),
                             latitudes, longitudes, times, levels, kind)


def profile_wind_grid(control_altitudes: Sequence[float], control_u: Sequence[float],
                      control_v: Sequence[float], **axes) -> WindGrid:
    """Winds linear in altitude between control points, constant beyond them."""
    levels = _axes(axes.get("latitudes"), axes.get("longitudes"), axes.get("times"),
                   axes.get("level_altitudes"))[3]
    u = np.interp(levels, control_altitudes, control_u)
    v = np.interp(levels, control_altitudes, control_v)
    return layered_wind_grid(u, v, axes.get("latitudes"), axes.get("longitudes"), axes.get("times"),
                             levels, axes.get("kind", KIND_SYNTHETIC))


def two_layer_grid(speed: float = 5.0, low_altitude: float = 16000.0, high_altitude: float = 20000.0,
                   **axes) -> WindGrid:
    """Eastward wind at and below low_altitude, westward at and above high_altitude."""
    return profile_wind_grid([low_altitude, high_altitude], [speed, -speed], [0.0, 0.0], **axes)


def _interpolate_levels(grid: WindGrid, targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """u/v of an altitude grid at per-cell target altitudes shaped (time, k, lat, lon)."""
    z = grid.level_altitudes
    upper = np.clip(np.searchsorted(z, targets), 1, z.size - 1)
    lower = upper - 1
    weight = np.clip((targets - z[lower]) / (z[upper] - z[lower]), 0.0, 1.0)

    def blend(field):
        below = np.take_along_axis(field, lower, axis=1)
        above = np.take_along_axis(field, upper, axis=1)
        return (1.0 - weight) * below + weight * above

    return blend(grid.u), blend(grid.v)


def derive_forecast_grid(truth: WindGrid, pressures: Sequence[float] = FORECAST_PRESSURES_HPA,
                         rotation_std_deg: float = 20.0, speed_noise: float = 0.2,
                         altitude_jitter: float = 80.0, seed: int = 0) -> WindGrid:
    """Pressure-level forecast-like grid sampled from an altitude-based grid.

    Each cell's level altitude is the standard-atmosphere height of its pressure
    plus uniform jitter within +/- altitude_jitter. Winds are the truth winds at
    that altitude, rotated by a per-(time, level) normal angle and scaled by a
    per-(time, level) factor 1 + N(0, speed_noise), floored at zero.
    """
    if truth.is_pressure_based:
        raise DataError("forecast derivation needs an altitude-based source grid")
    pressures = np.array(sorted(pressures, reverse=True), dtype=float)
    rng = np.random.default_rng(seed)
    n_times, n_lat, n_lon = truth.times.size, truth.latitudes.size, truth.longitudes.size
    shape = (n_times, pressures.size, n_lat, n_lon)

    standard = np.asarray(pressure_to_altitude(pressures), dtype=float)
    jitter = rng.uniform(-altitude_jitter, altitude_jitter, size=shape)
    altitude = standard[None, :, None, None] + jitter
    u, v = _interpolate_levels(truth, altitude)

    theta = np.radians(rng.normal(0.0, rotation_std_deg, size=(n_times, pressures.size)))[:, :, None, None]
    factor = np.maximum(1.0 + rng.normal(0.0, speed_noise, size=(n_times, pressures.size)), 0.0)[:, :, None, None]
    rotated_u = factor * (u * np.cos(theta) + v * np.sin(theta))
    rotated_v = factor * (v * np.cos(theta) - u * np.sin(theta))
    return WindGrid(truth.latitudes, truth.longitudes, truth.times, rotated_u, rotated_v,
                    pressures=pressures, altitude=altitude, kind=KIND_FORECAST,
                    altitude_tolerance=max(500.0, 2.0 * altitude_jitter))


def build_sample_pair(soundings_dir=None, cfg: Optional[SynthesisConfig] = None,
                      seed: int = 0) -> Tuple[WindGrid, WindGrid, SynthesisResult]:
    """Synthetic truth (densified) and derived forecast grid for the bundled sample day."""
    cfg = cfg or SynthesisConfig()
    soundings_dir = Path(soundings_dir) if soundings_dir else get_sample_data_dir() / "soundings"
    result = synthesize_forecast(load_sounding_dir(soundings_dir), cfg)
    truth = result.grid
    if truth.times.size >= 2:
        truth = densify_time(truth, cfg.temporal_step)
    forecast = derive_forecast_grid(truth, seed=seed)
    return truth, forecast, result


def write_sample_day(out_dir, soundings_dir=None, cfg: Optional[SynthesisConfig] = None,
                     seed: int = 0, metadata: Optional[Dict] = None) -> Dict[str, Path]:
    """Write the sample truth and forecast grids as interchange files."""
    out_dir = Path(out_dir)
    truth, forecast, _ = build_sample_pair(soundings_dir, cfg, seed)
    paths = {
        "truth": save_grid(truth, out_dir / "sample_truth.json", metadata=metadata),
        "forecast": save_grid(forecast, out_dir / "sample_forecast.json", metadata=metadata),
    }
    get_logging_service().info(f"Sample day written to {out_dir} "
                               f"(truth {truth.shape}, forecast {forecast.shape})")
    return paths
