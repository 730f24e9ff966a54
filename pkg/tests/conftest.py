"""Shared fixtures: src/ on the path, a throwaway home directory, wind grids."""
import os
import sys
import tempfile
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))
os.environ.setdefault("HAB_STATION_HOME", tempfile.mkdtemp(prefix="hab_station_test_"))

from models.config_models import ScoreConfig, SimConfig  # noqa: E402
from services.sample_data_service import constant_wind_grid, layered_wind_grid, two_layer_grid  # noqa: E402

SAMPLE_SOUNDINGS = ROOT / "data" / "sample" / "soundings"


@pytest.fixture
def sample_soundings() -> Path:
    return SAMPLE_SOUNDINGS


@pytest.fixture
def sim_cfg() -> SimConfig:
    return SimConfig()


@pytest.fixture
def short_sim_cfg() -> SimConfig:
    return SimConfig(episode_hours=2.0)


@pytest.fixture
def short_score_cfg() -> ScoreConfig:
    return ScoreConfig(window_hours=2.0)


@pytest.fixture
def zero_grid():
    return constant_wind_grid(0.0, 0.0)


@pytest.fixture
def east_grid():
    """Uniform 10 m/s wind toward the east at every level."""
    return constant_wind_grid(10.0, 0.0)


@pytest.fixture
def opposing_grid():
    """Two-layer grid: east below 16 km, west above 20 km, 5 m/s."""
    return two_layer_grid()


@pytest.fixture
def varied_grid():
    """Altitude-dependent winds, all well above the calm threshold."""
    u = [6.0, 4.0, -3.0, -7.0, 5.0, 8.0, -2.5, 3.0, -6.0, 7.5, 4.5]
    v = [3.0, -5.0, 6.0, 2.0, -4.0, 3.5, -7.0, 8.0, 1.5, -2.0, 6.5]
    return layered_wind_grid(u, v)
