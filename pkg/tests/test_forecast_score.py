import numpy as np
import pytest

from models.config_models import ScoreConfig
from models.geo_models import GeoCoord, WindVector
from services.forecast_score_service import (
    bin_direction,
    forecast_score,
    opposing_score,
    score_distribution,
    score_times,
)
from services.sample_data_service import build_sample_pair, constant_wind_grid, layered_wind_grid
from utils.errors import CoverageError, EmptyInputError, GridBoundsError

CENTER = GeoCoord(33.0, -110.0)


def _column(bearings, speed=5.0):
    return [WindVector.from_bearing(b, speed) for b in bearings]


def _max_opposing_pairs(bins, num_bins):
    """Largest set of disjoint level pairs whose bins are opposite, by exhaustive search."""
    if len(bins) < 2:
        return 0
    first, rest = bins[0], bins[1:]
    best = _max_opposing_pairs(rest, num_bins)
    for j, other in enumerate(rest):
        if (first - other) % num_bins == num_bins // 2:
            best = max(best, 1 + _max_opposing_pairs(rest[:j] + rest[j + 1:], num_bins))
    return best


@pytest.mark.parametrize("bearing, expected", [
    (0.0, 1), (22.4, 1), (22.5, 2), (90.0, 3), (180.0, 5), (337.5, 1), (337.4, 8), (359.9, 1),
])
def test_bin_direction_default_edges(bearing, expected):
    assert bin_direction(bearing, ScoreConfig()) == expected


def test_single_direction_column_scores_zero():
    result = opposing_score(_column([90.0] * 7), ScoreConfig())
    assert result.t_norm == 0.0
    assert result.histogram.counts[2] == 7


def test_one_opposing_pair_scores_one():
    result = opposing_score(_column([0.0, 180.0]), ScoreConfig())
    assert result.t_norm == 1.0
    assert result.pairs == 1


def test_random_columns_match_exhaustive_pairing():
    cfg = ScoreConfig()
    rng = np.random.default_rng(42)
    for _ in range(200):
        bearings = rng.integers(0, 360, size=7) + 0.3
        column = _column(bearings, speed=float(rng.uniform(3.0, 15.0)))
        bins = [bin_direction(w.direction, cfg) for w in column]
        expected = _max_opposing_pairs(bins, cfg.num_bins) / 3
        result = opposing_score(column, cfg)
        assert result.t_norm == pytest.approx(expected)
        assert sum(result.histogram.counts) == result.histogram.levels_counted == 7


@pytest.mark.parametrize("rotation", [45.0, 180.0])
def test_rotation_by_bin_width_or_half_turn_preserves_score(rotation):
    cfg = ScoreConfig()
    rng = np.random.default_rng(7)
    for _ in range(50):
        bearings = rng.integers(0, 360, size=9) + 0.3
        base = opposing_score(_column(bearings), cfg).t_norm
        turned = opposing_score(_column((bearings + rotation) % 360.0), cfg).t_norm
        assert turned == pytest.approx(base)


def test_calm_levels_excluded_by_default():
    column = _column([0.0, 180.0]) + _column([90.0, 90.0], speed=1.0)
    excluded = opposing_score(column, ScoreConfig())
    assert excluded.t_norm == 1.0
    assert excluded.histogram.levels_counted == 2
    included = opposing_score(column, ScoreConfig(exclude_calm=False))
    assert included.t_norm == 0.5
    assert included.histogram.levels_counted == 4


def test_all_calm_column_scores_zero():
    result = opposing_score(_column([0.0, 180.0, 90.0], speed=0.5), ScoreConfig())
    assert result.t_norm == 0.0
    assert result.histogram.levels_counted == 0


def test_empty_column_rejected():
    with pytest.raises(EmptyInputError):
        opposing_score([], ScoreConfig())


def test_appending_opposing_level_never_lowers_pair_count():
    cfg = ScoreConfig()
    base = opposing_score(_column([0.0, 0.0, 0.0, 180.0]), cfg)
    extended = opposing_score(_column([0.0, 0.0, 0.0, 180.0, 180.0]), cfg)
    assert extended.pairs >= base.pairs


def test_uniform_grid_scores_zero():
    grid = constant_wind_grid(7.0, 0.0)
    result = forecast_score(grid, CENTER, score_times(grid.times[0], ScoreConfig()), ScoreConfig())
    assert result.value == 0.0
    assert result.per_timestamp == [0.0] * 5


def test_half_opposing_grid_scores_one(opposing_grid_layers):
    cfg = ScoreConfig()
    result = forecast_score(opposing_grid_layers, CENTER, score_times(opposing_grid_layers.times[0], cfg), cfg)
    assert result.value == 1.0
    assert len(result.histograms) == cfg.n_timestamps


def test_two_layer_grid_with_calm_transition(opposing_grid):
    # 3 eastward, 1 calm and 7 westward levels
    cfg = ScoreConfig()
    result = forecast_score(opposing_grid, CENTER, [opposing_grid.times[0]], cfg)
    assert result.value == pytest.approx(0.6)
    assert result.per_timestamp == [result.value]


def test_score_averages_timestamps(opposing_grid_layers):
    u = np.array(opposing_grid_layers.u)
    u[4:] = 5.0
    grid = opposing_grid_layers.replace(u=u)
    result = forecast_score(grid, CENTER, [grid.times[0], grid.times[4]], ScoreConfig())
    assert result.per_timestamp == [1.0, 0.0]
    assert result.value == 0.5


def test_score_outside_grid_propagates_bounds_error(opposing_grid_layers):
    with pytest.raises(GridBoundsError):
        forecast_score(opposing_grid_layers, GeoCoord(45.0, -110.0), [opposing_grid_layers.times[0]], ScoreConfig())


def test_score_times_evenly_spaced():
    times = score_times(0, ScoreConfig(window_hours=20.0))
    assert times == pytest.approx([0.0, 18000.0, 36000.0, 54000.0, 72000.0])
    assert score_times(100, ScoreConfig(n_timestamps=1)) == [100.0]


def test_uniform_grid_distribution_all_zero():
    dist = score_distribution(constant_wind_grid(0.0, 8.0), 50, seed=3, cfg=ScoreConfig(window_hours=6.0))
    assert dist.zero_fraction == 1.0
    assert dist.raw_scores.size == 50


def test_distribution_reproducible_and_worker_independent(varied_grid):
    cfg = ScoreConfig(window_hours=6.0)
    first = score_distribution(varied_grid, 40, seed=11, cfg=cfg)
    again = score_distribution(varied_grid, 40, seed=11, cfg=cfg, workers=3)
    np.testing.assert_array_equal(first.raw_scores, again.raw_scores)
    assert first.mean == again.mean
    assert first.std == again.std
    assert first.samples == again.samples


def test_filter_zero_drops_zero_scores(opposing_grid):
    paired_source = constant_wind_grid(5.0, 0.0)
    dist = score_distribution(paired_source, 30, seed=2, cfg=ScoreConfig(window_hours=6.0), filter_zero=True,
                              paired=opposing_grid)
    assert dist.scores.size == 0
    assert dist.zero_fraction == 1.0
    assert dist.paired.samples == dist.samples
    assert dist.paired.zero_fraction == 0.0
    assert np.all(dist.paired.scores > 0)


def test_window_longer_than_grid_span_rejected(varied_grid):
    with pytest.raises(CoverageError) as err:
        score_distribution(varied_grid, 5, seed=0, cfg=ScoreConfig(window_hours=30.0))
    assert err.value.axis == "time"


def test_zero_samples_rejected(varied_grid):
    with pytest.raises(EmptyInputError):
        score_distribution(varied_grid, 0, seed=0, cfg=ScoreConfig(window_hours=6.0))


def test_synthetic_scores_at_least_forecast_on_sample_day(sample_soundings):
    truth, forecast, _ = build_sample_pair(sample_soundings, seed=0)
    dist = score_distribution(forecast, 100, seed=5, cfg=ScoreConfig(window_hours=6.0), paired=truth)
    assert dist.kind == "forecast"
    assert dist.paired.kind == "synthetic"
    assert dist.paired.mean >= dist.mean


@pytest.fixture
def opposing_grid_layers():
    u = np.array([5.0] * 5 + [-5.0] * 6)
    return layered_wind_grid(u, np.zeros(11))
