import numpy as np
import pandas as pd
import pytest

from agent.trainer import GridPair
from models.config_models import EvalConfig, RewardConfig, ScoreConfig, SimConfig
from services.eval_service import (
    RECORD_COLUMNS,
    SUMMARY_COLUMNS,
    EvalCampaign,
    compare_models,
    export_top_trajectories,
    joint_histogram,
    month_summary,
    paired_distributions,
    run_campaign,
    run_campaign_episode,
    score_means_table,
    zero_score_table,
)
from services.sample_data_service import constant_wind_grid, derive_forecast_grid
from utils.errors import ConfigurationError, CoverageError, EmptyInputError

SIM = SimConfig(episode_hours=1.0)
SCORE = ScoreConfig(window_hours=2.0)
EDGES = [i / 10 for i in range(11)]


def _stay(observation):
    return 1


def _campaign(months, episodes=3, seed=4):
    return EvalCampaign(months, episodes, seed, SCORE)


@pytest.fixture
def still_month(zero_grid):
    return GridPair("2023-07", zero_grid, derive_forecast_grid(zero_grid, seed=0))


@pytest.fixture
def varied_month(varied_grid):
    return GridPair("2023-08", varied_grid, derive_forecast_grid(varied_grid, seed=1))


# Campaigns

def test_still_air_month_holds_station(still_month):
    result = run_campaign(_campaign([still_month]), _stay, SIM, RewardConfig())
    summary = month_summary(result.records)
    assert list(summary.columns) == SUMMARY_COLUMNS
    assert summary.loc[0, "mean_twr50"] == 1.0
    assert summary.loc[0, "sd_twr50"] == 0.0
    assert summary.loc[0, "episodes"] == 3


def test_record_count_is_months_times_episodes(still_month, varied_month):
    result = run_campaign(_campaign([still_month, varied_month], episodes=4), _stay, SIM, RewardConfig())
    assert len(result.records) == 8
    assert [r.month for r in result.records] == ["2023-07"] * 4 + ["2023-08"] * 4
    summary = month_summary(result.records)
    assert summary["month"].tolist() == ["2023-07", "2023-08"]


def test_records_carry_episode_forecast_scores(varied_month):
    record, trajectory = run_campaign_episode(_campaign([varied_month]), 0, 2, _stay, SIM, RewardConfig())
    assert 0.0 <= record.fs <= 1.0
    assert 0.0 <= record.fs_truth <= 1.0
    assert record.twr25 <= record.twr50 <= record.twr75
    assert len(trajectory) == SIM.episode_steps
    assert record.start_time.endswith(":00:00Z")


def test_campaign_independent_of_worker_count(varied_month):
    campaign = _campaign([varied_month], episodes=4)
    serial = run_campaign(campaign, _stay, SIM, RewardConfig(), workers=1)
    threaded = run_campaign(campaign, _stay, SIM, RewardConfig(), workers=3)
    pd.testing.assert_frame_equal(month_summary(serial.records), month_summary(threaded.records))
    assert serial.records == threaded.records


def test_trajectory_export(varied_month, tmp_path):
    run_campaign(_campaign([varied_month], episodes=2), _stay, SIM, RewardConfig(), trajectory_dir=tmp_path)
    assert sorted(p.name for p in tmp_path.glob("*.csv")) == ["2023-08_00000.csv", "2023-08_00001.csv"]


def test_top_trajectories_rerun_best_episodes(varied_month, tmp_path):
    campaign = _campaign([varied_month], episodes=4)
    result = run_campaign(campaign, _stay, SIM, RewardConfig(), trajectory_dir=tmp_path / "all")
    paths = export_top_trajectories(campaign, result.records, 2, _stay, SIM, RewardConfig(), tmp_path / "top")
    best = sorted(result.records, key=lambda r: (-r.twr50, r.episode))[:2]
    assert [p.name for p in paths] == [f"2023-08_{r.episode:05d}.csv" for r in best]
    for path in paths:
        assert path.read_bytes() == (tmp_path / "all" / path.name).read_bytes()


def test_interrupted_campaign_writes_partial_records(varied_month, tmp_path):
    calls = {"n": 0}

    def interrupting(observation):
        calls["n"] += 1
        if calls["n"] > 2 * SIM.episode_steps:
            raise KeyboardInterrupt
        return 1

    partial = tmp_path / "episodes.partial.csv"
    with pytest.raises(KeyboardInterrupt):
        run_campaign(_campaign([varied_month], episodes=5), interrupting, SIM, RewardConfig(), partial_path=partial)
    frame = pd.read_csv(partial)
    assert list(frame.columns) == RECORD_COLUMNS
    assert frame["episode"].tolist() == [0, 1]


def test_campaign_validation(varied_month):
    with pytest.raises(EmptyInputError):
        EvalCampaign([], 5, 0)
    with pytest.raises(ConfigurationError):
        EvalCampaign([varied_month], 0, 0)


# Heatmaps

def test_all_zero_scores_with_zero_filter_leave_empty_histogram():
    hist = joint_histogram([0.0] * 20, np.linspace(0, 1, 20), EDGES, EDGES, min_count=1, zero_threshold=0.2)
    assert hist.records_binned == 0
    assert hist.filtered_counts.sum() == 0
    assert hist.to_frame().isna().all().all()


def test_unfiltered_counts_sum_to_record_count():
    rng = np.random.default_rng(0)
    fs, twr = rng.uniform(0, 1, 300), rng.uniform(0, 1, 300)
    twr[:5] = 1.0
    hist = joint_histogram(fs, twr, EDGES, EDGES)
    assert hist.counts.sum() == 300


def test_single_record_lands_in_one_cell():
    hist = joint_histogram([0.55], [0.7], EDGES, EDGES, min_count=1)
    assert np.count_nonzero(hist.counts) == 1
    assert hist.counts[5, 7] == 1


def test_min_count_and_zero_bins_filtered_in_frame():
    fs = [0.05] * 9 + [0.15] * 7 + [0.55] * 6 + [0.85] * 2
    twr = [0.5] * 9 + [0.5] * 7 + [0.95] * 6 + [0.35] * 2
    hist = joint_histogram(fs, twr, EDGES, EDGES, min_count=5, zero_threshold=0.2)
    assert hist.excluded_fs_bins.tolist() == [True, True] + [False] * 8
    assert hist.records_binned == 8
    frame = hist.to_frame()
    assert frame.shape == (10, 10)
    assert frame.index[0] == "0.90-1.00"
    assert list(frame.columns)[5] == "0.50-0.60"
    assert frame.loc["0.90-1.00", "0.50-0.60"] == 6
    assert pd.isna(frame.loc["0.30-0.40", "0.80-0.90"])
    assert int(frame.sum().sum()) == 6


def test_degenerate_edges_rejected():
    with pytest.raises(ConfigurationError):
        joint_histogram([0.5], [0.5], [0.0], EDGES)
    with pytest.raises(ConfigurationError):
        joint_histogram([0.5], [0.5], EDGES, [0.0, 0.5, 0.5, 1.0])
    with pytest.raises(EmptyInputError):
        joint_histogram([], [], EDGES, EDGES)


def test_default_edges_are_tenths():
    cfg = EvalConfig()
    assert cfg.fs_edges() == pytest.approx(EDGES)
    assert len(cfg.twr_edges()) == 11


# Model comparison

def _rotated(grid, degrees):
    theta = np.radians(degrees)
    u, v = grid.u, grid.v
    return grid.replace(u=u * np.cos(theta) + v * np.sin(theta), v=v * np.cos(theta) - u * np.sin(theta))


def test_identical_grids_have_no_difference(varied_grid):
    report = compare_models(varied_grid, varied_grid)
    assert report.aggregate["angle_mean"] == pytest.approx(0.0, abs=1e-9)
    assert report.aggregate["magnitude_mean"] == pytest.approx(0.0, abs=1e-9)
    assert (report.levels["angle_std"] < 1e-9).all()


def test_uniform_rotation_shows_as_angle(varied_grid):
    report = compare_models(varied_grid, _rotated(varied_grid, 30.0), month="2023-08")
    assert report.aggregate["angle_mean"] == pytest.approx(30.0, abs=1e-6)
    assert report.aggregate["angle_std"] <= 1e-6
    assert report.aggregate["magnitude_mean"] == pytest.approx(0.0, abs=1e-9)
    assert report.levels["month"].unique().tolist() == ["2023-08"]
    assert len(report.levels) == varied_grid.n_levels


def test_doubled_speed_shows_as_magnitude(varied_grid):
    doubled = varied_grid.replace(u=2 * varied_grid.u, v=2 * varied_grid.v)
    report = compare_models(varied_grid, doubled, max_cells=100, seed=2)
    speeds = np.hypot(varied_grid.u[0, :, 0, 0], varied_grid.v[0, :, 0, 0])
    np.testing.assert_allclose(report.levels["magnitude_mean"], speeds)
    assert report.aggregate["angle_mean"] == pytest.approx(0.0, abs=1e-9)
    assert report.levels["samples"].unique().tolist() == [100]


def test_angle_difference_symmetric(varied_grid):
    other = _rotated(varied_grid, -75.0)
    forward = compare_models(varied_grid, other).aggregate["angle_mean"]
    backward = compare_models(other, varied_grid).aggregate["angle_mean"]
    assert forward == pytest.approx(backward)


def test_pressure_levels_map_to_nearest_altitude(varied_grid):
    forecast = derive_forecast_grid(varied_grid, seed=3)
    report = compare_models(forecast, varied_grid)
    assert report.levels["level"].tolist() == [150.0, 125.0, 100.0, 70.0, 50.0, 30.0, 20.0]
    levels = varied_grid.level_altitudes
    for altitude_a, altitude_b in zip(report.levels["altitude_a"], report.levels["altitude_b"]):
        assert altitude_b == levels[np.argmin(np.abs(levels - altitude_a))]
    assert report.levels["altitude_b"].iloc[0] == 15000.0
    assert report.levels["altitude_b"].iloc[-1] == 25000.0


def test_disjoint_grids_rejected(varied_grid):
    moved = varied_grid.replace(latitudes=varied_grid.latitudes + 10.0)
    with pytest.raises(CoverageError):
        compare_models(varied_grid, moved)


# Forecast-score tables

def test_uniform_pair_zero_fractions_are_one():
    grid = constant_wind_grid(6.0, -2.0)
    table = zero_score_table([GridPair("2023-07", grid, grid)], 30, seed=1, cfg=SCORE)
    assert table.loc[0, "forecast_zero_fraction"] == 1.0
    assert table.loc[0, "synthetic_zero_fraction"] == 1.0
    assert table.loc[0, "samples"] == 30


def test_opposing_synthetic_grid_has_fewer_zero_scores(opposing_grid):
    pair = GridPair("2023-08", opposing_grid, constant_wind_grid(5.0, 0.0, kind="forecast"))
    first = zero_score_table([pair], 40, seed=6, cfg=SCORE)
    again = zero_score_table([pair], 40, seed=6, cfg=SCORE, workers=2)
    assert first.loc[0, "synthetic_zero_fraction"] <= first.loc[0, "forecast_zero_fraction"]
    pd.testing.assert_frame_equal(first, again)


def test_score_means_table_reports_paired_difference(opposing_grid):
    pair = GridPair("2023-08", opposing_grid, constant_wind_grid(5.0, 0.0, kind="forecast"))
    distributions = paired_distributions([pair], 25, seed=2, cfg=SCORE)
    table = score_means_table(distributions)
    assert table.loc[0, "synthetic_mean"] == pytest.approx(0.6)
    assert np.isnan(table.loc[0, "forecast_mean"])
    assert table.loc[0, "diff_mean"] == pytest.approx(0.6)
