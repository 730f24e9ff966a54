import math

import numpy as np
import pytest

from models.geo_models import METERS_PER_DEGREE, ArenaSpec, GeoCoord, WindGrid, WindVector, wrap_longitude
from services.sample_data_service import default_times, layered_wind_grid
from services.wind_service import (
    altitude_to_pressure,
    bearing_between,
    displace,
    fold_angle,
    fold_angles,
    haversine_distance,
    pressure_to_altitude,
    sample_column,
    sample_wind,
)
from utils.errors import DataError, GridBoundsError, GridFormatError


def test_one_degree_of_latitude():
    d = haversine_distance(GeoCoord(10.0, 20.0), GeoCoord(11.0, 20.0))
    assert d == pytest.approx(6371.0 * math.pi / 180.0, rel=1e-12)


def test_distance_is_symmetric_and_ignores_altitude():
    a = GeoCoord(33.1, -110.4, 18000.0)
    b = GeoCoord(34.0, -109.2, 0.0)
    assert haversine_distance(a, b) == pytest.approx(haversine_distance(b, a))
    assert haversine_distance(a, b) == pytest.approx(haversine_distance(a.with_altitude(0.0), b))


def test_bearing_cardinal_directions():
    origin = GeoCoord(0.0, 0.0)
    assert bearing_between(origin, GeoCoord(1.0, 0.0)).degrees == pytest.approx(0.0, abs=1e-9)
    assert bearing_between(origin, GeoCoord(0.0, 1.0)).degrees == pytest.approx(90.0)
    assert bearing_between(origin, GeoCoord(-1.0, 0.0)).degrees == pytest.approx(180.0)
    assert bearing_between(origin, GeoCoord(0.0, -1.0)).degrees == pytest.approx(270.0)


def test_coincident_points_have_flagged_zero_bearing():
    bearing = bearing_between(GeoCoord(34.0, -109.0), GeoCoord(34.0, -109.0))
    assert bearing.coincident
    assert bearing.degrees == 0.0


def test_displace_north_and_east():
    start = GeoCoord(0.0, 10.0, 17000.0)
    north = displace(start, WindVector(0.0, 10.0), 100.0)
    assert north.latitude == pytest.approx(1000.0 / METERS_PER_DEGREE)
    assert north.longitude == pytest.approx(10.0)
    assert north.altitude == 17000.0
    east = displace(start, WindVector(10.0, 0.0), 100.0)
    assert east.longitude == pytest.approx(10.0 + 1000.0 / METERS_PER_DEGREE)


def test_displace_rejects_non_positive_dt():
    with pytest.raises(DataError):
        displace(GeoCoord(0.0, 0.0), WindVector(1.0, 1.0), 0.0)


def test_fold_angle_range_and_symmetry():
    assert fold_angle(350.0, 10.0) == pytest.approx(20.0)
    assert fold_angle(10.0, 350.0) == pytest.approx(20.0)
    assert fold_angle(0.0, 180.0) == pytest.approx(180.0)
    a = np.array([0.0, 90.0, 359.0, 200.0])
    b = np.array([270.0, 90.0, 1.0, 20.0])
    np.testing.assert_allclose(fold_angles(a, b), [90.0, 0.0, 2.0, 180.0])
    np.testing.assert_allclose(fold_angles(a, b), fold_angles(b, a))


def test_wind_vector_direction_is_where_the_wind_goes():
    assert WindVector(10.0, 0.0).direction == pytest.approx(90.0)
    assert WindVector(0.0, -5.0).direction == pytest.approx(180.0)
    assert WindVector.from_bearing(225.0, 4.0).magnitude == pytest.approx(4.0)


def test_wrap_longitude():
    assert wrap_longitude(190.0) == pytest.approx(-170.0)
    assert wrap_longitude(-181.0) == pytest.approx(179.0)
    assert wrap_longitude(-109.123456789) == -109.123456789


def test_invalid_latitude_rejected():
    with pytest.raises(DataError):
        GeoCoord(91.0, 0.0)


def test_altitude_interpolation_between_levels():
    levels = np.arange(15000.0, 25001.0, 1000.0)
    grid = layered_wind_grid(np.arange(levels.size, dtype=float), np.zeros(levels.size), level_altitudes=levels)
    wind = sample_wind(grid, GeoCoord(33.0, -110.0, 15500.0), grid.times[0])
    assert wind.u == pytest.approx(0.5)
    above = sample_wind(grid, GeoCoord(33.0, -110.0, 30000.0), grid.times[0])
    assert above.u == pytest.approx(levels.size - 1)


def test_bilinear_and_time_interpolation():
    lats = np.array([30.0, 31.0])
    lons = np.array([-110.0, -109.0])
    times = default_times(hours=3.0, step_hours=3.0)
    u = np.zeros((2, 1, 2, 2))
    u[0, 0] = [[0.0, 2.0], [4.0, 6.0]]
    u[1, 0] = u[0, 0] + 10.0
    grid = WindGrid(lats, lons, times, u, np.zeros_like(u), level_altitudes=[20000.0])
    column = sample_column(grid, GeoCoord(30.5, -109.5), times[0] + 5400)
    assert column.u[0] == pytest.approx(3.0 + 5.0)


def test_unclamped_query_outside_grid_names_axis():
    grid = layered_wind_grid(np.ones(11), np.zeros(11))
    with pytest.raises(GridBoundsError) as err:
        sample_column(grid, GeoCoord(40.0, -110.0), grid.times[0], clamp=False)
    assert err.value.axis == "latitude"
    with pytest.raises(GridBoundsError) as err:
        sample_column(grid, GeoCoord(33.0, -110.0), grid.times[-1] + 1, clamp=False)
    assert err.value.axis == "time"


def test_grid_shape_mismatch_rejected():
    with pytest.raises(GridFormatError):
        WindGrid([0.0, 1.0], [0.0, 1.0], [0], np.zeros((1, 2, 2, 3)), np.zeros((1, 2, 2, 3)),
                 level_altitudes=[1000.0, 2000.0])


def test_pressure_grid_altitude_spread_limit():
    altitude = np.zeros((1, 2, 2, 2))
    altitude[:, 0] = 16000.0
    altitude[:, 1] = 20000.0
    altitude[0, 1, 0, 0] = 21000.0
    with pytest.raises(GridFormatError):
        WindGrid([0.0, 1.0], [0.0, 1.0], [0], np.zeros((1, 2, 2, 2)), np.zeros((1, 2, 2, 2)),
                 pressures=[100.0, 50.0], altitude=altitude)


@pytest.mark.parametrize("pressure", [150.0, 100.0, 50.0, 20.0])
def test_standard_atmosphere_inverse(pressure):
    assert altitude_to_pressure(pressure_to_altitude(pressure)) == pytest.approx(pressure, rel=1e-9)


def test_standard_atmosphere_reference_heights():
    assert pressure_to_altitude(54.7489) == pytest.approx(20000.0, abs=1.0)
    assert 16000.0 < pressure_to_altitude(100.0) < 16300.0


def test_arena_box_and_clamp():
    arena = ArenaSpec(center=GeoCoord(0.0, 0.0), horizontal_extent_km=(100.0, 100.0))
    box = arena.bounding_box()
    assert box.lat_max - box.lat_min == pytest.approx(100.0 * 1000.0 / METERS_PER_DEGREE)
    assert arena.clamp_altitude(30000.0) == 25000.0
    assert arena.clamp_altitude(1000.0) == 15000.0


# Randomized properties

def _cell(axis, value):
    upper = min(max(int(np.searchsorted(axis, value, side="right")), 1), axis.size - 1)
    return [upper - 1, upper]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_interpolation_stays_within_surrounding_cells(seed):
    rng = np.random.default_rng(seed)
    lats = np.array([30.0, 30.5, 31.0, 31.5])
    lons = np.array([-111.0, -110.5, -110.0, -109.5])
    levels = np.arange(15000.0, 25001.0, 1000.0)
    times = default_times(hours=12.0, step_hours=3.0)
    shape = (times.size, levels.size, lats.size, lons.size)
    grid = WindGrid(lats, lons, times, rng.uniform(-30.0, 30.0, shape), rng.uniform(-30.0, 30.0, shape),
                    level_altitudes=levels)
    for _ in range(40):
        where = GeoCoord(rng.uniform(30.0, 31.5), rng.uniform(-111.0, -109.5), rng.uniform(15000.0, 25000.0))
        when = rng.uniform(times[0], times[-1])
        cells = np.ix_(_cell(times.astype(float), when), _cell(levels, where.altitude),
                       _cell(lats, where.latitude), _cell(lons, where.longitude))
        wind = sample_wind(grid, where, when)
        for value, field in ((wind.u, grid.u), (wind.v, grid.v)):
            assert field[cells].min() - 1e-9 <= value <= field[cells].max() + 1e-9


def test_displace_is_additive_in_dt():
    rng = np.random.default_rng(7)
    for _ in range(50):
        start = GeoCoord(rng.uniform(-60.0, 60.0), rng.uniform(-20.0, 20.0), 18000.0)
        dt1, dt2 = rng.uniform(1.0, 600.0, size=2)
        # eastward wind leaves latitude, and so the longitude scaling, unchanged
        east = WindVector(rng.uniform(-30.0, 30.0), 0.0)
        whole = displace(start, east, dt1 + dt2)
        split = displace(displace(start, east, dt1), east, dt2)
        assert split.latitude == start.latitude
        assert split.longitude == pytest.approx(whole.longitude, rel=1e-12, abs=1e-12)

        wind = WindVector(rng.uniform(-30.0, 30.0), rng.uniform(-30.0, 30.0))
        whole = displace(start, wind, dt1 + dt2)
        split = displace(displace(start, wind, dt1), wind, dt2)
        assert split.latitude == pytest.approx(whole.latitude, rel=1e-12, abs=1e-12)


def test_one_km_step_along_bearing_closes_one_km():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 50:
        start = GeoCoord(rng.uniform(-60.0, 60.0), rng.uniform(-170.0, 170.0))
        goal = GeoCoord(start.latitude + rng.uniform(-3.0, 3.0), start.longitude + rng.uniform(-3.0, 3.0))
        before = haversine_distance(start, goal)
        if before < 10.0:
            continue
        step = displace(start, WindVector.from_bearing(bearing_between(start, goal).degrees, 10.0), 100.0)
        assert before - haversine_distance(step, goal) == pytest.approx(1.0, rel=0.01)
        checked += 1


def test_one_km_step_at_thirty_north():
    start = GeoCoord(30.0, -100.0)
    goal = GeoCoord(31.0, -99.0)
    step = displace(start, WindVector.from_bearing(bearing_between(start, goal).degrees, 1.0), 1000.0)
    assert haversine_distance(start, goal) - haversine_distance(step, goal) == pytest.approx(1.0, rel=1e-3)
