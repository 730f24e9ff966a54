"""Wind-field sampling and geodesy helpers shared by every module."""
import math
from typing import NamedTuple, Tuple

import numpy as np

from models.geo_models import (
    EARTH_RADIUS_KM,
    METERS_PER_DEGREE,
    GeoCoord,
    WindGrid,
    WindVector,
)
from utils.errors import DataError, GridBoundsError
from utils.timeutil import TimeLike, to_epoch

COINCIDENT_KM = 0.001


class Bearing(NamedTuple):
    """Initial great-circle bearing; coincident points fall back to 0."""
    degrees: float
    coincident: bool


class Column(NamedTuple):
    """Vertical column at one horizontal position and time."""
    altitudes: np.ndarray
    u: np.ndarray
    v: np.ndarray


def _bracket(axis: np.ndarray, value: float, name: str, clamp: bool) -> Tuple[int, int, float]:
    """Lower/upper node indices and the linear weight of the upper node."""
    low, high = float(axis[0]), float(axis[-1])
    if value < low or value > high:
        if not clamp:
            raise GridBoundsError(name, value, low, high)
        value = min(max(value, low), high)
    if axis.size == 1:
        return 0, 0, 0.0
    upper = int(np.searchsorted(axis, value, side="right"))
    upper = min(max(upper, 1), axis.size - 1)
    lower = upper - 1
    weight = (value - float(axis[lower])) / float(axis[upper] - axis[lower])
    return lower, upper, weight


def sample_column(grid: WindGrid, where: GeoCoord, when: TimeLike, clamp: bool = True) -> Column:
    """Interpolate every level of the grid (bilinear in lat/lon, linear in time)."""
    t0, t1, tw = _bracket(grid.times, to_epoch(when), "time", clamp)
    a0, a1, aw = _bracket(grid.latitudes, where.latitude, "latitude", clamp)
    o0, o1, ow = _bracket(grid.longitudes, where.longitude, "longitude", clamp)

    weights = np.multiply.outer(np.multiply.outer([1.0 - tw, tw], [1.0 - aw, aw]), [1.0 - ow, ow])
    index = np.ix_([t0, t1], np.arange(grid.n_levels), [a0, a1], [o0, o1])
    u = np.einsum("tlao,tao->l", grid.u[index], weights)
    v = np.einsum("tlao,tao->l", grid.v[index], weights)
    if grid.is_pressure_based:
        altitudes = np.einsum("tlao,tao->l", grid.altitude[index], weights)
    else:
        altitudes = np.array(grid.level_altitudes)
    return Column(altitudes, u, v)


def sample_wind(grid: WindGrid, where: GeoCoord, when: TimeLike, clamp: bool = True) -> WindVector:
    """4-linear wind at a position and time (lat, lon, altitude, time)."""
    column = sample_column(grid, where, when, clamp)
    altitude = where.altitude
    low, high = float(column.altitudes[0]), float(column.altitudes[-1])
    if not clamp and (altitude < low or altitude > high):
        raise GridBoundsError("altitude", altitude, low, high)
    if column.altitudes.size == 1:
        return WindVector(float(column.u[0]), float(column.v[0]))
    u = float(np.interp(altitude, column.altitudes, column.u))
    v = float(np.interp(altitude, column.altitudes, column.v))
    return WindVector(u, v)


def haversine_distance(a: GeoCoord, b: GeoCoord) -> float:
    """Great-circle surface distance in km (altitude ignored)."""
    lat1, lon1, lat2, lon2 = map(math.radians, [a.latitude, a.longitude, b.latitude, b.longitude])
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def bearing_between(a: GeoCoord, b: GeoCoord) -> Bearing:
    """Initial bearing from a to b, degrees in [0, 360), 0 = north, 90 = east."""
    if haversine_distance(a, b) < COINCIDENT_KM:
        return Bearing(0.0, True)
    lat1, lon1, lat2, lon2 = map(math.radians, [a.latitude, a.longitude, b.latitude, b.longitude])
    dlon = lon2 - lon1
    y = math.sin(dlon) * math.cos(lat2)
    x = math.cos(lat1) * math.sin(lat2) - math.sin(lat1) * math.cos(lat2) * math.cos(dlon)
    degrees = math.degrees(math.atan2(y, x)) % 360.0
    return Bearing(0.0 if degrees >= 360.0 else degrees, False)


def displace(start: GeoCoord, wind: WindVector, dt: float) -> GeoCoord:
    """Advect a position by wind for dt seconds (local equirectangular mapping)."""
    if dt <= 0:
        raise DataError(f"dt must be positive, got {dt}")
    cos_lat = max(math.cos(math.radians(start.latitude)), 1e-9)
    latitude = start.latitude + wind.v * dt / METERS_PER_DEGREE
    longitude = start.longitude + wind.u * dt / (METERS_PER_DEGREE * cos_lat)
    return GeoCoord(min(max(latitude, -90.0), 90.0), longitude, start.altitude)


def fold_angle(a: float, b: float) -> float:
    """Absolute angular difference folded to [0, 180]."""
    diff = abs(a - b) % 360.0
    return min(diff, 360.0 - diff)


def fold_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized fold_angle."""
    diff = np.abs(np.asarray(a) - np.asarray(b)) % 360.0
    return np.minimum(diff, 360.0 - diff)


def wind_bearings(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bearing each wind moves toward, degrees in [0, 360)."""
    bearings = np.degrees(np.arctan2(u, v)) % 360.0
    return np.where(bearings >= 360.0, 0.0, bearings)


# International Standard Atmosphere, layers up to 32 km
_P0_HPA = 1013.25
_P11_HPA = 226.321
_P20_HPA = 54.7489
_GAS_CONSTANT = 287.053
_GRAVITY = 9.80665


def pressure_to_altitude(pressure_hpa):
    """Standard-atmosphere geopotential altitude (m) of a pressure level."""
    p = np.asarray(pressure_hpa, dtype=float)
    troposphere = 44330.8 * (1.0 - (p / _P0_HPA) ** 0.190263)
    tropopause = 11000.0 + 6341.62 * np.log(_P11_HPA / np.maximum(p, 1e-9))
    exponent = -_GAS_CONSTANT * 0.001 / _GRAVITY
    stratosphere = 20000.0 + (216.65 / 0.001) * ((np.maximum(p, 1e-9) / _P20_HPA) ** exponent - 1.0)
    altitude = np.where(p >= _P11_HPA, troposphere, np.where(p >= _P20_HPA, tropopause, stratosphere))
    return float(altitude) if altitude.ndim == 0 else altitude


def altitude_to_pressure(altitude_m):
    """Inverse of pressure_to_altitude."""
    z = np.asarray(altitude_m, dtype=float)
    troposphere = _P0_HPA * (1.0 - z / 44330.8) ** (1.0 / 0.190263)
    tropopause = _P11_HPA * np.exp(-(z - 11000.0) / 6341.62)
    exponent = -_GAS_CONSTANT * 0.001 / _GRAVITY
    stratosphere = _P20_HPA * (1.0 + 0.001 * (z - 20000.0) / 216.65) ** (1.0 / exponent)
    pressure = np.where(z <= 11000.0, troposphere, np.where(z <= 20000.0, tropopause, stratosphere))
    return float(pressure) if pressure.ndim == 0 else pressure
