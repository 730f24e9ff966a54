"""Geospatial and wind-field data models."""
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from utils.errors import ConfigurationError, DataError, GridFormatError

EARTH_RADIUS_KM = 6371.0
METERS_PER_DEGREE = EARTH_RADIUS_KM * 1000.0 * math.pi / 180.0

KIND_FORECAST = "forecast"
KIND_SYNTHETIC = "synthetic"
GRID_KINDS = (KIND_FORECAST, KIND_SYNTHETIC)


def wrap_longitude(longitude: float) -> float:
    """Wrap longitude into [-180, 180); in-range values are returned unchanged."""
    if -180.0 <= longitude < 180.0:
        return longitude
    wrapped = ((longitude + 180.0) % 360.0) - 180.0
    return wrapped - 360.0 if wrapped >= 180.0 else wrapped


@dataclass(frozen=True)
class GeoCoord:
    """Geographic position; longitude wraps, latitude must be valid."""
    latitude: float
    longitude: float
    altitude: float = 0.0

    def __post_init__(self):
        lat = float(self.latitude)
        if not -90.0 <= lat <= 90.0 or not math.isfinite(lat):
            raise DataError(f"latitude {self.latitude} outside [-90, 90]")
        if not math.isfinite(float(self.longitude)) or not math.isfinite(float(self.altitude)):
            raise DataError("coordinate values must be finite")
        object.__setattr__(self, "latitude", lat)
        object.__setattr__(self, "longitude", wrap_longitude(float(self.longitude)))
        object.__setattr__(self, "altitude", float(self.altitude))

    def with_altitude(self, altitude: float) -> "GeoCoord":
        return GeoCoord(self.latitude, self.longitude, altitude)


@dataclass(frozen=True)
class WindVector:
    """Horizontal wind, m/s; u positive east, v positive north."""
    u: float
    v: float

    @property
    def magnitude(self) -> float:
        return math.hypot(self.u, self.v)

    @property
    def direction(self) -> float:
        """Bearing the air moves toward, degrees in [0, 360)."""
        bearing = math.degrees(math.atan2(self.u, self.v)) % 360.0
        # -0.0 % 360 and tiny negatives can round to 360.0
        return 0.0 if bearing >= 360.0 else bearing

    @classmethod
    def from_bearing(cls, bearing_deg: float, speed: float) -> "WindVector":
        """Wind moving toward bearing_deg at speed."""
        rad = math.radians(bearing_deg)
        return cls(speed * math.sin(rad), speed * math.cos(rad))


@dataclass(frozen=True)
class BoundingBox:
    """Latitude/longitude box, degrees."""
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def contains(self, latitude: float, longitude: float) -> bool:
        return (self.lat_min <= latitude <= self.lat_max
                and self.lon_min <= longitude <= self.lon_max)

    def covers(self, other: "BoundingBox") -> bool:
        return (self.lat_min <= other.lat_min and other.lat_max <= self.lat_max
                and self.lon_min <= other.lon_min and other.lon_max <= self.lon_max)

    def intersect(self, other: "BoundingBox") -> Optional["BoundingBox"]:
        lat_min = max(self.lat_min, other.lat_min)
        lat_max = min(self.lat_max, other.lat_max)
        lon_min = max(self.lon_min, other.lon_min)
        lon_max = min(self.lon_max, other.lon_max)
        if lat_min > lat_max or lon_min > lon_max:
            return None
        return BoundingBox(lat_min, lat_max, lon_min, lon_max)


@dataclass(frozen=True)
class ArenaSpec:
    """Station-keeping arena around a station coordinate."""
    center: GeoCoord = field(default_factory=lambda: GeoCoord(34.0, -109.0, 0.0))
    horizontal_extent_km: Tuple[float, float] = (150.0, 150.0)
    vertical_range: Tuple[float, float] = (15000.0, 25000.0)

    def __post_init__(self):
        if len(self.horizontal_extent_km) != 2 or min(self.horizontal_extent_km) <= 0:
            raise ConfigurationError("arena.horizontal_extent_km must be two positive values")
        floor, ceiling = self.vertical_range
        if not floor < ceiling:
            raise ConfigurationError("arena.vertical_range floor must be below ceiling")
        object.__setattr__(self, "horizontal_extent_km", tuple(float(x) for x in self.horizontal_extent_km))
        object.__setattr__(self, "vertical_range", (float(floor), float(ceiling)))

    def half_extent_degrees(self, latitude: float) -> Tuple[float, float]:
        """Half extents (lat degrees, lon degrees) at a given latitude."""
        east_west_km, north_south_km = self.horizontal_extent_km
        half_lat = north_south_km * 500.0 / METERS_PER_DEGREE
        half_lon = east_west_km * 500.0 / (METERS_PER_DEGREE * max(math.cos(math.radians(latitude)), 1e-6))
        return half_lat, half_lon

    def bounding_box(self, center: Optional[GeoCoord] = None) -> BoundingBox:
        center = center or self.center
        half_lat, half_lon = self.half_extent_degrees(center.latitude)
        return BoundingBox(center.latitude - half_lat, center.latitude + half_lat,
                           center.longitude - half_lon, center.longitude + half_lon)

    def clamp_altitude(self, altitude: float) -> float:
        floor, ceiling = self.vertical_range
        return min(max(altitude, floor), ceiling)


def _readonly(array, dtype=np.float64) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _check_ascending(name: str, axis: np.ndarray):
    if axis.ndim != 1 or axis.size == 0:
        raise GridFormatError(f"{name} axis must be a non-empty 1D array")
    if axis.size > 1 and not np.all(np.diff(axis) > 0):
        raise GridFormatError(f"{name} axis must be strictly ascending")


@dataclass(frozen=True, eq=False)
class WindGrid:
    """Immutable 4D u/v wind field indexed [time][level][lat][lon].

    Altitude-based grids carry `level_altitudes` (m). Pressure-based grids carry
    `pressures` (hPa) plus a per-cell `altitude` field with the same shape as u.
    Levels are ordered by ascending altitude.
    """
    latitudes: np.ndarray
    longitudes: np.ndarray
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    level_altitudes: Optional[np.ndarray] = None
    pressures: Optional[np.ndarray] = None
    altitude: Optional[np.ndarray] = None
    kind: str = KIND_SYNTHETIC
    altitude_tolerance: float = 500.0

    def __post_init__(self):
        lats = _readonly(self.latitudes)
        lons = _readonly(self.longitudes)
        times = _readonly(self.times, np.int64)
        _check_ascending("latitude", lats)
        _check_ascending("longitude", lons)
        _check_ascending("time", times)
        if self.kind not in GRID_KINDS:
            raise GridFormatError(f"unknown grid kind '{self.kind}'")

        u = _readonly(self.u)
        v = _readonly(self.v)
        if (self.level_altitudes is None) == (self.pressures is None):
            raise GridFormatError("grid needs exactly one of level_altitudes or pressures")
        n_levels = len(self.level_altitudes if self.level_altitudes is not None else self.pressures)
        expected = (times.size, n_levels, lats.size, lons.size)
        for name, arr in (("u", u), ("v", v)):
            if arr.shape != expected:
                raise GridFormatError(f"{name} has shape {arr.shape}, axes imply {expected}")
            if not np.all(np.isfinite(arr)):
                raise GridFormatError(f"{name} contains non-finite values")

        level_altitudes = pressures = altitude = None
        if self.level_altitudes is not None:
            level_altitudes = _readonly(self.level_altitudes)
            _check_ascending("level altitude", level_altitudes)
        else:
            pressures = _readonly(self.pressures)
            if self.altitude is None:
                raise GridFormatError("pressure-based grid needs a per-cell altitude field")
            altitude = _readonly(self.altitude)
            if altitude.shape != expected:
                raise GridFormatError(f"altitude has shape {altitude.shape}, axes imply {expected}")
            if not np.all(np.isfinite(altitude)):
                raise GridFormatError("altitude contains non-finite values")
            means = altitude.mean(axis=(0, 2, 3))
            _check_ascending("level mean altitude", means)
            spread = np.abs(altitude - means[None, :, None, None]).max()
            if spread > self.altitude_tolerance:
                raise GridFormatError(
                    f"per-cell altitude deviates {spread:.0f} m from its level mean "
                    f"(limit {self.altitude_tolerance:.0f} m)")

        object.__setattr__(self, "latitudes", lats)
        object.__setattr__(self, "longitudes", lons)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "level_altitudes", level_altitudes)
        object.__setattr__(self, "pressures", pressures)
        object.__setattr__(self, "altitude", altitude)

    @property
    def is_pressure_based(self) -> bool:
        return self.pressures is not None

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return self.u.shape

    @property
    def n_levels(self) -> int:
        return self.u.shape[1]

    @property
    def mean_level_altitudes(self) -> np.ndarray:
        if self.level_altitudes is not None:
            return self.level_altitudes
        return self.altitude.mean(axis=(0, 2, 3))

    @property
    def bounding_box(self) -> BoundingBox:
        return BoundingBox(float(self.latitudes[0]), float(self.latitudes[-1]),
                           float(self.longitudes[0]), float(self.longitudes[-1]))

    @property
    def time_span(self) -> Tuple[int, int]:
        return int(self.times[0]), int(self.times[-1])

    def replace(self, **changes) -> "WindGrid":
        """Copy with some fields replaced (validation re-runs)."""
        values = dict(
            latitudes=self.latitudes, longitudes=self.longitudes, times=self.times,
            u=self.u, v=self.v, level_altitudes=self.level_altitudes,
            pressures=self.pressures, altitude=self.altitude, kind=self.kind,
            altitude_tolerance=self.altitude_tolerance,
        )
        values.update(changes)
        return WindGrid(**values)
