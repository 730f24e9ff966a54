"""Synthetic wind grids from radiosonde soundings.

Pipeline per launch time: bin each sounding into fixed altitude bins, spread
every level horizontally by nearest station, smooth each level with a
separable Gaussian, then stack the launch times and optionally densify in time.
"""
import math
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from models.config_models import SynthesisConfig
from models.geo_models import KIND_SYNTHETIC, BoundingBox, GeoCoord, WindGrid
from models.sounding_models import (
    BinnedProfile,
    RadiosondeSounding,
    RejectedSounding,
    SoundingSample,
    SynthesisResult,
)
from services.logging_service import get_logging_service
from utils.errors import (
    ConfigurationError,
    CoverageError,
    DataError,
    EmptyInputError,
    SoundingParseError,
    SoundingRejectedError,
)
from utils.timeutil import format_compact, format_utc, parse_compact, parse_utc, to_epoch

SOUNDING_FILE_PATTERN = re.compile(r"^(?P<station>[A-Za-z0-9]+)_(?P<stamp>\d{10})\.csv$")

DIRECTION_COLUMNS = ("altitude_m", "wind_dir_deg", "wind_speed_ms")
COMPONENT_COLUMNS = ("altitude_m", "u_ms", "v_ms")
KNOTS_TO_MS = 0.514444


# Sounding ingestion

def _parse_metadata_line(line: str, metadata: dict):
    body = line.lstrip("#").strip()
    if ":" not in body:
        return
    key, value = body.split(":", 1)
    metadata[key.strip().lower()] = value.strip()


def _parse_float(token: str, line_no: int, source: str, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise SoundingParseError(f"bad {what} value '{token.strip()}'", line=line_no, source=source)
    if not math.isfinite(value):
        raise SoundingParseError(f"non-finite {what} value", line=line_no, source=source)
    return value


def parse_sounding(text: str, source: str = "", station_id: Optional[str] = None,
                   launch_time=None, location: Optional[GeoCoord] = None) -> RadiosondeSounding:
    """Parse the CSV sounding format.

    Comment lines (`# key: value`) carry station_id, latitude, longitude and
    launch_time. The first data line may be a header naming either
    altitude_m,wind_dir_deg,wind_speed_ms or altitude_m,u_ms,v_ms; without a
    header, rows are read as altitude, direction, speed.
    """
    metadata: dict = {}
    columns = DIRECTION_COLUMNS
    rows: List[Tuple[int, float, float, float]] = []
    saw_header = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            _parse_metadata_line(line, metadata)
            continue
        tokens = [t.strip() for t in line.split(",")]
        if not saw_header and not rows and tokens and not _looks_numeric(tokens[0]):
            names = tuple(t.lower() for t in tokens)
            if names not in (DIRECTION_COLUMNS, COMPONENT_COLUMNS):
                raise SoundingParseError(f"unrecognized header '{line}'", line=line_no, source=source)
            columns = names
            saw_header = True
            continue
        if len(tokens) != 3:
            raise SoundingParseError(f"expected 3 fields, got {len(tokens)}", line=line_no, source=source)
        altitude = _parse_float(tokens[0], line_no, source, "altitude")
        a = _parse_float(tokens[1], line_no, source, columns[1])
        b = _parse_float(tokens[2], line_no, source, columns[2])
        if columns == DIRECTION_COLUMNS and b < 0:
            raise SoundingParseError("negative wind speed", line=line_no, source=source)
        rows.append((line_no, altitude, a, b))

    if not rows:
        raise EmptyInputError(f"{source or 'sounding'}: no data rows")

    station = station_id or metadata.get("station_id", "")
    if not station:
        raise SoundingParseError("missing station_id", source=source)
    if location is None:
        try:
            location = GeoCoord(float(metadata["latitude"]), float(metadata["longitude"]),
                                float(metadata.get("elevation_m", 0.0)))
        except KeyError as e:
            raise SoundingParseError(f"missing {e.args[0]} metadata", source=source)
        except (ValueError, DataError) as e:
            raise SoundingParseError(f"bad station location ({e})", source=source)
    if launch_time is None:
        if "launch_time" not in metadata:
            raise SoundingParseError("missing launch_time", source=source)
        try:
            launch_time = parse_utc(metadata["launch_time"])
        except ValueError as e:
            raise SoundingParseError(f"bad launch_time ({e})", source=source)

    altitudes = np.array([r[1] for r in rows])
    first = np.array([r[2] for r in rows])
    second = np.array([r[3] for r in rows])
    if columns == DIRECTION_COLUMNS:
        rad = np.radians(first)
        u = -second * np.sin(rad)
        v = -second * np.cos(rad)
    else:
        u, v = first, second

    # Stable sort keeps file order among equal altitudes; first occurrence wins
    order = np.argsort(altitudes, kind="stable")
    altitudes, u, v = altitudes[order], u[order], v[order]
    keep = np.ones(altitudes.size, dtype=bool)
    keep[1:] = np.diff(altitudes) > 0
    samples = [SoundingSample(float(z), float(uu), float(vv))
               for z, uu, vv in zip(altitudes[keep], u[keep], v[keep])]

    return RadiosondeSounding(
        station_id=str(station), location=location,
        launch_time=int(round(to_epoch(launch_time))),
        samples=samples, source=source,
    )


def _looks_numeric(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def load_sounding(path) -> RadiosondeSounding:
    """Parse a STATIONID_YYYYMMDDHH.csv file; the name must agree with its metadata."""
    path = Path(path)
    match = SOUNDING_FILE_PATTERN.match(path.name)
    if match is None:
        raise SoundingParseError("file name must be STATIONID_YYYYMMDDHH.csv", source=str(path))
    text = path.read_text(encoding="utf-8")
    sounding = parse_sounding(text, source=path.name)
    stamp_time = int(to_epoch(parse_compact(match.group("stamp"))))
    if sounding.station_id != match.group("station") or sounding.launch_time != stamp_time:
        raise SoundingParseError(
            f"metadata ({sounding.station_id}, {format_compact(sounding.launch_time)}) "
            f"disagrees with file name", source=path.name)
    return sounding


def load_sounding_dir(directory) -> Dict[int, List[RadiosondeSounding]]:
    """Read every sounding file in a directory, grouped by launch time."""
    directory = Path(directory)
    if not directory.is_dir():
        raise EmptyInputError(f"no soundings: {directory} is not a directory")
    files = sorted(p for p in directory.iterdir() if SOUNDING_FILE_PATTERN.match(p.name))
    if not files:
        raise EmptyInputError(f"no soundings found in {directory}")
    grouped: Dict[int, List[RadiosondeSounding]] = {}
    for path in files:
        sounding = load_sounding(path)
        grouped.setdefault(sounding.launch_time, []).append(sounding)
    get_logging_service().info(f"Read {len(files)} sounding files, {len(grouped)} launch times, from {directory}")
    return grouped


# Binning

def bin_centers(cfg: SynthesisConfig) -> np.ndarray:
    floor, _ = cfg.altitude_window
    return floor + cfg.bin_height * np.arange(cfg.n_bins, dtype=float)


def bin_profile(sounding: RadiosondeSounding, cfg: SynthesisConfig) -> BinnedProfile:
    """Resample a sounding onto the bin centers.

    A bin is observed when a sample falls in [center - h/2, center + h/2); it
    takes the sample nearest its center (lower altitude on ties). Other bins are
    linearly interpolated between observed bins, with constant extension beyond
    the outermost ones.
    """
    centers = bin_centers(cfg)
    h = cfg.bin_height
    low = centers[0] - h / 2.0
    high = centers[-1] + h / 2.0

    altitudes, u, v = sounding.altitudes, sounding.u, sounding.v
    inside = (altitudes >= low) & (altitudes < high)
    if np.count_nonzero(inside) < 2:
        raise SoundingRejectedError(
            sounding.station_id,
            f"{np.count_nonzero(inside)} samples inside [{low:.0f}, {high:.0f}) m, need 2")
    altitudes, u, v = altitudes[inside], u[inside], v[inside]

    index = np.floor((altitudes - low) / h).astype(int)
    index = np.clip(index, 0, centers.size - 1)
    distance = np.abs(altitudes - centers[index])
    order = np.lexsort((altitudes, distance, index))
    bins, first = np.unique(index[order], return_index=True)
    chosen = order[first]

    observed = np.zeros(centers.size, dtype=bool)
    observed[bins] = True
    bin_u = np.empty(centers.size)
    bin_v = np.empty(centers.size)
    bin_u[bins] = u[chosen]
    bin_v[bins] = v[chosen]
    gaps = ~observed
    if np.any(gaps):
        bin_u[gaps] = np.interp(centers[gaps], centers[observed], bin_u[observed])
        bin_v[gaps] = np.interp(centers[gaps], centers[observed], bin_v[observed])

    return BinnedProfile(sounding.station_id, sounding.location, centers, bin_u, bin_v, observed)


# Horizontal spread

def grid_axes(bbox: BoundingBox, resolution: float) -> Tuple[np.ndarray, np.ndarray]:
    """Latitude/longitude node axes from the box's lower corner at a fixed spacing."""
    def axis(start, stop):
        count = int(math.floor((stop - start) / resolution + 1e-9)) + 1
        return np.round(start + resolution * np.arange(count), 10)
    return axis(bbox.lat_min, bbox.lat_max), axis(bbox.lon_min, bbox.lon_max)


def nearest_station_index(station_coords: Sequence[GeoCoord], latitudes: np.ndarray,
                          longitudes: np.ndarray) -> np.ndarray:
    """Index of the nearest station for every cell (degree-space Euclidean).

    Stations outside the grid are clamped onto its edge first. argmin returns the
    lowest station index on ties.
    """
    if len(station_coords) == 0:
        raise EmptyInputError("no station profiles to rasterize")
    s_lat = np.clip([c.latitude for c in station_coords], latitudes[0], latitudes[-1])
    s_lon = np.clip([c.longitude for c in station_coords], longitudes[0], longitudes[-1])
    d2 = ((latitudes[None, :, None] - s_lat[:, None, None]) ** 2
          + (longitudes[None, None, :] - s_lon[:, None, None]) ** 2)
    return np.argmin(d2, axis=0)


def rasterize_level(profiles: Sequence[BinnedProfile], level_index: int, latitudes: np.ndarray,
                    longitudes: np.ndarray, nearest: Optional[np.ndarray] = None
                    ) -> Tuple[np.ndarray, np.ndarray]:
    """Piecewise-constant u/v planes for one level from the nearest station."""
    if len(profiles) == 0:
        raise EmptyInputError("no station profiles to rasterize")
    if nearest is None:
        nearest = nearest_station_index([p.location for p in profiles], latitudes, longitudes)
    level_u = np.array([p.u[level_index] for p in profiles])
    level_v = np.array([p.v[level_index] for p in profiles])
    return level_u[nearest], level_v[nearest]


# Smoothing

def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian kernel with radius ceil(3 sigma)."""
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=float)
    g = np.exp(-x ** 2 / (2.0 * sigma ** 2))
    return g / g.sum()


def _convolve_axis(plane: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = kernel.size // 2
    pad = [(0, 0)] * plane.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(plane, pad, mode="symmetric")
    windows = sliding_window_view(padded, kernel.size, axis=axis)
    return windows @ kernel


def smooth_level(plane: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing with half-sample symmetric edge padding."""
    if sigma < 0:
        raise ConfigurationError("smoothing sigma must be non-negative")
    if sigma == 0:
        return plane
    kernel = gaussian_kernel(sigma)
    smoothed = _convolve_axis(np.asarray(plane, dtype=float), kernel, axis=0)
    return _convolve_axis(smoothed, kernel, axis=1)


# Composition

def synthesize_forecast(soundings_by_time: Dict[int, List[RadiosondeSounding]], cfg: SynthesisConfig,
                        bbox: Optional[BoundingBox] = None) -> SynthesisResult:
    """Build a synthetic WindGrid with one frame per usable launch time."""
    logger = get_logging_service()
    if bbox is None:
        bbox = BoundingBox(*cfg.region)
    latitudes, longitudes = grid_axes(bbox, cfg.grid_resolution)
    centers = bin_centers(cfg)
    result = SynthesisResult(grid=None)

    frames_u, frames_v, times = [], [], []
    for launch_time in sorted(soundings_by_time):
        profiles: List[BinnedProfile] = []
        for sounding in sorted(soundings_by_time[launch_time], key=lambda s: s.station_id):
            try:
                profiles.append(bin_profile(sounding, cfg))
            except SoundingRejectedError as e:
                logger.warning(f"Rejected sounding {sounding.station_id} at {format_utc(launch_time)}: {e}")
                result.rejected.append(RejectedSounding(sounding.station_id, launch_time, str(e)))
        if not profiles:
            logger.warning(f"Dropped launch time {format_utc(launch_time)}: no valid soundings")
            result.dropped_times.append(launch_time)
            continue

        nearest = nearest_station_index([p.location for p in profiles], latitudes, longitudes)
        level_u, level_v = [], []
        for level in range(centers.size):
            plane_u, plane_v = rasterize_level(profiles, level, latitudes, longitudes, nearest)
            level_u.append(smooth_level(plane_u, cfg.smoothing_sigma))
            level_v.append(smooth_level(plane_v, cfg.smoothing_sigma))
        frames_u.append(np.stack(level_u))
        frames_v.append(np.stack(level_v))
        times.append(int(launch_time))
        result.stations_used[format_utc(launch_time)] = [p.station_id for p in profiles]
        logger.info(f"Synthesized {format_utc(launch_time)} from {len(profiles)} stations "
                    f"({sum(p.n_observed for p in profiles)} observed bins)")

    if not times:
        raise CoverageError("altitude", "no launch time has a sounding covering the altitude window")

    result.grid = WindGrid(
        latitudes=latitudes, longitudes=longitudes, times=np.array(times, dtype=np.int64),
        u=np.stack(frames_u), v=np.stack(frames_v), level_altitudes=centers, kind=KIND_SYNTHETIC,
    )
    return result


def densify_time(grid: WindGrid, step_hours: float) -> WindGrid:
    """Insert linearly interpolated frames so consecutive frames are step_hours apart."""
    if grid.times.size < 2:
        raise DataError("time densification needs at least 2 frames")
    step_seconds = step_hours * 3600.0
    if step_seconds <= 0 or step_seconds != round(step_seconds):
        raise ConfigurationError(f"temporal step {step_hours} h is not a whole number of seconds")
    step_seconds = int(round(step_seconds))
    gaps = np.diff(grid.times)
    if np.any(gaps % step_seconds):
        raise ConfigurationError(f"temporal step {step_hours} h does not divide every frame gap")

    fields = [grid.u, grid.v] + ([grid.altitude] if grid.is_pressure_based else [])
    out_fields: List[List[np.ndarray]] = [[] for _ in fields]
    out_times: List[int] = []
    for i, gap in enumerate(gaps):
        n = int(gap // step_seconds)
        for k in range(n):
            out_times.append(int(grid.times[i]) + k * step_seconds)
            for field_frames, source in zip(out_fields, fields):
                if k == 0:
                    field_frames.append(source[i])
                else:
                    w = k / n
                    field_frames.append((1.0 - w) * source[i] + w * source[i + 1])
    out_times.append(int(grid.times[-1]))
    for field_frames, source in zip(out_fields, fields):
        field_frames.append(source[-1])

    changes = dict(times=np.array(out_times, dtype=np.int64),
                   u=np.stack(out_fields[0]), v=np.stack(out_fields[1]))
    if grid.is_pressure_based:
        changes["altitude"] = np.stack(out_fields[2])
    return grid.replace(**changes)


# Wyoming TEXT:LIST conversion

_WYOMING_WIDTH = 7


def wyoming_to_csv(text: str, station_id: Optional[str] = None) -> Tuple[str, str]:
    """Convert a University of Wyoming TEXT:LIST dump to the sounding CSV format.

    Returns (file name, CSV text). Rows without height, direction or speed are
    skipped; speeds are converted from knots.
    """
    lines = text.splitlines()
    header_index = next((i for i, l in enumerate(lines) if "PRES" in l and "HGHT" in l), None)
    if header_index is None:
        raise SoundingParseError("no PRES/HGHT header found", source="wyoming")
    names = lines[header_index].split()
    try:
        h_col, d_col, s_col = names.index("HGHT"), names.index("DRCT"), names.index("SKNT")
    except ValueError:
        raise SoundingParseError("header lacks HGHT, DRCT or SKNT", line=header_index + 1, source="wyoming")

    rows = []
    dashes = 0
    metadata = {}
    for line_no, line in enumerate(lines[header_index + 1:], start=header_index + 2):
        if line.startswith("-----"):
            dashes += 1
            continue
        if dashes < 1:
            continue
        if ":" in line:
            key, value = line.split(":", 1)
            metadata[key.strip().lower()] = value.strip()
            continue
        if not line.strip() or not line[:_WYOMING_WIDTH].strip().replace(".", "").isdigit():
            continue
        fields = [line[i * _WYOMING_WIDTH:(i + 1) * _WYOMING_WIDTH].strip() for i in range(len(names))]
        if not (fields[h_col] and fields[d_col] and fields[s_col]):
            continue
        height = _parse_float(fields[h_col], line_no, "wyoming", "HGHT")
        direction = _parse_float(fields[d_col], line_no, "wyoming", "DRCT")
        speed = _parse_float(fields[s_col], line_no, "wyoming", "SKNT") * KNOTS_TO_MS
        rows.append((height, direction, speed))

    if not rows:
        raise EmptyInputError("wyoming dump has no wind rows")
    station = station_id or metadata.get("station number")
    if not station:
        raise SoundingParseError("station number not found", source="wyoming")
    try:
        observed = metadata["observation time"]
        launch_time = int(to_epoch(parse_compact("20" + observed[:6] + observed[7:9])))
        latitude = float(metadata["station latitude"])
        longitude = float(metadata["station longitude"])
    except (KeyError, ValueError) as e:
        raise SoundingParseError(f"incomplete station information ({e})", source="wyoming")
    elevation = metadata.get("station elevation", "0")

    out = [
        f"# station_id: {station}",
        f"# latitude: {latitude}",
        f"# longitude: {longitude}",
        f"# elevation_m: {elevation}",
        f"# launch_time: {format_utc(launch_time)}",
        ",".join(DIRECTION_COLUMNS),
    ]
    out.extend(f"{h:.0f},{d:.0f},{s:.2f}" for h, d, s in rows)
    return f"{station}_{format_compact(launch_time)}.csv", "\n".join(out) + "\n"


def summarize_ingestion(soundings_by_time: Dict[int, List[RadiosondeSounding]],
                        result: SynthesisResult) -> List[dict]:
    """Per-station ingestion rows for reports."""
    rejected = {(r.station_id, r.launch_time): r.reason for r in result.rejected}
    rows = []
    for launch_time in sorted(soundings_by_time):
        for s in sorted(soundings_by_time[launch_time], key=lambda s: s.station_id):
            reason = rejected.get((s.station_id, launch_time), "")
            rows.append({
                "station_id": s.station_id,
                "launch_time": format_utc(launch_time),
                "samples": len(s.samples),
                "status": "rejected" if reason else ("dropped" if launch_time in result.dropped_times else "used"),
                "reason": reason,
            })
    return rows

