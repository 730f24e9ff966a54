"""Forecast interchange format: JSON header plus flat u/v payload.

The payload holds u, then v (then the per-cell altitude field for pressure-based
grids), each flattened in [time][level][lat][lon] row-major order, either as
little-endian float32 binary or as one value per line of CSV.
"""
import json
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from models.geo_models import WindGrid
from utils.errors import GridFormatError
from utils.timeutil import format_utc, to_epoch

FORMAT_NAME = "hab-windgrid"
FORMAT_VERSION = 1
ENCODING_BINARY = "float32-le"
ENCODING_CSV = "csv"
PAYLOAD_DTYPE = np.dtype("<f4")


def _atomic_write_bytes(path: Path, data: bytes):
    temp_file = path.with_suffix(path.suffix + ".tmp")
    with open(temp_file, "wb") as f:
        f.write(data)
    temp_file.replace(path)


def _atomic_write_text(path: Path, text: str):
    _atomic_write_bytes(path, text.encode("utf-8"))


def build_header(grid: WindGrid, payload_name: str, encoding: str,
                 metadata: Optional[dict] = None) -> dict:
    """Header document describing a grid and its payload file."""
    if grid.is_pressure_based:
        levels = {"pressure": [float(p) for p in grid.pressures]}
    else:
        levels = {"altitude": [float(z) for z in grid.level_altitudes]}
    fields = ["u", "v"] + (["altitude"] if grid.is_pressure_based else [])
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": grid.kind,
        "units": {"u": "m/s", "v": "m/s", "altitude": "m", "pressure": "hPa", "time": "UTC"},
        "axes": {
            "latitude": [float(x) for x in grid.latitudes],
            "longitude": [float(x) for x in grid.longitudes],
            "time": [format_utc(t) for t in grid.times],
            "level": levels,
        },
        "per_level_altitude": grid.is_pressure_based,
        "altitude_tolerance": float(grid.altitude_tolerance),
        "payload": {"file": payload_name, "encoding": encoding, "fields": fields},
    }
    if metadata:
        header["metadata"] = metadata
    return header


def save_grid(grid: WindGrid, header_path, encoding: str = ENCODING_BINARY,
              metadata: Optional[dict] = None) -> Path:
    """Write header JSON and payload next to it; returns the header path."""
    header_path = Path(header_path)
    header_path.parent.mkdir(parents=True, exist_ok=True)
    if encoding == ENCODING_BINARY:
        payload_path = header_path.with_suffix(".bin")
    elif encoding == ENCODING_CSV:
        payload_path = header_path.with_suffix(".csv")
    else:
        raise GridFormatError(f"unknown payload encoding '{encoding}'")

    arrays = [grid.u, grid.v] + ([grid.altitude] if grid.is_pressure_based else [])
    flat = np.concatenate([a.ravel() for a in arrays]).astype(PAYLOAD_DTYPE)
    if encoding == ENCODING_BINARY:
        _atomic_write_bytes(payload_path, flat.tobytes())
    else:
        lines = "\n".join(f"{x:.9g}" for x in flat.tolist())
        _atomic_write_text(payload_path, "value\n" + lines + "\n")

    header = build_header(grid, payload_path.name, encoding, metadata)
    _atomic_write_text(header_path, json.dumps(header, indent=2, sort_keys=True) + "\n")
    return header_path


def read_header(header_path) -> dict:
    """Read and check a header document."""
    header_path = Path(header_path)
    try:
        with open(header_path, "r", encoding="utf-8") as f:
            header = json.load(f)
    except FileNotFoundError:
        raise GridFormatError(f"grid header not found: {header_path}")
    except json.JSONDecodeError as e:
        raise GridFormatError(f"{header_path}: invalid JSON ({e})")
    if header.get("format") != FORMAT_NAME:
        raise GridFormatError(f"{header_path}: not a {FORMAT_NAME} header")
    for key in ("axes", "kind", "payload"):
        if key not in header:
            raise GridFormatError(f"{header_path}: header missing '{key}'")
    return header


def _read_payload(header_path: Path, payload: dict) -> np.ndarray:
    payload_path = header_path.parent / payload["file"]
    if not payload_path.exists():
        raise GridFormatError(f"payload not found: {payload_path}")
    encoding = payload.get("encoding", ENCODING_BINARY)
    if encoding == ENCODING_BINARY:
        raw = payload_path.read_bytes()
        if len(raw) % PAYLOAD_DTYPE.itemsize:
            raise GridFormatError(f"{payload_path}: truncated float32 payload")
        return np.frombuffer(raw, dtype=PAYLOAD_DTYPE).astype(np.float64)
    if encoding == ENCODING_CSV:
        try:
            return np.loadtxt(payload_path, dtype=np.float64, skiprows=1, ndmin=1)
        except ValueError as e:
            raise GridFormatError(f"{payload_path}: {e}")
    raise GridFormatError(f"unknown payload encoding '{encoding}'")


def load_grid_with_header(header_path) -> Tuple[WindGrid, dict]:
    """Load a grid and return it with its header document."""
    header_path = Path(header_path)
    header = read_header(header_path)
    axes = header["axes"]
    try:
        lats = np.asarray(axes["latitude"], dtype=float)
        lons = np.asarray(axes["longitude"], dtype=float)
        times = np.asarray([int(round(to_epoch(t))) for t in axes["time"]], dtype=np.int64)
        levels = axes["level"]
    except (KeyError, ValueError, TypeError) as e:
        raise GridFormatError(f"{header_path}: bad axes ({e})")

    pressure_based = bool(header.get("per_level_altitude", False))
    level_key = "pressure" if pressure_based else "altitude"
    if level_key not in levels:
        raise GridFormatError(f"{header_path}: level axis must be '{level_key}'")
    level_values = np.asarray(levels[level_key], dtype=float)

    shape = (times.size, level_values.size, lats.size, lons.size)
    n_fields = 3 if pressure_based else 2
    cell_count = int(np.prod(shape))
    flat = _read_payload(header_path, header["payload"])
    if flat.size != n_fields * cell_count:
        raise GridFormatError(
            f"{header_path}: payload has {flat.size} values, header implies "
            f"{n_fields} x {cell_count}")

    fields = flat.reshape((n_fields,) + shape)
    common = dict(
        latitudes=lats, longitudes=lons, times=times, u=fields[0], v=fields[1],
        kind=header["kind"], altitude_tolerance=float(header.get("altitude_tolerance", 500.0)),
    )
    if pressure_based:
        grid = WindGrid(pressures=level_values, altitude=fields[2], **common)
    else:
        grid = WindGrid(level_altitudes=level_values, **common)
    return grid, header


def load_grid(header_path) -> WindGrid:
    """Load a grid from its header path."""
    return load_grid_with_header(header_path)[0]
