"""Exception hierarchy shared by every module.

Each error carries the process exit code the CLI reports for it:
2 configuration, 3 missing or malformed data, 4 runtime/training,
5 data that parses but does not cover the request.
"""
from typing import Optional


class HabStationError(Exception):
    """Base class for all toolkit errors."""
    exit_code = 4


class ConfigurationError(HabStationError):
    """Invalid configuration value or unknown configuration key."""
    exit_code = 2


class DataError(HabStationError):
    """Input data is missing, malformed or does not cover the request."""
    exit_code = 3


class EmptyInputError(DataError):
    """An operation received no usable input."""


class SoundingParseError(DataError):
    """Malformed sounding file."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = ""):
        self.line = line
        self.source = source
        where = f"{source}:" if source else ""
        if line is not None:
            where = f"{where}line {line}: "
        elif where:
            where = f"{where} "
        super().__init__(f"{where}{message}")


class SoundingRejectedError(DataError):
    """Sounding has too few samples inside the altitude window."""

    def __init__(self, station_id: str, message: str):
        self.station_id = station_id
        super().__init__(f"station {station_id}: {message}")


class GridFormatError(DataError):
    """Forecast interchange file does not match its header."""


class GridBoundsError(DataError):
    """Query outside the grid with clamping disabled."""

    def __init__(self, axis: str, value: float, low: float, high: float):
        self.axis = axis
        super().__init__(f"{axis} {value} outside grid range [{low}, {high}]")


class CheckpointError(DataError):
    """Checkpoint manifest or payload is unreadable."""


class CoverageError(DataError):
    """Grids do not cover the requested arena, window or overlap."""
    exit_code = 5

    def __init__(self, axis: str, message: str):
        self.axis = axis
        super().__init__(f"{axis}: {message}")


class RuntimeFailure(HabStationError):
    """Failure while simulating or training."""
    exit_code = 4


class ShapeError(RuntimeFailure):
    """Array length does not match the network architecture."""


class EpisodeStateError(RuntimeFailure):
    """Operation not allowed in the current episode state."""


class TrainingError(RuntimeFailure):
    """Training diverged; carries a diagnostics snapshot."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)
