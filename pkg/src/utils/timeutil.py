"""UTC timestamp helpers. Times are carried as integer epoch seconds."""
from datetime import datetime, timezone
from typing import Union

import numpy as np

TimeLike = Union[int, float, np.integer, np.floating, datetime, str]


def to_epoch(value: TimeLike) -> float:
    """Convert a timestamp (epoch seconds, datetime or ISO string) to epoch seconds."""
    if isinstance(value, datetime):
        if value.tzinfo is None:
            value = value.replace(tzinfo=timezone.utc)
        return value.timestamp()
    if isinstance(value, str):
        return parse_utc(value).timestamp()
    return float(value)


def parse_utc(text: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive values and a trailing Z mean UTC."""
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    parsed = datetime.fromisoformat(text)
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def format_utc(epoch: float) -> str:
    """Format epoch seconds as YYYY-MM-DDTHH:MM:SSZ."""
    moment = datetime.fromtimestamp(int(round(epoch)), tz=timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_compact(stamp: str) -> datetime:
    """Parse YYYYMMDDHH (sounding file names)."""
    return datetime.strptime(stamp, "%Y%m%d%H").replace(tzinfo=timezone.utc)


def format_compact(epoch: float) -> str:
    """Format epoch seconds as YYYYMMDDHH."""
    return datetime.fromtimestamp(int(round(epoch)), tz=timezone.utc).strftime("%Y%m%d%H")


def month_label(epoch: float) -> str:
    """YYYY-MM label of an epoch timestamp."""
    return datetime.fromtimestamp(int(round(epoch)), tz=timezone.utc).strftime("%Y-%m")
