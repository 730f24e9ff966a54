"""Filesystem locations."""
import os
from pathlib import Path

APP_DIR_NAME = ".hab_station"


def get_app_home() -> Path:
    """Get the toolkit home directory (logs, default outputs)."""
    override = os.getenv("HAB_STATION_HOME")
    if override:
        return Path(override).expanduser().resolve()
    return Path(os.path.expanduser("~")).resolve() / APP_DIR_NAME


def get_log_dir() -> Path:
    """Get log directory, created on demand."""
    log_dir = get_app_home() / "logs"
    log_dir.mkdir(parents=True, exist_ok=True)
    return log_dir


def get_repo_root() -> Path:
    """Get the source checkout root (parent of src/)."""
    return Path(__file__).resolve().parent.parent.parent


def get_sample_data_dir() -> Path:
    """Get the bundled sample data directory."""
    override = os.getenv("HAB_STATION_SAMPLE_DIR")
    if override:
        return Path(override)
    return get_repo_root() / "data" / "sample"


def ensure_dir(path: Path) -> Path:
    """Create a directory (and parents) and return it."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
