"""Run configuration store with persistence."""
import dataclasses
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Optional, Union, get_args, get_origin, get_type_hints

from models.config_models import RunConfig
from utils.errors import ConfigurationError, DataError

# Keys left out of the hash: they never change result contents
_UNHASHED_KEYS = ("seed", "workers")


def _to_plain(value: Any) -> Any:
    if dataclasses.is_dataclass(value):
        return {f.name: _to_plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, (list, tuple)):
        return [_to_plain(v) for v in value]
    return value


def _coerce(annotation: Any, value: Any, key: str) -> Any:
    origin = get_origin(annotation)
    if origin is Union:
        options = [a for a in get_args(annotation) if a is not type(None)]
        if value is None:
            return None
        return _coerce(options[0], value, key)
    if dataclasses.is_dataclass(annotation):
        return _from_plain(annotation, value, key + ".")
    if origin in (list, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"config key '{key}' must be a list")
        args = get_args(annotation)
        item_type = args[0] if args else Any
        items = [_coerce(item_type, v, f"{key}[{i}]") for i, v in enumerate(value)]
        return tuple(items) if origin is tuple else items
    if annotation is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"config key '{key}' must be true or false")
        return value
    if annotation in (int, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"config key '{key}' must be a number")
        if annotation is int:
            if float(value) != int(value):
                raise ConfigurationError(f"config key '{key}' must be an integer")
            return int(value)
        return float(value)
    if annotation is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"config key '{key}' must be a string")
    return value


def _from_plain(cls, data: Any, prefix: str = ""):
    """Build a dataclass from a dict, rejecting unknown keys by dotted name."""
    if not isinstance(data, dict):
        raise ConfigurationError(f"config section '{prefix.rstrip('.') or 'root'}' must be an object")
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigurationError(f"unknown config key '{prefix}{key}'")
    kwargs = {name: _coerce(hints[name], value, prefix + name) for name, value in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, DataError) as e:
        raise ConfigurationError(f"invalid config section '{prefix.rstrip('.') or 'root'}': {e}")


def _parse_override_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


class ConfigStore:
    """Store for run configuration with atomic save."""

    def __init__(self, config_file: Optional[Union[str, Path]] = None):
        self.config_file = Path(config_file).resolve() if config_file else None
        self.config: Optional[RunConfig] = None

    def load(self) -> RunConfig:
        """Load configuration from file, or defaults when no file was given."""
        if self.config_file is None:
            self.config = RunConfig()
            return self.config
        if not self.config_file.exists():
            raise ConfigurationError(f"config file not found: {self.config_file}")
        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{self.config_file}: invalid JSON ({e})")
        self.config = self._deserialize(data)
        return self.config

    def save(self, path: Optional[Union[str, Path]] = None):
        """Save configuration to file atomically."""
        if self.config is None:
            return
        target = Path(path) if path else self.config_file
        if target is None:
            raise ConfigurationError("no config file path to save to")
        target.parent.mkdir(parents=True, exist_ok=True)

        data = self._serialize(self.config)

        # Atomic write
        temp_file = target.with_suffix(target.suffix + ".tmp")
        with open(temp_file, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, sort_keys=True)
            f.write("\n")

        temp_file.replace(target)

    def _serialize(self, config: RunConfig) -> dict:
        """Serialize config to a plain dict."""
        return _to_plain(config)

    def _deserialize(self, data: dict) -> RunConfig:
        """Deserialize dict to config; missing keys keep their defaults."""
        return _from_plain(RunConfig, data)

    def override(self, dotted_key: str, raw_value: str) -> RunConfig:
        """Apply one `section.key=value` override (value parsed as JSON when possible)."""
        if self.config is None:
            self.load()
        data = self._serialize(self.config)
        parts = dotted_key.split(".")
        node: Dict = data
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigurationError(f"unknown config key '{dotted_key}'")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigurationError(f"unknown config key '{dotted_key}'")
        node[parts[-1]] = _parse_override_value(raw_value)
        self.config = self._deserialize(data)
        return self.config

    def set_seed(self, seed: Optional[int]):
        if self.config is None:
            self.load()
        if seed is not None:
            self.config = dataclasses.replace(self.config, seed=seed)

    def set_workers(self, workers: Optional[int]):
        if self.config is None:
            self.load()
        if workers is not None:
            self.config = dataclasses.replace(self.config, workers=workers)

    def config_hash(self) -> str:
        """sha256 of the canonical sorted-key JSON of the result-relevant settings."""
        if self.config is None:
            self.load()
        return compute_config_hash(self.config)


def compute_config_hash(config: RunConfig) -> str:
    data = _to_plain(config)
    for key in _UNHASHED_KEYS:
        data.pop(key, None)
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def config_from_dict(data: dict) -> RunConfig:
    """Build a RunConfig from a plain dict with the same strict key rules as files."""
    return _from_plain(RunConfig, data)
