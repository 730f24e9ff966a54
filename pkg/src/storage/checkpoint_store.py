"""Checkpoint persistence: JSON manifest plus one little-endian float32 payload."""
import json
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from utils.errors import CheckpointError

CHECKPOINT_FORMAT = "hab-dqn-checkpoint"
CHECKPOINT_VERSION = 1
PAYLOAD_DTYPE = np.dtype("<f4")


def _atomic_write(path: Path, data: bytes):
    temp_file = path.with_suffix(path.suffix + ".tmp")
    with open(temp_file, "wb") as f:
        f.write(data)
    temp_file.replace(path)


def payload_path_for(manifest_path: Path) -> Path:
    return manifest_path.with_suffix(".bin")


def save_checkpoint(manifest_path, manifest: dict, arrays: Dict[str, np.ndarray]) -> Path:
    """Write arrays (in insertion order) to the payload, then the manifest.

    The payload goes first so an interrupted save never leaves a manifest that
    points at a missing or partial payload.
    """
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    payload_path = payload_path_for(manifest_path)

    layout = []
    chunks = []
    offset = 0
    for name, array in arrays.items():
        flat = np.ascontiguousarray(array, dtype=PAYLOAD_DTYPE).ravel()
        layout.append({"name": name, "shape": list(np.shape(array)), "offset": offset, "count": int(flat.size)})
        chunks.append(flat.tobytes())
        offset += int(flat.size)
    _atomic_write(payload_path, b"".join(chunks))

    document = dict(manifest)
    document.update({
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "payload": {"file": payload_path.name, "encoding": "float32-le", "arrays": layout},
    })
    _atomic_write(manifest_path, (json.dumps(document, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    return manifest_path


def load_checkpoint(manifest_path) -> Tuple[dict, Dict[str, np.ndarray]]:
    """Read a manifest and its arrays (float32, reshaped)."""
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {manifest_path}")
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{manifest_path}: invalid JSON ({e})")
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{manifest_path}: not a {CHECKPOINT_FORMAT} manifest")

    payload = manifest["payload"]
    payload_path = manifest_path.parent / payload["file"]
    if not payload_path.exists():
        raise CheckpointError(f"checkpoint payload not found: {payload_path}")
    flat = np.frombuffer(payload_path.read_bytes(), dtype=PAYLOAD_DTYPE)
    arrays: Dict[str, np.ndarray] = {}
    for entry in payload["arrays"]:
        start, count = entry["offset"], entry["count"]
        if start + count > flat.size:
            raise CheckpointError(f"{payload_path}: truncated at array '{entry['name']}'")
        arrays[entry["name"]] = flat[start:start + count].astype(np.float32).reshape(entry["shape"])
    return manifest, arrays
