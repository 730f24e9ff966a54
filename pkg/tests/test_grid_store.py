import json

import numpy as np
import pytest

from services.sample_data_service import derive_forecast_grid
from storage.grid_store import ENCODING_CSV, load_grid, load_grid_with_header, read_header, save_grid
from utils.errors import GridFormatError


def test_binary_payload_preserves_float32_values(varied_grid, tmp_path):
    path = save_grid(varied_grid, tmp_path / "grid.json", metadata={"seed": 3})
    loaded, header = load_grid_with_header(path)
    np.testing.assert_array_equal(loaded.u, varied_grid.u.astype(np.float32))
    np.testing.assert_array_equal(loaded.times, varied_grid.times)
    np.testing.assert_array_equal(loaded.level_altitudes, varied_grid.level_altitudes)
    assert header["metadata"] == {"seed": 3}
    assert (tmp_path / "grid.bin").stat().st_size == 2 * varied_grid.u.size * 4


def test_pressure_grid_with_csv_payload(opposing_grid, tmp_path):
    forecast = derive_forecast_grid(opposing_grid, seed=5)
    path = save_grid(forecast, tmp_path / "forecast.json", encoding=ENCODING_CSV)
    loaded = load_grid(path)
    assert loaded.is_pressure_based
    assert loaded.kind == "forecast"
    np.testing.assert_allclose(loaded.altitude, forecast.altitude, rtol=1e-6)
    header = read_header(path)
    assert header["per_level_altitude"] is True
    assert header["payload"]["fields"] == ["u", "v", "altitude"]


def test_truncated_payload_rejected(varied_grid, tmp_path):
    path = save_grid(varied_grid, tmp_path / "grid.json")
    payload = tmp_path / "grid.bin"
    payload.write_bytes(payload.read_bytes()[:-8])
    with pytest.raises(GridFormatError):
        load_grid(path)


def test_missing_payload_rejected(varied_grid, tmp_path):
    path = save_grid(varied_grid, tmp_path / "grid.json")
    (tmp_path / "grid.bin").unlink()
    with pytest.raises(GridFormatError, match="payload not found"):
        load_grid(path)


def test_foreign_header_rejected(tmp_path):
    path = tmp_path / "other.json"
    path.write_text(json.dumps({"format": "something-else"}))
    with pytest.raises(GridFormatError):
        read_header(path)


def test_saving_twice_is_byte_identical(varied_grid, tmp_path):
    first = save_grid(varied_grid, tmp_path / "a" / "grid.json")
    second = save_grid(varied_grid, tmp_path / "b" / "grid.json")
    assert first.read_bytes() == second.read_bytes()
    assert (tmp_path / "a" / "grid.bin").read_bytes() == (tmp_path / "b" / "grid.bin").read_bytes()
