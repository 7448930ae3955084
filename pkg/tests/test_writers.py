"""Test CSV/JSON emission and reading saved events."""

import json
import math

import numpy as np
import pandas as pd
import pytest

from src.models.schemas import InjectedEvent, JumpDirection, RunConfig, TemperatureTrace
from src.storage.writers import (
    config_digest,
    provenance,
    read_events,
    to_jsonable,
    write_csv,
    write_events,
    write_json,
    write_trace,
    write_trajectory_record,
)
from src.utils.errors import ConfigurationError
from tests.conftest import _make_record


def _events_frame(rows):
    return pd.DataFrame(rows, columns=["trajectory", "time", "direction"])


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

class TestJson:

    def test_non_finite_and_complex_values(self):
        data = to_jsonable({"a": math.inf, "b": float("nan"), "c": 1 + 2j, "d": np.float64(0.5), "e": np.arange(2)})
        assert data == {"a": "inf", "b": "nan", "c": [1.0, 2.0], "d": 0.5, "e": [0, 1]}

    def test_numpy_scalars(self):
        assert to_jsonable(np.int64(3)) == 3
        assert to_jsonable(np.bool_(True)) is True
        assert to_jsonable({1.0: -math.inf}) == {"1.0": "-inf"}

    def test_sorted_output(self, tmp_path):
        path = write_json({"b": 1, "a": {"z": 2, "y": 3}}, tmp_path / "report.json")
        text = path.read_text()
        assert text.endswith("\n")
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text)["a"]["y"] == 3


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

class TestCsv:

    def test_header_lines_then_columns(self, tmp_path):
        path = write_csv(pd.DataFrame({"x": [0.1]}), tmp_path / "a.csv", {"seed": 7, "subcommand": "ensemble"})
        lines = path.read_text().splitlines()
        assert lines == ["# seed: 7", "# subcommand: ensemble", "x", "0.10000000000000001"]

    def test_floats_round_trip_exactly(self, tmp_path):
        values = np.random.default_rng(1).random(50)
        path = write_csv(pd.DataFrame({"x": values}), tmp_path / "b.csv")
        restored = pd.read_csv(path, comment="#")["x"].to_numpy()
        np.testing.assert_array_equal(restored, values)

    def test_provenance_is_stable(self):
        config = RunConfig.model_validate({"seed": 3})
        moved = config.model_copy(update={"output_dir": "/elsewhere"})
        assert config_digest(config) == config_digest(moved)
        header = provenance(config, "guardian", n=5)
        assert header["seed"] == 3
        assert header["subcommand"] == "guardian"
        assert header["n"] == 5
        assert header["generator"].startswith("quantum-jump-calorimetry ")


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------

class TestEvents:

    def test_read_back_grouped_by_trajectory(self, tmp_path):
        frame = _events_frame([(0, 0.25, "down"), (0, 0.5, "up"), (3, 1.75, "down")])
        path = write_events(frame, tmp_path / "events.csv", {"seed": 1})
        events = read_events(path)
        assert sorted(events) == [0, 3]
        assert [event.direction for event in events[0]] == [JumpDirection.DOWN, JumpDirection.UP]
        assert events[3][0].time == 1.75

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            read_events(tmp_path / "absent.csv")

    def test_missing_column(self, tmp_path):
        (tmp_path / "bad.csv").write_text("trajectory,time\n0,0.5\n")
        with pytest.raises(ConfigurationError, match="missing columns"):
            read_events(tmp_path / "bad.csv")

    def test_invalid_direction(self, tmp_path):
        (tmp_path / "bad.csv").write_text("trajectory,time,direction\n0,0.5,sideways\n")
        with pytest.raises(ConfigurationError, match="invalid event"):
            read_events(tmp_path / "bad.csv")

    def test_trajectory_files(self, tmp_path):
        record = _make_record([(0.5, "down")], index=12)
        paths = write_trajectory_record(record, tmp_path, {"seed": 0})
        assert [path.name for path in paths] == ["trajectory_000012.events.csv"]
        df = pd.read_csv(paths[0], comment="#")
        assert df["direction"].tolist() == ["down"]
        assert "# scheme: fixed" in paths[0].read_text()


# ---------------------------------------------------------------------------
# Detection traces
# ---------------------------------------------------------------------------

class TestTraceFiles:

    def test_columns_and_sidecar(self, tmp_path):
        u = np.arange(3) * 0.01
        trace = TemperatureTrace(
            trajectory_index=2,
            u=u,
            delta_t=np.array([0.0, 0.01, 0.0099]),
            theta={100.0: np.zeros(3), 0.01: np.zeros(3)},
            events=[InjectedEvent(u=0.005, sign=1, grid_index=1)],
        )
        trace_path, events_path = write_trace(trace, tmp_path, {"seed": 0})
        assert trace_path.name == "trace_000002.csv"
        df = pd.read_csv(trace_path, comment="#")
        assert list(df.columns) == ["u", "delta_T_kelvin", "theta_r100", "theta_r0.01"]
        sidecar = pd.read_csv(events_path, comment="#")
        assert sidecar.to_dict("records") == [{"u_injected": 0.005, "sign": 1}]
