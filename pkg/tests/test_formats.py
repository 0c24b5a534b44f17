import numpy as np
import pytest

from fingersense import presets
from fingersense.errors import ConfigError, DataValidationError, StreamOrderError
from fingersense.formats import (
    TRIAL_HEADER,
    config_hash,
    dumps_calibrations,
    format_trial_csv,
    ingest_csv,
    loads_calibrations,
    parse_config_text,
    report_header,
    write_trial_csv,
)
from fingersense.signal import calibrate_arrays
from fingersense.simfinger import run_scenario

HEADER = ",".join(TRIAL_HEADER)


def write(tmp_path, body, name="trial.csv"):
    p = tmp_path / name
    p.write_text(HEADER + "\n" + body, encoding="utf-8")
    return p


class TestIngest:
    def test_three_rows(self, tmp_path):
        p = write(tmp_path, "0,0,0,0,0,1000,1000,1000,loading\n0.125,1,1,1,1,990,990,990,loading\n"
                            "0.25,0,0,0,0,1000,1000,1000,unloading\n")
        log = ingest_csv(p)
        assert len(log) == 3
        assert list(log.unloading) == [False, False, True]

    def test_nan_names_line_and_column(self, tmp_path):
        p = write(tmp_path, "0,0,0,0,0,1000,1000,1000,\n0.125,1,1,1,1,NaN,990,990,\n")
        with pytest.raises(DataValidationError, match=r":3: column i_mcp_nw_cm2"):
            ingest_csv(p)

    def test_non_number(self, tmp_path):
        p = write(tmp_path, "0,0,zero,0,0,1000,1000,1000,\n")
        with pytest.raises(DataValidationError, match=r":2: column theta_mcp_deg"):
            ingest_csv(p)

    def test_negative_intensity(self, tmp_path):
        p = write(tmp_path, "0,0,0,0,0,1000,-1,1000,\n")
        with pytest.raises(DataValidationError, match="i_pip_nw_cm2"):
            ingest_csv(p)

    def test_time_order(self, tmp_path):
        p = write(tmp_path, "0,0,0,0,0,1000,1000,1000,\n0,1,1,1,1,990,990,990,\n")
        with pytest.raises(StreamOrderError, match=":3"):
            ingest_csv(p)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("t,pulley\n0,0\n")
        with pytest.raises(DataValidationError, match=":1"):
            ingest_csv(p)

    def test_wrong_field_count(self, tmp_path):
        p = write(tmp_path, "0,0,0,0,0,1000,1000\n")
        with pytest.raises(DataValidationError, match="expected 9 fields"):
            ingest_csv(p)

    def test_phase_derived_when_empty(self, tmp_path):
        p = write(tmp_path, "0,0,0,0,0,1,1,1,\n1,2,0,0,0,1,1,1,\n2,2,0,0,0,1,1,1,\n3,1,0,0,0,1,1,1,\n")
        assert list(ingest_csv(p).unloading) == [False, False, False, True]

    def test_partial_phase_rejected(self, tmp_path):
        p = write(tmp_path, "0,0,0,0,0,1,1,1,loading\n1,2,0,0,0,1,1,1,\n")
        with pytest.raises(DataValidationError, match=":3: column phase"):
            ingest_csv(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ingest_csv(tmp_path / "nope.csv")

    def test_round_trip(self, tmp_path):
        log = run_scenario(presets.rig_sweep(seed=4, repeats=1), presets.rig_finger_specs(1))
        write_trial_csv(log, tmp_path / "t.csv")
        back = ingest_csv(tmp_path / "t.csv")
        assert back == log
        for name in ("t", "pulley", "theta", "intensity", "unloading"):
            np.testing.assert_array_equal(getattr(back, name), getattr(log, name))
        assert format_trial_csv(back) == (tmp_path / "t.csv").read_text()


class TestConfig:
    def test_parse(self):
        cfg = parse_config_text("# comment\nA = 1\n b=two # trailing\n\n")
        assert cfg == {"a": "1", "b": "two"}

    def test_duplicate(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("a = 1\nA = 2\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match=":1"):
            parse_config_text("just words\n")

    def test_hash_is_order_independent(self):
        assert config_hash({"a": "1", "b": "2"}) == config_hash({"b": "2", "a": "1"})
        assert config_hash({"a": "1"}) != config_hash({"a": "2"})

    def test_header(self):
        line = report_header("calibrate", {"a": "1"})
        assert line.startswith("# fingersense 0.1.0 command=calibrate config_sha256=") and line.endswith("\n")


class TestCalibrationModel:
    def test_round_trip(self):
        log = run_scenario(presets.rig_sweep(seed=4, repeats=1), presets.rig_finger_specs(1))
        losses = log.losses()
        cals = [calibrate_arrays(log.theta[:, j], losses[:, j], log.unloading, i0=log.intensity[0, j],
                                 sensor_id=name) for j, name in enumerate(("MCP", "PIP", "DIP"))]
        assert loads_calibrations(dumps_calibrations(cals)) == cals

    def test_missing_field(self):
        with pytest.raises(DataValidationError, match="MCP.beta1"):
            loads_calibrations("sensors = MCP\nmcp.beta0 = 0\n")
