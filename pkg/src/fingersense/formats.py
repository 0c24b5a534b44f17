"""File formats: trial CSV, flat config files, calibration models, reports and plot data."""

from __future__ import annotations

import csv
import hashlib
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, DataValidationError, StreamOrderError
from .signal import JOINTS, JointCalibration, derive_phases, Phase
from .simfinger import TrialLog

TRIAL_HEADER = (
    "t_s", "pulley_deg", "theta_mcp_deg", "theta_pip_deg", "theta_dip_deg",
    "i_mcp_nw_cm2", "i_pip_nw_cm2", "i_dip_nw_cm2", "phase",
)
CALIBRATION_HEADER = ("sensor_id", "beta0_db", "beta1_db_per_deg", "sensitivity", "linearity_pct", "rms_deg",
                      "hysteresis_pct")
EVENTS_HEADER = ("t_s", "q", "threshold", "state", "transition")


def fmt_float(x: float) -> str:
    """Shortest decimal that round-trips exactly."""
    return repr(float(x))


# trial logs

def format_trial_csv(log: TrialLog) -> str:
    lines = [",".join(TRIAL_HEADER)]
    for k in range(len(log)):
        row = [log.t[k], log.pulley[k], *log.theta[k], *log.intensity[k]]
        phase = Phase.UNLOADING.value if log.unloading[k] else Phase.LOADING.value
        lines.append(",".join(fmt_float(v) for v in row) + "," + phase)
    return "\n".join(lines) + "\n"


def write_trial_csv(log: TrialLog, path) -> None:
    Path(path).write_text(format_trial_csv(log), encoding="utf-8", newline="")


def ingest_csv(path) -> TrialLog:
    """Read and validate a trial CSV.

    Errors name the 1-based file line and the offending column. An empty
    phase column is derived from the pulley direction.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"trial file not found: {path}") from None
    except UnicodeDecodeError as exc:
        raise DataValidationError(f"{path}: not UTF-8 ({exc})") from None
    rows = list(csv.reader(text.splitlines()))
    if not rows or tuple(c.strip() for c in rows[0]) != TRIAL_HEADER:
        raise DataValidationError(f"{path}:1: header must be {','.join(TRIAL_HEADER)}")
    numeric = np.empty((len(rows) - 1, 8))
    phases: list[str] = []
    for i, row in enumerate(rows[1:]):
        lineno = i + 2
        if len(row) != len(TRIAL_HEADER):
            raise DataValidationError(f"{path}:{lineno}: expected {len(TRIAL_HEADER)} fields, got {len(row)}")
        for c, (name, raw) in enumerate(zip(TRIAL_HEADER[:8], row[:8])):
            try:
                value = float(raw)
            except ValueError:
                raise DataValidationError(f"{path}:{lineno}: column {name}: not a number ({raw!r})") from None
            if not math.isfinite(value):
                raise DataValidationError(f"{path}:{lineno}: column {name}: non-finite value ({raw!r})")
            if name.startswith("i_") and value < 0:
                raise DataValidationError(f"{path}:{lineno}: column {name}: negative intensity")
            numeric[i, c] = value
        phase = row[8].strip().lower()
        if phase not in ("", Phase.LOADING.value, Phase.UNLOADING.value):
            raise DataValidationError(f"{path}:{lineno}: column phase: expected loading, unloading or empty")
        phases.append(phase)
        if i > 0 and not numeric[i, 0] > numeric[i - 1, 0]:
            raise StreamOrderError(f"{path}:{lineno}: column t_s: timestamps must be strictly increasing")
    if numeric.shape[0] == 0:
        raise DataValidationError(f"{path}: no records")
    filled = [p != "" for p in phases]
    if all(filled):
        unloading = np.array([p == Phase.UNLOADING.value for p in phases])
    elif not any(filled):
        unloading = np.array([p is Phase.UNLOADING for p in derive_phases(numeric[:, 1])])
    else:
        first = filled.index(False) if filled[0] else filled.index(True)
        raise DataValidationError(f"{path}:{first + 2}: column phase: must be filled on every row or on none")
    return TrialLog(t=numeric[:, 0], pulley=numeric[:, 1], theta=numeric[:, 2:5], intensity=numeric[:, 5:8],
                    unloading=unloading)


# flat config files

def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys are case-insensitive."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    return parse_config_text(text, str(path))


def config_hash(config: Mapping[str, str]) -> str:
    canon = "\n".join(f"{k}={config[k]}" for k in sorted(config))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def report_header(command: str, config: Mapping[str, str]) -> str:
    return f"# fingersense {__version__} command={command} config_sha256={config_hash(config)}\n"


# calibration models

def format_calibration_csv(cals: Sequence[JointCalibration]) -> str:
    lines = [",".join(CALIBRATION_HEADER)]
    for c in cals:
        lines.append(",".join([c.sensor_id, fmt_float(c.beta0), fmt_float(c.beta1), fmt_float(c.sensitivity),
                               f"{c.linearity_fsr:.2f}", f"{c.rms_error_deg:.3f}", f"{c.hysteresis_fsr:.2f}"]))
    return "\n".join(lines) + "\n"


_CAL_FIELDS = ("beta0", "beta1", "i0", "n_samples", "linearity_fsr", "rms_error_deg", "hysteresis_fsr", "fsr",
               "fsr_abs")


def dumps_calibrations(cals: Sequence[JointCalibration]) -> str:
    lines = ["# fingersense calibration model", "format = 1", "sensors = " + ", ".join(c.sensor_id for c in cals)]
    for c in cals:
        for name in _CAL_FIELDS:
            value = getattr(c, name)
            text = str(value) if name == "n_samples" else format(value, ".17g")
            lines.append(f"{c.sensor_id}.{name} = {text}")
    return "\n".join(lines) + "\n"


def loads_calibrations(text: str, source: str = "<calibration>") -> list[JointCalibration]:
    try:
        fields = parse_config_text(text, source)
    except ConfigError as exc:
        raise DataValidationError(str(exc)) from None
    if "sensors" not in fields:
        raise DataValidationError(f"{source}: missing 'sensors' key")
    names = [s.strip().upper() for s in fields["sensors"].split(",") if s.strip()]
    cals = []
    for name in names:
        values = {}
        for f in _CAL_FIELDS:
            key = f"{name.lower()}.{f}"
            if key not in fields:
                raise DataValidationError(f"{source}: missing key {name}.{f}")
            try:
                values[f] = int(fields[key]) if f == "n_samples" else float(fields[key])
            except ValueError:
                raise DataValidationError(f"{source}: key {name}.{f}: bad value {fields[key]!r}") from None
        cals.append(JointCalibration(sensor_id=name, **values))
    return cals


def read_calibrations(path) -> list[JointCalibration]:
    path = Path(path)
    try:
        return loads_calibrations(path.read_text(encoding="utf-8"), str(path))
    except FileNotFoundError:
        raise ConfigError(f"calibration file not found: {path}") from None


# events and plot data

def format_events_csv(events) -> str:
    lines = [",".join(EVENTS_HEADER)]
    for e in events:
        lines.append(",".join([fmt_float(e.t), fmt_float(e.q), fmt_float(e.threshold), e.state.value,
                               e.transition.value if e.transition else ""]))
    return "\n".join(lines) + "\n"


def write_series(directory, name: str, x, y, x_label: str, y_label: str) -> dict:
    """Write one two-column plot series; returns its manifest entry."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"{x_label},{y_label}"]
    lines += [f"{fmt_float(a)},{fmt_float(b)}" for a, b in zip(np.ravel(x), np.ravel(y))]
    (directory / f"{name}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"series": name, "file": f"{name}.csv", "x": x_label, "y": y_label}


def write_manifest(directory, entries: Iterable[dict], figure: str) -> None:
    lines = ["series,file,x,y,figure"]
    lines += [f"{e['series']},{e['file']},{e['x']},{e['y']},{figure}" for e in entries]
    Path(directory, "manifest.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
