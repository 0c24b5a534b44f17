"""Command-line entry point.

Each subcommand reads a flat ``key = value`` config file, writes its
artifacts under ``--out`` and exits 0 on success, 2 on config or usage
errors, 3 on invalid data and 4 on numerically degenerate data. Failures
print one JSON line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, presets
from .anomaly import detect_stream, dumps_detector, load_detector, train_detector
from .errors import ConfigError, FingerSenseError
from .formats import (
    dumps_calibrations,
    format_calibration_csv,
    format_events_csv,
    format_trial_csv,
    ingest_csv,
    read_calibrations,
    read_config,
    report_header,
    write_manifest,
    write_series,
)
from .kinematics import ChainConfig, estimate_angles, fingertip_errors, fingertip_positions
from .signal import JOINTS, amplitude_trend, calibrate_arrays, power_loss
from .simfinger import Contact, Disturbance, ScenarioKind, SensorSpec, SimScenario, run_scenario
from .stats import ancova_f


class RunConfig:
    """Validated view of one command's config: typed getters, unknown keys rejected."""

    def __init__(self, command: str, values: dict[str, str], allowed: set[str], base: Path):
        unknown = sorted(k for k in values if k not in allowed and not _sensor_key(k, allowed))
        if unknown:
            raise ConfigError(f"{command}: unknown config keys: {', '.join(unknown)}")
        self.command = command
        self.values = values
        self.base = base

    def has(self, key):
        return key in self.values

    def str(self, key, default=None):
        if key in self.values:
            return self.values[key]
        if default is None:
            raise ConfigError(f"{self.command}: missing required config key {key!r}")
        return default

    def float(self, key, default=None):
        raw = self.values.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"{self.command}: missing required config key {key!r}")
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{self.command}: {key} must be a number, got {raw!r}") from None

    def int(self, key, default=None):
        value = self.float(key, None if default is None else float(default))
        if value != int(value):
            raise ConfigError(f"{self.command}: {key} must be an integer")
        return int(value)

    def bool(self, key, default=False):
        raw = self.values.get(key)
        if raw is None:
            return default
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{self.command}: {key} must be true or false, got {raw!r}")

    def floats(self, key, n=None, default=None):
        raw = self.values.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"{self.command}: missing required config key {key!r}")
            return tuple(default)
        try:
            out = tuple(float(v) for v in raw.split(","))
        except ValueError:
            raise ConfigError(f"{self.command}: {key} must be comma-separated numbers") from None
        if n is not None and len(out) != n:
            raise ConfigError(f"{self.command}: {key} needs {n} values, got {len(out)}")
        return out

    def path(self, key, must_exist=True):
        p = Path(self.str(key))
        if not p.is_absolute():
            p = self.base / p
        if must_exist and not p.exists():
            raise ConfigError(f"{self.command}: {key} path does not exist: {p}")
        return p

    def paths(self, key):
        out = []
        for part in self.str(key).split(","):
            p = Path(part.strip())
            p = p if p.is_absolute() else self.base / p
            if not p.exists():
                raise ConfigError(f"{self.command}: {key} path does not exist: {p}")
            out.append(p)
        return out


_SENSOR_FIELDS = ("beta0", "beta1", "sigma", "hysteresis", "i0")


def _sensor_key(key: str, allowed: set[str]) -> bool:
    if "sensors.*" not in allowed:
        return False
    prefix, _, field = key.partition(".")
    return prefix in ("mcp", "pip", "dip", "single") and field in _SENSOR_FIELDS


def _load(args, command: str, allowed: set[str], required: bool = True) -> RunConfig:
    if args.config is None:
        if required:
            raise ConfigError(f"{command}: --config is required")
        values, base = {}, Path.cwd()
    else:
        values, base = read_config(args.config), Path(args.config).resolve().parent
    for flag in ("seed", "alpha", "cutoff", "debounce"):
        value = getattr(args, flag, None)
        if value is not None and flag in allowed:
            values[flag] = str(value)
    if getattr(args, "clamp", False) and "clamp" in allowed:
        values["clamp"] = "true"
    return RunConfig(command, values, allowed, base)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="")


def _summary(command: str, cfg: RunConfig, items: list[tuple[str, object]]) -> str:
    body = "".join(f"{k} = {v}\n" for k, v in items)
    return report_header(command, cfg.values) + body


def _i0_override(cfg: RunConfig):
    return np.array(cfg.floats("i0", 3)) if cfg.has("i0") else None


# simulate

_SIM_KEYS = {
    "kind", "preset", "noise_scale", "pulley_range", "pulley_step", "sample_rate", "coupling_weights",
    "joint_limits", "kappa", "repeats", "cycles", "actuation_frequency", "decay", "contact_step",
    "contact_step_period", "duration", "gain", "angle_shift", "t_contact", "t_release", "frozen_joints",
    "contact_gain", "single_sensor", "seed", "output", "sensors.*",
}


def build_scenario(cfg: RunConfig) -> tuple[SimScenario, list[SensorSpec]]:
    """Scenario and sensor specs from a simulate config.

    ``preset`` selects ``rig_finger_1`` .. ``rig_finger_3`` or
    ``rig_single``; explicit keys override the preset.
    """
    preset = cfg.str("preset", "none").lower()
    single = cfg.bool("single_sensor", preset == "rig_single")
    if preset.startswith("rig_finger_"):
        try:
            finger = int(preset.rsplit("_", 1)[1]) - 1
            base_specs = presets.rig_finger_specs(finger, cfg.float("noise_scale", 1.0))
        except (ValueError, IndexError):
            raise ConfigError(f"unknown preset {preset!r}") from None
        base = presets.rig_sweep()
    elif preset == "rig_single":
        base_specs = [presets.SINGLE_SENSOR_SPEC]
        base = presets.rig_sweep()
    elif preset == "none":
        base_specs = [SensorSpec()] if single else [SensorSpec()] * 3
        base = SimScenario()
    else:
        raise ConfigError(f"unknown preset {preset!r}")

    names = ["single"] if single else ["mcp", "pip", "dip"]
    if single and len(base_specs) == 3:
        base_specs = base_specs[:1]
    specs = []
    for name, spec in zip(names, base_specs):
        specs.append(SensorSpec(
            beta0_true=cfg.float(f"{name}.beta0", spec.beta0_true),
            beta1_true=cfg.float(f"{name}.beta1", spec.beta1_true),
            noise_sigma=cfg.float(f"{name}.sigma", spec.noise_sigma),
            hysteresis_offset=cfg.float(f"{name}.hysteresis", spec.hysteresis_offset),
            i0=cfg.float(f"{name}.i0", spec.i0),
        ))

    disturbance = None
    if cfg.has("gain") or cfg.has("angle_shift"):
        disturbance = Disturbance(gain=cfg.float("gain", 1.0), angle_shift=cfg.floats("angle_shift", 3, (0, 0, 0)))
    contact = None
    if cfg.has("t_contact") or cfg.has("t_release"):
        frozen = tuple(s.strip() for s in cfg.str("frozen_joints", "DIP").split(",") if s.strip())
        contact = Contact(t_contact=cfg.float("t_contact"), t_release=cfg.float("t_release"), frozen_joints=frozen,
                          gain=cfg.float("contact_gain", 1.0))
    kappa = cfg.float("kappa") if cfg.has("kappa") else base.kappa
    duration = cfg.float("duration") if cfg.has("duration") else base.duration
    try:
        kind = ScenarioKind(cfg.str("kind", base.kind.value).lower())
    except ValueError:
        raise ConfigError(f"unknown scenario kind {cfg.str('kind')!r}") from None
    scenario = SimScenario(
        kind=kind,
        pulley_range=cfg.float("pulley_range", base.pulley_range),
        pulley_step=cfg.float("pulley_step", base.pulley_step),
        sample_rate=cfg.float("sample_rate", base.sample_rate),
        coupling_weights=cfg.floats("coupling_weights", 3, base.coupling_weights),
        joint_limits=cfg.floats("joint_limits", 3, base.joint_limits),
        kappa=kappa,
        repeats=cfg.int("repeats", base.repeats),
        cycles=cfg.int("cycles", base.cycles),
        actuation_frequency=cfg.float("actuation_frequency", base.actuation_frequency),
        decay=cfg.float("decay", base.decay),
        contact_step=cfg.float("contact_step", base.contact_step),
        contact_step_period=cfg.float("contact_step_period", base.contact_step_period),
        duration=duration,
        disturbance=disturbance,
        contact=contact,
        single_sensor=single,
        seed=cfg.int("seed", base.seed),
    )
    return scenario, specs


def cmd_simulate(args) -> int:
    cfg = _load(args, "simulate", _SIM_KEYS, required=False)
    scenario, specs = build_scenario(cfg)
    out = _out_dir(args)
    log = run_scenario(scenario, specs)
    name = cfg.str("output", "trial.csv")
    _write(out / name, format_trial_csv(log))
    print(f"wrote {len(log)} records to {out / name}")
    return 0


# calibrate

def _calibrate_log(log, i0, single: bool):
    ref = log.reference_intensity() if i0 is None else i0
    losses = power_loss(log.intensity, ref)
    if single:
        return [calibrate_arrays(log.theta[:, j], losses[:, 0], log.unloading, i0=ref[0], sensor_id=name)
                for j, name in enumerate(JOINTS)]
    return [calibrate_arrays(log.theta[:, j], losses[:, j], log.unloading, i0=ref[j], sensor_id=name)
            for j, name in enumerate(JOINTS)]


def cmd_calibrate(args) -> int:
    cfg = _load(args, "calibrate", {"trial", "i0", "single_sensor"})
    trial = cfg.path("trial")
    i0 = _i0_override(cfg)
    single = cfg.bool("single_sensor")
    out = _out_dir(args)
    log = ingest_csv(trial)
    cals = _calibrate_log(log, i0, single)
    header = report_header("calibrate", cfg.values)
    _write(out / "calibration.csv", header + format_calibration_csv(cals))
    _write(out / "calibration.model", dumps_calibrations(cals))
    items = []
    for c in cals:
        items += [(f"{c.sensor_id}.sensitivity_db_per_deg", f"{c.sensitivity:.6g}"),
                  (f"{c.sensor_id}.linearity_pct", f"{c.linearity_fsr:.2f}"),
                  (f"{c.sensor_id}.rms_deg", f"{c.rms_error_deg:.3f}"),
                  (f"{c.sensor_id}.hysteresis_pct", f"{c.hysteresis_fsr:.2f}"),
                  (f"{c.sensor_id}.fsr_range_db", f"{c.fsr:.6g}"),
                  (f"{c.sensor_id}.fsr_abs_db", f"{c.fsr_abs:.6g}")]
    _write(out / "calibration.txt", _summary("calibrate", cfg, items))

    ref = np.array([c.i0 for c in cals])
    losses = power_loss(log.intensity, ref)
    plots = out / "plots_calibration"
    entries = []
    for j, c in enumerate(cals):
        y = losses[:, 0] if single else losses[:, j]
        entries.append(write_series(plots, f"{c.sensor_id.lower()}_loss", log.theta[:, j], y, "theta_deg", "loss_db"))
        ends = np.array([log.theta[:, j].min(), log.theta[:, j].max()])
        entries.append(write_series(plots, f"{c.sensor_id.lower()}_fit", ends, c.predict(ends), "theta_deg", "loss_db"))
    write_manifest(plots, entries, "loss vs joint rotation with best-fit lines")
    for c in cals:
        print(f"{c.sensor_id}: beta1 {c.beta1:.5f} dB/deg  linearity {c.linearity_fsr:.2f}%  "
              f"RMS {c.rms_error_deg:.3f} deg  hysteresis {c.hysteresis_fsr:.2f}%")
    return 0


# estimate

def cmd_estimate(args) -> int:
    cfg = _load(args, "estimate", {"trial", "calibration", "single_sensor", "link_lengths", "clamp", "theta_max"})
    trial = cfg.path("trial")
    cals = read_calibrations(cfg.path("calibration"))
    if len(cals) != 3:
        raise ConfigError("estimate: calibration must hold 3 sensors")
    chain = ChainConfig(cfg.floats("link_lengths", None, (28.0, 28.0, 28.0, 28.0)))
    clamp = cfg.bool("clamp")
    theta_max = cfg.float("theta_max", 90.0)
    single = cfg.bool("single_sensor")
    out = _out_dir(args)
    log = ingest_csv(trial)

    ref = np.array([c.i0 for c in cals])
    losses = power_loss(log.intensity[:, 0], ref[0]) if single else power_loss(log.intensity, ref)
    est = estimate_angles(losses, cals)
    if clamp:
        est = np.clip(est, 0.0, theta_max)
    tip_est = fingertip_positions(chain, est)
    tip_true = fingertip_positions(chain, log.theta)
    err = fingertip_errors(chain, est, log.theta)

    lines = ["t_s,theta_mcp_est,theta_pip_est,theta_dip_est,x_est_mm,y_est_mm,x_true_mm,y_true_mm,error_mm"]
    for k in range(len(log)):
        row = [log.t[k], *est[k], *tip_est[k], *tip_true[k], err[k]]
        lines.append(",".join(repr(float(v)) for v in row))
    _write(out / "poses.csv", report_header("estimate", cfg.values) + "\n".join(lines) + "\n")
    negative = int(np.sum(np.all(est < 0, axis=1)))
    items = [("records", len(log)), ("mean_fingertip_error_mm", f"{err.mean():.4f}"),
             ("max_fingertip_error_mm", f"{err.max():.4f}"), ("all_angles_negative_records", negative)]
    _write(out / "estimate.txt", _summary("estimate", cfg, items))
    plots = out / "plots_estimate"
    entries = [
        write_series(plots, "fingertip_error", log.t, err, "t_s", "error_mm"),
        write_series(plots, "fingertip_est", tip_est[:, 0], tip_est[:, 1], "x_mm", "y_mm"),
        write_series(plots, "fingertip_true", tip_true[:, 0], tip_true[:, 1], "x_mm", "y_mm"),
    ]
    write_manifest(plots, entries, "fingertip estimates against ground truth")
    print(f"mean fingertip error {err.mean():.3f} mm over {len(log)} records")
    return 0


# contact detection

def cmd_detect_train(args) -> int:
    cfg = _load(args, "detect-train", {"trial", "i0", "alpha", "cutoff", "beta"})
    trial = cfg.path("trial")
    alpha = cfg.float("alpha", 0.90)
    cutoff = cfg.float("cutoff", 0.9)
    beta = cfg.int("beta") if cfg.has("beta") else None
    out = _out_dir(args)
    log = ingest_csv(trial)
    i0 = _i0_override(cfg)
    ref = log.reference_intensity() if i0 is None else i0
    det = train_detector(power_loss(log.intensity, ref), alpha=alpha, cutoff=cutoff, beta=beta, i0=ref)
    _write(out / "detector.model", dumps_detector(det))
    items = [("beta", det.beta), ("explained_variance", f"{det.explained:.4f}"),
             ("eigenvalues", ", ".join(f"{v:.6g}" for v in det.eigenvalues)), ("alpha", det.alpha),
             ("c_alpha", det.c_alpha), ("j_th", f"{det.j_th:.6g}")]
    _write(out / "detector.txt", _summary("detect-train", cfg, items))
    print(f"beta {det.beta}, first components explain {100 * det.explained:.1f}%, J_th {det.j_th:.6g}")
    return 0


def cmd_detect_run(args) -> int:
    cfg = _load(args, "detect-run", {"trial", "detector", "debounce", "i0"})
    trial = cfg.path("trial")
    det = load_detector(cfg.path("detector"))
    debounce = cfg.int("debounce", 1)
    out = _out_dir(args)
    log = ingest_csv(trial)
    i0 = _i0_override(cfg)
    if i0 is None:
        i0 = det.i0 if det.i0 is not None else log.reference_intensity()
    events = detect_stream(zip(log.t, power_loss(log.intensity, i0)), det, debounce)
    _write(out / "events.csv", report_header("detect-run", cfg.values) + format_events_csv(events))
    transitions = [e for e in events if e.transition is not None]
    items = [("records", len(events)), ("transitions", len(transitions))]
    items += [(f"transition_{k}", f"{e.transition.value} at t={e.t!r}") for k, e in enumerate(transitions)]
    _write(out / "detect.txt", _summary("detect-run", cfg, items))
    plots = out / "plots_detect"
    q = np.array([e.q for e in events])
    entries = [write_series(plots, "q", log.t, q, "t_s", "q"),
               write_series(plots, "threshold", log.t[[0, -1]], [det.j_th, det.j_th], "t_s", "q")]
    write_manifest(plots, entries, "Q statistic against the detection threshold")
    for e in transitions:
        print(f"{e.transition.value} at t = {e.t:g} s (Q = {e.q:.4g})")
    return 0


# stress test

def cmd_stress_report(args) -> int:
    from .signal import RawReading, normalized_cycle_amplitudes

    cfg = _load(args, "stress-report", {"trial", "actuation_frequency", "cycles"})
    trial = cfg.path("trial")
    freq = cfg.float("actuation_frequency", 1.46)
    out = _out_dir(args)
    log = ingest_csv(trial)
    if cfg.has("cycles"):
        cycles = cfg.int("cycles")
    else:
        dt = float(np.median(np.diff(log.t))) if len(log) > 1 else 0.0
        cycles = int(np.floor((log.t[-1] - log.t[0] + dt) * freq + 1e-9))
    if cycles < 1:
        raise ConfigError("stress-report: log shorter than one cycle")
    edges = log.t[0] + np.arange(cycles + 1) / freq
    amps = []
    for j, name in enumerate(JOINTS):
        readings = [RawReading(float(t), name, float(i)) for t, i in zip(log.t, log.intensity[:, j])]
        amps.append(normalized_cycle_amplitudes(readings, edges))
    amps = np.array(amps).T
    lines = ["cycle,amp_mcp,amp_pip,amp_dip"]
    lines += [f"{k}," + ",".join(repr(float(a)) for a in amps[k]) for k in range(cycles)]
    _write(out / "amplitudes.csv", report_header("stress-report", cfg.values) + "\n".join(lines) + "\n")
    items = [("cycles", cycles)]
    plots = out / "plots_stress"
    entries = []
    for j, name in enumerate(JOINTS):
        slope, drift = amplitude_trend(amps[:, j])
        items += [(f"{name}.mean_amplitude", f"{amps[:, j].mean():.6g}"), (f"{name}.slope_per_cycle", f"{slope:.6g}"),
                  (f"{name}.drift_fraction", f"{drift:.6g}")]
        entries.append(write_series(plots, f"{name.lower()}_amplitude", np.arange(cycles), amps[:, j], "cycle",
                                    "normalized_amplitude"))
        print(f"{name}: mean amplitude {amps[:, j].mean():.4f}, drift {100 * drift:.3f}% of mean")
    _write(out / "stress.txt", _summary("stress-report", cfg, items))
    write_manifest(plots, entries, "normalized cycle amplitude over the stress test")
    return 0


# reproducibility

def cmd_ancova(args) -> int:
    cfg = _load(args, "ancova", {"trials", "model", "i0"})
    trials = cfg.paths("trials")
    model = cfg.str("model", "separate")
    if model not in ("separate", "common_slope"):
        raise ConfigError(f"ancova: model must be separate or common_slope, got {model!r}")
    out = _out_dir(args)
    groups, labels = [], []
    for n, path in enumerate(trials, 1):
        log = ingest_csv(path)
        losses = log.losses()
        for j, name in enumerate(JOINTS):
            groups.append((log.theta[:, j], losses[:, j]))
            labels.append(f"trial{n}.{name}")
    res = ancova_f(groups, model=model, labels=labels)
    items = [("model", res.model), ("groups", len(groups)), ("f_stat", f"{res.f_stat:.6g}"),
             ("df_between", res.df_between), ("df_error", res.df_error), ("p_value", res.p_text)]
    _write(out / "ancova.txt", _summary("ancova", cfg, items))
    print(f"F({res.df_between},{res.df_error}) = {res.f_stat:.6g}, p {res.p_text}")
    return 0


COMMANDS: dict[str, Callable] = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "estimate": cmd_estimate,
    "detect-train": cmd_detect_train,
    "detect-run": cmd_detect_run,
    "stress-report": cmd_stress_report,
    "ancova": cmd_ancova,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", default=".", help="output directory (default: current directory)")
    common.add_argument("--alpha", type=float, help="detector confidence level")
    common.add_argument("--cutoff", type=float, help="explained-variance cutoff for the principal subspace")
    common.add_argument("--clamp", action="store_true", help="clip estimated angles to the sensor range")
    common.add_argument("--debounce", type=int, help="consecutive readings needed to change detector state")
    parser = argparse.ArgumentParser(prog="fingersense", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fingersense {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except FingerSenseError as exc:
        print(json.dumps({"error": type(exc).__name__, "exit_code": exc.exit_code, "message": str(exc)}),
              file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(json.dumps({"error": "OSError", "exit_code": 2, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
