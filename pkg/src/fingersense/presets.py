"""Simulator settings that stand in for the physical test rig at desk scale.

The sensor noise is set once as an angle-equivalent constant
(``RIG_NOISE_DEG``): each sensor's loss noise is that many degrees times
its slope. Together with the 48 degree joint range and the hysteresis
fractions below, a nine-sensor suite lands near 4.8 degrees RMS error and
70 % mean linearity.
"""

from __future__ import annotations

from .simfinger import Contact, Disturbance, ScenarioKind, SensorSpec, SimScenario

RIG_NOISE_DEG = 4.65
RIG_JOINT_LIMIT = 48.0
RIG_I0 = 1200.0

# dB/degree per (MCP, PIP, DIP); finger 1 is the least sensitive
RIG_SLOPES = (
    (0.020, 0.017, 0.023),
    (0.031, 0.028, 0.036),
    (0.034, 0.027, 0.038),
)
# unloading offset as a fraction of each sensor's nominal span
RIG_HYSTERESIS_FRACTION = (
    (0.04, 0.08, 0.03),
    (0.03, 0.06, 0.02),
    (0.05, 0.10, 0.04),
)

# the contact trial is read far more quietly than the calibration sweeps
CONTACT_NOISE_FACTOR = 0.25
CONTACT_T = 0.7
RELEASE_T = 12.2
# intensity gain on the blocked joint's sensor while the obstacle pushes on it
CONTACT_GAIN = 1.25
# cyclic stress logs carry raw readout noise only; no camera angle error is involved
STRESS_NOISE_FACTOR = 0.05

SINGLE_SENSOR_SPEC = SensorSpec(beta1_true=0.012, noise_sigma=RIG_NOISE_DEG * 0.012, i0=RIG_I0)

# (multi-sensor disturbance, single-sensor disturbance) per load
WEIGHT_TRIALS = {
    "20g": (Disturbance(gain=1.02, angle_shift=(2.0, 4.0, 6.0)),
            Disturbance(gain=1.12, angle_shift=(2.0, 4.0, 6.0))),
    "50g": (Disturbance(gain=1.035, angle_shift=(3.0, 6.0, 10.0)),
            Disturbance(gain=1.20, angle_shift=(3.0, 6.0, 10.0))),
}


def rig_finger_specs(finger: int, noise_scale: float = 1.0) -> list[SensorSpec]:
    """Sensor specs for finger 0, 1 or 2."""
    specs = []
    for slope, frac in zip(RIG_SLOPES[finger], RIG_HYSTERESIS_FRACTION[finger]):
        specs.append(SensorSpec(
            beta0_true=0.0,
            beta1_true=slope,
            noise_sigma=noise_scale * RIG_NOISE_DEG * slope,
            hysteresis_offset=frac * slope * RIG_JOINT_LIMIT,
            i0=RIG_I0,
        ))
    return specs


def rig_sweep(seed: int = 0, **overrides) -> SimScenario:
    """Five-repeat quasi-static sweep over the full pulley range."""
    kwargs = dict(kind=ScenarioKind.QUASI_STATIC_SWEEP, joint_limits=(RIG_JOINT_LIMIT,) * 3, seed=seed)
    kwargs.update(overrides)
    return SimScenario(**kwargs)


def weighted_sweep(disturbance: Disturbance, seed: int = 0, single_sensor: bool = False) -> SimScenario:
    return rig_sweep(seed=seed, kind=ScenarioKind.WEIGHTED_SWEEP, disturbance=disturbance,
                       single_sensor=single_sensor)


def stress_scenario(seed: int = 0, decay: float = 0.0) -> SimScenario:
    return rig_sweep(seed=seed, kind=ScenarioKind.STRESS_CYCLES, decay=decay)


def contact_scenario(seed: int = 0, frozen_joints=("DIP",)) -> SimScenario:
    """Stepped actuation (9 degrees every 0.25 s) against an obstacle that blocks the distal joint."""
    return rig_sweep(
        seed=seed,
        kind=ScenarioKind.CONTACT_EVENT,
        contact=Contact(t_contact=CONTACT_T, t_release=RELEASE_T, frozen_joints=frozen_joints, gain=CONTACT_GAIN),
    )
