"""Synthetic trial logs for a tendon-driven finger with three bend sensors.

The generator is statistical, not physical: each sensor follows a linear
loss-vs-angle law with Gaussian noise on the loss (dB), a constant
unloading offset for hysteresis, and an optional multiplicative intensity
gain for external loads.

Randomness comes from ``numpy.random.Generator(PCG64(seed))``. For each run
the generator draws one standard-normal vector of record length per channel,
in MCP, PIP, DIP order, so a log is reproducible across platforms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DataValidationError, DimensionError, ScenarioValidationError, StreamOrderError
from .signal import JOINTS, Phase, power_loss

DEFAULT_PULLEY_RANGE = 263.6
DEFAULT_PULLEY_STEP = 0.44
DEFAULT_SAMPLE_RATE = 8.0
DEFAULT_ACTUATION_FREQUENCY = 1.46


class ScenarioKind(str, enum.Enum):
    QUASI_STATIC_SWEEP = "quasi_static_sweep"
    STRESS_CYCLES = "stress_cycles"
    WEIGHTED_SWEEP = "weighted_sweep"
    CONTACT_EVENT = "contact_event"


def joint_index(joint) -> int:
    if isinstance(joint, (int, np.integer)):
        if not 0 <= joint < 3:
            raise ScenarioValidationError(f"joint index out of range: {joint}")
        return int(joint)
    name = str(joint).strip().upper()
    if name not in JOINTS:
        raise ScenarioValidationError(f"unknown joint {joint!r}; expected one of {JOINTS}")
    return JOINTS.index(name)


@dataclass(frozen=True)
class SensorSpec:
    """Ground-truth response of one simulated sensor."""

    beta0_true: float = 0.0
    beta1_true: float = 0.03
    noise_sigma: float = 0.0
    hysteresis_offset: float = 0.0
    i0: float = 1000.0

    def __post_init__(self):
        if not self.noise_sigma >= 0:
            raise ScenarioValidationError("noise_sigma must be >= 0")
        if not self.i0 > 0:
            raise ScenarioValidationError("i0 must be > 0")


@dataclass(frozen=True)
class Disturbance:
    gain: float = 1.0
    angle_shift: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.gain >= 1.0:
            raise ScenarioValidationError(f"disturbance gain must be >= 1, got {self.gain}")
        if len(self.angle_shift) != 3:
            raise ScenarioValidationError("angle_shift needs one value per joint")
        object.__setattr__(self, "angle_shift", tuple(float(a) for a in self.angle_shift))


@dataclass(frozen=True)
class Contact:
    """Obstacle contact between ``t_contact`` and ``t_release``.

    Frozen joints stop moving, and their sensors see a multiplicative
    intensity ``gain`` from the contact force while contact lasts.
    """

    t_contact: float
    t_release: float
    frozen_joints: tuple[int, ...] = (2,)
    gain: float = 1.0

    def __post_init__(self):
        if not self.gain >= 1.0:
            raise ScenarioValidationError(f"contact gain must be >= 1, got {self.gain}")
        if not self.t_release > self.t_contact:
            raise ScenarioValidationError(
                f"contact release ({self.t_release}) must come after contact ({self.t_contact})"
            )
        if self.t_contact < 0:
            raise ScenarioValidationError("t_contact must be >= 0")
        frozen = tuple(sorted({joint_index(j) for j in self.frozen_joints}))
        if not frozen:
            raise ScenarioValidationError("contact must freeze at least one joint")
        object.__setattr__(self, "frozen_joints", frozen)


@dataclass(frozen=True)
class SimScenario:
    kind: ScenarioKind = ScenarioKind.QUASI_STATIC_SWEEP
    pulley_range: float = DEFAULT_PULLEY_RANGE
    pulley_step: float = DEFAULT_PULLEY_STEP
    sample_rate: float = DEFAULT_SAMPLE_RATE
    coupling_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    joint_limits: tuple[float, float, float] = (90.0, 90.0, 90.0)
    kappa: float | None = None
    repeats: int = 5
    cycles: int = 450
    actuation_frequency: float = DEFAULT_ACTUATION_FREQUENCY
    # stress cycles only: fraction by which the bend-induced intensity swing decays over the run
    decay: float = 0.0
    # contact event only: stepped actuation and run length
    contact_step: float = 9.0
    contact_step_period: float = 0.25
    duration: float | None = None
    disturbance: Disturbance | None = None
    contact: Contact | None = None
    single_sensor: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        object.__setattr__(self, "coupling_weights", tuple(float(w) for w in self.coupling_weights))
        object.__setattr__(self, "joint_limits", tuple(float(x) for x in self.joint_limits))
        if not self.pulley_step > 0:
            raise ScenarioValidationError("pulley_step must be > 0")
        if not self.pulley_range > 0:
            raise ScenarioValidationError("pulley_range must be > 0")
        if not self.sample_rate > 0:
            raise ScenarioValidationError("sample_rate must be > 0")
        w = self.coupling_weights
        if len(w) != 3 or any(x < 0 for x in w):
            raise ScenarioValidationError("coupling_weights must be 3 non-negative values")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ScenarioValidationError(f"coupling_weights must sum to 1, got {sum(w)!r}")
        if len(self.joint_limits) != 3 or any(not x > 0 for x in self.joint_limits):
            raise ScenarioValidationError("joint_limits must be 3 positive values")
        if self.kappa is not None and not self.kappa > 0:
            raise ScenarioValidationError("kappa must be > 0")
        if self.repeats < 1 or self.cycles < 1:
            raise ScenarioValidationError("repeats and cycles must be >= 1")
        if not self.actuation_frequency > 0:
            raise ScenarioValidationError("actuation_frequency must be > 0")
        if not 0 <= self.decay < 1:
            raise ScenarioValidationError("decay must lie in [0, 1)")
        if not (self.contact_step > 0 and self.contact_step_period > 0):
            raise ScenarioValidationError("contact_step and contact_step_period must be > 0")
        if self.kind is ScenarioKind.CONTACT_EVENT and self.contact is None:
            raise ScenarioValidationError("contact_event scenario needs a contact")
        if self.duration is not None and not self.duration > 0:
            raise ScenarioValidationError("duration must be > 0")

    @property
    def effective_kappa(self) -> float:
        """Pulley-to-bend ratio; by default the smallest one that drives every joint to its limit."""
        if self.kappa is not None:
            return self.kappa
        return max(lim / (w * self.pulley_range) for w, lim in zip(self.coupling_weights, self.joint_limits) if w > 0)


@dataclass(frozen=True)
class ContactState:
    frozen: tuple[bool, bool, bool]
    pulley_at_contact: float
    angles_at_contact: tuple[float, float, float]


def joint_angles_from_pulley(pulley_deg, coupling_weights, joint_limits, contact_state=None, kappa=1.0):
    """Joint angles (degrees) produced by a pulley rotation.

    Free motion gives ``min(w_j * pulley * kappa, limit_j)``. Frozen joints
    hold their angle at contact and their weight goes to the free joints in
    proportion to the free joints' own weights. Vectorised over ``pulley_deg``.
    """
    p = np.asarray(pulley_deg, dtype=float)
    w = np.asarray(coupling_weights, dtype=float)
    lim = np.asarray(joint_limits, dtype=float)
    free = np.minimum(np.multiply.outer(p, w) * kappa, lim)
    if contact_state is None:
        return free
    frozen = np.asarray(contact_state.frozen, dtype=bool)
    base = np.asarray(contact_state.angles_at_contact, dtype=float)
    w_free = w[~frozen].sum()
    share = np.where(frozen, 0.0, w / w_free if w_free > 0 else 0.0)
    moved = base + np.multiply.outer(p - contact_state.pulley_at_contact, share) * kappa
    return np.clip(moved, 0.0, lim)


def sense(theta_deg, spec: SensorSpec, unloading, rng: np.random.Generator, gain: float = 1.0):
    """Simulated raw intensity (nW/cm^2) for bend angles ``theta_deg``.

    ``unloading`` is a boolean (or boolean array) selecting the hysteresis
    offset. Consumes one standard normal per angle from ``rng``.
    """
    theta = np.asarray(theta_deg, dtype=float)
    z = rng.standard_normal(theta.shape)
    y = spec.beta0_true + spec.beta1_true * theta + spec.hysteresis_offset * np.asarray(unloading, dtype=float)
    y = y + spec.noise_sigma * z
    intensity = gain * spec.i0 * 10.0 ** (-y / 10.0)
    return float(intensity) if intensity.ndim == 0 else intensity


@dataclass(frozen=True, eq=False)
class TrialLog:
    """Columnar trial record: one row per sample, angles and intensities per joint."""

    t: np.ndarray
    pulley: np.ndarray
    theta: np.ndarray
    intensity: np.ndarray
    unloading: np.ndarray

    def __post_init__(self):
        for name in ("t", "pulley", "theta", "intensity"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        un = np.array(self.unloading, dtype=bool)
        un.setflags(write=False)
        object.__setattr__(self, "unloading", un)
        n = len(self.t)
        if self.theta.shape != (n, 3) or self.intensity.shape != (n, 3):
            raise DimensionError("theta and intensity must be (N, 3)")
        if self.pulley.shape != (n,) or self.unloading.shape != (n,):
            raise DimensionError("pulley and phase columns must have one entry per record")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            k = int(np.argmax(np.diff(self.t) <= 0)) + 1
            raise StreamOrderError(f"timestamps must be strictly increasing (record {k})")
        if not np.all(np.isfinite(self.intensity)) or np.any(self.intensity < 0):
            raise DataValidationError("intensities must be finite and >= 0")

    def __len__(self) -> int:
        return len(self.t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrialLog):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("t", "pulley", "theta", "intensity", "unloading")
        )

    @property
    def phases(self) -> list[Phase]:
        return [Phase.UNLOADING if u else Phase.LOADING for u in self.unloading]

    def records(self) -> Iterator[dict]:
        for k in range(len(self)):
            yield {
                "t": float(self.t[k]),
                "pulley_deg": float(self.pulley[k]),
                "theta_mcp_deg": float(self.theta[k, 0]),
                "theta_pip_deg": float(self.theta[k, 1]),
                "theta_dip_deg": float(self.theta[k, 2]),
                "i_mcp": float(self.intensity[k, 0]),
                "i_pip": float(self.intensity[k, 1]),
                "i_dip": float(self.intensity[k, 2]),
                "phase": Phase.UNLOADING if self.unloading[k] else Phase.LOADING,
            }

    def reference_intensity(self) -> np.ndarray:
        """Per-channel I0: the first reading of the trial."""
        return self.intensity[0].copy()

    def losses(self, i0=None) -> np.ndarray:
        """(N, 3) power loss in dB; ``i0`` defaults to the first reading."""
        ref = self.reference_intensity() if i0 is None else np.broadcast_to(np.asarray(i0, dtype=float), (3,))
        return power_loss(self.intensity, ref)


def sweep_pulley_half(pulley_range: float, pulley_step: float) -> np.ndarray:
    """Pulley angles read during one loading half-sweep.

    The pulley settles at multiples of the step (plus the range end when
    the step does not divide it). One reading is taken at rest before the
    first move, then each step contributes a reading mid-move and one after
    settling, so a half-sweep over P settle points yields 2P-1 readings.
    """
    n = int(math.floor(pulley_range / pulley_step + 1e-9))
    settle = [i * pulley_step for i in range(n + 1)]
    if pulley_range - settle[-1] > 1e-9 * pulley_range:
        settle.append(pulley_range)
    else:
        settle[-1] = pulley_range
    settle = np.array(settle)
    out = np.empty(2 * len(settle) - 1)
    out[0::2] = settle
    out[1::2] = 0.5 * (settle[:-1] + settle[1:])
    return out


def cycle_boundaries(scenario: SimScenario) -> np.ndarray:
    """Start times of each stress cycle plus the end of the last one."""
    return np.arange(scenario.cycles + 1) / scenario.actuation_frequency


def contact_flags(scenario: SimScenario, t) -> np.ndarray:
    """True where the scenario holds joints frozen by contact.

    A sample is in contact when ``t_contact <= t < t_release``.
    """
    t = np.asarray(t, dtype=float)
    if scenario.contact is None:
        return np.zeros(t.shape, dtype=bool)
    c = scenario.contact
    return (t >= c.t_contact) & (t < c.t_release)


def _contact_pulley(scenario: SimScenario, t):
    steps = np.floor(np.asarray(t, dtype=float) / scenario.contact_step_period + 1e-9)
    return np.minimum(steps * scenario.contact_step, scenario.pulley_range)


def _trajectory(scenario: SimScenario):
    """Sample times, pulley angles and unloading mask for a scenario."""
    kind = scenario.kind
    rate = scenario.sample_rate
    if kind in (ScenarioKind.QUASI_STATIC_SWEEP, ScenarioKind.WEIGHTED_SWEEP):
        half = sweep_pulley_half(scenario.pulley_range, scenario.pulley_step)
        one = np.concatenate([half, half[::-1]])
        pulley = np.tile(one, scenario.repeats)
        unloading = np.tile(np.r_[np.zeros(len(half), bool), np.ones(len(half), bool)], scenario.repeats)
        t = np.arange(len(pulley)) / rate
    elif kind is ScenarioKind.STRESS_CYCLES:
        total = scenario.cycles / scenario.actuation_frequency
        n = int(math.ceil(total * rate - 1e-9))
        t = np.arange(n) / rate
        u = np.mod(t * scenario.actuation_frequency, 1.0)
        pulley = scenario.pulley_range * np.where(u < 0.5, 2 * u, 2 - 2 * u)
        unloading = u >= 0.5
    else:
        duration = scenario.duration if scenario.duration is not None else scenario.contact.t_release + 4.0
        n = int(math.ceil(duration * rate - 1e-9))
        t = np.arange(n) / rate
        pulley = _contact_pulley(scenario, t)
        d = np.diff(pulley, prepend=pulley[0])
        unloading = np.zeros(n, dtype=bool)
        current = False
        for k in range(n):
            if d[k] > 0:
                current = False
            elif d[k] < 0:
                current = True
            unloading[k] = current
    return t, pulley, unloading


def simulate_angles(scenario: SimScenario, t, pulley) -> np.ndarray:
    """Ground-truth joint angles along a trajectory, including contact and load shifts."""
    kappa = scenario.effective_kappa
    theta = joint_angles_from_pulley(pulley, scenario.coupling_weights, scenario.joint_limits, kappa=kappa)
    if scenario.contact is not None:
        c = scenario.contact
        p_c = float(_contact_pulley(scenario, c.t_contact)) if scenario.kind is ScenarioKind.CONTACT_EVENT else float(
            np.interp(c.t_contact, t, pulley)
        )
        at_contact = joint_angles_from_pulley(p_c, scenario.coupling_weights, scenario.joint_limits, kappa=kappa)
        state = ContactState(
            frozen=tuple(j in c.frozen_joints for j in range(3)),
            pulley_at_contact=p_c,
            angles_at_contact=tuple(float(a) for a in at_contact),
        )
        mask = contact_flags(scenario, t)
        held = joint_angles_from_pulley(
            pulley[mask], scenario.coupling_weights, scenario.joint_limits, state, kappa=kappa
        )
        theta = theta.copy()
        theta[mask] = held
    if scenario.disturbance is not None:
        theta = theta + np.asarray(scenario.disturbance.angle_shift)
    return theta


def run_scenario(scenario: SimScenario, specs: Sequence[SensorSpec]) -> TrialLog:
    """Generate the trial log for ``scenario``; deterministic in ``scenario.seed``.

    ``specs`` holds one SensorSpec per joint, or a single spec when
    ``scenario.single_sensor`` is set. A single-sensor finger responds to
    the summed joint bend and its one channel is copied into all three
    intensity columns.
    """
    specs = list(specs)
    if scenario.single_sensor:
        if len(specs) not in (1, 3):
            raise ScenarioValidationError("single-sensor scenario needs one SensorSpec")
    elif len(specs) != 3:
        raise ScenarioValidationError(f"need 3 SensorSpecs, got {len(specs)}")
    rng = np.random.Generator(np.random.PCG64(scenario.seed))
    t, pulley, unloading = _trajectory(scenario)
    theta = simulate_angles(scenario, t, pulley)
    gain = scenario.disturbance.gain if scenario.disturbance is not None else 1.0

    if scenario.single_sensor:
        spec = specs[0]
        one = sense(theta.sum(axis=1), spec, unloading, rng, gain)
        intensity = np.repeat(np.asarray(one)[:, None], 3, axis=1)
        refs = np.full(3, spec.i0)
    else:
        intensity = np.column_stack([sense(theta[:, j], specs[j], unloading, rng, gain) for j in range(3)])
        refs = np.array([s.i0 for s in specs])

    if scenario.contact is not None and scenario.contact.gain != 1.0:
        mask = contact_flags(scenario, t)
        cols = [0, 1, 2] if scenario.single_sensor else list(scenario.contact.frozen_joints)
        for j in cols:
            intensity[mask, j] *= scenario.contact.gain
    if scenario.kind is ScenarioKind.STRESS_CYCLES and scenario.decay > 0:
        total = scenario.cycles / scenario.actuation_frequency
        keep = 1.0 - scenario.decay * t / total
        intensity = refs - (refs - intensity) * keep[:, None]
    return TrialLog(t=t, pulley=pulley, theta=theta, intensity=intensity, unloading=unloading)
