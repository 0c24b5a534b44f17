"""Optical loss conversion, linear calibration and per-sensor quality metrics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateCycleError,
    DegenerateRangeError,
    DomainError,
    InsufficientDataError,
    MissingPhaseError,
    SingularDesignError,
    ZeroSensitivityError,
)

JOINTS = ("MCP", "PIP", "DIP")


class Phase(str, enum.Enum):
    LOADING = "loading"
    UNLOADING = "unloading"


@dataclass(frozen=True)
class RawReading:
    t: float
    sensor_id: str
    intensity: float

    def __post_init__(self):
        if not math.isfinite(self.intensity) or self.intensity < 0:
            raise DomainError(f"intensity must be finite and >= 0, got {self.intensity!r}")


@dataclass(frozen=True)
class LossSample:
    theta: float
    loss: float
    phase: Phase = Phase.LOADING


@dataclass(frozen=True)
class JointCalibration:
    """Fitted loss-vs-angle line for one sensor, with its quality metrics.

    ``fsr`` is the max-minus-min span used for hysteresis; ``fsr_abs`` is
    the max-|y| span used for linearity. Both are kept because the two
    metrics normalise differently.
    """

    beta0: float
    beta1: float
    i0: float
    n_samples: int
    linearity_fsr: float
    rms_error_deg: float
    hysteresis_fsr: float
    fsr: float
    fsr_abs: float
    sensor_id: str = ""

    @property
    def sensitivity(self) -> float:
        return self.beta1

    def predict(self, theta):
        return self.beta0 + self.beta1 * np.asarray(theta, dtype=float)


def power_loss(intensity, i0):
    """Optical power loss in dB relative to ``i0``; negative for a gain.

    Accepts scalars or arrays.
    """
    intensity = np.asarray(intensity, dtype=float)
    i0 = np.asarray(i0, dtype=float)
    if not np.all(intensity > 0):
        raise DomainError("power_loss: intensity must be > 0")
    if not np.all(i0 > 0):
        raise DomainError("power_loss: i0 must be > 0")
    y = -10.0 * np.log10(intensity / i0)
    return float(y) if y.ndim == 0 else y


def loss_samples(theta, loss, phase=None) -> list[LossSample]:
    theta = np.asarray(theta, dtype=float)
    loss = np.asarray(loss, dtype=float)
    if phase is None:
        phase = [Phase.LOADING] * len(theta)
    return [LossSample(float(a), float(b), Phase(p)) for a, b, p in zip(theta, loss, phase)]


def _columns(samples: Sequence[LossSample]):
    theta = np.fromiter((s.theta for s in samples), dtype=float, count=len(samples))
    y = np.fromiter((s.loss for s in samples), dtype=float, count=len(samples))
    return theta, y


def _fit_arrays(theta: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    if len(theta) < 2:
        raise InsufficientDataError(f"need at least 2 samples to fit a line, got {len(theta)}")
    if np.all(theta == theta[0]):
        raise SingularDesignError("all theta values identical; slope is undetermined")
    # centred normal equations
    tm = theta.mean()
    ym = y.mean()
    dt = theta - tm
    beta1 = float(np.dot(dt, y - ym) / np.dot(dt, dt))
    beta0 = float(ym - beta1 * tm)
    return beta0, beta1


def fit_line(samples: Sequence[LossSample]) -> tuple[float, float]:
    """Least-squares intercept and slope of loss against angle."""
    return _fit_arrays(*_columns(samples))


def _linearity(y, residual):
    peak = np.max(np.abs(y))
    if peak == 0:
        raise DegenerateRangeError("max|y| is zero; linearity undefined")
    return float((1.0 - np.max(np.abs(residual)) / peak) * 100.0)


def linearity_fsr(samples: Sequence[LossSample], beta0: float, beta1: float) -> float:
    theta, y = _columns(samples)
    return _linearity(y, y - (beta0 + beta1 * theta))


def _rms_deg(residual, beta1):
    if beta1 == 0:
        raise ZeroSensitivityError("beta1 is zero; RMS error in degrees undefined")
    n = len(residual)
    if n < 2:
        raise InsufficientDataError("RMS error needs N >= 2")
    return float(math.sqrt(np.dot(residual, residual) / (n - 1)) / abs(beta1))


def rms_error_deg(samples: Sequence[LossSample], beta0: float, beta1: float) -> float:
    """Residual scatter converted to degrees through the slope (always >= 0)."""
    theta, y = _columns(samples)
    return _rms_deg(y - (beta0 + beta1 * theta), beta1)


def _hysteresis(y, unloading):
    if not unloading.any() or unloading.all():
        raise MissingPhaseError("hysteresis needs both loading and unloading samples")
    span = float(np.max(y) - np.min(y))
    if span == 0:
        raise DegenerateRangeError("full scale range is zero; hysteresis undefined")
    diff = abs(float(y[~unloading].mean()) - float(y[unloading].mean()))
    return diff / span * 100.0


def hysteresis_fsr(samples: Sequence[LossSample]) -> float:
    # global phase means, not per-angle-bin
    y = np.fromiter((s.loss for s in samples), dtype=float, count=len(samples))
    unloading = np.array([s.phase == Phase.UNLOADING for s in samples], dtype=bool)
    return _hysteresis(y, unloading)


def calibrate_arrays(theta, loss, unloading, *, i0: float, sensor_id: str = "") -> JointCalibration:
    """Fit and score one sensor from column arrays.

    ``unloading`` is a boolean mask. Hysteresis is NaN when the data holds
    a single phase.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(loss, dtype=float)
    unloading = np.asarray(unloading, dtype=bool)
    beta0, beta1 = _fit_arrays(theta, y)
    residual = y - (beta0 + beta1 * theta)
    try:
        hyst = _hysteresis(y, unloading)
    except MissingPhaseError:
        hyst = float("nan")
    return JointCalibration(
        beta0=beta0,
        beta1=beta1,
        i0=float(i0),
        n_samples=len(y),
        linearity_fsr=_linearity(y, residual),
        rms_error_deg=_rms_deg(residual, beta1),
        hysteresis_fsr=hyst,
        fsr=float(np.max(y) - np.min(y)),
        fsr_abs=float(np.max(np.abs(y))),
        sensor_id=sensor_id,
    )


def calibrate(samples: Sequence[LossSample], i0: float, sensor_id: str = "") -> JointCalibration:
    theta, y = _columns(samples)
    unloading = np.array([s.phase == Phase.UNLOADING for s in samples], dtype=bool)
    return calibrate_arrays(theta, y, unloading, i0=i0, sensor_id=sensor_id)


def derive_phases(pulley) -> list[Phase]:
    """Label each record by the sign of the pulley increment.

    Zero increments carry the previous phase; the first record is loading.
    """
    pulley = np.asarray(pulley, dtype=float)
    out = []
    current = Phase.LOADING
    for k in range(len(pulley)):
        if k > 0:
            d = pulley[k] - pulley[k - 1]
            if d > 0:
                current = Phase.LOADING
            elif d < 0:
                current = Phase.UNLOADING
        out.append(current)
    return out


def normalized_cycle_amplitudes(readings: Sequence[RawReading], cycle_boundaries: Sequence[float]) -> list[float]:
    """(Imax - Imin) / Imax for each cycle.

    ``cycle_boundaries`` are K+1 increasing times; cycle k holds readings
    with ``boundaries[k] <= t < boundaries[k+1]``.
    """
    t = np.array([r.t for r in readings], dtype=float)
    intensity = np.array([r.intensity for r in readings], dtype=float)
    edges = np.asarray(cycle_boundaries, dtype=float)
    if len(edges) < 2:
        raise InsufficientDataError("need at least two cycle boundaries")
    if np.any(np.diff(edges) <= 0):
        raise DomainError("cycle boundaries must be strictly increasing")
    idx = np.searchsorted(t, edges, side="left")
    amps = []
    for k in range(len(edges) - 1):
        cycle = intensity[idx[k]:idx[k + 1]]
        if len(cycle) < 2:
            raise InsufficientDataError(f"cycle {k} has {len(cycle)} readings, need >= 2")
        imax = cycle.max()
        if imax == 0:
            raise DegenerateCycleError(f"cycle {k} has Imax = 0")
        amps.append(float((imax - cycle.min()) / imax))
    return amps


def amplitude_trend(amplitudes: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope per cycle and the total drift as a fraction of the mean.

    The drift fraction is ``|slope * n| / mean(amplitudes)``.
    """
    a = np.asarray(amplitudes, dtype=float)
    _, slope = _fit_arrays(np.arange(len(a), dtype=float), a)
    mean = float(a.mean())
    if mean == 0:
        raise DegenerateRangeError("mean amplitude is zero")
    return slope, abs(slope * len(a)) / mean
