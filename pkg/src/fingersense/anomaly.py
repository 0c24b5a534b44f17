"""PCA residual-subspace contact detection.

A detector is trained on free-motion loss vectors. Online observations are
centred with the training mean and projected onto the residual subspace;
the squared norm of that projection (the Q statistic) is compared with an
analytic threshold derived from the residual eigenvalues.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .eig3 import eigh3
from .errors import (
    DataValidationError,
    DegenerateExponentError,
    DegenerateResidualError,
    DegenerateVarianceError,
    DimensionError,
    DomainError,
    InsufficientDataError,
    StreamOrderError,
)

C_ALPHA_TABLE = {0.90: 1.282, 0.95: 1.645, 0.99: 2.326}

# Acklam's rational approximation to the inverse normal CDF
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def inverse_normal(p: float) -> float:
    """Standard normal quantile, relative error below 1.15e-9."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p > 1.0 - _P_LOW:
        q = math.sqrt(-2.0 * math.log1p(-p))
        return -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
        (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def c_alpha(alpha: float) -> float:
    """Normal deviate for confidence ``alpha``; tabulated three-digit values where available."""
    for key, value in C_ALPHA_TABLE.items():
        if abs(alpha - key) < 1e-12:
            return value
    return inverse_normal(alpha)


def fit_pca(observations) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, loadings (columns, descending variance) and eigenvalues of N x 3 data.

    Each loading column is signed so its largest-magnitude entry is positive.
    """
    x = np.asarray(observations, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3:
        raise DimensionError(f"observations must be N x 3, got shape {x.shape}")
    if x.shape[0] < 4:
        raise InsufficientDataError(f"PCA needs at least 4 observations, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise DataValidationError("observations contain non-finite values")
    mean = x.mean(axis=0)
    d = x - mean
    cov = d.T @ d / (x.shape[0] - 1)
    vals, vecs = eigh3(cov)
    vals = np.maximum(vals, 0.0)
    for k in range(3):
        col = vecs[:, k]
        if col[np.argmax(np.abs(col))] < 0:
            vecs[:, k] = -col
    return mean, vecs, vals


def select_beta(eigenvalues: Sequence[float], cutoff: float = 0.9) -> int:
    """Smallest principal dimension explaining at least ``cutoff`` of the variance, capped at m-1."""
    lam = np.asarray(eigenvalues, dtype=float)
    if not 0 < cutoff < 1:
        raise DomainError(f"cutoff must lie in (0, 1), got {cutoff}")
    total = lam.sum()
    if not total > 0:
        raise DegenerateVarianceError("all eigenvalues are zero")
    frac = np.cumsum(lam) / total
    beta = int(np.argmax(frac >= cutoff - 1e-15)) + 1 if np.any(frac >= cutoff - 1e-15) else len(lam)
    return min(beta, len(lam) - 1)


def residual_moments(eigenvalues, beta: int) -> tuple[float, float, float, float]:
    """Power sums of the residual eigenvalues and the exponent h0."""
    lam = np.asarray(eigenvalues, dtype=float)
    res = lam[beta:]
    t1, t2, t3 = (float(np.sum(res ** i)) for i in (1, 2, 3))
    if t2 == 0:
        raise DegenerateResidualError("residual spectrum is zero")
    h0 = 1.0 - 2.0 * t1 * t3 / (3.0 * t2 * t2)
    return t1, t2, t3, h0


def threshold_jth(eigenvalues: Sequence[float], beta: int, c_alpha: float = 1.282, eps_rel: float = 1e-12) -> float:
    """Q-statistic control limit from the residual eigenvalues (Box-type approximation)."""
    lam = np.asarray(eigenvalues, dtype=float)
    m = len(lam)
    if not 1 <= beta < m:
        raise DomainError(f"beta must satisfy 1 <= beta < {m}, got {beta}")
    eps = eps_rel * float(lam[0])
    if not np.any(lam[beta:] > eps):
        raise DegenerateResidualError(
            "residual eigenvalues are numerically zero; a false-alarm threshold cannot be defined"
        )
    t1, t2, _, h0 = residual_moments(lam, beta)
    if abs(h0) < 1e-12:
        raise DegenerateExponentError("h0 is zero")
    base = c_alpha * math.sqrt(2.0 * t2 * h0 * h0) / t1 + 1.0 + t2 * h0 * (h0 - 1.0) / (t1 * t1)
    if not base > 0:
        raise DegenerateExponentError(f"threshold base is non-positive ({base})")
    return t1 * base ** (1.0 / h0)


@dataclass(frozen=True, eq=False)
class PcaDetector:
    mean: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray
    beta: int
    alpha: float
    c_alpha: float
    j_th: float
    i0: np.ndarray | None = None

    def __post_init__(self):
        for name in ("mean", "loadings", "eigenvalues"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.i0 is not None:
            arr = np.array(self.i0, dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, "i0", arr)
        m = len(self.mean)
        if self.loadings.shape != (m, m) or self.eigenvalues.shape != (m,):
            raise DimensionError("loadings must be m x m and eigenvalues length m")
        if not 1 <= self.beta < m:
            raise DomainError(f"beta must satisfy 1 <= beta < {m}")

    def __eq__(self, other):
        if not isinstance(other, PcaDetector):
            return NotImplemented
        same_i0 = (self.i0 is None and other.i0 is None) or (
            self.i0 is not None and other.i0 is not None and np.array_equal(self.i0, other.i0)
        )
        return (np.array_equal(self.mean, other.mean) and np.array_equal(self.loadings, other.loadings)
                and np.array_equal(self.eigenvalues, other.eigenvalues) and self.beta == other.beta
                and self.alpha == other.alpha and self.c_alpha == other.c_alpha and self.j_th == other.j_th
                and same_i0)

    @property
    def m(self) -> int:
        return len(self.mean)

    @property
    def p_pc(self) -> np.ndarray:
        return self.loadings[:, :self.beta]

    @property
    def p_res(self) -> np.ndarray:
        return self.loadings[:, self.beta:]

    @property
    def explained(self) -> float:
        return float(self.eigenvalues[:self.beta].sum() / self.eigenvalues.sum())

    def q(self, z):
        """Q statistic of one observation or an (N, m) batch."""
        d = np.asarray(z, dtype=float) - self.mean
        proj = d @ self.p_res
        q = np.sum(proj * proj, axis=-1)
        return float(q) if np.ndim(q) == 0 else q


def q_statistic(z, detector: PcaDetector):
    return detector.q(z)


def train_detector(observations, alpha: float = 0.90, cutoff: float = 0.9, beta: int | None = None,
                   i0=None) -> PcaDetector:
    """Fit PCA on free-motion loss vectors and derive the threshold.

    ``i0`` records the reference intensities the training losses were computed
    with, so online intensities can be converted on the same scale.
    """
    mean, loadings, lam = fit_pca(observations)
    if beta is None:
        beta = select_beta(lam, cutoff)
    ca = c_alpha(alpha)
    return PcaDetector(mean=mean, loadings=loadings, eigenvalues=lam, beta=beta, alpha=alpha, c_alpha=ca,
                       j_th=threshold_jth(lam, beta, ca), i0=i0)


class DetectorState(str, enum.Enum):
    FREE = "free"
    CONTACT = "contact"


class Transition(str, enum.Enum):
    CONTACT_ONSET = "contact_onset"
    CONTACT_RELEASE = "contact_release"


@dataclass(frozen=True)
class DetectionEvent:
    t: float
    q: float
    threshold: float
    state: DetectorState
    transition: Transition | None = None


class StreamDetector:
    """Online contact detector for one stream.

    Flips to contact after ``debounce`` consecutive readings with Q above
    the threshold, and back to free after ``debounce`` consecutive readings
    at or below it.
    """

    def __init__(self, detector: PcaDetector, debounce: int = 1):
        if debounce < 1:
            raise DomainError("debounce must be >= 1")
        self.detector = detector
        self.debounce = debounce
        self.state = DetectorState.FREE
        self._run = 0
        self._last_t = None

    def update(self, t: float, z) -> DetectionEvent:
        if self._last_t is not None and not t > self._last_t:
            raise StreamOrderError(f"timestamp {t} does not follow {self._last_t}")
        self._last_t = t
        q = self.detector.q(z)
        return self.update_q(t, q)

    def update_q(self, t: float, q: float) -> DetectionEvent:
        above = q > self.detector.j_th
        disagrees = above != (self.state is DetectorState.CONTACT)
        self._run = self._run + 1 if disagrees else 0
        transition = None
        if self._run >= self.debounce:
            self._run = 0
            if self.state is DetectorState.FREE:
                self.state, transition = DetectorState.CONTACT, Transition.CONTACT_ONSET
            else:
                self.state, transition = DetectorState.FREE, Transition.CONTACT_RELEASE
        return DetectionEvent(t=float(t), q=float(q), threshold=self.detector.j_th, state=self.state,
                              transition=transition)


def detect_stream(readings: Iterable[tuple[float, Sequence[float]]], detector: PcaDetector,
                  debounce: int = 1) -> list[DetectionEvent]:
    """Run the streaming detector over ``(t, loss_vector)`` pairs; one event per reading."""
    stream = StreamDetector(detector, debounce)
    return [stream.update(t, z) for t, z in readings]


def _fmt(values) -> str:
    return ", ".join(format(float(v), ".17g") for v in np.ravel(values))


def dumps_detector(det: PcaDetector) -> str:
    """Plain-text key = value model; floats carry 17 significant digits."""
    lines = [
        "# fingersense PCA detector",
        "format = 1",
        f"m = {det.m}",
        f"mean = {_fmt(det.mean)}",
        f"loadings = {_fmt(det.loadings)}",
        f"eigenvalues = {_fmt(det.eigenvalues)}",
        f"beta = {det.beta}",
        f"alpha = {format(det.alpha, '.17g')}",
        f"c_alpha = {format(det.c_alpha, '.17g')}",
        f"j_th = {format(det.j_th, '.17g')}",
    ]
    if det.i0 is not None:
        lines.append(f"i0 = {_fmt(det.i0)}")
    return "\n".join(lines) + "\n"


def loads_detector(text: str) -> PcaDetector:
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataValidationError(f"detector model line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        fields[key] = value
    required = ("m", "mean", "loadings", "eigenvalues", "beta", "alpha", "j_th")
    missing = [k for k in required if k not in fields]
    if missing:
        raise DataValidationError(f"detector model missing keys: {', '.join(missing)}")
    unknown = set(fields) - set(required) - {"format", "c_alpha", "i0"}
    if unknown:
        raise DataValidationError(f"detector model has unknown keys: {', '.join(sorted(unknown))}")

    def floats(key):
        try:
            return np.array([float(v) for v in fields[key].split(",")])
        except ValueError as exc:
            raise DataValidationError(f"detector model key {key!r}: {exc}") from None

    try:
        m = int(fields["m"])
        alpha = float(fields["alpha"])
        return PcaDetector(
            mean=floats("mean"),
            loadings=floats("loadings").reshape(m, m),
            eigenvalues=floats("eigenvalues"),
            beta=int(fields["beta"]),
            alpha=alpha,
            c_alpha=float(fields["c_alpha"]) if "c_alpha" in fields else c_alpha(alpha),
            j_th=float(fields["j_th"]),
            i0=floats("i0") if "i0" in fields else None,
        )
    except (ValueError, DimensionError, DomainError) as exc:
        raise DataValidationError(f"detector model is malformed: {exc}") from None


def save_detector(det: PcaDetector, path) -> None:
    Path(path).write_text(dumps_detector(det), encoding="utf-8")


def load_detector(path) -> PcaDetector:
    return loads_detector(Path(path).read_text(encoding="utf-8"))
