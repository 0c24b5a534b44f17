"""Reproducibility test across sensors: an ANCOVA-style F test and the F distribution.

The default test is the sensor (group) effect adjusted for the angle
covariate, with the error term taken from the separate-lines model, so
``F ~ F(g - 1, N - 2g)``. The classical common-slope variant uses the
parallel-lines error term instead, ``F ~ F(g - 1, N - g - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError, SingularDesignError

P_VALUE_FLOOR = 1e-300


def _betacf(a: float, b: float, x: float, max_iter: int = 100000, eps: float = 1e-16) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _stirling_tail(x: float) -> float:
    return 1.0 / (12.0 * x) - 1.0 / (360.0 * x ** 3) + 1.0 / (1260.0 * x ** 5)


def _log_beta(a: float, b: float) -> float:
    small, big = min(a, b), max(a, b)
    if big < 100.0:
        return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    # lgamma(big + small) - lgamma(big) without cancelling two huge values
    diff = ((big - 0.5) * math.log1p(small / big) + small * math.log(big + small) - small
            + _stirling_tail(big + small) - _stirling_tail(big))
    return math.lgamma(small) - diff


def _log_front(a: float, b: float, x: float, y: float) -> float:
    return a * math.log(x) + b * math.log(y) - _log_beta(a, b)


def betainc(a: float, b: float, x: float, y: float | None = None) -> float:
    """Regularised incomplete beta function I_x(a, b).

    ``y`` may carry ``1 - x`` computed without cancellation; it matters
    when ``x`` is close to 0 or 1.
    """
    if y is None:
        y = 1.0 - x
    if not all(math.isfinite(v) for v in (a, b, x, y)):
        raise DomainError("betainc arguments must be finite")
    if a <= 0 or b <= 0:
        raise DomainError("betainc needs a, b > 0")
    if x <= 0:
        return 0.0
    if y <= 0:
        return 1.0
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(_log_front(a, b, x, y)) * _betacf(a, b, x) / a
    return 1.0 - math.exp(_log_front(b, a, y, x)) * _betacf(b, a, y) / b


def _check_f_args(x, df1, df2):
    if not all(math.isfinite(v) for v in (x, df1, df2)):
        raise DomainError("F distribution arguments must be finite")
    if df1 < 1 or df2 < 1:
        raise DomainError("degrees of freedom must be >= 1")
    if x < 0:
        raise DomainError("F statistic must be >= 0")


def f_cdf(x: float, df1: float, df2: float) -> float:
    _check_f_args(x, df1, df2)
    if x == 0:
        return 0.0
    den = df1 * x + df2
    return betainc(df1 / 2.0, df2 / 2.0, df1 * x / den, df2 / den)


def f_sf(x: float, df1: float, df2: float) -> float:
    """Upper tail P(F > x), computed directly so tiny p-values keep their precision."""
    _check_f_args(x, df1, df2)
    if x == 0:
        return 1.0
    den = df1 * x + df2
    return betainc(df2 / 2.0, df1 / 2.0, df2 / den, df1 * x / den)


def format_p_value(p: float) -> str:
    if p < P_VALUE_FLOOR:
        return f"< {P_VALUE_FLOOR:g}"
    return format(p, ".6g")


@dataclass(frozen=True)
class AncovaResult:
    f_stat: float
    df_between: int
    df_error: int
    p_value: float
    model: str = "separate"
    sse_pooled: float = float("nan")
    sse_parallel: float = float("nan")
    sse_separate: float = float("nan")

    @property
    def p_text(self) -> str:
        return format_p_value(self.p_value)


def _group_sums(theta, y, label):
    n = len(theta)
    if n < 3:
        raise InsufficientDataError(f"group {label} has {n} samples, need >= 3")
    if np.all(theta == theta[0]):
        raise SingularDesignError(f"group {label}: all covariate values identical")
    tm, ym = theta.mean(), y.mean()
    dt, dy = theta - tm, y - ym
    return n, float(np.dot(dt, dt)), float(np.dot(dt, dy)), float(np.dot(dy, dy))


def ancova_f(groups: Sequence[tuple[Sequence[float], Sequence[float]]], model: str = "separate",
             labels: Sequence[str] | None = None) -> AncovaResult:
    """F test for differences between per-sensor response lines.

    ``groups`` is a list of ``(theta, y)`` pairs, one per sensor. The
    numerator is the extra sum of squares of parallel lines (one intercept
    per group, common slope) over a single pooled line, on g - 1 degrees
    of freedom. ``model`` picks the error term: ``"separate"`` (one line per
    group) or ``"common_slope"`` (parallel lines).
    """
    if model not in ("separate", "common_slope"):
        raise DomainError(f"unknown ANCOVA model {model!r}")
    if len(groups) < 2:
        raise InsufficientDataError("ANCOVA needs at least 2 groups")
    labels = list(labels) if labels is not None else [str(k) for k in range(len(groups))]
    arrays = [(np.asarray(t, dtype=float), np.asarray(y, dtype=float)) for t, y in groups]

    sums = [_group_sums(theta, y, label) for (theta, y), label in zip(arrays, labels)]
    n = np.array([s[0] for s in sums], dtype=float)
    n_total = int(n.sum())
    sxx_w = sum(s[1] for s in sums)
    sxy_w = sum(s[2] for s in sums)
    syy_w = sum(s[3] for s in sums)
    sse_separate = sum(s[3] - s[2] * s[2] / s[1] for s in sums)
    sse_parallel = syy_w - sxy_w * sxy_w / sxx_w

    # between-group sums about a mean shifted to the first group, so identical groups cancel exactly
    tg = np.array([a[0].mean() for a in arrays])
    yg = np.array([a[1].mean() for a in arrays])
    dtg = (tg - tg[0]) - np.dot(n, tg - tg[0]) / n_total
    dyg = (yg - yg[0]) - np.dot(n, yg - yg[0]) / n_total
    sxx_b = float(np.dot(n, dtg * dtg))
    sxy_b = float(np.dot(n, dtg * dyg))
    syy_b = float(np.dot(n, dyg * dyg))
    sse_pooled = (syy_w + syy_b) - (sxy_w + sxy_b) ** 2 / (sxx_w + sxx_b)
    extra = syy_b + sxy_w * sxy_w / sxx_w - (sxy_w + sxy_b) ** 2 / (sxx_w + sxx_b)

    g = len(arrays)
    df_between = g - 1
    if model == "separate":
        df_error = n_total - 2 * g
        sse_error = sse_separate
    else:
        df_error = n_total - g - 1
        sse_error = sse_parallel
    if df_error < 1:
        raise InsufficientDataError("not enough samples for the error degrees of freedom")
    extra = max(extra, 0.0)
    if sse_error <= 0:
        f_stat = 0.0 if extra == 0 else math.inf
    else:
        f_stat = (extra / df_between) / (sse_error / df_error)
    p = 1.0 if f_stat == 0 else (0.0 if math.isinf(f_stat) else f_sf(f_stat, df_between, df_error))
    return AncovaResult(f_stat=f_stat, df_between=df_between, df_error=df_error, p_value=p, model=model,
                        sse_pooled=sse_pooled, sse_parallel=sse_parallel, sse_separate=sse_separate)
