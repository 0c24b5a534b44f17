import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fingersense.errors import DomainError, InsufficientDataError, SingularDesignError
from fingersense.stats import ancova_f, betainc, f_cdf, f_sf, format_p_value

mpmath.mp.dps = 40


def mp_f_cdf(x, d1, d2):
    z = mpmath.mpf(d1) * x / (mpmath.mpf(d1) * x + d2)
    return float(mpmath.betainc(mpmath.mpf(d1) / 2, mpmath.mpf(d2) / 2, 0, z, regularized=True))


def sse(design, y):
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    r = y - design @ coef
    return float(r @ r)


def brute_force_f(groups, model="separate"):
    """F from three explicit least-squares fits on stacked design matrices."""
    theta = np.concatenate([g[0] for g in groups])
    y = np.concatenate([g[1] for g in groups])
    n, k = len(y), len(groups)
    dummies = np.zeros((n, k))
    start = 0
    for j, (t, _) in enumerate(groups):
        dummies[start:start + len(t), j] = 1.0
        start += len(t)
    pooled = sse(np.column_stack([np.ones(n), theta]), y)
    parallel = sse(np.column_stack([dummies, theta]), y)
    separate = sse(np.column_stack([dummies, dummies * theta[:, None]]), y)
    if model == "separate":
        return ((pooled - parallel) / (k - 1)) / (separate / (n - 2 * k))
    return ((pooled - parallel) / (k - 1)) / (parallel / (n - k - 1))


def make_groups(rng, n=10, slopes=(0.02, 0.03, 0.05), offsets=(0.0, 0.1, -0.2), noise=0.05):
    out = []
    for b1, b0 in zip(slopes, offsets):
        t = rng.uniform(0, 90, n)
        out.append((t, b0 + b1 * t + rng.normal(0, noise, n)))
    return out


class TestFDistribution:
    def test_zero(self):
        assert f_cdf(0, 3, 7) == 0.0

    def test_median_of_f11(self):
        assert f_cdf(1, 1, 1) == pytest.approx(0.5, abs=1e-14)

    def test_chi_square_limit(self):
        chi2 = math.erf(math.sqrt(3.8415 / 2))
        assert f_cdf(3.8415, 1, 1e6) == pytest.approx(chi2, abs=1e-3)
        assert f_cdf(3.8415, 1, 1e6) == pytest.approx(0.95, abs=1e-3)

    @pytest.mark.parametrize("x", [0.01, 0.5, 1.0, 2.5, 10.0, 100.0])
    @pytest.mark.parametrize("d1, d2", [(1, 1), (2, 5), (8, 30), (8, 108072), (30, 3), (1, 1e6), (100, 1e5)])
    def test_against_mpmath(self, x, d1, d2):
        assert f_cdf(x, d1, d2) == pytest.approx(mp_f_cdf(x, d1, d2), abs=1e-10)

    def test_tail_keeps_precision(self):
        want = 1 - mpmath.betainc(4, mpmath.mpf(108072) / 2, 0, mpmath.mpf(8 * 40) / (8 * 40 + 108072),
                                  regularized=True)
        assert f_sf(40.0, 8, 108072) == pytest.approx(float(want), rel=1e-8)

    @given(st.floats(min_value=0, max_value=1e3), st.integers(1, 200), st.integers(1, 10 ** 6))
    @settings(max_examples=80, deadline=None)
    def test_cdf_and_sf_sum_to_one(self, x, d1, d2):
        assert f_cdf(x, d1, d2) + f_sf(x, d1, d2) == pytest.approx(1.0, abs=1e-12)

    @given(st.floats(min_value=0, max_value=50), st.floats(min_value=0, max_value=50), st.integers(1, 20),
           st.integers(1, 5000))
    @settings(max_examples=80, deadline=None)
    def test_sf_monotone(self, a, b, d1, d2):
        lo, hi = sorted((a, b))
        assert f_sf(hi, d1, d2) <= f_sf(lo, d1, d2) + 1e-15

    @pytest.mark.parametrize("args", [(math.nan, 1, 1), (1, math.inf, 1), (-1, 1, 1), (1, 0.5, 1)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            f_cdf(*args)

    def test_betainc_symmetry(self):
        assert betainc(2.5, 3.5, 0.3) == pytest.approx(1 - betainc(3.5, 2.5, 0.7), abs=1e-14)

    def test_p_value_floor(self):
        assert format_p_value(0.0) == "< 1e-300"
        assert format_p_value(0.0123) == "0.0123"


class TestAncova:
    def test_duplicated_groups_give_exact_zero(self, rng):
        (g,) = make_groups(rng, n=50, slopes=(0.03,), offsets=(0.1,))
        res = ancova_f([g, g])
        assert res.f_stat == 0.0
        assert res.p_value == 1.0

    @pytest.mark.parametrize("model", ["separate", "common_slope"])
    def test_matches_brute_force(self, rng, model):
        groups = make_groups(rng)
        res = ancova_f(groups, model=model)
        assert res.f_stat == pytest.approx(brute_force_f(groups, model), rel=1e-6)

    def test_degrees_of_freedom(self, rng):
        groups = make_groups(rng, n=12010, slopes=(0.03,) * 9, offsets=(0.0,) * 9)
        res = ancova_f(groups)
        assert (res.df_between, res.df_error) == (8, 108072)
        res = ancova_f(groups, model="common_slope")
        assert res.df_error == 108090 - 9 - 1

    def test_distinct_lines_are_significant(self, rng):
        res = ancova_f(make_groups(rng, n=200))
        assert res.p_value < 0.01

    def test_singular_group_is_named(self, rng):
        groups = make_groups(rng)
        groups[1] = (np.full(10, 5.0), groups[1][1])
        with pytest.raises(SingularDesignError, match="bad"):
            ancova_f(groups, labels=["ok", "bad", "fine"])

    def test_too_few_samples(self):
        with pytest.raises(InsufficientDataError):
            ancova_f([([0, 1], [0, 1]), ([0, 1, 2], [0, 1, 2])])

    def test_one_group(self):
        with pytest.raises(InsufficientDataError):
            ancova_f([([0, 1, 2], [0, 1, 2])])

    @given(st.floats(min_value=-100, max_value=100).filter(lambda a: abs(a) > 1e-2), st.floats(-100, 100))
    @settings(max_examples=40, deadline=None)
    def test_affine_invariance(self, a, b):
        groups = make_groups(np.random.default_rng(7))
        base = ancova_f(groups).f_stat
        moved = ancova_f([(t, a * y + b) for t, y in groups]).f_stat
        assert moved == pytest.approx(base, rel=1e-7)

    def test_p_decreases_with_f(self, rng):
        small = ancova_f(make_groups(rng, slopes=(0.03, 0.031, 0.032), offsets=(0, 0, 0), noise=0.5))
        big = ancova_f(make_groups(rng, slopes=(0.01, 0.03, 0.06), offsets=(0, 0.5, 1.0), noise=0.05))
        assert big.f_stat > small.f_stat and big.p_value < small.p_value
