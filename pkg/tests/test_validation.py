import datetime as dt
import math
import time

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from vvg.strategies import StrategySummary, Trade
from vvg.validation import (
    PermutationResult,
    gate,
    ols_fit,
    p_value_from_null,
    permutation_test,
    sign_flip_null,
    t_sf_two_sided,
    t_statistic,
    year_consistency,
)


def normal_equations(x, y):
    """Independent oracle: solve (X'X) b = X'y and compute r2 from residuals."""
    X = np.column_stack([np.ones(len(x)), np.asarray(x, float)])
    yv = np.asarray(y, float)
    b = np.linalg.solve(X.T @ X, X.T @ yv)
    resid = yv - X @ b
    r2 = 1 - resid @ resid / ((yv - yv.mean()) @ (yv - yv.mean()))
    return b[1], b[0], r2


def mp_two_sided(t, df):
    t, df = mpmath.mpf(t), mpmath.mpf(df)
    pdf = lambda u: mpmath.gamma((df + 1) / 2) / (mpmath.sqrt(df * mpmath.pi) * mpmath.gamma(df / 2)) * (1 + u * u / df) ** (-(df + 1) / 2)
    return float(2 * mpmath.quad(pdf, [abs(t), mpmath.inf]))


class TestTStatistic:
    def test_closed_form(self):
        assert t_statistic([2, -1, 2, -1]) == pytest.approx(0.5 / (math.sqrt(3) / 2), abs=1e-12)

    def test_zero_variance(self):
        assert t_statistic([5, 5, 5]) is None

    @pytest.mark.parametrize("x", [0.0, 3.5, -7.0])
    def test_single_value(self, x):
        assert t_statistic([x]) is None

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40), st.floats(-100, 100))
    def test_scale(self, values, a):
        assume(abs(a) > 1e-3)
        t = t_statistic(values)
        assume(t is not None and np.std(values) > 1e-6)
        scaled = t_statistic([a * v for v in values])
        assert scaled == pytest.approx(math.copysign(1, a) * t, rel=1e-6, abs=1e-9)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40), st.floats(-50, 50))
    def test_shift_matches_recomputation(self, values, c):
        assume(np.std(values) > 1e-6)
        shifted = [v + c for v in values]
        arr = np.asarray(shifted)
        oracle = arr.mean() / (arr.std(ddof=1) / math.sqrt(arr.size))
        assert t_statistic(shifted) == pytest.approx(oracle, rel=1e-7, abs=1e-9)


class TestTailProbability:
    def test_reported_regression_p(self):
        assert t_sf_two_sided(-2.45, 125) == pytest.approx(0.0157, abs=0.0005)

    @pytest.mark.parametrize("t, df", [(0.5, 3), (-2.45, 125), (1.96, 30), (4.0, 7), (0.0, 10), (10.0, 200)])
    def test_against_quadrature(self, t, df):
        assert t_sf_two_sided(t, df) == pytest.approx(mp_two_sided(t, df), abs=1e-8)


class TestOls:
    def test_exact_line(self):
        fit = ols_fit([1, 2, 3], [2, 4, 6])
        assert fit.beta == pytest.approx(2)
        assert fit.intercept == pytest.approx(0, abs=1e-12)
        assert fit.r2 == pytest.approx(1)

    def test_flat_response(self):
        fit = ols_fit([1, 2, 3, 4], [5, 5, 5, 5])
        assert fit.beta == 0 and fit.r2 == 0

    def test_errors(self):
        with pytest.raises(ValueError, match="constant"):
            ols_fit([1, 1, 1], [1, 2, 3])
        with pytest.raises(ValueError, match="at least 3"):
            ols_fit([1, 2], [1, 2])
        with pytest.raises(ValueError, match="equal length"):
            ols_fit([1, 2, 3], [1, 2])

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_normal_equations(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 200))
        x = rng.normal(0, 30, n)
        y = -0.04 * x + rng.normal(0, 20, n)
        fit = ols_fit(x.tolist(), y.tolist())
        beta, intercept, r2 = normal_equations(x, y)
        assert fit.beta == pytest.approx(beta, abs=1e-9)
        assert fit.intercept == pytest.approx(intercept, abs=1e-9)
        assert fit.r2 == pytest.approx(r2, abs=1e-9)
        assert 0 <= fit.p_value <= 1 and 0 <= fit.r2 <= 1

    @given(st.integers(0, 10_000), st.floats(0.01, 100))
    @settings(max_examples=40)
    def test_scale_equivariance(self, seed, c):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=30)
        y = 0.5 * x + rng.normal(size=30)
        a, b = ols_fit(x.tolist(), y.tolist()), ols_fit((c * x).tolist(), y.tolist())
        assert b.beta == pytest.approx(a.beta / c, rel=1e-9)
        assert b.r2 == pytest.approx(a.r2, abs=1e-9)
        assert b.t_beta == pytest.approx(a.t_beta, rel=1e-9)
        assert b.p_value == pytest.approx(a.p_value, abs=1e-9)


class TestPermutation:
    def test_strongly_positive_hits_floor(self):
        res = permutation_test([50.0 + i for i in range(40)], 10_000, seed=1)
        assert res.p_value == pytest.approx(1 / 10_001)

    def test_antisymmetric_near_half(self):
        nets = [float(v) for v in range(1, 51)] + [-float(v) for v in range(1, 51)]
        res = permutation_test(nets, 10_000, seed=2)
        # observed mean is 0; P(null >= 0) = 1/2 + P(null == 0)/2, MC error ~0.005
        assert res.p_value == pytest.approx(0.5, abs=0.03)

    def test_deterministic(self):
        nets = np.random.default_rng(3).normal(1, 10, 200).tolist()
        a, b = permutation_test(nets, 5000, seed=9), permutation_test(nets, 5000, seed=9)
        assert a == b

    def test_p_in_unit_interval(self):
        res = permutation_test([-5.0, -3.0, -4.0], 999, seed=0)
        assert 0 < res.p_value <= 1

    def test_empty(self):
        with pytest.raises(ValueError):
            permutation_test([], 100, 0)

    def test_p_monotone_in_observed(self):
        null = sign_flip_null(np.random.default_rng(4).normal(0, 5, 80).tolist(), 2000, seed=5)
        ps = [p_value_from_null(null, m) for m in np.linspace(-3, 3, 61)]
        assert all(a >= b for a, b in zip(ps, ps[1:]))

    def test_speed(self):
        nets = np.random.default_rng(0).normal(0, 60, 500).tolist()
        start = time.perf_counter()
        permutation_test(nets, 10_000, seed=0)
        assert time.perf_counter() - start < 2.0


def _trades(year_nets: dict[int, list[float]]):
    out = []
    for year, nets in year_nets.items():
        for i, n in enumerate(nets):
            d = dt.date(year, 1, 2) + dt.timedelta(days=i)
            out.append(Trade(d, "x", 1, dt.time(10), 100.0, dt.time(16), 100.0 + n + 2, n + 2, n))
    return out


class TestYearConsistency:
    def test_negative_year_breaks(self):
        res = year_consistency(_trades({
            2022: [242.25 / 5] * 5, 2023: [297.5 / 5] * 5, 2024: [-26.75 / 5] * 5, 2025: [477.25 / 5] * 5,
        }))
        assert res.consistent is False
        assert [r.year for r in res.years] == [2022, 2023, 2024, 2025]
        assert res.years[2].total_net == pytest.approx(-26.75)

    def test_two_positive_years(self):
        assert year_consistency(_trades({2022: [1.0] * 5, 2023: [2.0] * 6})).consistent

    def test_single_year(self):
        assert not year_consistency(_trades({2022: [1.0] * 10})).consistent

    def test_thin_years_ignored(self):
        res = year_consistency(_trades({2022: [1.0] * 5, 2023: [1.0] * 5, 2024: [-50.0] * 2}))
        assert res.consistent
        assert not year_consistency([]).consistent


def _summary(t, n, total):
    return StrategySummary(n=n, mean_net=total / n if n else None, tstat=t, win_rate=0.5 if n else None, total_net=total)


class TestGate:
    def test_reported_failure_pattern(self):
        g = gate(_summary(1.46, 127, 990.25), PermutationResult(7.8, 0.04, 10_000, 0), False)
        assert g.verdict == "FAIL"
        assert g.failed == ["c1", "c4"]

    def test_all_pass(self):
        g = gate(_summary(2.5, 100, 500.0), PermutationResult(5.0, 0.01, 10_000, 0), True)
        assert g.verdict == "PASS" and g.failed == []

    def test_too_few_trades(self):
        g = gate(_summary(3.0, 8, 251.28), PermutationResult(31.41, 0.001, 10_000, 0), True)
        assert g.verdict == "FAIL" and "c2" in g.failed

    def test_absent_tstat(self):
        g = gate(_summary(None, 50, 10.0), PermutationResult(0.2, 0.01, 100, 0), True)
        assert not g.c1_tstat

    def test_empty(self):
        g = gate(_summary(None, 0, 0.0), None, False)
        assert g.verdict == "FAIL" and not g.c2_min_trades
        assert [c.evaluable for c in g.criteria] == [False, True, False, False, False]

    @pytest.mark.parametrize("broken", range(5))
    def test_single_flip_fails(self, broken):
        args = [2.5, 100, 500.0, True, 0.01]
        flips = [1.0, 10, -5.0, False, 0.5]
        args[broken] = flips[broken]
        t, n, total, year_ok, p = args
        g = gate(_summary(t, n, total), PermutationResult(1.0, p, 100, 0), year_ok)
        assert g.verdict == "FAIL"
        assert g.failed == [f"c{broken + 1}"]
