"""Trade statistics, OLS, sign-flip permutation test and the five-criterion gate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import betainc

T_THRESHOLD = 2.0
MIN_TRADES = 30
P_THRESHOLD = 0.05
MIN_TRADES_PER_YEAR = 5
MIN_YEARS = 2
PERMUTATION_CHUNK = 1000


def t_statistic(values: Sequence[float]) -> float | None:
    """Mean over its standard error (sample std); None for n < 2 or zero variance."""
    n = len(values)
    if n < 2:
        return None
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    if var <= 0:
        return None
    return mean / math.sqrt(var / n)


def t_sf_two_sided(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2, 0.5, df / (df + t * t)))


@dataclass(frozen=True)
class OlsFit:
    n: int
    beta: float
    intercept: float
    t_beta: float | None  # +-inf on a perfect non-flat fit, None on a perfect flat one
    p_value: float
    r2: float
    se_beta: float


def ols_fit(x: Sequence[float], y: Sequence[float]) -> OlsFit:
    """Simple regression of ``y`` on ``x`` with intercept.

    The slope standard error uses the n-2 residual variance; the p-value is
    two-sided from Student's t with n-2 degrees of freedom.
    """
    n = len(x)
    if n != len(y):
        raise ValueError("x and y must have equal length")
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxx = math.fsum((a - mx) ** 2 for a in x)
    if sxx == 0:
        raise ValueError("x is constant")
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    syy = math.fsum((b - my) ** 2 for b in y)
    beta = sxy / sxx
    intercept = my - beta * mx
    ssr = math.fsum((b - intercept - beta * a) ** 2 for a, b in zip(x, y))
    r2 = 0.0 if syy == 0 else min(1.0, max(0.0, 1 - ssr / syy))
    se = math.sqrt(ssr / (n - 2) / sxx)
    if se == 0:
        t_beta = None if beta == 0 else math.copysign(math.inf, beta)
        p = 1.0 if beta == 0 else 0.0
    else:
        t_beta = beta / se
        p = t_sf_two_sided(t_beta, n - 2)
    return OlsFit(n, beta, intercept, t_beta, p, r2, se)


@dataclass(frozen=True)
class PermutationResult:
    observed_mean: float
    p_value: float
    n_resamples: int
    seed: int


def sign_flip_null(nets: Sequence[float], n_resamples: int, seed: int) -> np.ndarray:
    """Resampled means with each trade's sign flipped independently with probability 1/2.

    Draws come from one generator in fixed-size chunks, so output depends only
    on (nets, n_resamples, seed).
    """
    x = np.asarray(nets, dtype=float)
    rng = np.random.default_rng(seed)
    out = np.empty(n_resamples)
    for start in range(0, n_resamples, PERMUTATION_CHUNK):
        stop = min(start + PERMUTATION_CHUNK, n_resamples)
        signs = rng.integers(0, 2, size=(stop - start, x.size), dtype=np.int8) * 2 - 1
        out[start:stop] = signs @ x / x.size
    return out


def p_value_from_null(null_means: np.ndarray, observed: float) -> float:
    """One-sided add-one p-value: (1 + #{null >= observed}) / (N + 1)."""
    return (1 + int(np.count_nonzero(null_means >= observed))) / (null_means.size + 1)


def permutation_test(nets: Sequence[float], n_resamples: int = 10_000, seed: int = 0) -> PermutationResult:
    if len(nets) == 0:
        raise ValueError("permutation test needs at least one trade")
    if n_resamples < 1:
        raise ValueError("n_resamples must be positive")
    observed = math.fsum(nets) / len(nets)
    null = sign_flip_null(nets, n_resamples, seed)
    # tolerate the float noise of the matrix product against the fsum mean
    observed_cmp = observed - 1e-12 * max(1.0, abs(observed))
    return PermutationResult(observed, p_value_from_null(null, observed_cmp), n_resamples, seed)


@dataclass(frozen=True)
class YearRow:
    year: int
    n: int
    total_net: float
    qualifies: bool


@dataclass(frozen=True)
class YearConsistency:
    consistent: bool
    years: tuple[YearRow, ...]


def year_consistency(
    trades: Iterable,
    min_trades_per_year: int = MIN_TRADES_PER_YEAR,
    min_years: int = MIN_YEARS,
) -> YearConsistency:
    """Years with enough trades must number at least ``min_years`` and all be net positive."""
    totals: dict[int, list[float]] = {}
    for t in trades:
        totals.setdefault(t.date.year, []).append(t.net_points)
    rows = tuple(
        YearRow(y, len(v), math.fsum(v), len(v) >= min_trades_per_year)
        for y, v in sorted(totals.items())
    )
    qualifying = [r for r in rows if r.qualifies]
    ok = len(qualifying) >= min_years and all(r.total_net > 0 for r in qualifying)
    return YearConsistency(ok, rows)


@dataclass(frozen=True)
class GateThresholds:
    t_min: float = T_THRESHOLD
    min_trades: int = MIN_TRADES
    p_max: float = P_THRESHOLD


@dataclass(frozen=True)
class Criterion:
    key: str
    name: str
    passed: bool
    value: float | int | bool | None
    threshold: str
    evaluable: bool = True

    def to_dict(self) -> dict:
        return {
            "key": self.key, "name": self.name, "passed": self.passed, "value": self.value,
            "threshold": self.threshold, "evaluable": self.evaluable,
        }


@dataclass(frozen=True)
class GateResult:
    c1_tstat: bool
    c2_min_trades: bool
    c3_net_positive: bool
    c4_year_consistency: bool
    c5_permutation: bool
    criteria: tuple[Criterion, ...] = field(default=(), compare=False)

    @property
    def passed(self) -> bool:
        return (
            self.c1_tstat and self.c2_min_trades and self.c3_net_positive
            and self.c4_year_consistency and self.c5_permutation
        )

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    @property
    def failed(self) -> list[str]:
        return [c.key for c in self.criteria if not c.passed]

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "criteria": [c.to_dict() for c in self.criteria]}


def gate(
    summary,
    perm: PermutationResult | None,
    year_ok: bool,
    thresholds: GateThresholds = GateThresholds(),
) -> GateResult:
    """Score a strategy summary against the five criteria; PASS only if all hold.

    ``perm`` is None when there are no trades to resample.
    """
    evaluable = summary.n > 0
    tstat = summary.tstat
    c1 = tstat is not None and tstat >= thresholds.t_min
    c2 = summary.n >= thresholds.min_trades
    c3 = evaluable and summary.total_net > 0
    c4 = evaluable and bool(year_ok)
    c5 = perm is not None and perm.p_value < thresholds.p_max
    criteria = (
        Criterion("c1", "t-statistic", c1, tstat, f">= {thresholds.t_min}", evaluable and tstat is not None),
        Criterion("c2", "min trades", c2, summary.n, f">= {thresholds.min_trades}"),
        Criterion("c3", "net positive", c3, summary.total_net if evaluable else None, "> 0", evaluable),
        Criterion("c4", "year consistency", c4, bool(year_ok) if evaluable else None, "all qualifying years > 0", evaluable),
        Criterion("c5", "permutation", c5, perm.p_value if perm else None, f"< {thresholds.p_max}", perm is not None),
    )
    return GateResult(c1, c2, c3, c4, c5, criteria)
