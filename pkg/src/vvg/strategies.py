"""The eight intraday strategy runners and trade summaries.

Every runner signals on a bar close and enters at the open of the next bar,
exits at the 15:55 bar close, and charges a flat round-trip friction.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Collection, Iterable, Sequence, TextIO

from vvg.behavior import checkpoint_value
from vvg.features import DayLabel
from vvg.market_data import Dataset, Session
from vvg.validation import OlsFit, ols_fit, t_statistic

DEFAULT_FRICTION = 2.0
DEFAULT_ATR_WINDOW = 14
CLOSE_BAR = dt.time(15, 55)
EXIT_TIME = dt.time(16, 0)
REVERSAL_ENTRY = dt.time(10, 0)
MIDDAY_ENTRY = dt.time(12, 0)
CLOSE_FADE_ENTRY = dt.time(15, 30)
LAST_HALF_HOUR_START = dt.time(15, 25)


@dataclass(frozen=True)
class ExecutionModel:
    friction: float = DEFAULT_FRICTION

    def __post_init__(self):
        if self.friction < 0:
            raise ValueError("friction must be non-negative")


@dataclass(frozen=True)
class Trade:
    date: dt.date
    strategy: str
    direction: int
    entry_time: dt.time
    entry_price: float
    exit_time: dt.time
    exit_price: float
    gross_points: float
    net_points: float


TradeSet = list[Trade]


def _enter(strategy: str, session: Session, direction: int, entry: dt.time, exe: ExecutionModel) -> Trade | None:
    if not (session.has_bar(entry) and session.has_bar(CLOSE_BAR)):
        return None
    entry_price = session.bar_at(entry).open
    exit_price = session.bar_at(CLOSE_BAR).close
    gross = direction * (exit_price - entry_price)
    return Trade(session.date, strategy, direction, entry, entry_price, EXIT_TIME, exit_price,
                 gross, gross - exe.friction)


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def opening_move(session: Session) -> float:
    """09:55 close minus 09:30 open, in points."""
    for i in range(6):
        if not session.has_bar(dt.time(9, 30 + 5 * i)):
            raise ValueError(f"session {session.date} missing opening bars")
    return session.bar_at(dt.time(9, 55)).close - session.bar_at(dt.time(9, 30)).open


def opening_direction(session: Session) -> int:
    return _sign(opening_move(session))


def _days(dataset: Dataset, day_set: Collection[dt.date]) -> list[Session]:
    return [dataset.session(d) for d in sorted(day_set)]


def _opening_runner(name: str, dataset, day_set, exe, follow: int, entry: dt.time) -> TradeSet:
    trades = []
    for s in _days(dataset, day_set):
        try:
            d = opening_direction(s)
        except ValueError:
            continue
        if d == 0:
            continue
        t = _enter(name, s, follow * d, entry, exe)
        if t is not None:
            trades.append(t)
    return trades


def run_reversal(dataset: Dataset, day_set: Collection[dt.date], exe: ExecutionModel = ExecutionModel()) -> TradeSet:
    """Strategy 1: fade the opening direction from the 10:00 open to the close."""
    return _opening_runner("reversal", dataset, day_set, exe, -1, REVERSAL_ENTRY)


def run_continuation(dataset: Dataset, day_set: Collection[dt.date], exe: ExecutionModel = ExecutionModel()) -> TradeSet:
    """Strategy 2: trade with the opening direction from the 10:00 open."""
    return _opening_runner("continuation", dataset, day_set, exe, +1, REVERSAL_ENTRY)


def run_midday_continuation(dataset: Dataset, day_set: Collection[dt.date], exe: ExecutionModel = ExecutionModel()) -> TradeSet:
    """Strategy 7: opening direction, entered at the 12:00 open."""
    return _opening_runner("midday-continuation", dataset, day_set, exe, +1, MIDDAY_ENTRY)


@dataclass(frozen=True)
class AtrSeries:
    window: int
    true_range: dict[dt.date, float]
    atr: dict[dt.date, float | None]
    prior_true_range: dict[dt.date, float | None]

    def ratio(self, date: dt.date) -> float | None:
        """Prior-day true range over ATR(date)."""
        a, prev = self.atr.get(date), self.prior_true_range.get(date)
        if a is None or prev is None:
            return None
        return prev / a


def compute_atr(dataset: Dataset, window: int = DEFAULT_ATR_WINDOW) -> AtrSeries:
    """Simple mean of the ``window`` true ranges strictly before each day.

    The first session has no prior close, so its true range is high - low.
    """
    if window < 1:
        raise ValueError("window must be positive")
    trs: list[float] = []
    tr_map, atr_map, prev_map = {}, {}, {}
    prev_close = None
    for s in dataset.sessions:
        a = None
        if len(trs) >= window:
            a = math.fsum(trs[-window:]) / window
            if a <= 0:
                a = None
        atr_map[s.date] = a
        prev_map[s.date] = trs[-1] if trs else None
        hi, lo = s.high, s.low
        tr = hi - lo
        if prev_close is not None:
            tr = max(tr, abs(hi - prev_close), abs(lo - prev_close))
        trs.append(tr)
        tr_map[s.date] = tr
        prev_close = s.close_price
    return AtrSeries(window, tr_map, atr_map, prev_map)


def run_close_fade(
    dataset: Dataset,
    day_set: Collection[dt.date],
    exe: ExecutionModel = ExecutionModel(),
    atr: AtrSeries | None = None,
    atr_multiple: float | None = None,
    name: str | None = None,
) -> TradeSet:
    """Strategies 4-6: fade the 15:30 cumulative move, optionally only when it exceeds k x ATR."""
    if atr_multiple is not None and atr is None:
        raise ValueError("atr_multiple requires an AtrSeries")
    if name is None:
        name = "close-fade" if atr_multiple is None else f"close-fade-atr{atr_multiple:g}"
    trades = []
    for s in _days(dataset, day_set):
        try:
            cum = checkpoint_value(s, CLOSE_FADE_ENTRY)
        except KeyError:
            continue
        if cum == 0:
            continue
        if atr_multiple is not None:
            a = atr.atr.get(s.date)
            if a is None or not abs(cum) > atr_multiple * a:
                continue
        t = _enter(name, s, -_sign(cum), CLOSE_FADE_ENTRY, exe)
        if t is not None:
            trades.append(t)
    return trades


def run_vol_regime_split(
    dataset: Dataset,
    day_set: Collection[dt.date],
    exe: ExecutionModel = ExecutionModel(),
    atr: AtrSeries | None = None,
    base_strategy: Callable[..., TradeSet] = run_reversal,
    ratio_cutoff: float = 1.0,
    name: str = "vol-regime-split",
) -> TradeSet:
    """Strategy 8: run ``base_strategy`` only on days whose pre-session ATR ratio exceeds the cutoff."""
    if atr is None:
        atr = compute_atr(dataset)
    kept = []
    for d in sorted(day_set):
        r = atr.ratio(d)
        if r is not None and r > ratio_cutoff:
            kept.append(d)
    trades = base_strategy(dataset, kept, exe)
    return [replace(t, strategy=name) for t in trades]


@dataclass(frozen=True)
class RegressionStep:
    """The expanding fit available on a classifier-positive day before it trades."""

    date: dt.date
    n_prior: int
    fit: OlsFit | None
    trade: bool


def last_half_hour_move(session: Session) -> float:
    """15:55 close minus 15:25 close, in points."""
    return session.bar_at(CLOSE_BAR).close - session.bar_at(LAST_HALF_HOUR_START).close


def intersection_steps(
    dataset: Dataset,
    labels: Iterable[DayLabel],
    min_history: int = 20,
    t_max: float = -2.0,
) -> list[RegressionStep]:
    """Expanding OLS of the last-half-hour move on the opening move, over positive days.

    The fit for day D uses only positive days before D. A step trades when the
    history is long enough and the slope is negative with t <= ``t_max``.
    """
    xs: list[float] = []
    ys: list[float] = []
    steps = []
    positives = sorted(lab.date for lab in labels if lab.positive)
    for d in positives:
        s = dataset.session(d)
        fit = None
        if len(xs) >= min_history:
            try:
                fit = ols_fit(xs, ys)
            except ValueError:
                fit = None
        trade = (
            fit is not None and fit.beta < 0 and fit.t_beta is not None and fit.t_beta <= t_max
        )
        steps.append(RegressionStep(d, len(xs), fit, trade))
        try:
            x, y = opening_move(s), last_half_hour_move(s)
        except (KeyError, ValueError):
            continue
        xs.append(x)
        ys.append(y)
    return steps


def run_intersection_reversal(
    dataset: Dataset,
    labels: Iterable[DayLabel],
    exe: ExecutionModel = ExecutionModel(),
    min_history: int = 20,
    t_max: float = -2.0,
) -> TradeSet:
    """Strategy 3: reversal on positive days whose prior-day regression predicts a reversal."""
    trades = []
    for step in intersection_steps(dataset, labels, min_history, t_max):
        if not step.trade:
            continue
        s = dataset.session(step.date)
        d = opening_direction(s)
        if d == 0:
            continue
        t = _enter("intersection-reversal", s, -d, REVERSAL_ENTRY, exe)
        if t is not None:
            trades.append(t)
    return trades


@dataclass(frozen=True)
class YearStats:
    n: int
    total_net: float
    tstat: float | None


@dataclass(frozen=True)
class DirectionStats:
    n: int
    mean_net: float
    win_rate: float


@dataclass(frozen=True)
class StrategySummary:
    n: int
    mean_net: float | None
    tstat: float | None
    win_rate: float | None
    total_net: float
    per_year: dict[int, YearStats] = field(default_factory=dict)
    per_direction: dict[int, DirectionStats] = field(default_factory=dict)


def summarize(trades: Sequence[Trade]) -> StrategySummary:
    """Aggregate net points; a trade with net exactly 0 counts as a loss."""
    nets = [t.net_points for t in trades]
    n = len(nets)
    if n == 0:
        return StrategySummary(0, None, None, None, 0.0)
    per_year = {}
    for year in sorted({t.date.year for t in trades}):
        v = [t.net_points for t in trades if t.date.year == year]
        per_year[year] = YearStats(len(v), math.fsum(v), t_statistic(v))
    per_direction = {}
    for d in (1, -1):
        v = [t.net_points for t in trades if t.direction == d]
        if v:
            per_direction[d] = DirectionStats(len(v), math.fsum(v) / len(v), sum(x > 0 for x in v) / len(v))
    total = math.fsum(nets)
    return StrategySummary(
        n=n,
        mean_net=total / n,
        tstat=t_statistic(nets),
        win_rate=sum(x > 0 for x in nets) / n,
        total_net=total,
        per_year=per_year,
        per_direction=per_direction,
    )


@dataclass
class StrategyContext:
    """Inputs shared by the strategy registry."""

    dataset: Dataset
    labels: Sequence[DayLabel]
    day_set: Collection[dt.date]
    execution: ExecutionModel = field(default_factory=ExecutionModel)
    atr: AtrSeries | None = None
    min_history: int = 20
    regression_t_max: float = -2.0
    ratio_cutoff: float = 1.0
    vol_split_base: str = "reversal"

    def __post_init__(self):
        if self.atr is None:
            self.atr = compute_atr(self.dataset)


def _vol_split(ctx: StrategyContext) -> TradeSet:
    base = REGISTRY[ctx.vol_split_base]
    return run_vol_regime_split(
        ctx.dataset, ctx.day_set, ctx.execution, ctx.atr,
        base_strategy=lambda ds, days, exe: base(_with_days(ctx, days)),
        ratio_cutoff=ctx.ratio_cutoff,
    )


def _with_days(ctx: StrategyContext, days) -> StrategyContext:
    return replace(ctx, day_set=days)


REGISTRY: dict[str, Callable[[StrategyContext], TradeSet]] = {
    "reversal": lambda c: run_reversal(c.dataset, c.day_set, c.execution),
    "continuation": lambda c: run_continuation(c.dataset, c.day_set, c.execution),
    "intersection-reversal": lambda c: run_intersection_reversal(
        c.dataset, c.labels, c.execution, c.min_history, c.regression_t_max),
    "close-fade": lambda c: run_close_fade(c.dataset, c.day_set, c.execution),
    "close-fade-atr1.0": lambda c: run_close_fade(c.dataset, c.day_set, c.execution, c.atr, 1.0, "close-fade-atr1.0"),
    "close-fade-atr1.5": lambda c: run_close_fade(c.dataset, c.day_set, c.execution, c.atr, 1.5, "close-fade-atr1.5"),
    "midday-continuation": lambda c: run_midday_continuation(c.dataset, c.day_set, c.execution),
    "vol-regime-split": _vol_split,
}
STRATEGY_NAMES = tuple(REGISTRY)


def run_strategy(name: str, ctx: StrategyContext) -> TradeSet:
    try:
        runner = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown strategy {name!r}; valid: {', '.join(STRATEGY_NAMES)}") from None
    return runner(ctx)


TRADE_COLUMNS = ("date", "strategy", "direction", "entry_time", "entry_price",
                 "exit_time", "exit_price", "gross_points", "net_points")


def write_trades_csv(trades: Iterable[Trade], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRADE_COLUMNS)
    for t in trades:
        w.writerow([t.date.isoformat(), t.strategy, t.direction, f"{t.entry_time:%H:%M}",
                    f"{t.entry_price:.2f}", f"{t.exit_time:%H:%M}", f"{t.exit_price:.2f}",
                    f"{t.gross_points:.2f}", f"{t.net_points:.2f}"])


def read_trades_csv(source: TextIO) -> TradeSet:
    trades = []
    for i, r in enumerate(csv.DictReader(source), start=2):
        try:
            trades.append(Trade(
                dt.date.fromisoformat(r["date"]), r["strategy"], int(r["direction"]),
                dt.time.fromisoformat(r["entry_time"]), float(r["entry_price"]),
                dt.time.fromisoformat(r["exit_time"]), float(r["exit_price"]),
                float(r["gross_points"]), float(r["net_points"]),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"trade log line {i}: {exc}") from None
    return trades
