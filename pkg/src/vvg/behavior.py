"""Behavioral statistics for a population of days on the 30-minute checkpoint grid."""

from __future__ import annotations

import datetime as dt
import math
from collections import Counter
from dataclasses import dataclass
from typing import Collection, Iterable, Sequence

from vvg.features import DayLabel, interpolate_sorted
from vvg.market_data import Dataset, Session
from vvg.validation import t_statistic

CHECKPOINTS = tuple(dt.time(*divmod(630 + 30 * i, 60)) for i in range(12))  # 10:30 ... 16:00
CLOSE_CHECKPOINT = dt.time(16, 0)


def _minutes(t: dt.time) -> int:
    return t.hour * 60 + t.minute


def checkpoint_value(session: Session, time: dt.time) -> float:
    """Close of the bar ending at ``time`` minus the session open, in points."""
    m = _minutes(time)
    if m % 30 or not 600 <= m <= 960 or time.second or time.microsecond:
        raise ValueError(f"checkpoint {time} not on the 30-minute grid in [10:00, 16:00]")
    start = dt.time(*divmod(m - 5, 60))
    return session.bar_at(start).close - session.open_price


def day_path(session: Session, checkpoints: Sequence[dt.time] = CHECKPOINTS) -> list[float]:
    return [checkpoint_value(session, t) for t in checkpoints]


def _sessions(dataset: Dataset, day_set: Collection[dt.date]) -> list[Session]:
    if not day_set:
        raise ValueError("empty day set")
    return [dataset.session(d) for d in sorted(day_set)]


@dataclass(frozen=True)
class PathCheckpoint:
    time: dt.time
    n: int
    mean: float
    std: float | None
    tstat: float | None
    median: float
    p25: float
    p75: float
    pct_positive: float


def _checkpoint_stats(time: dt.time, values: list[float]) -> PathCheckpoint:
    n = len(values)
    mean = math.fsum(values) / n
    std = None
    if n > 1:
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    ordered = sorted(values)
    return PathCheckpoint(
        time=time,
        n=n,
        mean=mean,
        std=std,
        tstat=t_statistic(values),
        median=interpolate_sorted(ordered, 0.5),
        p25=interpolate_sorted(ordered, 0.25),
        p75=interpolate_sorted(ordered, 0.75),
        pct_positive=sum(v > 0 for v in values) / n,
    )


def intraday_path(dataset: Dataset, day_set: Collection[dt.date]) -> list[PathCheckpoint]:
    """Per-checkpoint mean, sample std, t-stat, quartiles and share of positive days."""
    paths = [day_path(s) for s in _sessions(dataset, day_set)]
    return [_checkpoint_stats(t, [p[j] for p in paths]) for j, t in enumerate(CHECKPOINTS)]


@dataclass(frozen=True)
class ReversalStats:
    n_reversed: int
    n_not_reversed: int
    reversal_rate: float
    mean_giveback_all: float
    mean_giveback_reversed: float | None


@dataclass(frozen=True)
class PeakTimingHistogram:
    bins: dict[dt.time, int]
    total: int


@dataclass(frozen=True)
class DayPeak:
    date: dt.date
    peak_time: dt.time
    peak_value: float
    close_value: float

    @property
    def reversed(self) -> bool:
        return self.peak_time != CLOSE_CHECKPOINT and self.close_value < self.peak_value

    @property
    def giveback(self) -> float:
        return self.peak_value - self.close_value


def find_peak(session: Session, tie: str = "earliest") -> DayPeak:
    """Maximum checkpoint value; ties go to the earliest (or latest) checkpoint."""
    if tie not in ("earliest", "latest"):
        raise ValueError(f"tie must be 'earliest' or 'latest', got {tie!r}")
    path = day_path(session)
    best = 0
    for j in range(1, len(path)):
        if path[j] > path[best] or (tie == "latest" and path[j] == path[best]):
            best = j
    return DayPeak(session.date, CHECKPOINTS[best], path[best], path[-1])


def peak_reversal(
    dataset: Dataset, day_set: Collection[dt.date], tie: str = "earliest"
) -> tuple[ReversalStats, PeakTimingHistogram]:
    peaks = [find_peak(s, tie) for s in _sessions(dataset, day_set)]
    rev = [p for p in peaks if p.reversed]
    givebacks = [p.giveback for p in peaks]
    stats = ReversalStats(
        n_reversed=len(rev),
        n_not_reversed=len(peaks) - len(rev),
        reversal_rate=len(rev) / len(peaks),
        mean_giveback_all=math.fsum(givebacks) / len(peaks),
        mean_giveback_reversed=math.fsum(p.giveback for p in rev) / len(rev) if rev else None,
    )
    counts = Counter(p.peak_time for p in peaks)
    hist = PeakTimingHistogram({t: counts.get(t, 0) for t in CHECKPOINTS}, len(peaks))
    return stats, hist


@dataclass(frozen=True)
class NextDaySpread:
    n_positive: int
    n_negative: int
    mean_next_positive: float | None
    mean_next_negative: float | None
    spread: float | None


def session_return(session: Session) -> float:
    return (session.close_price - session.open_price) / session.open_price


def next_day_spread(dataset: Dataset, labels: Iterable[DayLabel]) -> NextDaySpread:
    """Mean next-session open-to-close return after positive vs. all other days."""
    if len(dataset) < 2:
        raise ValueError("need at least two sessions")
    positive = {lab.date for lab in labels if lab.positive}
    pos: list[float] = []
    neg: list[float] = []
    for today, tomorrow in zip(dataset.sessions, dataset.sessions[1:]):
        (pos if today.date in positive else neg).append(session_return(tomorrow))
    mp = math.fsum(pos) / len(pos) if pos else None
    mn = math.fsum(neg) / len(neg) if neg else None
    spread = mp - mn if mp is not None and mn is not None else None
    return NextDaySpread(len(pos), len(neg), mp, mn, spread)


@dataclass(frozen=True)
class YearPath:
    year: int
    n: int
    means: tuple[float, ...]


def yearly_paths(dataset: Dataset, day_set: Collection[dt.date]) -> list[YearPath]:
    """Mean checkpoint path per calendar year, years with days only."""
    if not day_set:
        raise ValueError("empty day set")
    by_year: dict[int, list[dt.date]] = {}
    for d in sorted(day_set):
        by_year.setdefault(d.year, []).append(d)
    out = []
    for year, days in sorted(by_year.items()):
        path = intraday_path(dataset, days)
        out.append(YearPath(year, len(days), tuple(c.mean for c in path)))
    return out
