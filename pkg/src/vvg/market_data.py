"""Bar parsing, RTH filtering and session grouping."""

from __future__ import annotations

import datetime as dt
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, TextIO

logger = logging.getLogger(__name__)

HEADER = ("timestamp", "open", "high", "low", "close", "volume")
RTH_FIRST_BAR = dt.time(9, 30)
RTH_LAST_BAR = dt.time(15, 55)
BAR_MINUTES = 5
BARS_PER_SESSION = 78


class DataError(ValueError):
    """Raised for malformed or unusable market data."""


class ParseError(DataError):
    """A bar file row could not be parsed; ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True, slots=True)
class Bar:
    timestamp: dt.datetime  # bar start, Eastern Time wall clock
    open: float
    high: float
    low: float
    close: float
    volume: int

    def __post_init__(self):
        if not (self.low <= min(self.open, self.close) and max(self.open, self.close) <= self.high):
            raise ValueError(
                f"OHLC invariant violated: o={self.open} h={self.high} l={self.low} c={self.close}"
            )
        if self.volume < 0:
            raise ValueError(f"negative volume {self.volume}")
        if self.timestamp.minute % BAR_MINUTES or self.timestamp.second or self.timestamp.microsecond:
            raise ValueError(f"timestamp {self.timestamp.isoformat()} not on the 5-minute grid")

    @property
    def date(self) -> dt.date:
        return self.timestamp.date()

    @property
    def time(self) -> dt.time:
        return self.timestamp.time()


@dataclass(frozen=True)
class Session:
    """One RTH trading day. Bars are ordered and unique by start time."""

    date: dt.date
    bars: tuple[Bar, ...]
    _by_time: dict[dt.time, Bar] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.bars:
            raise ValueError(f"session {self.date} has no bars")
        object.__setattr__(self, "_by_time", {b.time: b for b in self.bars})

    @property
    def open_price(self) -> float:
        return self.bars[0].open

    @property
    def close_price(self) -> float:
        return self.bars[-1].close

    @property
    def high(self) -> float:
        return max(b.high for b in self.bars)

    @property
    def low(self) -> float:
        return min(b.low for b in self.bars)

    @property
    def is_complete(self) -> bool:
        return len(self.bars) == BARS_PER_SESSION

    def bar_at(self, start: dt.time) -> Bar:
        """Return the bar starting at ``start``; KeyError if the session lacks it."""
        try:
            return self._by_time[start]
        except KeyError:
            raise KeyError(f"session {self.date} has no bar starting {start:%H:%M}") from None

    def has_bar(self, start: dt.time) -> bool:
        return start in self._by_time


@dataclass(frozen=True)
class CompletenessPolicy:
    """Minimum bar count a session needs to be retained. Strict means all 78."""

    min_bars: int = BARS_PER_SESSION

    def __post_init__(self):
        if not 1 <= self.min_bars <= BARS_PER_SESSION:
            raise ValueError(f"min_bars must be in [1, {BARS_PER_SESSION}], got {self.min_bars}")

    @classmethod
    def strict(cls) -> CompletenessPolicy:
        return cls(BARS_PER_SESSION)

    @classmethod
    def minimum(cls, n: int) -> CompletenessPolicy:
        return cls(n)

    def check(self, session: Session) -> str | None:
        """Return the drop reason, or None when the session is acceptable."""
        if len(session.bars) < self.min_bars:
            return f"incomplete: {len(session.bars)} bars, {self.min_bars} required"
        return None


STRICT = CompletenessPolicy.strict()


@dataclass(frozen=True)
class Dataset:
    sessions: tuple[Session, ...]
    dropped: tuple[tuple[dt.date, str], ...] = ()
    _index: dict[dt.date, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dates = [s.date for s in self.sessions]
        if any(a >= b for a, b in zip(dates, dates[1:])):
            raise ValueError("sessions must be strictly increasing by date")
        object.__setattr__(self, "_index", {d: i for i, d in enumerate(dates)})

    def __len__(self) -> int:
        return len(self.sessions)

    def __iter__(self):
        return iter(self.sessions)

    def __getitem__(self, i):
        return self.sessions[i]

    @property
    def dates(self) -> list[dt.date]:
        return [s.date for s in self.sessions]

    def index_of(self, date: dt.date) -> int:
        try:
            return self._index[date]
        except KeyError:
            raise KeyError(f"{date} not in dataset") from None

    def session(self, date: dt.date) -> Session:
        return self.sessions[self.index_of(date)]

    def __contains__(self, date) -> bool:
        return date in self._index

    def head(self, n: int) -> Dataset:
        """First ``n`` sessions, as a new dataset."""
        return Dataset(self.sessions[:n])


def _parse_row(lineno: int, line: str) -> Bar:
    parts = line.split(",")
    if len(parts) != len(HEADER):
        raise ParseError(lineno, f"expected {len(HEADER)} columns, got {len(parts)}")
    try:
        ts = dt.datetime.fromisoformat(parts[0].strip())
    except ValueError:
        raise ParseError(lineno, f"bad timestamp {parts[0]!r}") from None
    if ts.tzinfo is not None:
        raise ParseError(lineno, "timestamps must not carry a zone offset")
    try:
        o, h, lo, c = (float(p) for p in parts[1:5])
        v = int(parts[5])
    except ValueError as exc:
        raise ParseError(lineno, f"unparseable number ({exc})") from None
    try:
        return Bar(ts, o, h, lo, c, v)
    except ValueError as exc:
        raise ParseError(lineno, str(exc)) from None


def parse_bar_file(source: TextIO | Iterable[str]) -> list[Bar]:
    """Parse ``timestamp,open,high,low,close,volume`` CSV into bars, in file order.

    Non-RTH rows are kept; :func:`build_sessions` filters them.
    """
    lines = iter(source)
    header = next(lines, None)
    if header is None or not header.strip():
        raise DataError("empty file")
    cols = tuple(c.strip().lower() for c in header.strip().split(","))
    if cols != HEADER:
        raise ParseError(1, f"bad header {header.strip()!r}, expected {','.join(HEADER)}")
    bars = []
    for lineno, line in enumerate(lines, start=2):
        line = line.strip()
        if not line:
            continue
        bars.append(_parse_row(lineno, line))
    if not bars:
        raise DataError("no data rows")
    return bars


def read_bar_file(path) -> list[Bar]:
    with open(path, newline="") as fh:
        return parse_bar_file(fh)


def in_rth(bar: Bar) -> bool:
    return RTH_FIRST_BAR <= bar.time <= RTH_LAST_BAR


def build_sessions(bars: Iterable[Bar], completeness: CompletenessPolicy = STRICT) -> Dataset:
    """Group RTH bars by date and keep the sessions passing ``completeness``.

    Dropped days are logged as ``DROPPED <date> <reason>`` and kept on
    ``Dataset.dropped``.
    """
    by_day: dict[dt.date, list[Bar]] = defaultdict(list)
    for bar in bars:
        if in_rth(bar):
            by_day[bar.date].append(bar)

    sessions = []
    dropped = []
    for day in sorted(by_day):
        day_bars = sorted(by_day[day], key=lambda b: b.timestamp)
        for a, b in zip(day_bars, day_bars[1:]):
            if a.timestamp == b.timestamp:
                raise DataError(f"duplicate bar timestamp {a.timestamp.isoformat()}")
        session = Session(day, tuple(day_bars))
        reason = completeness.check(session)
        if reason is None:
            sessions.append(session)
        else:
            logger.warning("DROPPED %s %s", day.isoformat(), reason)
            dropped.append((day, reason))

    if not sessions:
        raise DataError("no complete sessions")
    return Dataset(tuple(sessions), tuple(dropped))


def load_dataset(path, completeness: CompletenessPolicy = STRICT) -> Dataset:
    return build_sessions(read_bar_file(path), completeness)


def prior_close(dataset: Dataset, date: dt.date) -> float | None:
    """Close of the nearest retained session before ``date``; None for the first."""
    i = dataset.index_of(date)
    if i == 0:
        return None
    return dataset.sessions[i - 1].close_price


def format_bar(bar: Bar) -> str:
    return (
        f"{bar.timestamp:%Y-%m-%dT%H:%M},{bar.open!r},{bar.high!r},"
        f"{bar.low!r},{bar.close!r},{bar.volume}"
    )


def write_bar_file(bars: Iterable[Bar], out: TextIO) -> None:
    """Inverse of :func:`parse_bar_file`; float repr keeps the round trip exact."""
    out.write(",".join(HEADER) + "\n")
    for bar in bars:
        out.write(format_bar(bar) + "\n")


def dataset_bars(dataset: Dataset) -> Iterable[Bar]:
    for session in dataset.sessions:
        yield from session.bars
