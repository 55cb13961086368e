"""Hand-built sessions and datasets for tests."""

from __future__ import annotations

import datetime as dt
from typing import Mapping

from vvg.market_data import BARS_PER_SESSION, Bar, Dataset, Session, build_sessions
from vvg.synth import SynthConfig, generate_bars

BAR_STARTS = [dt.time(*divmod(570 + 5 * k, 60)) for k in range(BARS_PER_SESSION)]


def bar_index(t: dt.time) -> int:
    return BAR_STARTS.index(t)


def session_from_closes(date: dt.date, open_: float, closes, volumes=None) -> Session:
    """Each bar opens at the prior bar's close; high/low are the extremes of open and close."""
    closes = list(closes)
    assert len(closes) == BARS_PER_SESSION
    volumes = list(volumes) if volumes is not None else [100] * BARS_PER_SESSION
    bars = []
    o = open_
    for k, c in enumerate(closes):
        ts = dt.datetime.combine(date, BAR_STARTS[k])
        bars.append(Bar(ts, o, max(o, c), min(o, c), c, volumes[k]))
        o = c
    return Session(date, tuple(bars))


def step_session(date: dt.date, open_: float, closes_at: Mapping[dt.time, float],
                 first_volume: int = 100) -> Session:
    """Bar closes hold the most recent anchor; anchors are keyed by bar start time."""
    closes = []
    level = open_
    for t in BAR_STARTS:
        level = closes_at.get(t, level)
        closes.append(level)
    return session_from_closes(date, open_, closes, [first_volume] + [100] * (BARS_PER_SESSION - 1))


def checkpoint_session(date: dt.date, open_: float, values: Mapping[dt.time, float]) -> Session:
    """Session whose checkpoint values (keyed by checkpoint time, points from open) are given."""
    anchors = {}
    for t, v in values.items():
        m = t.hour * 60 + t.minute - 5
        anchors[dt.time(*divmod(m, 60))] = open_ + v
    return step_session(date, open_, anchors)


def weekdays(n: int, start: dt.date = dt.date(2023, 1, 2)) -> list[dt.date]:
    out = []
    d = start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def dataset_of(sessions) -> Dataset:
    return Dataset(tuple(sessions))


def synth_dataset(**kwargs) -> Dataset:
    return build_sessions(generate_bars(SynthConfig(**kwargs)))
