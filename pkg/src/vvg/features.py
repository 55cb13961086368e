"""VVG day features and expanding-window tercile classification.

Thresholds for day D are computed only from days strictly before D, so a
label never changes when later sessions are appended.
"""

from __future__ import annotations

import bisect
import csv
import datetime as dt
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

from vvg.market_data import Dataset, Session

OPEN_BAR = dt.time(9, 30)
OPENING_CLOSE_BAR = dt.time(9, 55)
OPENING_BARS = tuple(dt.time(9, 30 + 5 * i) for i in range(6))
VOLUME_WINDOW = 20
DEFAULT_WARMUP = 60
DEFAULT_QUANTILE = 2 / 3

FEATURES = ("r1", "gap", "vol_dev")


@dataclass(frozen=True)
class FeatureRow:
    date: dt.date
    r1: float | None
    gap: float | None
    vol_dev: float | None

    def get(self, name: str) -> float | None:
        return getattr(self, name)

    @property
    def complete(self) -> bool:
        return self.r1 is not None and self.gap is not None and self.vol_dev is not None


@dataclass(frozen=True)
class Thresholds:
    date: dt.date
    r1_thr: float | None
    gap_thr: float | None
    vol_thr: float | None

    def get(self, name: str) -> float | None:
        return {"r1": self.r1_thr, "gap": self.gap_thr, "vol_dev": self.vol_thr}[name]


@dataclass(frozen=True)
class DayLabel:
    date: dt.date
    positive: bool
    eligible: bool


@dataclass(frozen=True)
class Classification:
    features: tuple[FeatureRow, ...]
    thresholds: tuple[Thresholds, ...]
    labels: tuple[DayLabel, ...]
    warmup: int
    quantile: float

    @property
    def positive_dates(self) -> list[dt.date]:
        return [lab.date for lab in self.labels if lab.positive]

    @property
    def eligible_dates(self) -> list[dt.date]:
        return [lab.date for lab in self.labels if lab.eligible]

    def single_condition_dates(self, name: str) -> list[dt.date]:
        """Days past warm-up where feature ``name`` alone is above its threshold."""
        out = []
        for i, (row, thr) in enumerate(zip(self.features, self.thresholds)):
            value, cut = row.get(name), thr.get(name)
            if i >= self.warmup and value is not None and cut is not None and value > cut:
                out.append(row.date)
        return out

    @property
    def degenerate_features(self) -> list[str]:
        """Features that took a single value on every day (strict > can never fire)."""
        out = []
        for name in FEATURES:
            values = [r.get(name) for r in self.features if r.get(name) is not None]
            if values and min(values) == max(values):
                out.append(name)
        return out


def compute_r1(session: Session) -> float:
    """Absolute fractional move from the 09:30 open to the 09:55 close."""
    for t in OPENING_BARS:
        if not session.has_bar(t):
            raise ValueError(f"session {session.date} missing opening bar {t:%H:%M}")
    start = session.bar_at(OPEN_BAR).open
    if start == 0:
        raise ValueError(f"session {session.date} has zero open price")
    return abs(session.bar_at(OPENING_CLOSE_BAR).close - start) / start


def compute_gap(session: Session, prior_close: float | None) -> float | None:
    """Absolute fractional overnight gap; None when there is no prior close."""
    if prior_close is None:
        return None
    if prior_close <= 0:
        raise ValueError(f"prior close must be positive, got {prior_close}")
    return abs(session.open_price - prior_close) / prior_close


def first_bar_volume(session: Session) -> int:
    return session.bars[0].volume


def compute_vol_dev(
    session: Session, prior_first_bar_volumes: Sequence[float], window: int = VOLUME_WINDOW
) -> float | None:
    """Z-score of the first-bar volume against the last ``window`` prior first-bar volumes.

    Uses the sample (n-1) standard deviation. None if the window is short or flat.
    """
    if len(prior_first_bar_volumes) < window:
        return None
    recent = prior_first_bar_volumes[-window:]
    mean = math.fsum(recent) / window
    var = math.fsum((v - mean) ** 2 for v in recent) / (window - 1)
    if var <= 0:
        return None
    return (first_bar_volume(session) - mean) / math.sqrt(var)


def interpolate_sorted(values: Sequence[float], q: float) -> float:
    """Linear-interpolation percentile of already-sorted ``values`` at index q*(n-1)."""
    pos = q * (len(values) - 1)
    lo = math.floor(pos)
    frac = pos - lo
    if frac == 0 or lo + 1 >= len(values):
        return values[lo]
    return values[lo] + frac * (values[lo + 1] - values[lo])


def expanding_percentile(history: Iterable[float], q: float = DEFAULT_QUANTILE) -> float:
    values = sorted(history)
    if not values:
        raise ValueError("empty history")
    if not 0 <= q <= 1:
        raise ValueError(f"q must be in [0, 1], got {q}")
    return interpolate_sorted(values, q)


def compute_features(dataset: Dataset, window: int = VOLUME_WINDOW) -> list[FeatureRow]:
    rows = []
    volumes: list[int] = []
    prev_close = None
    for session in dataset.sessions:
        try:
            r1 = compute_r1(session)
        except ValueError:
            r1 = None
        gap = compute_gap(session, prev_close)
        vol_dev = compute_vol_dev(session, volumes, window)
        rows.append(FeatureRow(session.date, r1, gap, vol_dev))
        volumes.append(first_bar_volume(session))
        prev_close = session.close_price
    return rows


def exceeds_all(row: FeatureRow, thresholds: Thresholds) -> bool:
    """True iff every feature is present and strictly above its threshold."""
    for name in FEATURES:
        value, cut = row.get(name), thresholds.get(name)
        if value is None or cut is None or not value > cut:
            return False
    return True


def classify_features(
    rows: Sequence[FeatureRow], warmup: int = DEFAULT_WARMUP, q: float = DEFAULT_QUANTILE
) -> Classification:
    """Label feature rows using expanding q-percentile thresholds.

    Each feature's history holds only the prior days where it was present.
    A day is positive iff it is past ``warmup``, has all three features, and
    each strictly exceeds its threshold.
    """
    if not 0 <= q <= 1:
        raise ValueError(f"q must be in [0, 1], got {q}")
    histories: dict[str, list[float]] = {name: [] for name in FEATURES}
    thresholds = []
    labels = []
    for i, row in enumerate(rows):
        cuts = {
            name: interpolate_sorted(hist, q) if hist else None for name, hist in histories.items()
        }
        thr = Thresholds(row.date, cuts["r1"], cuts["gap"], cuts["vol_dev"])
        eligible = i >= warmup and row.complete and all(c is not None for c in cuts.values())
        positive = eligible and exceeds_all(row, thr)
        thresholds.append(thr)
        labels.append(DayLabel(row.date, positive, eligible))
        for name in FEATURES:
            value = row.get(name)
            if value is not None:
                bisect.insort(histories[name], value)
    return Classification(tuple(rows), tuple(thresholds), tuple(labels), warmup, q)


def classify(
    dataset: Dataset, warmup: int = DEFAULT_WARMUP, q: float = DEFAULT_QUANTILE
) -> Classification:
    return classify_features(compute_features(dataset), warmup, q)


LABEL_COLUMNS = ("date", "r1", "gap", "vol_dev", "r1_thr", "gap_thr", "vol_thr", "eligible", "positive")


def _num(x: float | None) -> str:
    return "" if x is None else repr(x)


def write_labels_csv(result: Classification, out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(LABEL_COLUMNS)
    for row, thr, lab in zip(result.features, result.thresholds, result.labels):
        writer.writerow([
            row.date.isoformat(), _num(row.r1), _num(row.gap), _num(row.vol_dev),
            _num(thr.r1_thr), _num(thr.gap_thr), _num(thr.vol_thr),
            int(lab.eligible), int(lab.positive),
        ])


def read_labels_csv(source: TextIO) -> list[DayLabel]:
    reader = csv.DictReader(source)
    return [
        DayLabel(dt.date.fromisoformat(r["date"]), r["positive"] == "1", r["eligible"] == "1")
        for r in reader
    ]
