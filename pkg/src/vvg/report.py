"""Tabular rendering of pipeline results as text tables, CSV and JSON.

Numbers use fixed precision so repeated runs produce identical bytes:
points to 2 decimals, fractions and p-values to 4, t-statistics to 2.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Sequence

from vvg.behavior import CHECKPOINTS, NextDaySpread, PathCheckpoint, PeakTimingHistogram, ReversalStats, YearPath
from vvg.strategies import StrategySummary
from vvg.validation import GateResult


def pts(x: float | None) -> str:
    return "" if x is None else f"{x:.2f}"


def frac(x: float | None) -> str:
    return "" if x is None else f"{x:.4f}"


def tstat(x: float | None) -> str:
    return "" if x is None else f"{x:.2f}"


def pval(x: float | None) -> str:
    return "" if x is None else f"{x:.4f}"


def hhmm(t) -> str:
    return f"{t:%H:%M}"


@dataclass
class Table:
    title: str
    columns: Sequence[str]
    rows: list[list[str]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue()

    def to_text(self) -> str:
        cells = [list(self.columns)] + [[c if c != "" else "n/a" for c in r] for r in self.rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(self.columns))]
        lines = [self.title]
        for j, r in enumerate(cells):
            lines.append("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))))
            if j == 0:
                lines.append("  ".join("-" * w for w in widths))
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"

    def to_records(self) -> dict[str, Any]:
        return {
            "title": self.title,
            "rows": [dict(zip(self.columns, r)) for r in self.rows],
            **({"notes": self.notes} if self.notes else {}),
        }


def render(tables: Sequence[Table], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([t.to_records() for t in tables], indent=2) + "\n"
    if fmt == "csv":
        return "\n".join(f"# {t.title}\n{t.to_csv()}" for t in tables)
    return "\n".join(t.to_text() for t in tables)


def spread_table(s: NextDaySpread, labels: tuple[str, str] = ("population", "all other days")) -> Table:
    return Table(
        "Next-day return spread",
        ["group", "n", "mean_next_day_return"],
        [
            [labels[0], str(s.n_positive), frac(s.mean_next_positive)],
            [labels[1], str(s.n_negative), frac(s.mean_next_negative)],
            ["spread", "", frac(s.spread)],
        ],
    )


def path_table(path: Sequence[PathCheckpoint], title: str) -> Table:
    return Table(
        title,
        ["checkpoint", "n", "mean", "std", "tstat", "median", "p25", "p75", "pct_positive"],
        [
            [hhmm(c.time), str(c.n), pts(c.mean), pts(c.std), tstat(c.tstat), pts(c.median),
             pts(c.p25), pts(c.p75), frac(c.pct_positive)]
            for c in path
        ],
    )


def reversal_table(r: ReversalStats) -> Table:
    n = r.n_reversed + r.n_not_reversed
    return Table(
        "Peak reversal",
        ["category", "count", "share"],
        [
            ["reversed by close", str(r.n_reversed), frac(r.reversal_rate)],
            ["not reversed", str(r.n_not_reversed), frac(r.n_not_reversed / n)],
            ["total", str(n), frac(1.0)],
            ["mean giveback (all days, pts)", pts(r.mean_giveback_all), ""],
            ["mean giveback (reversed days, pts)", pts(r.mean_giveback_reversed), ""],
        ],
    )


def peak_timing_table(h: PeakTimingHistogram) -> Table:
    return Table(
        "Peak timing",
        ["checkpoint", "count", "share"],
        [[hhmm(t), str(c), frac(c / h.total)] for t, c in h.bins.items()],
    )


def yearly_table(years: Sequence[YearPath]) -> Table:
    return Table(
        "Year-by-year mean path",
        ["checkpoint"] + [f"{y.year} (n={y.n})" for y in years],
        [[hhmm(t)] + [pts(y.means[j]) for y in years] for j, t in enumerate(CHECKPOINTS)],
    )


def series_csv(rows: Sequence[tuple[str, str, str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "x", "y"])
    w.writerows(rows)
    return buf.getvalue()


def summary_rows(name: str, s: StrategySummary) -> list[list[str]]:
    rows = [[name, "all", str(s.n), pts(s.mean_net), tstat(s.tstat), frac(s.win_rate), pts(s.total_net)]]
    for d, label in ((1, "long"), (-1, "short")):
        ds = s.per_direction.get(d)
        if ds:
            rows.append([name, label, str(ds.n), pts(ds.mean_net), "", frac(ds.win_rate), ""])
    for year, ys in s.per_year.items():
        rows.append([name, str(year), str(ys.n), pts(ys.total_net / ys.n), tstat(ys.tstat), "", pts(ys.total_net)])
    return rows


SUMMARY_COLUMNS = ["strategy", "slice", "n", "mean_net", "tstat", "win_rate", "total_net"]


def summary_table(summaries: dict[str, StrategySummary], notes: Sequence[str] = ()) -> Table:
    t = Table("Strategy summary", SUMMARY_COLUMNS, notes=list(notes))
    for name, s in summaries.items():
        t.rows.extend(summary_rows(name, s))
    return t


def summary_json(name: str, s: StrategySummary) -> dict[str, Any]:
    def r(x, nd):
        return None if x is None else round(x, nd)

    return {
        "strategy": name,
        "n": s.n,
        "mean_net": r(s.mean_net, 2),
        "tstat": r(s.tstat, 2),
        "win_rate": r(s.win_rate, 4),
        "total_net": r(s.total_net, 2),
        "per_year": {
            str(y): {"n": v.n, "total_net": r(v.total_net, 2), "tstat": r(v.tstat, 2)}
            for y, v in s.per_year.items()
        },
        "per_direction": {
            ("long" if d == 1 else "short"): {"n": v.n, "mean_net": r(v.mean_net, 2), "win_rate": r(v.win_rate, 4)}
            for d, v in s.per_direction.items()
        },
    }


def _criterion_value(key: str, value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if key == "c1":
        return tstat(value)
    if key == "c3":
        return pts(value)
    if key == "c5":
        return pval(value)
    return str(value)


def gate_table(name: str, g: GateResult) -> Table:
    t = Table(f"Gate: {name}", ["criterion", "value", "threshold", "result"])
    for c in g.criteria:
        result = ("PASS" if c.passed else "FAIL") if c.evaluable else "not evaluable"
        t.rows.append([f"{c.key} {c.name}", _criterion_value(c.key, c.value), c.threshold, result])
    failed = ", ".join(g.failed)
    t.notes.append(f"Verdict: {g.verdict}" + (f" ({failed})" if failed else ""))
    return t


def gate_json(name: str, g: GateResult) -> dict[str, Any]:
    d = g.to_dict()
    for c in d["criteria"]:
        v = c["value"]
        if isinstance(v, float):
            c["value"] = round(v, 4 if c["key"] == "c5" else 2)
    return {"strategy": name, **d}
