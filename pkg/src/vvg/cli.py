"""Command-line front end: ``vvg <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 empty-result error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import io
import json
import logging
import sys
from collections import Counter
from pathlib import Path
from typing import Sequence

from vvg import behavior, report
from vvg.features import DEFAULT_QUANTILE, DEFAULT_WARMUP, Classification, DayLabel, classify, write_labels_csv
from vvg.market_data import STRICT, CompletenessPolicy, DataError, Dataset, load_dataset
from vvg.strategies import (
    DEFAULT_ATR_WINDOW,
    DEFAULT_FRICTION,
    STRATEGY_NAMES,
    ExecutionModel,
    StrategyContext,
    compute_atr,
    read_trades_csv,
    run_strategy,
    summarize,
    write_trades_csv,
)
from vvg.synth import config_from_mapping, generate, parse_config_file
from vvg.validation import gate, permutation_test, year_consistency

log = logging.getLogger("vvg")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_EMPTY = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--data", type=Path, help="bar file (timestamp,open,high,low,close,volume)")
    p.add_argument("--min-bars", type=int, default=None, help="keep sessions with at least this many bars (default: all 78)")
    p.add_argument("--friction", type=float, default=DEFAULT_FRICTION, help="round-trip cost in points")
    p.add_argument("--warmup", type=int, default=DEFAULT_WARMUP)
    p.add_argument("--quantile", type=float, default=DEFAULT_QUANTILE)
    p.add_argument("--atr-window", type=int, default=DEFAULT_ATR_WINDOW)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--population", default="classifier-positive",
                   help="classifier-positive, all-eligible, all, a comma-separated date list, or @file")
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--out", type=Path, help="directory for output files")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="vvg", description="VVG day classifier and strategy validation engine")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate-data", parents=[common], help="parse and check a bar file")
    sub.add_parser("classify", parents=[common], help="label days with the VVG classifier")
    sub.add_parser("behavior", parents=[common], help="behavioral tables for a day population")
    for name in ("backtest", "gate"):
        p = sub.add_parser(name, parents=[common], help=f"{name} strategies")
        p.add_argument("--strategy", default="all", help=f"one of {', '.join(STRATEGY_NAMES)}, or all")
        p.add_argument("--min-history", type=int, default=20, help="prior positive days needed by intersection-reversal")
        p.add_argument("--ratio-cutoff", type=float, default=1.0, help="vol-regime-split ATR ratio cutoff")
        p.add_argument("--vol-split-base", default="reversal", help="base strategy for vol-regime-split")
        if name == "gate":
            p.add_argument("--trades", type=Path, help="gate an existing trade log instead of running strategies")
            p.add_argument("--resamples", type=int, default=10_000)
            p.add_argument("--min-trades-per-year", type=int, default=5)
    p = sub.add_parser("synth", parents=[common], help="write a synthetic bar file")
    p.add_argument("--config", type=Path, help="key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--n-days", type=int)
    p.add_argument("--shocks", help="day:gap:volume:opening multipliers, comma separated")
    return parser


def _write(out: Path | None, name: str, text: str) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _load(args) -> Dataset:
    if args.data is None:
        raise CliError("--data is required", EXIT_USAGE)
    policy = STRICT if args.min_bars is None else CompletenessPolicy.minimum(args.min_bars)
    try:
        return load_dataset(args.data, policy)
    except OSError as exc:
        raise CliError(f"cannot read {args.data}: {exc.strerror or exc}", EXIT_DATA) from None
    except (DataError, ValueError) as exc:
        raise CliError(f"{args.data}: {exc}", EXIT_DATA) from None


def _classification(args, dataset: Dataset) -> Classification:
    if not 0 <= args.quantile <= 1:
        raise CliError("--quantile must be in [0, 1]", EXIT_USAGE)
    if args.warmup < 0:
        raise CliError("--warmup must be non-negative", EXIT_USAGE)
    return classify(dataset, args.warmup, args.quantile)


def _population(args, dataset: Dataset, result: Classification) -> list[dt.date]:
    sel = args.population
    if sel == "classifier-positive":
        return result.positive_dates
    if sel == "all-eligible":
        return result.eligible_dates
    if sel == "all":
        return dataset.dates
    text = sel
    if sel.startswith("@"):
        try:
            text = Path(sel[1:]).read_text()
        except OSError as exc:
            raise CliError(f"cannot read population file: {exc}", EXIT_DATA) from None
    try:
        dates = sorted({dt.date.fromisoformat(t.strip()) for t in text.replace("\n", ",").split(",") if t.strip()})
    except ValueError:
        raise CliError(f"bad --population {sel!r}", EXIT_USAGE) from None
    missing = [d for d in dates if d not in dataset]
    if missing:
        raise CliError(f"population dates not in dataset: {', '.join(map(str, missing[:5]))}", EXIT_DATA)
    return dates


def cmd_validate_data(args) -> int:
    ds = _load(args)
    dropped = len(ds.dropped)
    t = report.Table(
        f"{len(ds)} sessions, {dropped} dropped",
        ["sessions", "dropped", "first", "last"],
        [[str(len(ds)), str(dropped), ds[0].date.isoformat(), ds[-1].date.isoformat()]],
    )
    sys.stdout.write(report.render([t], args.format))
    return EXIT_OK


def classify_tables(ds: Dataset, result: Classification) -> list[report.Table]:
    n_all = len(result.labels)
    n_elig = sum(lab.eligible for lab in result.labels)
    n_pos = sum(lab.positive for lab in result.labels)
    summary = report.Table(
        "Classifier activation",
        ["statistic", "value"],
        [
            ["total days", str(n_all)],
            ["eligible days", str(n_elig)],
            ["positive days", str(n_pos)],
            ["non-classifier days", str(n_all - n_pos)],
            ["activation rate (all days)", report.frac(n_pos / n_all)],
            ["activation rate (eligible days)", report.frac(n_pos / n_elig) if n_elig else ""],
        ],
    )
    if n_elig == 0:
        summary.notes.append(f"no eligible days: dataset has {n_all} sessions, warm-up is {result.warmup}")
    for name in result.degenerate_features:
        summary.notes.append(f"feature {name} never varies; strict '>' against a flat threshold history cannot fire")
    years = Counter(lab.date.year for lab in result.labels)
    elig = Counter(lab.date.year for lab in result.labels if lab.eligible)
    pos = Counter(lab.date.year for lab in result.labels if lab.positive)
    per_year = report.Table(
        "Activation by year",
        ["year", "days", "eligible", "positive"],
        [[str(y), str(years[y]), str(elig[y]), str(pos[y])] for y in sorted(years)],
    )
    return [summary, per_year]


def cmd_classify(args) -> int:
    ds = _load(args)
    result = _classification(args, ds)
    tables = classify_tables(ds, result)
    for note in tables[0].notes:
        log.warning("%s", note)
    if args.out is not None:
        buf = io.StringIO()
        write_labels_csv(result, buf)
        _write(args.out, "labels.csv", buf.getvalue())
        _write(args.out, "classify_summary.csv", tables[0].to_csv())
        _write(args.out, "classify_by_year.csv", tables[1].to_csv())
    sys.stdout.write(report.render(tables, args.format))
    return EXIT_OK


def cmd_behavior(args) -> int:
    ds = _load(args)
    result = _classification(args, ds)
    days = _population(args, ds, result)
    if not days:
        raise CliError(f"population {args.population!r} is empty", EXIT_EMPTY)
    chosen = set(days)
    rest = [d for d in ds.dates if d not in chosen]

    tables = []
    if len(ds) >= 2:
        pseudo = [DayLabel(d, d in chosen, True) for d in ds.dates]
        tables.append(report.spread_table(behavior.next_day_spread(ds, pseudo)))
    path = behavior.intraday_path(ds, days)
    tables.append(report.path_table(path, f"Intraday path ({args.population}, n={len(days)})"))
    rest_path = behavior.intraday_path(ds, rest) if rest else None
    if rest_path:
        tables.append(report.path_table(rest_path, f"Intraday path (all other days, n={len(rest)})"))
    rev, hist = behavior.peak_reversal(ds, days)
    tables.append(report.reversal_table(rev))
    tables.append(report.peak_timing_table(hist))
    years = behavior.yearly_paths(ds, days)
    tables.append(report.yearly_table(years))

    if args.out is not None:
        names = ["next_day_spread.csv"] if len(ds) >= 2 else []
        names += ["intraday_path.csv"] + (["intraday_path_other.csv"] if rest_path else [])
        names += ["peak_reversal.csv", "peak_timing.csv", "yearly_paths.csv"]
        for name, t in zip(names, tables):
            _write(args.out, name, t.to_csv())
        fig1 = [("population", report.hhmm(c.time), report.pts(c.mean)) for c in path]
        if rest_path:
            fig1 += [("other", report.hhmm(c.time), report.pts(c.mean)) for c in rest_path]
        _write(args.out, "fig1_paths.csv", report.series_csv(fig1))
        _write(args.out, "fig2_peak_timing.csv",
               report.series_csv([("peak_timing", report.hhmm(t), str(c)) for t, c in hist.bins.items()]))
        fig3 = [(str(y.year), report.hhmm(t), report.pts(m)) for y in years
                for t, m in zip(behavior.CHECKPOINTS, y.means)]
        _write(args.out, "fig3_yearly_paths.csv", report.series_csv(fig3))
    sys.stdout.write(report.render(tables, args.format))
    return EXIT_OK


def _strategy_names(args) -> list[str]:
    if args.strategy == "all":
        return list(STRATEGY_NAMES)
    if args.strategy not in STRATEGY_NAMES:
        raise CliError(f"unknown strategy {args.strategy!r}; valid: {', '.join(STRATEGY_NAMES)}, all", EXIT_USAGE)
    return [args.strategy]


def _run_strategies(args) -> dict[str, list]:
    names = _strategy_names(args)
    if args.vol_split_base not in STRATEGY_NAMES or args.vol_split_base == "vol-regime-split":
        raise CliError(f"bad --vol-split-base {args.vol_split_base!r}", EXIT_USAGE)
    if args.friction < 0:
        raise CliError("--friction must be non-negative", EXIT_USAGE)
    ds = _load(args)
    result = _classification(args, ds)
    days = _population(args, ds, result)
    ctx = StrategyContext(
        ds, result.labels, days, ExecutionModel(args.friction), compute_atr(ds, args.atr_window),
        min_history=args.min_history, ratio_cutoff=args.ratio_cutoff, vol_split_base=args.vol_split_base,
    )
    out = {name: run_strategy(name, ctx) for name in names}
    if "intersection-reversal" in out and not out["intersection-reversal"]:
        n_pos = len(result.positive_dates)
        args._notes = [f"intersection-reversal: 0 trades; needs {args.min_history} prior classifier-positive "
                       f"days with a significant negative fit ({n_pos} positive days in data)"]
    return out


def cmd_backtest(args) -> int:
    runs = _run_strategies(args)
    summaries = {name: summarize(trades) for name, trades in runs.items()}
    table = report.summary_table(summaries, getattr(args, "_notes", ()))
    if args.out is not None:
        buf = io.StringIO()
        write_trades_csv([t for trades in runs.values() for t in trades], buf)
        _write(args.out, "trades.csv", buf.getvalue())
        _write(args.out, "summary.csv", table.to_csv())
        _write(args.out, "summary.json",
               json.dumps([report.summary_json(n, s) for n, s in summaries.items()], indent=2) + "\n")
        if args.strategy == "all":
            lines = ["strategy,tstat"] + [f"{n},{report.tstat(s.tstat)}" for n, s in summaries.items()]
            _write(args.out, "fig4_tstats.csv", "\n".join(lines) + "\n")
    sys.stdout.write(report.render([table], args.format))
    return EXIT_OK


def gate_trades(trades, resamples: int, seed: int, min_trades_per_year: int = 5):
    summary = summarize(trades)
    perm = permutation_test([t.net_points for t in trades], resamples, seed) if trades else None
    years = year_consistency(trades, min_trades_per_year)
    return gate(summary, perm, years.consistent)


def cmd_gate(args) -> int:
    if args.resamples < 1:
        raise CliError("--resamples must be positive", EXIT_USAGE)
    if args.trades is not None:
        try:
            with open(args.trades, newline="") as fh:
                log_trades = read_trades_csv(fh)
        except OSError as exc:
            raise CliError(f"cannot read {args.trades}: {exc.strerror or exc}", EXIT_DATA) from None
        except ValueError as exc:
            raise CliError(str(exc), EXIT_DATA) from None
        runs: dict[str, list] = {}
        for t in log_trades:
            runs.setdefault(t.strategy, []).append(t)
        if args.strategy != "all":
            runs = {args.strategy: runs.get(args.strategy, [])}
        if not runs:
            runs = {"trades": []}
    else:
        runs = _run_strategies(args)
    results = {n: gate_trades(tr, args.resamples, args.seed, args.min_trades_per_year) for n, tr in runs.items()}
    tables = [report.gate_table(n, g) for n, g in results.items()]
    if args.out is not None:
        _write(args.out, "gate.json", json.dumps([report.gate_json(n, g) for n, g in results.items()], indent=2) + "\n")
    sys.stdout.write(report.render(tables, args.format))
    return EXIT_OK


def cmd_synth(args) -> int:
    values: dict[str, str] = {}
    try:
        if args.config is not None:
            values.update(parse_config_file(args.config.read_text()))
        for item in args.set:
            if "=" not in item:
                raise CliError(f"--set expects KEY=VALUE, got {item!r}", EXIT_USAGE)
            k, v = item.split("=", 1)
            values[k] = v
        if args.n_days is not None:
            values["n_days"] = str(args.n_days)
        if args.shocks is not None:
            values["shocks"] = args.shocks
        values.setdefault("seed", str(args.seed))
        config = config_from_mapping(values)
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_DATA) from None
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad synth config: {exc}", EXIT_USAGE) from None
    text = generate(config)
    if args.out is None:
        sys.stdout.write(text)
    elif args.out.suffix == ".csv":
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    else:
        _write(args.out, "bars.csv", text)
    return EXIT_OK


COMMANDS = {
    "validate-data": cmd_validate_data,
    "classify": cmd_classify,
    "behavior": cmd_behavior,
    "backtest": cmd_backtest,
    "gate": cmd_gate,
    "synth": cmd_synth,
}


def _configure_logging() -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root = logging.getLogger("vvg")
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    root.propagate = False
    return handler


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = _configure_logging()
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"vvg {args.command}: {exc}", file=sys.stderr)
        return exc.code
    finally:
        logging.getLogger("vvg").removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
