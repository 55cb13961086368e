"""Seeded synthetic 5-minute RTH bar files for exercising the pipeline."""

from __future__ import annotations

import datetime as dt
import io
import math
from dataclasses import dataclass, field, fields
from typing import Iterator

import numpy as np

from vvg.market_data import BARS_PER_SESSION, Bar, write_bar_file

SUBSTEPS = 4  # increments per bar: open -> three interior points -> close
OPENING_BARS = 6


@dataclass(frozen=True)
class Shock:
    """Multipliers for one day; a multiplier of 1 leaves that component untouched.

    A shocked gap or opening move has its draw floored at one standard
    deviation in magnitude (sign kept) and then scaled by the multiplier.
    A shocked first-bar volume is its draw times the multiplier.
    """

    day: int
    gap_multiplier: float = 1.0
    volume_multiplier: float = 1.0
    opening_multiplier: float = 1.0


@dataclass(frozen=True)
class SynthConfig:
    n_days: int = 250
    seed: int = 0
    base_price: float = 16000.0
    bar_volatility: float = 8.0  # points, sd of one bar's close-to-close move
    gap_volatility: float = 0.004  # fraction of prior close
    volume_mean: float = 2000.0  # median first-bar volume, contracts
    volume_dispersion: float = 0.2  # log-sd of bar volumes
    drift: float = 0.0  # points per session
    tick: float = 0.25  # 0 disables rounding
    start_date: dt.date = dt.date(2022, 1, 3)
    shocks: tuple[Shock, ...] = field(default=())

    def __post_init__(self):
        if self.n_days < 1:
            raise ValueError("n_days must be >= 1")
        for name in ("bar_volatility", "gap_volatility", "volume_dispersion", "tick"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.volume_mean <= 0:
            raise ValueError("volume_mean must be > 0")
        if self.base_price <= 0:
            raise ValueError("base_price must be > 0")
        for s in self.shocks:
            if not 0 <= s.day < self.n_days:
                raise ValueError(f"shock day {s.day} outside [0, {self.n_days})")


def trading_days(start: dt.date, n: int) -> list[dt.date]:
    out = []
    d = start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def _floored(z: float, mult: float) -> float:
    if mult == 1.0:
        return z
    return math.copysign(max(abs(z), 1.0), z) * mult


def generate_bars(config: SynthConfig) -> Iterator[Bar]:
    rng = np.random.default_rng(config.seed)
    shocks = {s.day: s for s in config.shocks}
    tick = config.tick
    n_steps = BARS_PER_SESSION * SUBSTEPS
    step_sd = config.bar_volatility / math.sqrt(SUBSTEPS)
    step_drift = config.drift / n_steps
    opening_steps = OPENING_BARS * SUBSTEPS
    opening_sd = config.bar_volatility * math.sqrt(OPENING_BARS)

    def snap(x):
        return np.round(x / tick) * tick if tick > 0 else x

    prev_close = None
    for i, day in enumerate(trading_days(config.start_date, config.n_days)):
        shock = shocks.get(i, Shock(i))
        gap_z = rng.standard_normal()
        steps = rng.standard_normal(n_steps) * step_sd + step_drift
        log_vol = rng.standard_normal(BARS_PER_SESSION) * config.volume_dispersion

        if prev_close is None:
            open_ = float(snap(config.base_price))
        else:
            gap = _floored(gap_z, shock.gap_multiplier) * config.gap_volatility
            open_ = float(snap(prev_close * (1 + gap)))

        if shock.opening_multiplier != 1.0 and opening_sd > 0:
            move = steps[:opening_steps].sum()
            target = _floored(move / opening_sd, shock.opening_multiplier) * opening_sd
            steps[:opening_steps] += (target - move) / opening_steps

        path = snap(open_ + np.cumsum(steps)).tolist()
        volumes = config.volume_mean * np.exp(log_vol)
        volumes[0] *= shock.volume_multiplier
        volumes[1:] *= 0.4
        vol_int = np.maximum(1, np.round(volumes)).astype(int).tolist()

        start = dt.datetime.combine(day, dt.time(9, 30))
        o = open_
        for k in range(BARS_PER_SESSION):
            pts = path[k * SUBSTEPS:(k + 1) * SUBSTEPS]
            c = pts[-1]
            yield Bar(start + dt.timedelta(minutes=5 * k), o, max(o, *pts), min(o, *pts), c, vol_int[k])
            o = c
        prev_close = o


def generate(config: SynthConfig) -> str:
    """Bar-file CSV text; identical configs give identical bytes."""
    buf = io.StringIO()
    write_bar_file(generate_bars(config), buf)
    return buf.getvalue()


def _parse_shocks(text: str) -> tuple[Shock, ...]:
    out = []
    for item in filter(None, (p.strip() for p in text.replace(";", ",").split(","))):
        parts = item.split(":")
        if not 1 <= len(parts) <= 4:
            raise ValueError(f"bad shock {item!r}; expected day[:gap[:volume[:opening]]]")
        out.append(Shock(int(parts[0]), *(float(p) for p in parts[1:])))
    return tuple(out)


def config_from_mapping(values: dict[str, str]) -> SynthConfig:
    """Build a config from string values, e.g. a key=value file or CLI overrides."""
    kinds = {f.name: f.type for f in fields(SynthConfig)}
    kwargs = {}
    for key, raw in values.items():
        key = key.strip().replace("-", "_")
        if key not in kinds:
            raise ValueError(f"unknown synth key {key!r}")
        raw = raw.strip()
        if key == "shocks":
            kwargs[key] = _parse_shocks(raw)
        elif key == "start_date":
            kwargs[key] = dt.date.fromisoformat(raw)
        elif key in ("n_days", "seed"):
            kwargs[key] = int(raw)
        else:
            kwargs[key] = float(raw)
    return SynthConfig(**kwargs)


def parse_config_file(text: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value")
        k, v = line.split("=", 1)
        values[k.strip()] = v.strip()
    return values
