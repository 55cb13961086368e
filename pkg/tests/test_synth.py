import datetime as dt
import io
import math

import numpy as np
import pytest

from builders import synth_dataset
from vvg.features import classify, compute_features
from vvg.market_data import STRICT, build_sessions, parse_bar_file
from vvg.synth import Shock, SynthConfig, config_from_mapping, generate, parse_config_file, trading_days


def test_degenerate_generator():
    cfg = SynthConfig(n_days=30, bar_volatility=0, gap_volatility=0, volume_dispersion=0)
    ds = build_sessions(parse_bar_file(io.StringIO(generate(cfg))))
    prices = {p for s in ds for b in s.bars for p in (b.open, b.high, b.low, b.close)}
    assert prices == {cfg.base_price}
    rows = compute_features(ds)
    assert all(r.r1 == 0 for r in rows)
    assert all(r.gap == 0 for r in rows[1:])
    assert all(r.vol_dev is None for r in rows)


def test_same_seed_same_bytes():
    cfg = SynthConfig(n_days=20, seed=42, shocks=(Shock(5, 3, 3, 3),))
    assert generate(cfg) == generate(cfg)
    assert generate(cfg) != generate(SynthConfig(n_days=20, seed=43))


@pytest.mark.parametrize("kwargs", [
    {"n_days": 0}, {"bar_volatility": -1}, {"volume_mean": 0}, {"gap_volatility": -0.1},
    {"shocks": (Shock(10),), "n_days": 5},
])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        SynthConfig(**kwargs)


def test_strict_completeness_no_drops():
    ds = build_sessions(parse_bar_file(io.StringIO(generate(SynthConfig(n_days=40, seed=1)))), STRICT)
    assert len(ds) == 40 and ds.dropped == ()


def test_weekdays_only():
    days = trading_days(dt.date(2024, 1, 5), 3)
    assert days == [dt.date(2024, 1, 5), dt.date(2024, 1, 8), dt.date(2024, 1, 9)]


def test_tick_grid():
    ds = synth_dataset(n_days=10, seed=4)
    assert all((b.close * 4).is_integer() for s in ds for b in s.bars)


@pytest.mark.parametrize("seed", range(5))
def test_shock_days_classify_positive(seed):
    shocks = tuple(Shock(d, 6.0, 8.0, 6.0) for d in (100, 200, 300))
    ds = synth_dataset(n_days=350, seed=seed, shocks=shocks)
    res = classify(ds)
    for d in (100, 200, 300):
        assert res.labels[d].positive


def test_shocks_only_positives_without_natural_gaps():
    # normal-day gaps round to zero on the tick grid, so only shock days can clear the gap threshold
    shocks = tuple(Shock(d, 5000.0, 8.0, 6.0) for d in (100, 200, 300))
    ds = synth_dataset(n_days=350, seed=3, gap_volatility=1e-6, shocks=shocks)
    res = classify(ds)
    assert [i for i, lab in enumerate(res.labels) if lab.positive] == [100, 200, 300]


def test_statistical_targets():
    ds = synth_dataset(n_days=5000, seed=123)
    closes = np.array([s.close_price for s in ds])
    rets = np.diff(closes) / closes[:-1]
    assert abs(rets.mean()) < 3 * rets.std(ddof=1) / math.sqrt(rets.size)
    z = np.array([r.vol_dev for r in compute_features(ds) if r.vol_dev is not None])
    assert abs(z.mean()) < 0.1
    assert 0.85 <= z.std(ddof=1) <= 1.15


def test_drift_moves_prices():
    up = synth_dataset(n_days=200, seed=7, drift=20.0)
    assert up[-1].close_price > up[0].open_price


class TestConfigFile:
    def test_parse_and_build(self):
        text = "# demo\nn_days = 12\nseed=5\nbar_volatility=3.5\nshocks=3:2:2:2, 7:4\nstart_date=2023-03-01\n"
        cfg = config_from_mapping(parse_config_file(text))
        assert cfg.n_days == 12 and cfg.seed == 5 and cfg.bar_volatility == 3.5
        assert cfg.shocks == (Shock(3, 2, 2, 2), Shock(7, 4))
        assert cfg.start_date == dt.date(2023, 3, 1)

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown"):
            config_from_mapping({"colour": "red"})

    def test_missing_equals(self):
        with pytest.raises(ValueError, match="key=value"):
            parse_config_file("n_days 3")
