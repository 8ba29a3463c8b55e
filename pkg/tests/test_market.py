from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degarb.errors import DataError
from degarb.market import (
    PricePeriodSeries,
    daily_spread,
    load_prices,
    price_at,
    save_prices,
    synthesize_prices,
)

T0 = datetime(2014, 1, 1)


def write(tmp_path, lines, name="p.csv"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


def test_price_at_is_half_open():
    s = PricePeriodSeries(T0, np.array([10.0, 20.0, 30.0]))
    assert price_at(s, T0) == 10.0
    assert price_at(s, T0 + timedelta(minutes=59, seconds=59)) == 10.0
    assert price_at(s, T0 + timedelta(hours=1)) == 20.0
    with pytest.raises(DataError):
        price_at(s, T0 + timedelta(hours=3))
    with pytest.raises(DataError):
        price_at(s, T0 - timedelta(seconds=1))


def test_roundtrip(tmp_path):
    s = synthesize_prices(3, 4)
    save_prices(s, tmp_path / "x.csv")
    assert load_prices(tmp_path / "x.csv") == s


def test_duplicate_hour_named(tmp_path):
    path = write(tmp_path, ["timestamp,price_eur_mwh", "2014-01-01T00:00:00,1", "2014-01-01T01:00:00,2",
                            "2014-01-01T01:00:00,3"])
    with pytest.raises(DataError, match=r"p\.csv:4: duplicated hour 2014-01-01T01:00:00"):
        load_prices(path)


@pytest.mark.parametrize("lines,msg", [
    (["ts,price", "2014-01-01T00:00:00,1"], "header"),
    (["timestamp,price_eur_mwh", "2014-01-01T00:00:00,1", "2014-01-01T02:00:00,2"], ":3: missing hours"),
    (["timestamp,price_eur_mwh", "2014-01-01T01:00:00,1", "2014-01-01T00:00:00,2"], ":3: timestamps not increasing"),
    (["timestamp,price_eur_mwh", "2014-01-01T00:00:00,abc"], ":2:"),
    (["timestamp,price_eur_mwh", "2014-01-01T00:00:00,1,2"], ":2: expected 2 fields"),
    (["timestamp,price_eur_mwh", "2014-01-01T00:00:00,nan"], ":2: non-finite"),
    (["timestamp,price_eur_mwh"], "no price rows"),
])
def test_malformed_files(tmp_path, lines, msg):
    with pytest.raises(DataError, match=msg):
        load_prices(write(tmp_path, lines))


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_prices(tmp_path / "none.csv")


def test_negative_prices_allowed(tmp_path):
    s = load_prices(write(tmp_path, ["timestamp,price_eur_mwh", "2014-01-01T00:00:00,-12.5"]))
    assert s.prices[0] == -12.5


def test_synthetic_is_deterministic_and_seeded():
    a = synthesize_prices(7, 30)
    assert a == synthesize_prices(7, 30)
    assert a != synthesize_prices(8, 30)
    assert len(a) == 720 and a.start_time == T0


def test_synthetic_year_statistics():
    s = synthesize_prices(7, 365)
    spread = daily_spread(s)
    assert 15.0 <= spread.mean() <= 80.0
    assert 25.0 <= s.prices.mean() <= 55.0
    # weekday evening above night trough on average
    day = s.prices.reshape(365, 24)
    assert day[:, 19].mean() > day[:, 3].mean() + 15.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 20))
def test_window_matches_lookup(seed, days):
    s = synthesize_prices(seed, days)
    w = s.window(5, 10)
    for i in range(10):
        assert price_at(s, w.start_time + i * timedelta(hours=1)) == w.prices[i]
