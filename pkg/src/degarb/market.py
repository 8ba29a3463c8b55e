"""Hourly day-ahead price series: CSV ingestion and a seeded synthetic generator.

The generator stands in for a real day-ahead dataset. It uses only a PCG64
uniform stream and basic arithmetic (no transcendental functions), so a
seed yields the same series bit for bit on any platform.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import DataError

HEADER = ("timestamp", "price_eur_mwh")
HOUR = timedelta(hours=1)
DEFAULT_START = datetime(2014, 1, 1)


@dataclass(frozen=True, eq=False)
class PricePeriodSeries:
    start_time: datetime
    prices: np.ndarray  # EUR/MWh
    period: timedelta = field(default=HOUR)

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 1 or prices.size == 0:
            raise DataError("price series must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(prices)):
            raise DataError("prices must be finite")
        if self.period != HOUR:
            raise DataError("only hourly price periods are supported")
        object.__setattr__(self, "prices", prices)

    def __len__(self):
        return self.prices.size

    @property
    def end_time(self):
        return self.start_time + self.prices.size * self.period

    def timestamps(self):
        return [self.start_time + i * self.period for i in range(self.prices.size)]

    def window(self, start_index, length):
        """Sub-series of ``length`` periods starting at ``start_index``."""
        if start_index < 0 or start_index + length > self.prices.size:
            raise DataError("window exceeds the price series")
        return PricePeriodSeries(self.start_time + start_index * self.period,
                                 self.prices[start_index : start_index + length].copy())

    def __eq__(self, other):
        return (isinstance(other, PricePeriodSeries) and self.start_time == other.start_time
                and self.period == other.period and np.array_equal(self.prices, other.prices))


def price_at(series: PricePeriodSeries, t: datetime) -> float:
    """Price in force at ``t``; hours are half-open [start, start + 1 h)."""
    if t < series.start_time or t >= series.end_time:
        raise DataError(f"{t.isoformat()} outside price series "
                        f"[{series.start_time.isoformat()}, {series.end_time.isoformat()})")
    idx = int((t - series.start_time) // series.period)
    return float(series.prices[idx])


def load_prices(path) -> PricePeriodSeries:
    """Read a ``timestamp,price_eur_mwh`` CSV with consecutive hourly rows."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise DataError(f"{path}: expected header {','.join(HEADER)}")
        start = None
        prev = None
        prices = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                ts = datetime.fromisoformat(row[0].strip())
                price = float(row[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if not math.isfinite(price):
                raise DataError(f"{path}:{lineno}: non-finite price")
            if prev is not None:
                if ts == prev:
                    raise DataError(f"{path}:{lineno}: duplicated hour {ts.isoformat()}")
                if ts < prev:
                    raise DataError(f"{path}:{lineno}: timestamps not increasing at {ts.isoformat()}")
                if ts - prev != HOUR:
                    raise DataError(f"{path}:{lineno}: missing hours before {ts.isoformat()}")
            elif ts.minute or ts.second or ts.microsecond:
                raise DataError(f"{path}:{lineno}: first timestamp is not on an hour boundary")
            start = start or ts
            prev = ts
            prices.append(price)
    if not prices:
        raise DataError(f"{path}: no price rows")
    return PricePeriodSeries(start, np.array(prices))


def save_prices(series: PricePeriodSeries, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for ts, p in zip(series.timestamps(), series.prices):
            w.writerow([ts.isoformat(), repr(float(p))])


# --- synthetic generator ----------------------------------------------------

# normalised hour-of-day shapes (max - min = 1): night trough, morning and
# evening peaks, shallow midday dip
_WEEKDAY = np.array([
    -0.30, -0.38, -0.44, -0.48, -0.47, -0.36, -0.08, 0.22, 0.38, 0.34, 0.24, 0.18,
    0.12, 0.06, 0.02, 0.02, 0.10, 0.28, 0.48, 0.52, 0.40, 0.20, 0.02, -0.16,
])
_WEEKEND = np.array([
    -0.26, -0.34, -0.42, -0.48, -0.50, -0.46, -0.36, -0.22, -0.06, 0.04, 0.06, 0.04,
    -0.02, -0.10, -0.14, -0.10, 0.04, 0.24, 0.46, 0.50, 0.40, 0.22, 0.06, -0.10,
])
# mid-month level and daily amplitude [EUR/MWh]; winter is dearer and peakier
_MONTH_LEVEL = np.array([42.0, 44.0, 41.0, 38.0, 36.0, 35.0, 35.0, 34.0, 39.0, 43.0, 46.0, 46.0])
_MONTH_AMP = np.array([36.0, 38.0, 32.0, 28.0, 26.0, 26.0, 24.0, 24.0, 30.0, 34.0, 38.0, 38.0])


@dataclass(frozen=True)
class SynthConfig:
    level_scale: float = 1.0
    amplitude_scale: float = 1.0
    level_noise: float = 5.0  # EUR/MWh, daily AR(1) innovation
    level_persistence: float = 0.7
    amplitude_noise: float = 0.25  # relative, per day
    hourly_noise: float = 2.0  # EUR/MWh
    spike_probability: float = 0.01  # per peak hour
    dip_probability: float = 0.004  # per night hour on weekends


def _gauss(rng, n):
    # Irwin-Hall(4) rescaled to unit variance: arithmetic only
    u = rng.random((n, 4))
    return (u.sum(axis=1) - 2.0) * math.sqrt(3.0)


def _seasonal(table, day_of_year):
    # linear interpolation between mid-month anchors, wrapping over the year
    pos = (day_of_year + 0.5) * 12.0 / 365.0 - 0.5
    lo = int(math.floor(pos))
    frac = pos - lo
    return table[lo % 12] * (1.0 - frac) + table[(lo + 1) % 12] * frac


def synthesize_prices(seed: int, days: int, start: datetime = DEFAULT_START,
                      config: SynthConfig = SynthConfig()) -> PricePeriodSeries:
    """Deterministic hourly prices with daily, weekly and seasonal structure."""
    if days < 1:
        raise ValueError("days must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    level_z = _gauss(rng, days)
    amp_z = _gauss(rng, days)
    hour_z = _gauss(rng, days * 24)
    events = rng.random((days * 24, 2))
    out = np.empty(days * 24)
    level_dev = 0.0
    for d in range(days):
        date = start + timedelta(days=d)
        doy = date.timetuple().tm_yday - 1
        weekend = date.weekday() >= 5
        level_dev = config.level_persistence * level_dev + config.level_noise * level_z[d]
        level = config.level_scale * _seasonal(_MONTH_LEVEL, doy) + level_dev
        amp = config.amplitude_scale * _seasonal(_MONTH_AMP, doy)
        amp *= max(0.3, 1.0 + config.amplitude_noise * amp_z[d])
        shape = _WEEKEND if weekend else _WEEKDAY
        if weekend:
            level -= 6.0
            amp *= 0.85
        for h in range(24):
            i = d * 24 + h
            p = level + amp * shape[h] + config.hourly_noise * hour_z[i]
            if shape[h] > 0.2 and events[i, 0] < config.spike_probability:
                p += 30.0 + 90.0 * events[i, 1]
            elif weekend and 1 <= h <= 6 and events[i, 0] < config.dip_probability:
                p -= 20.0 + 40.0 * events[i, 1]
            out[i] = p
    return PricePeriodSeries(start, out)


def daily_spread(series: PricePeriodSeries):
    """Max minus min price of each whole day in the series."""
    n = len(series) // 24
    return np.ptp(series.prices[: n * 24].reshape(n, 24), axis=1)
