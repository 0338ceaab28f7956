"""Weather and day-ahead price series: ingestion, resampling, splits, synthesis.

Series are uniform-grid scalar time series.  CSV ingestion accepts the
schema `timestamp,value` with ISO-8601 timestamps at hourly or finer
resolution; everything is resampled to the 900 s simulation grid by
linear interpolation.

Training/evaluation windows are anchored at calendar month starts within
the heating season (October through March) and must fit entirely inside
their month, which keeps train and test years disjoint.  Months too short
for `episode_len + forecast_len` steps (February and the 30-day months at
the default episode length) are dropped with a warning.

Because the original weather and price files are not redistributable, the
module also ships deterministic synthesizers producing format-compatible
data: a seasonal + diurnal temperature model and a double-peaked day-ahead
price profile, both with seeded autocorrelated noise.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

UTC = timezone.utc
HEATING_MONTHS = (1, 2, 3, 10, 11, 12)
MAX_GAP_S = 6 * 3600
STEP_S = 900


class DataError(ValueError):
    """Malformed or insufficient input data."""


@dataclass(frozen=True)
class TimeSeries:
    start: datetime          # UTC, first sample
    resolution_s: int
    values: np.ndarray
    kind: str                # "weather" | "price"

    def __post_init__(self):
        if self.start.tzinfo is None:
            raise DataError("series start must be timezone-aware (UTC)")
        if self.resolution_s <= 0:
            raise DataError(f"resolution must be positive, got {self.resolution_s}")
        if not np.all(np.isfinite(self.values)):
            raise DataError("series contains non-finite values")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> datetime:
        return self.start + timedelta(seconds=(len(self.values) - 1) * self.resolution_s)


@dataclass(frozen=True)
class SeriesWindow:
    label: str               # e.g. "2016-01"
    start: datetime
    t_out: np.ndarray
    price: np.ndarray | None = None

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.label.encode())
        h.update(np.ascontiguousarray(self.t_out).tobytes())
        if self.price is not None:
            h.update(np.ascontiguousarray(self.price).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class DatasetSplit:
    train: list[SeriesWindow]
    test: list[SeriesWindow]


def _parse_timestamp(text: str, row: int) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise DataError(f"row {row}: unparseable timestamp {text!r}: {exc}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=UTC)
    return ts.astimezone(UTC)


def load_series(path, kind: str) -> TimeSeries:
    """Parse a `timestamp,value` CSV into a validated uniform series.

    Gaps up to 6 h are filled by linear interpolation onto the base grid;
    larger gaps, duplicate or out-of-order timestamps are errors.
    """
    if kind not in ("weather", "price"):
        raise DataError(f"unknown series kind {kind!r}")
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "timestamp,value":
            raise DataError(f"expected header 'timestamp,value', got {header!r}")
        stamps: list[datetime] = []
        values: list[float] = []
        for row, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(f"row {row}: expected 2 fields, got {len(parts)}")
            ts = _parse_timestamp(parts[0], row)
            try:
                value = float(parts[1])
            except ValueError:
                raise DataError(f"row {row}: unparseable value {parts[1]!r}") from None
            if stamps:
                if ts == stamps[-1]:
                    raise DataError(f"row {row}: duplicate timestamp {parts[0]}")
                if ts < stamps[-1]:
                    raise DataError(f"row {row}: out-of-order timestamp {parts[0]}")
            stamps.append(ts)
            values.append(value)
    if len(stamps) < 2:
        raise DataError("series needs at least 2 rows")

    seconds = np.array([(ts - stamps[0]).total_seconds() for ts in stamps])
    diffs = np.diff(seconds)
    base = int(diffs.min())
    if base <= 0:
        raise DataError("non-increasing timestamps after parsing")
    if np.any(diffs > MAX_GAP_S):
        row = int(np.argmax(diffs > MAX_GAP_S)) + 3  # diff i ends at CSV row i+3
        raise DataError(f"row {row}: gap of {diffs.max():.0f} s exceeds {MAX_GAP_S} s")
    if np.any(np.mod(diffs, base) != 0):
        row = int(np.argmax(np.mod(diffs, base) != 0)) + 3
        raise DataError(f"row {row}: timestamp not on the {base} s grid")

    grid = np.arange(0, int(seconds[-1]) + base, base)
    filled = np.interp(grid, seconds, np.asarray(values, dtype=float))
    return TimeSeries(start=stamps[0], resolution_s=base, values=filled, kind=kind)


def write_series_csv(series: TimeSeries, path) -> None:
    lines = ["timestamp,value"]
    for i, v in enumerate(series.values):
        ts = series.start + timedelta(seconds=i * series.resolution_s)
        lines.append(f"{ts.strftime('%Y-%m-%dT%H:%M:%S+00:00')},{float(v)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def resample_900s(series: TimeSeries) -> TimeSeries:
    """Linear interpolation onto the 900 s grid spanning the same interval."""
    if len(series.values) < 2:
        raise DataError("cannot resample a series shorter than 2 points")
    if series.resolution_s == STEP_S:
        return series
    if series.resolution_s % STEP_S != 0:
        raise DataError(
            f"resolution {series.resolution_s} s does not divide into the {STEP_S} s grid")
    factor = series.resolution_s // STEP_S
    n = len(series.values)
    src = np.arange(n) * factor
    dst = np.arange((n - 1) * factor + 1)
    return TimeSeries(start=series.start, resolution_s=STEP_S,
                      values=np.interp(dst, src, series.values), kind=series.kind)


def _month_window(weather: TimeSeries, prices: TimeSeries | None,
                  year: int, month: int, window_len: int) -> SeriesWindow | None:
    label = f"{year}-{month:02d}"
    month_start = datetime(year, month, 1, tzinfo=UTC)
    if month == 12:
        month_end = datetime(year + 1, 1, 1, tzinfo=UTC)
    else:
        month_end = datetime(year, month + 1, 1, tzinfo=UTC)
    steps_in_month = int((month_end - month_start).total_seconds()) // weather.resolution_s
    if window_len > steps_in_month:
        warnings.warn(f"dropping {label}: month holds {steps_in_month} steps, "
                      f"window needs {window_len}")
        return None
    offset = (month_start - weather.start).total_seconds()
    if offset < 0:
        return None
    idx = int(np.ceil(offset / weather.resolution_s))
    if idx + window_len > len(weather.values):
        return None
    t_out = weather.values[idx:idx + window_len].copy()
    price = None
    if prices is not None:
        price = prices.values[idx:idx + window_len].copy()
    return SeriesWindow(label=label, start=month_start, t_out=t_out, price=price)


def split_and_filter(weather: TimeSeries, train_years: list[int], test_years: list[int],
                     window_len: int, prices: TimeSeries | None = None) -> DatasetSplit:
    """Build disjoint heating-season month windows for training and testing."""
    if weather.resolution_s != STEP_S:
        raise DataError("split expects a 900 s series; call resample_900s first")
    if prices is not None:
        if prices.resolution_s != weather.resolution_s or prices.start != weather.start \
                or len(prices.values) != len(weather.values):
            raise DataError("price series must share the weather series grid")
    overlap = set(train_years) & set(test_years)
    if overlap:
        raise DataError(f"train and test years overlap: {sorted(overlap)}")
    for year in list(train_years) + list(test_years):
        if year < weather.start.year or year > weather.end.year:
            raise DataError(f"requested year {year} missing from series "
                            f"({weather.start.year}..{weather.end.year})")

    def windows_for(years):
        out = []
        for year in years:
            for month in HEATING_MONTHS:
                w = _month_window(weather, prices, year, month, window_len)
                if w is not None:
                    out.append(w)
        return out

    return DatasetSplit(train=windows_for(train_years), test=windows_for(test_years))


def sample_training_month(split: DatasetSplit, rng: np.random.Generator) -> SeriesWindow:
    """Uniformly random training window; deterministic under a seeded rng."""
    if not split.train:
        raise DataError("training set is empty")
    return split.train[int(rng.integers(len(split.train)))]


def _hour_grid(years) -> tuple[datetime, np.ndarray, np.ndarray, np.ndarray]:
    years = sorted(years)
    start = datetime(years[0], 1, 1, tzinfo=UTC)
    end = datetime(years[-1] + 1, 1, 1, tzinfo=UTC)
    n = int((end - start).total_seconds()) // 3600
    ts = np.datetime64(start.replace(tzinfo=None)) + np.arange(n).astype("timedelta64[h]")
    hour_of_day = (ts - ts.astype("datetime64[D]")).astype("timedelta64[h]").astype(float)
    day_of_year = (ts.astype("datetime64[D]") - ts.astype("datetime64[Y]")).astype(
        "timedelta64[D]").astype(float)
    day_index = (ts.astype("datetime64[D]") - ts[0].astype("datetime64[D]")).astype(
        "timedelta64[D]").astype(int)
    return start, hour_of_day, day_of_year, day_index


def _ar1(n: int, phi: float, sigma: float, rng: np.random.Generator) -> np.ndarray:
    noise = np.zeros(n)
    if sigma == 0.0:
        return noise
    scale = sigma * np.sqrt(1.0 - phi * phi)
    eps = rng.standard_normal(n)
    for i in range(1, n):
        noise[i] = phi * noise[i - 1] + scale * eps[i]
    return noise


def synthesize_weather(years, seed: int = 0, noise_scale: float = 1.0) -> TimeSeries:
    """Hourly outdoor temperature: seasonal + diurnal sinusoids + AR(1) noise.

    Seasonal minimum in mid-January, daily maximum at 14:00; deterministic
    for a given seed.  `noise_scale=0` gives the noise-free construction.
    """
    start, hod, doy, _ = _hour_grid(years)
    seasonal = 10.0 - 9.0 * np.cos(2.0 * np.pi * (doy - 14.0) / 365.25)
    diurnal = 3.5 * np.cos(2.0 * np.pi * (hod - 14.0) / 24.0)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x77EA]))
    noise = _ar1(len(hod), phi=0.97, sigma=3.0 * noise_scale, rng=rng)
    return TimeSeries(start=start, resolution_s=3600,
                      values=seasonal + diurnal + noise, kind="weather")


def synthesize_prices(years, seed: int = 0, noise_scale: float = 1.0) -> TimeSeries:
    """Hourly day-ahead prices in cent/Wh with a double-peaked daily shape.

    Morning and evening peaks, night and early-afternoon valleys; the
    noise-free daily peak/off-peak ratio is above 2:1.  Weekends are
    cheaper.  Deterministic for a given seed.
    """
    start, hod, _, day_index = _hour_grid(years)

    def bump(center, width):
        return np.exp(-0.5 * ((hod - center) / width) ** 2)

    shape = (1.0 + 0.55 * bump(8.0, 1.8) + 0.55 * bump(19.0, 2.2)
             - 0.45 * bump(3.0, 3.0) - 0.25 * bump(14.0, 2.5))
    weekday = np.where((day_index % 7) >= 5, 0.85, 1.0)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x9C1]))
    noise = _ar1(len(hod), phi=0.9, sigma=0.08 * noise_scale, rng=rng)
    base = 0.003  # cent/Wh == 30 EUR/MWh
    values = np.maximum(base * shape * weekday * (1.0 + noise), 0.0003)
    return TimeSeries(start=start, resolution_s=3600, values=values, kind="price")


__all__ = [
    "DataError",
    "DatasetSplit",
    "HEATING_MONTHS",
    "SeriesWindow",
    "STEP_S",
    "TimeSeries",
    "load_series",
    "resample_900s",
    "sample_training_month",
    "split_and_filter",
    "synthesize_prices",
    "synthesize_weather",
    "write_series_csv",
]
