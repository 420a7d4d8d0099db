"""
Daily weather CSV ingestion, min-max scaling, sliding windows and chronological splits.

The expected CSV has a ``DATE`` column (ISO-8601) and the ten variables in
``FEATURES``.  NASA POWER long names for four of them are accepted as aliases.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ContractError, DataError, DegenerateFeatureError, SchemaError

FEATURES = ("T2M", "QV2M", "RH2M", "PREC", "PS", "SWDWN", "CSWDWN", "LWDWN", "T2MDEW", "T2MWET")
TARGETS = ("T2M", "PS", "PREC")
ALIASES = {
    "PRECTOTCORR": "PREC",
    "ALLSKY_SFC_SW_DWN": "SWDWN",
    "CLRSKY_SFC_SW_DWN": "CSWDWN",
    "ALLSKY_SFC_LW_DWN": "LWDWN",
}
SENTINEL = -999.0
DEFAULT_SPLIT = (0.72, 0.08, 0.20)


@dataclass
class WeatherSeries:
    city: str
    dates: np.ndarray  # datetime64[D], strictly increasing, no gaps
    values: np.ndarray  # (n_days, n_features)
    columns: tuple = FEATURES

    def __len__(self) -> int:
        return len(self.dates)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]


def ingest_csv(path, city: str | None = None, missing: str = "error") -> WeatherSeries:
    """Parse, validate and date-sort a daily CSV.

    ``missing`` controls sentinel values (<= -999) and calendar gaps:
    ``"error"`` rejects them, ``"ffill"`` repeats the previous day.
    """
    if missing not in ("error", "ffill"):
        raise ContractError(f"missing must be 'error' or 'ffill', got {missing!r}")
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or not any(h.strip() for h in header):
            raise SchemaError(f"{path}: empty file or missing header row")
        names = [ALIASES.get(h.strip(), h.strip()) for h in header]
        unknown = [h for h in names if h != "DATE" and h not in FEATURES]
        if unknown:
            raise SchemaError(f"{path}: unknown column(s) {unknown}")
        absent = [h for h in ("DATE",) + FEATURES if h not in names]
        if absent:
            raise SchemaError(f"{path}: missing column(s) {absent}")
        if len(set(names)) != len(names):
            raise SchemaError(f"{path}: duplicate column names {names}")
        date_col = names.index("DATE")
        order = [names.index(f) for f in FEATURES]

        dates, rows, lines = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(names):
                raise DataError(f"{path}:{lineno}: expected {len(names)} fields, got {len(row)}")
            try:
                dates.append(np.datetime64(row[date_col].strip(), "D"))
                vals = [float(row[i]) for i in order]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            rows.append(vals)
            lines.append(lineno)
    if not rows:
        raise SchemaError(f"{path}: no data rows")

    dates = np.array(dates, dtype="datetime64[D]")
    values = np.array(rows, dtype=np.float64)
    lines = np.array(lines)
    perm = np.argsort(dates, kind="stable")
    dates, values, lines = dates[perm], values[perm], lines[perm]
    dup = np.nonzero(np.diff(dates) == np.timedelta64(0, "D"))[0]
    if dup.size:
        i = dup[0]
        raise DataError(f"{path}: non-monotonic dates, {dates[i]} repeated (lines {lines[i]} and {lines[i + 1]})")

    bad = ~np.isfinite(values) | (values <= SENTINEL)
    if bad.any():
        if missing == "error":
            r, c = np.argwhere(bad)[0]
            raise DataError(f"{path}:{lines[r]}: missing value in {FEATURES[c]}")
        values = _forward_fill(values, bad, path)

    span = (dates[-1] - dates[0]).astype(int) + 1
    if span != len(dates):
        if missing == "error":
            gap = int(np.argmax(np.diff(dates) > np.timedelta64(1, "D")))
            raise DataError(f"{path}: calendar gap after {dates[gap]}")
        full = dates[0] + np.arange(span).astype("timedelta64[D]")
        pos = np.searchsorted(dates, full, side="right") - 1
        dates, values = full, values[pos]

    return WeatherSeries(city or path.stem, dates, values)


def _forward_fill(values: np.ndarray, bad: np.ndarray, path) -> np.ndarray:
    values = values.copy()
    for c in range(values.shape[1]):
        for r in np.nonzero(bad[:, c])[0]:
            if r == 0:
                raise DataError(f"{path}: first row has a missing {FEATURES[c]}; cannot forward-fill")
            values[r, c] = values[r - 1, c]
    return values


def write_csv(series: WeatherSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("DATE",) + tuple(series.columns))
        for d, row in zip(series.dates, series.values):
            w.writerow([str(d)] + [repr(float(v)) for v in row])


@dataclass
class MinMaxScaler:
    feature_range: tuple = (0.0, 1.0)
    data_min: np.ndarray | None = None
    data_max: np.ndarray | None = None
    columns: tuple = FEATURES

    def fit(self, values: np.ndarray) -> "MinMaxScaler":
        values = np.asarray(values, dtype=np.float64)
        self.data_min = values.min(axis=0)
        self.data_max = values.max(axis=0)
        flat = np.nonzero(self.data_max <= self.data_min)[0]
        if flat.size:
            raise DegenerateFeatureError(f"constant feature(s) {[self.columns[i] for i in flat]}")
        return self

    def _scale(self):
        if self.data_min is None:
            raise ContractError("scaler is not fitted")
        a, b = self.feature_range
        return a, (b - a) / (self.data_max - self.data_min)

    def transform(self, values: np.ndarray) -> np.ndarray:
        a, s = self._scale()
        return a + (np.asarray(values) - self.data_min) * s

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        a, s = self._scale()
        return (np.asarray(values) - a) / s + self.data_min

    def inverse_column(self, values: np.ndarray, col: int) -> np.ndarray:
        a, s = self._scale()
        return (np.asarray(values) - a) / s[col] + self.data_min[col]

    def to_dict(self) -> dict:
        return {
            "feature_range": list(self.feature_range),
            "data_min": [float(v) for v in self.data_min],
            "data_max": [float(v) for v in self.data_max],
            "columns": list(self.columns),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MinMaxScaler":
        return cls(tuple(d["feature_range"]), np.array(d["data_min"]), np.array(d["data_max"]), tuple(d["columns"]))


def scaling_range(target: str, family: str) -> tuple:
    """[-1, 1] only for precipitation with recurrent models; [0, 1] otherwise."""
    if family == "rnn" and target == "PREC":
        return (-1.0, 1.0)
    return (0.0, 1.0)


def fit_transform(scaler: MinMaxScaler, series: WeatherSeries, train_rows: int) -> WeatherSeries:
    """Fit ``scaler`` on the first ``train_rows`` days only and scale the whole series."""
    if not 0 < train_rows <= len(series):
        raise ContractError(f"train_rows={train_rows} outside 1..{len(series)}")
    scaler.columns = tuple(series.columns)
    scaler.fit(series.values[:train_rows])
    return replace(series, values=scaler.transform(series.values))


@dataclass
class WindowedDataset:
    """Samples j: window = days j..j+w-1, target = day j+w+horizon-1."""

    X: np.ndarray  # (n, w, d)
    y: np.ndarray  # (n,)
    target_days: np.ndarray  # (n,) day index of each target
    target: str
    target_col: int
    window: int
    horizon: int = 1
    dates: np.ndarray | None = None  # target dates
    splits: dict = field(default_factory=dict)  # name -> range
    scaler: MinMaxScaler | None = None
    y_raw: np.ndarray | None = None  # targets in physical units

    def __len__(self) -> int:
        return len(self.y)

    def part(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        r = self.splits[name]
        return self.X[r.start:r.stop], self.y[r.start:r.stop]


def make_windows(series: WeatherSeries, window: int = 14, horizon: int = 1, target: str = "T2M") -> WindowedDataset:
    if window < 1 or horizon < 1:
        raise ContractError("window and horizon must be >= 1")
    if target not in series.columns:
        raise ContractError(f"unknown target {target!r}")
    n_days = len(series)
    n = n_days - window - horizon + 1
    if n < 1:
        raise ContractError(f"series of length {n_days} is too short for window {window} + horizon {horizon}")
    col = series.columns.index(target)
    idx = np.arange(n)[:, None] + np.arange(window)[None, :]
    X = series.values[idx]
    days = np.arange(n) + window + horizon - 1
    return WindowedDataset(X=X, y=series.values[days, col].copy(), target_days=days, target=target,
                           target_col=col, window=window, horizon=horizon, dates=series.dates[days])


def split_counts(n: int, fractions=DEFAULT_SPLIT) -> tuple[int, int, int]:
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ContractError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    # tiny slack so 0.72 * 100 style products do not floor one short
    n_train = int(math.floor(fractions[0] * n + 1e-9))
    n_val = int(math.floor(fractions[1] * n + 1e-9))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ContractError(f"split of {n} samples by {fractions} leaves an empty part")
    return n_train, n_val, n_test


def split(dataset_or_n, fractions=DEFAULT_SPLIT) -> dict[str, range]:
    """Chronological train/val/test index ranges over windowed samples."""
    n = dataset_or_n if isinstance(dataset_or_n, int) else len(dataset_or_n)
    a, b, _ = split_counts(n, fractions)
    return {"train": range(0, a), "val": range(a, a + b), "test": range(a + b, n)}


def prepare_dataset(
    series: WeatherSeries,
    target: str,
    family: str,
    window: int = 14,
    horizon: int = 1,
    fractions=DEFAULT_SPLIT,
) -> WindowedDataset:
    """Split, scale on training rows, then window. The scaler sees only days touched by training samples."""
    n = len(series) - window - horizon + 1
    if n < 1:
        raise ContractError(f"series of length {len(series)} is too short for window {window}")
    ranges = split(n, fractions)
    train_rows = ranges["train"].stop + window + horizon - 1
    scaler = MinMaxScaler(scaling_range(target, family))
    scaled = fit_transform(scaler, series, train_rows)
    ds = make_windows(scaled, window, horizon, target)
    ds.splits = ranges
    ds.scaler = scaler
    ds.y_raw = series.values[ds.target_days, ds.target_col].copy()
    return ds
