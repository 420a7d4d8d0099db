"""Synthetic daily weather with seasonal cycles and noise, in the ingestion CSV layout.

Used by the tests and demos when the real station files are not at hand.
"""

from __future__ import annotations

import numpy as np

from .data import FEATURES, WeatherSeries


def synthetic_series(n_days: int = 5115, seed: int = 0, city: str = "Synthetic",
                     start: str = "2010-01-01") -> WeatherSeries:
    rng = np.random.default_rng(seed)
    t = np.arange(n_days)
    season = np.sin(2 * np.pi * t / 365.25)
    # a slow AR(1) anomaly shared by the thermodynamic variables
    anomaly = np.zeros(n_days)
    shocks = rng.normal(0.0, 0.6, n_days)
    for i in range(1, n_days):
        anomaly[i] = 0.85 * anomaly[i - 1] + shocks[i]
    t2m = 26.5 + 2.0 * season + anomaly
    rh2m = np.clip(80 - 6 * season - 2 * anomaly + rng.normal(0, 3, n_days), 30, 100)
    t2mdew = t2m - (100 - rh2m) / 5
    t2mwet = (t2m + t2mdew) / 2
    qv2m = 3.8 + 0.29 * t2mdew + rng.normal(0, 0.2, n_days)
    wet = rng.uniform(size=n_days) < 0.35 + 0.2 * season
    prec = np.where(wet, rng.gamma(0.8, 8.0, n_days), 0.0)
    ps = 100.9 - 0.15 * season - 0.03 * anomaly + rng.normal(0, 0.05, n_days)
    swdwn = np.clip(5.0 + 0.8 * season - 0.05 * prec + rng.normal(0, 0.6, n_days), 0.5, None)
    cswdwn = np.clip(6.8 + 0.9 * season + rng.normal(0, 0.2, n_days), swdwn, None)
    lwdwn = 410 + 3 * t2m - 300 + rng.normal(0, 4, n_days)
    cols = {
        "T2M": t2m, "QV2M": qv2m, "RH2M": rh2m, "PREC": prec, "PS": ps,
        "SWDWN": swdwn, "CSWDWN": cswdwn, "LWDWN": lwdwn, "T2MDEW": t2mdew, "T2MWET": t2mwet,
    }
    values = np.column_stack([np.round(cols[f], 2) for f in FEATURES])
    dates = np.datetime64(start, "D") + t.astype("timedelta64[D]")
    return WeatherSeries(city, dates, values)
