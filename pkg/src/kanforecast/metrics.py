"""Regression metrics reported for every (model, city, variable) run."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ContractError

METRIC_NAMES = ("MSE", "RMSE", "MAE", "R2", "MAPE")
# True where larger is better
HIGHER_IS_BETTER = {"MSE": False, "RMSE": False, "MAE": False, "R2": True, "MAPE": False}
MAPE_EPS = 1e-8


@dataclass
class MetricsReport:
    model: str
    city: str
    variable: str
    MSE: float
    RMSE: float
    MAE: float
    R2: float
    MAPE: float
    n: int

    def values(self) -> tuple:
        return tuple(getattr(self, m) for m in METRIC_NAMES)

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(y_true, y_pred, model: str = "", city: str = "", variable: str = "") -> MetricsReport:
    """MSE, RMSE, MAE, R^2 and MAPE (percent, denominator floored at 1e-8)."""
    y = np.asarray(y_true, dtype=np.float64).ravel()
    p = np.asarray(y_pred, dtype=np.float64).ravel()
    if y.shape != p.shape:
        raise ContractError(f"length mismatch: {y.size} targets vs {p.size} predictions")
    if y.size == 0:
        raise ContractError("metrics of an empty series")
    err = y - p
    mse = float(np.mean(err * err))
    mae = float(np.mean(np.abs(err)))
    dev = y - y.mean()
    ss_tot = float(np.sum(dev * dev))
    if ss_tot == 0.0:
        warnings.warn("R2 is undefined for a constant target series", RuntimeWarning, stacklevel=2)
        r2 = float("nan")
    else:
        r2 = 1.0 - float(np.sum(err * err)) / ss_tot
    mape = 100.0 * float(np.mean(np.abs(err) / np.maximum(np.abs(y), MAPE_EPS)))
    return MetricsReport(model, city, variable, mse, float(np.sqrt(mse)), mae, r2, mape, int(y.size))
