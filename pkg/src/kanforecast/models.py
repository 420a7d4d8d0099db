"""Model registry: every forecaster exposes the same batch interface to the training loop.

``features`` turns a (n, w, d) window array into whatever the model consumes
per sample (identity for most models, frozen base predictions for the
ensemble); ``forward`` maps a batch of features to a (batch x 1) prediction.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .nn import DenseLayer, Module
from .recurrent import SequenceModel, as_sequence
from .spline import KanNetwork, SplineGrid
from .tensor import Tensor, no_grad
from .tkan import TkanModel

RNN_MODELS = ("LSTM", "GRU", "BiLSTM", "BiGRU")
SPLINE_MODELS = ("KAN", "TKAN", "TKAN5", "TKAN-GELU", "TKAN-MISH")
BENCHMARK_MODELS = RNN_MODELS + ("Ensemble",) + SPLINE_MODELS
ALL_MODELS = BENCHMARK_MODELS + ("Linear",)

DEFAULTS = {
    "LSTM": {"hidden": 64, "depth": 1, "dropout": 0.2},
    "GRU": {"hidden": 64, "depth": 1, "dropout": 0.2},
    "BiLSTM": {"hidden": 64, "depth": 1, "dropout": 0.2},
    "BiGRU": {"hidden": 64, "depth": 1, "dropout": 0.2},
    "KAN": {"hidden_widths": [64], "grid_intervals": 5, "spline_degree": 3, "noise_scale": 1.0},
    "TKAN": {"hidden": 64, "sub_dim": None, "sublayers": 1, "activation": "silu",
             "grid_intervals": 5, "spline_degree": 3},
    "TKAN5": {"hidden": 64, "sub_dim": None, "sublayers": 5, "activation": "silu",
              "grid_intervals": 5, "spline_degree": 3},
    "TKAN-GELU": {"hidden": 64, "sub_dim": None, "sublayers": 1, "activation": "gelu",
                  "grid_intervals": 5, "spline_degree": 3},
    "TKAN-MISH": {"hidden": 64, "sub_dim": None, "sublayers": 1, "activation": "mish",
                  "grid_intervals": 5, "spline_degree": 3},
    "Ensemble": {},
    "Linear": {},
}


def model_family(kind: str) -> str:
    """'spline' models need [0, 1] inputs everywhere; 'rnn' models follow the per-target ranges."""
    if kind in SPLINE_MODELS:
        return "spline"
    if kind in RNN_MODELS or kind == "Ensemble":
        return "rnn"
    if kind == "Linear":
        return "spline"
    raise ConfigurationError(f"unknown model kind {kind!r}")


class Forecaster(Module):
    kind = "?"

    def __init__(self, hyper: dict):
        self._hyper = dict(hyper)

    @property
    def hyper(self) -> dict:
        return dict(self._hyper)

    def features(self, windows: np.ndarray) -> np.ndarray:
        return windows

    def forward(self, batch: np.ndarray, training: bool = False, rng=None) -> Tensor:
        raise NotImplementedError

    def trainable(self) -> dict[str, Tensor]:
        return dict(self.named_parameters())

    def predict(self, windows: np.ndarray, batch_size: int = 64) -> np.ndarray:
        return predict_features(self, self.features(windows), batch_size)


def predict_features(model: Forecaster, feats: np.ndarray, batch_size: int = 64) -> np.ndarray:
    out = np.empty(len(feats))
    with no_grad():
        for start in range(0, len(feats), batch_size):
            out[start:start + batch_size] = model.forward(feats[start:start + batch_size]).data[:, 0]
    return out


class RecurrentForecaster(Forecaster):
    def __init__(self, kind: str, in_dim: int, rng, hyper: dict):
        super().__init__(hyper)
        self.kind = kind
        cell = "lstm" if "LSTM" in kind else "gru"
        self.net = SequenceModel(cell, in_dim, rng, hidden=hyper["hidden"], depth=hyper["depth"],
                                 bidirectional=kind.startswith("Bi"), dropout=hyper["dropout"])

    def forward(self, batch, training=False, rng=None):
        return self.net(as_sequence(batch), training=training, rng=rng)


class KanForecaster(Forecaster):
    kind = "KAN"

    def __init__(self, in_dim: int, window: int, rng, hyper: dict):
        super().__init__(hyper)
        grid = SplineGrid(hyper["grid_intervals"], hyper["spline_degree"])
        widths = [in_dim * window] + list(hyper["hidden_widths"]) + [1]
        self.net = KanNetwork(widths, rng, grid=grid, noise_scale=hyper["noise_scale"])

    def forward(self, batch, training=False, rng=None):
        batch = np.asarray(batch)
        return self.net(Tensor(batch.reshape(batch.shape[0], -1)))


class TkanForecaster(Forecaster):
    def __init__(self, kind: str, in_dim: int, rng, hyper: dict):
        super().__init__(hyper)
        self.kind = kind
        grid = SplineGrid(hyper["grid_intervals"], hyper["spline_degree"])
        self.net = TkanModel(in_dim, rng, hidden=hyper["hidden"], sublayers=hyper["sublayers"],
                             sub_dim=hyper["sub_dim"], base_activation=hyper["activation"], grid=grid)

    def forward(self, batch, training=False, rng=None):
        return self.net(as_sequence(batch))


class LinearForecaster(Forecaster):
    """Dense map from the flattened window to the target; a sanity baseline."""

    kind = "Linear"

    def __init__(self, in_dim: int, window: int, rng, hyper: dict):
        super().__init__(hyper)
        self.net = DenseLayer(in_dim * window, 1, rng)

    def forward(self, batch, training=False, rng=None):
        batch = np.asarray(batch)
        return self.net(Tensor(batch.reshape(batch.shape[0], -1)))


def resolve_hyper(kind: str, overrides: dict | None = None) -> dict:
    if kind not in DEFAULTS:
        raise ConfigurationError(f"unknown model kind {kind!r}")
    hyper = dict(DEFAULTS[kind])
    for key, value in (overrides or {}).items():
        if key not in hyper:
            raise ConfigurationError(f"{kind}: unknown hyperparameter {key!r}")
        hyper[key] = value
    return hyper


def build_model(kind: str, in_dim: int, window: int, seed: int, overrides: dict | None = None,
                bases: list | None = None) -> Forecaster:
    """Fresh model with parameters drawn from ``np.random.default_rng(seed)``."""
    hyper = resolve_hyper(kind, overrides)
    rng = np.random.default_rng(seed)
    if kind in RNN_MODELS:
        return RecurrentForecaster(kind, in_dim, rng, hyper)
    if kind == "KAN":
        return KanForecaster(in_dim, window, rng, hyper)
    if kind.startswith("TKAN"):
        return TkanForecaster(kind, in_dim, rng, hyper)
    if kind == "Linear":
        return LinearForecaster(in_dim, window, rng, hyper)
    from .ensemble import EnsembleModel

    if bases is None:
        raise ConfigurationError("Ensemble needs its four trained base models")
    return EnsembleModel(bases)
