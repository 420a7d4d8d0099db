"""Convex combination of the four recurrent baselines with softmax-constrained weights."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import ContractError
from .models import RNN_MODELS, Forecaster, predict_features
from .nn import softmax
from .tensor import Tensor


class EnsembleModel(Forecaster):
    """Weighted sum of frozen base forecasters; only the four logits are trained."""

    kind = "Ensemble"

    def __init__(self, bases: list[Forecaster]):
        super().__init__({})
        if len(bases) != len(RNN_MODELS) or any(b is None for b in bases):
            raise ContractError(f"ensemble needs exactly {len(RNN_MODELS)} base models, got {len(bases)}")
        self._bases = list(bases)
        self.logits = Tensor(np.zeros(len(bases)), requires_grad=True)

    @property
    def bases(self) -> list[Forecaster]:
        return list(self._bases)

    def coefficients(self) -> np.ndarray:
        return softmax(Tensor(self.logits.data)).data

    def features(self, windows: np.ndarray) -> np.ndarray:
        """Frozen base predictions, shape (n, 4)."""
        return np.column_stack([b.predict(windows) for b in self._bases])

    def forward(self, batch, training=False, rng=None) -> Tensor:
        preds = np.asarray(batch, dtype=np.float64)
        if preds.ndim != 2 or preds.shape[1] != len(self._bases):
            raise ContractError(f"ensemble expects (batch x {len(self._bases)}) base predictions, got {preds.shape}")
        weights = T.reshape(softmax(self.logits), (len(self._bases), 1))
        return Tensor(preds) @ weights

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {"logits": self.logits.data.copy()}
        for i, base in enumerate(self._bases):
            for name, value in base.state_dict().items():
                state[f"base.{i}.{name}"] = value
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        if "logits" not in state:
            raise ContractError("ensemble state has no logits")
        self.logits.data = np.asarray(state["logits"], dtype=np.float64).copy()
        for i, base in enumerate(self._bases):
            prefix = f"base.{i}."
            base.load_state_dict({k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)})


def ensemble_predict(model: EnsembleModel, windows: np.ndarray) -> np.ndarray:
    return predict_features(model, model.features(np.asarray(windows)))


def ensemble_fit(model: EnsembleModel, train_split, val_split, config=None):
    """Train the logits only (bases frozen); returns (checkpoint, history)."""
    from .train import TrainConfig, fit_model

    return fit_model(model, train_split, val_split, config or TrainConfig())
