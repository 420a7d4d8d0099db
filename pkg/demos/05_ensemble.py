"""
Softmax ensemble of the recurrent baselines
===========================================

Four trained recurrent models are frozen; only four logits are learned, so
the combined forecast is always a convex mix of the base forecasts.
"""

# %%
import tempfile
from pathlib import Path

import numpy as np

from kanforecast.data import prepare_dataset
from kanforecast.ensemble import EnsembleModel
from kanforecast.models import RNN_MODELS
from kanforecast.synthetic import synthetic_series
from kanforecast.train import TrainConfig, evaluate, load_model, train_model

series = synthetic_series(1500, seed=3)
ds = prepare_dataset(series, "T2M", "rnn")

# %% Train the four bases briefly
bases = []
for kind in RNN_MODELS:
    ckpt, _ = train_model(TrainConfig(model=kind, hyper={"hidden": 8}, epochs=5, patience=5), ds)
    print(f"{kind:7s} test R2 {evaluate(ckpt, ds).report.R2:.4f}")
    bases.append(load_model(ckpt))

# %% Before training the logits the weights are uniform
ens = EnsembleModel(bases)
print("initial coefficients:", ens.coefficients())

# %% Train the logits; base parameters stay bit-identical
before = [b.state_dict() for b in bases]
cfg = TrainConfig(model="Ensemble", epochs=30, patience=10, lr=0.01)
ckpt, _ = train_model(cfg, ds, model=ens)
print("learned coefficients:", np.round(ens.coefficients(), 4), "sum", ens.coefficients().sum())
print("bases untouched:", all(
    all(v.tobytes() == s[k].tobytes() for k, v in b.state_dict().items()) for b, s in zip(bases, before)
))
print(f"Ensemble test R2 {evaluate(ckpt, ds).report.R2:.4f}")

# %% Checkpoints carry the bases too
ckpt.save(Path(tempfile.mkdtemp()) / "ensemble.npz")
