"""
Recurrent baselines and the Temporal KAN
========================================

All sequence models read a (batch, window, features) array and return one
prediction per sample.  Here each one memorises 64 windows of a two-channel
sinusoid, the same capacity check the acceptance suite runs.
"""

# %%
import time

import numpy as np

from kanforecast.models import BENCHMARK_MODELS, build_model
from kanforecast.tensor import Tensor
from kanforecast.tkan import TkanCell, tkan_step
from kanforecast.train import fit_steps

# %% Synthetic data: predict the next value of channel 0
t = np.arange(64 + 14)
signal = np.column_stack([0.5 + 0.4 * np.sin(2 * np.pi * t / 16), 0.5 + 0.4 * np.cos(2 * np.pi * t / 16)])
X = np.stack([signal[j:j + 14] for j in range(64)])
y = signal[14:, 0]

# %% One TKAN step by hand: the output gate reads the concatenated sublayer outputs
cell = TkanCell(in_dim=2, hidden=8, rng=np.random.default_rng(0), sublayers=5, sub_dim=4)
h, c, subs = cell.initial_state(batch=3)
h, c, subs, gates = tkan_step(cell, Tensor(X[:3, 0]), h, c, subs, return_gates=True)
print("r width with 5 sublayers of 4 units:", gates["r"].shape[1])

# %% Adam steps until the training MSE drops below 1e-3
for kind in BENCHMARK_MODELS:
    if kind == "Ensemble":
        continue
    model = build_model(kind, in_dim=2, window=14, seed=0)
    start = time.perf_counter()
    steps, mse = fit_steps(model, X, y, max_steps=2000, lr=0.001, target_mse=1e-3)
    print(f"{kind:10s} {steps:5d} steps  train MSE {mse:.2e}  {time.perf_counter() - start:5.1f}s")
