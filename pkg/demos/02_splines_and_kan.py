"""
B-spline bases and a KAN layer
==============================

A KAN edge carries its own univariate function: a fixed base activation
plus a learnable combination of cubic B-splines on a uniform grid.
"""

# %%
import numpy as np

from kanforecast.metrics import compute_metrics
from kanforecast.models import build_model
from kanforecast.spline import SplineGrid, bspline_basis
from kanforecast.train import TrainConfig, fit_model

# %% Five intervals on [0, 1] with cubic pieces give 8 basis functions
grid = SplineGrid(intervals=5, degree=3)
print("knots:", np.round(grid.knots, 2))
xs = np.linspace(0, 1, 6)
table = bspline_basis(grid, xs)
print(np.round(table, 4))
print("row sums (partition of unity):", table.sum(axis=1))

# %% At an interior knot only three cubic pieces are alive: 1/6, 2/3, 1/6
b = bspline_basis(grid, 0.4)
print("at x = 0.4:", np.round(b[b > 0], 6))

# %% Fit y = sin(2 pi x) with a [1, 64, 1] KAN and the default training loop
rng = np.random.default_rng(0)
x = rng.uniform(0, 1, 250)
y = np.sin(2 * np.pi * x)
windows = x[:, None, None]  # 250 samples, window 1, one feature
model = build_model("KAN", 1, 1, seed=0)
train = (windows[:200], y[:200])
_, history = fit_model(model, train, train, TrainConfig(model="KAN"))
print("final train MSE:", history.rows[-1][1])
print("held-out R2:", compute_metrics(y[200:], model.predict(windows[200:])).R2)

# %% The learned edge functions are plain arrays: coefficients per (output, input, basis)
layer = model.net.layers[0]
print("first layer coefficient block:", layer.coefficients.shape)
