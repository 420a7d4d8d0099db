"""
Reverse-mode autodiff on a tape
===============================

Every differentiable op appends a node to the active tape; ``backward``
sweeps the tape once in reverse.  Tensors are numpy float64 arrays of at
most two dimensions.
"""

# %%
import numpy as np

from kanforecast import tensor as T
from kanforecast.gradcheck import max_gradient_error
from kanforecast.tensor import Tape, Tensor

# %% A tiny computation: loss = sum(tanh(x @ w))
rng = np.random.default_rng(0)
x = Tensor(rng.normal(size=(4, 3)))
w = Tensor(rng.normal(size=(3, 2)), requires_grad=True)

with Tape() as tape:
    loss = T.tensor_sum(T.tanh(x @ w))
print("nodes recorded:", len(tape))
tape.backward(loss)
print("dloss/dw =\n", w.grad)

# %% The same gradient by hand: d tanh(z) = 1 - tanh(z)^2
z = x.data @ w.data
manual = x.data.T @ (1 - np.tanh(z) ** 2)
print("max difference from the hand derivation:", np.abs(manual - w.grad).max())

# %% Central differences agree with the tape for any differentiable composition
f = lambda: T.tensor_sum(T.sigmoid(x @ w) * (x @ w))  # noqa: E731
print("worst relative gradient error:", max_gradient_error(f, [w]))
