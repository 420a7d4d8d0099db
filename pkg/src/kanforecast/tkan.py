"""
Temporal KAN: KAN sublayers with their own short-term recurrence, feeding
LSTM-style long-term gates.

Per step, for each sublayer l::

    s_l   = W_x[l] x_t + W_h[l] sub_l            (sublayer input)
    out_l = phi_l(s_l)                           (KAN layer, configurable base activation)
    sub_l = W_hh[l] sub_l + W_hz[l] out_l        (sublayer state update)

then::

    f = sigmoid(W_f x + U_f h + b_f)    i = sigmoid(W_i x + U_i h + b_i)
    c~ = tanh(W_c x + U_c h + b_c)      c = f * c + i * c~
    r = concat(out_1 .. out_L)          o = sigmoid(W_o r + b_o)
    h = o * tanh(c)

Only the output gate reads the sublayer outputs.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError
from .nn import DenseLayer, Module, init_params
from .recurrent import as_sequence
from .spline import KanLayer, SplineGrid
from .tensor import Tensor


class TkanSubLayer(Module):
    def __init__(
        self,
        in_dim: int,
        sub_dim: int,
        rng: np.random.Generator,
        base_activation: str = "silu",
        grid: SplineGrid | None = None,
    ):
        self._sub_dim = sub_dim
        self.W_x = init_params((sub_dim, in_dim), in_dim, rng)
        self.W_h = init_params((sub_dim, sub_dim), sub_dim, rng)
        self.kan = KanLayer(sub_dim, sub_dim, rng, grid=grid, base_activation=base_activation)
        self.W_hh = init_params((sub_dim, sub_dim), sub_dim, rng)
        self.W_hz = init_params((sub_dim, sub_dim), sub_dim, rng)

    @property
    def sub_dim(self) -> int:
        return self._sub_dim

    def step(self, x: Tensor, sub_prev: Tensor) -> tuple[Tensor, Tensor]:
        """(KAN output, updated sublayer state)."""
        s = x @ self.W_x.T + sub_prev @ self.W_h.T
        out = self.kan(s)
        sub = sub_prev @ self.W_hh.T + out @ self.W_hz.T
        return out, sub


class TkanCell(Module):
    def __init__(
        self,
        in_dim: int,
        hidden: int,
        rng: np.random.Generator,
        sublayers: int = 1,
        sub_dim: int | None = None,
        base_activation: str = "silu",
        grid: SplineGrid | None = None,
    ):
        if sublayers < 1:
            raise ContractError(f"need at least one sublayer, got {sublayers}")
        sub_dim = hidden if sub_dim is None else sub_dim
        self._in_dim, self._hidden, self._sub_dim = in_dim, hidden, sub_dim
        self._base_activation = base_activation
        self.sublayers = [
            TkanSubLayer(in_dim, sub_dim, rng, base_activation=base_activation, grid=grid)
            for _ in range(sublayers)
        ]
        self.W_f = init_params((hidden, in_dim), hidden, rng)
        self.U_f = init_params((hidden, hidden), hidden, rng)
        self.b_f = init_params((hidden,), hidden, rng)
        self.W_i = init_params((hidden, in_dim), hidden, rng)
        self.U_i = init_params((hidden, hidden), hidden, rng)
        self.b_i = init_params((hidden,), hidden, rng)
        self.W_c = init_params((hidden, in_dim), hidden, rng)
        self.U_c = init_params((hidden, hidden), hidden, rng)
        self.b_c = init_params((hidden,), hidden, rng)
        r_dim = sublayers * sub_dim
        self.W_o = init_params((hidden, r_dim), r_dim, rng)
        self.b_o = init_params((hidden,), r_dim, rng)

    @property
    def hidden(self) -> int:
        return self._hidden

    @property
    def sub_dim(self) -> int:
        return self._sub_dim

    @property
    def n_sublayers(self) -> int:
        return len(self.sublayers)

    @property
    def base_activation(self) -> str:
        return self._base_activation

    def initial_state(self, batch: int):
        h = Tensor(np.zeros((batch, self._hidden)))
        subs = [Tensor(np.zeros((batch, self._sub_dim))) for _ in self.sublayers]
        return h, h, subs


def tkan_step(cell: TkanCell, x: Tensor, h_prev: Tensor, c_prev: Tensor, sub_states: list[Tensor], return_gates: bool = False):
    """One TKAN step; returns (h, c, new_sub_states), plus a dict of gates if asked."""
    if len(sub_states) != cell.n_sublayers:
        raise ContractError(f"expected {cell.n_sublayers} sublayer states, got {len(sub_states)}")
    if x.ndim != 2 or x.shape[1] != cell._in_dim or h_prev.shape != (x.shape[0], cell.hidden):
        raise DimensionError(f"tkan_step: x {x.shape}, h {h_prev.shape} do not match the cell")

    outs, new_subs = [], []
    for layer, sub_prev in zip(cell.sublayers, sub_states):
        out, sub = layer.step(x, sub_prev)
        outs.append(out)
        new_subs.append(sub)

    f = T.sigmoid(x @ cell.W_f.T + h_prev @ cell.U_f.T + cell.b_f)
    i = T.sigmoid(x @ cell.W_i.T + h_prev @ cell.U_i.T + cell.b_i)
    c_tilde = T.tanh(x @ cell.W_c.T + h_prev @ cell.U_c.T + cell.b_c)
    c = f * c_prev + i * c_tilde
    r = T.concat(outs, axis=1)
    o = T.sigmoid(r @ cell.W_o.T + cell.b_o)
    h = o * T.tanh(c)
    if return_gates:
        return h, c, new_subs, {"f": f, "i": i, "o": o, "c_tilde": c_tilde, "r": r}
    return h, c, new_subs


class TkanModel(Module):
    """A single TKAN cell unrolled over the window, with a dense head on the final hidden state."""

    def __init__(
        self,
        in_dim: int,
        rng: np.random.Generator,
        hidden: int = 64,
        sublayers: int = 1,
        sub_dim: int | None = None,
        base_activation: str = "silu",
        grid: SplineGrid | None = None,
    ):
        self.cell = TkanCell(in_dim, hidden, rng, sublayers=sublayers, sub_dim=sub_dim,
                             base_activation=base_activation, grid=grid)
        self.head = DenseLayer(hidden, 1, rng)

    def __call__(self, window, training: bool = False, rng=None) -> Tensor:
        return tkan_run(self, window)


def tkan_run(model: TkanModel, window) -> Tensor:
    seq = as_sequence(window)
    if not seq:
        raise ContractError("empty window")
    h, c, subs = model.cell.initial_state(seq[0].shape[0])
    for x in seq:
        h, c, subs = tkan_step(model.cell, x, h, c, subs)
    return model.head(h)
