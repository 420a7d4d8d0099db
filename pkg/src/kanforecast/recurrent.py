"""LSTM and GRU cells, bidirectional wrapping, and the stacked sequence-to-scalar model.

Time steps are handled as lists of (batch x features) matrices.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError
from .nn import DenseLayer, Module, dropout, init_params
from .tensor import Tensor


def _gate_params(in_dim: int, hidden: int, rng: np.random.Generator):
    # every gate block uses fan_in = hidden, the usual recurrent-layer default
    return (
        init_params((hidden, in_dim), hidden, rng),
        init_params((hidden, hidden), hidden, rng),
        init_params((hidden,), hidden, rng),
    )


def _affine(x: Tensor, h: Tensor, w: Tensor, u: Tensor, b: Tensor) -> Tensor:
    return x @ w.T + h @ u.T + b


def _check(x: Tensor, h: Tensor, in_dim: int, hidden: int, name: str) -> None:
    if x.ndim != 2 or x.shape[1] != in_dim or h.shape != (x.shape[0], hidden):
        raise DimensionError(
            f"{name}: expected x (batch x {in_dim}) and h (batch x {hidden}), got {x.shape} and {h.shape}"
        )


class LstmCell(Module):
    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator):
        self._in_dim, self._hidden = in_dim, hidden
        self.W_f, self.U_f, self.b_f = _gate_params(in_dim, hidden, rng)
        self.W_i, self.U_i, self.b_i = _gate_params(in_dim, hidden, rng)
        self.W_c, self.U_c, self.b_c = _gate_params(in_dim, hidden, rng)
        self.W_o, self.U_o, self.b_o = _gate_params(in_dim, hidden, rng)

    @property
    def hidden(self) -> int:
        return self._hidden

    @property
    def in_dim(self) -> int:
        return self._in_dim

    def initial_state(self, batch: int):
        z = Tensor(np.zeros((batch, self._hidden)))
        return (z, z)

    def step(self, x: Tensor, state):
        return lstm_step(self, x, *state)


class GruCell(Module):
    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator):
        self._in_dim, self._hidden = in_dim, hidden
        self.W_z, self.U_z, self.b_z = _gate_params(in_dim, hidden, rng)
        self.W_r, self.U_r, self.b_r = _gate_params(in_dim, hidden, rng)
        self.W_h, self.U_h, self.b_h = _gate_params(in_dim, hidden, rng)

    @property
    def hidden(self) -> int:
        return self._hidden

    @property
    def in_dim(self) -> int:
        return self._in_dim

    def initial_state(self, batch: int):
        return (Tensor(np.zeros((batch, self._hidden))),)

    def step(self, x: Tensor, state):
        return (gru_step(self, x, state[0]),)


def lstm_step(cell: LstmCell, x: Tensor, h_prev: Tensor, c_prev: Tensor) -> tuple[Tensor, Tensor]:
    _check(x, h_prev, cell.in_dim, cell.hidden, "lstm_step")
    if c_prev.shape != h_prev.shape:
        raise DimensionError(f"lstm_step: cell state {c_prev.shape} != hidden {h_prev.shape}")
    f = T.sigmoid(_affine(x, h_prev, cell.W_f, cell.U_f, cell.b_f))
    i = T.sigmoid(_affine(x, h_prev, cell.W_i, cell.U_i, cell.b_i))
    o = T.sigmoid(_affine(x, h_prev, cell.W_o, cell.U_o, cell.b_o))
    c_tilde = T.tanh(_affine(x, h_prev, cell.W_c, cell.U_c, cell.b_c))
    c = f * c_prev + i * c_tilde
    h = o * T.tanh(c)
    return h, c


def gru_step(cell: GruCell, x: Tensor, h_prev: Tensor) -> Tensor:
    _check(x, h_prev, cell.in_dim, cell.hidden, "gru_step")
    z = T.sigmoid(_affine(x, h_prev, cell.W_z, cell.U_z, cell.b_z))
    r = T.sigmoid(_affine(x, h_prev, cell.W_r, cell.U_r, cell.b_r))
    h_tilde = T.tanh(x @ cell.W_h.T + (r * h_prev) @ cell.U_h.T + cell.b_h)
    return (1.0 - z) * h_prev + z * h_tilde


_CELLS = {"lstm": LstmCell, "gru": GruCell}


class RecurrentLayer(Module):
    """One direction of one layer: unrolls a cell over a sequence from a zero state."""

    def __init__(self, kind: str, in_dim: int, hidden: int, rng: np.random.Generator):
        try:
            self.cell = _CELLS[kind](in_dim, hidden, rng)
        except KeyError:
            raise ContractError(f"unknown cell kind {kind!r}") from None

    @property
    def out_dim(self) -> int:
        return self.cell.hidden

    def run(self, seq: list[Tensor]) -> list[Tensor]:
        """Hidden state after each step."""
        state = self.cell.initial_state(seq[0].shape[0])
        outputs = []
        for x in seq:
            state = self.cell.step(x, state)
            outputs.append(state[0])
        return outputs


class BidirectionalLayer(Module):
    """Forward and backward layers over the same sequence; outputs are concatenated (2H)."""

    def __init__(self, kind: str, in_dim: int, hidden: int, rng: np.random.Generator):
        self.forward_layer = RecurrentLayer(kind, in_dim, hidden, rng)
        self.backward_layer = RecurrentLayer(kind, in_dim, hidden, rng)

    @property
    def out_dim(self) -> int:
        return 2 * self.forward_layer.out_dim

    def run_directions(self, seq: list[Tensor]) -> tuple[list[Tensor], list[Tensor]]:
        """(forward states in time order, backward states in consumption order)."""
        return self.forward_layer.run(seq), self.backward_layer.run(seq[::-1])

    def run(self, seq: list[Tensor]) -> list[Tensor]:
        fwd, bwd = self.run_directions(seq)
        # realign the backward states with time so step t sees both directions
        return [T.concat([f, b], axis=1) for f, b in zip(fwd, bwd[::-1])]

    def final(self, seq: list[Tensor]) -> Tensor:
        fwd, bwd = self.run_directions(seq)
        return T.concat([fwd[-1], bwd[-1]], axis=1)


class SequenceModel(Module):
    """Stacked recurrent layers with dropout between them and a dense head on the last step."""

    def __init__(
        self,
        kind: str,
        in_dim: int,
        rng: np.random.Generator,
        hidden: int = 64,
        depth: int = 1,
        bidirectional: bool = False,
        dropout: float = 0.2,
    ):
        if depth < 1:
            raise ContractError(f"depth must be >= 1, got {depth}")
        layer_cls = BidirectionalLayer if bidirectional else RecurrentLayer
        self.layers = []
        width = in_dim
        for _ in range(depth):
            layer = layer_cls(kind, width, hidden, rng)
            self.layers.append(layer)
            width = layer.out_dim
        self.head = DenseLayer(width, 1, rng)
        self._dropout = dropout
        self._in_dim = in_dim

    def __call__(self, seq: list[Tensor], training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        return run_sequence(self, seq, training=training, rng=rng)


def run_sequence(
    model: SequenceModel,
    window,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Prediction (batch x 1) from a window given as a list of (batch x d) steps or a (batch, w, d) array."""
    seq = as_sequence(window)
    if not seq:
        raise ContractError("empty window")
    p = model._dropout
    for n, layer in enumerate(model.layers):
        last = n == len(model.layers) - 1
        if last:
            out = layer.final(seq) if isinstance(layer, BidirectionalLayer) else layer.run(seq)[-1]
        else:
            seq = [dropout(s, p, training, rng) for s in layer.run(seq)]
    out = dropout(out, p, training, rng)
    return model.head(out)


def as_sequence(window) -> list[Tensor]:
    if isinstance(window, list):
        return window
    arr = np.asarray(window, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise DimensionError(f"window must be (w x d) or (batch, w, d), got shape {arr.shape}")
    return [Tensor(arr[:, t, :]) for t in range(arr.shape[1])]
