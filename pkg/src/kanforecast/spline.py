"""
B-spline bases on a uniform extended grid and the KAN layer built on them.

A layer maps ``x`` (batch x n_in) to (batch x n_out) with

    out[q] = sum_p  W_b[q,p] * b(x_p) + W_s[q,p] * sum_i C[q,p,i] * B_i(x_p)

where ``b`` is the base activation (SiLU for a plain KAN) and ``B_i`` are the
degree-k B-splines of the grid.  The spline term sees inputs clamped to the
grid domain; the base term sees the raw value.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError
from .nn import Module, activation, init_params
from .tensor import Tensor


@dataclass(frozen=True)
class SplineGrid:
    """Uniform knots on [lo, hi] with ``degree`` extra knots past each end."""

    intervals: int = 5
    degree: int = 3
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.intervals < 1 or self.degree < 0 or not self.hi > self.lo:
            raise ContractError(f"invalid grid {self}")

    @property
    def n_basis(self) -> int:
        return self.intervals + self.degree

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / self.intervals

    @cached_property
    def knots(self) -> np.ndarray:
        k, g = self.degree, self.intervals
        return self.lo + np.arange(-k, g + k + 1, dtype=np.float64) * self.spacing


def _span_index(grid: SplineGrid, x: np.ndarray) -> np.ndarray:
    """Knot index i with t_i <= x < t_{i+1}, restricted to the domain spans (x == hi uses the last one)."""
    t, k = grid.knots, grid.degree
    lo_span, hi_span = k, k + grid.intervals - 1
    i = np.clip(np.floor((x - grid.lo) / grid.spacing).astype(np.intp) + k, lo_span, hi_span)
    # guard against rounding at exact knots
    i = np.where((x < t[i]) & (i > lo_span), i - 1, i)
    i = np.where((x >= t[i + 1]) & (i < hi_span), i + 1, i)
    return i


def _nonzero_bases(u: np.ndarray, degree: int) -> np.ndarray:
    """Cox-de Boor recursion for the degree+1 bases B_{i-degree..i} that can be nonzero in span i.

    ``u`` is the offset inside the span in units of the knot spacing, so on a
    uniform grid x - t_{i+1-j} = h (u + j - 1) and t_{i+j} - x = h (j - u).
    """
    vals = [np.ones_like(u)]
    for j in range(1, degree + 1):
        saved = np.zeros_like(u)
        nxt = []
        for r in range(j):
            right = (r + 1) - u
            left = u + (j - r - 1)
            temp = vals[r] / j
            nxt.append(saved + right * temp)
            saved = left * temp
        nxt.append(saved)
        vals = nxt
    return np.stack(vals, axis=-1)


def _scatter(grid: SplineGrid, i: np.ndarray, local: np.ndarray) -> np.ndarray:
    nb, width = grid.n_basis, local.shape[-1]
    out = np.zeros(i.size * nb)
    cols = (i.reshape(-1) - grid.degree)[:, None] + np.arange(width)
    out[(np.arange(i.size) * nb)[:, None] + cols] = local.reshape(-1, width)
    return out.reshape(i.shape + (nb,))


def _span_offset(grid: SplineGrid, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.clip(np.asarray(x, dtype=np.float64), grid.lo, grid.hi)
    i = _span_index(grid, x)
    u = (x - grid.knots[i]) / grid.spacing
    return i, u


def _values_and_derivatives(grid: SplineGrid, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    i, u = _span_offset(grid, x)
    k = grid.degree
    if k == 0:
        return _scatter(grid, i, np.ones(u.shape + (1,))), np.zeros(u.shape + (grid.n_basis,))
    lower = _nonzero_bases(u, k - 1)
    values = _nonzero_bases(u, k)
    # uniform knots: B'_{m,k} = (B_{m,k-1} - B_{m+1,k-1}) / h
    pad = np.zeros(u.shape + (1,))
    deriv = (np.concatenate([pad, lower], axis=-1) - np.concatenate([lower, pad], axis=-1)) / grid.spacing
    return _scatter(grid, i, values), _scatter(grid, i, deriv)


def bspline_basis(grid: SplineGrid, x) -> np.ndarray:
    """All N = G + k basis values at ``x`` (scalar or array); x is clamped to [lo, hi]."""
    i, u = _span_offset(grid, x)
    return _scatter(grid, i, _nonzero_bases(u, grid.degree))


def bspline_basis_derivative(grid: SplineGrid, x) -> np.ndarray:
    """d B_i / dx at clamped ``x``."""
    return _values_and_derivatives(grid, x)[1]


def spline_features(x: Tensor, grid: SplineGrid) -> Tensor:
    """Differentiable basis expansion: (batch x n) -> (batch x n*N), grouped per input column."""
    xd = x.data
    if xd.ndim != 2:
        raise DimensionError(f"spline_features expects a matrix, got shape {x.shape}")
    batch, n = xd.shape
    nb = grid.n_basis
    values, deriv = _values_and_derivatives(grid, xd)
    values = values.reshape(batch, n * nb)

    def backward(g):
        inside = ((xd >= grid.lo) & (xd <= grid.hi)).astype(np.float64)
        gx = np.einsum("bpi,bpi->bp", g.reshape(batch, n, nb), deriv)
        return (gx * inside,)

    return Tensor._from_op(values, "bspline", (x,), backward)


class KanLayer(Module):
    """One KAN layer: a learnable univariate function on every (input, output) edge.

    Spline coefficients are stored flat as ``coef`` with shape (n_out, n_in*N);
    ``coefficients`` gives the (n_out, n_in, N) view.
    """

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        grid: SplineGrid | None = None,
        base_activation: str = "silu",
        noise_scale: float = 1.0,
    ):
        self._grid = grid or SplineGrid()
        self._in_dim = in_dim
        self._out_dim = out_dim
        self._base_activation = base_activation
        nb = self._grid.n_basis
        self.coef = Tensor(rng.normal(0.0, 0.1 * np.sqrt(noise_scale), size=(out_dim, in_dim * nb)), requires_grad=True)
        self.base_weight = init_params((out_dim, in_dim), in_dim, rng)
        self.spline_weight = Tensor(np.ones((out_dim, in_dim)), requires_grad=True)
        # 0/1 matrix repeating each W_s column N times, to scale coefficients per edge
        self._expand = Tensor(np.kron(np.eye(in_dim), np.ones((1, nb))))

    @property
    def grid(self) -> SplineGrid:
        return self._grid

    @property
    def in_dim(self) -> int:
        return self._in_dim

    @property
    def out_dim(self) -> int:
        return self._out_dim

    @property
    def base_activation(self) -> str:
        return self._base_activation

    @property
    def coefficients(self) -> np.ndarray:
        return self.coef.data.reshape(self._out_dim, self._in_dim, self._grid.n_basis)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self._in_dim:
            raise DimensionError(f"KanLayer expects (batch x {self._in_dim}), got {x.shape}")
        base = activation(self._base_activation, x) @ self.base_weight.T
        scaled = self.coef * (self.spline_weight @ self._expand)
        spline = spline_features(x, self._grid) @ scaled.T
        return base + spline


class KanNetwork(Module):
    """Composition of KAN layers; ``widths`` lists every layer size including input and output."""

    def __init__(
        self,
        widths: list[int],
        rng: np.random.Generator,
        grid: SplineGrid | None = None,
        base_activation: str = "silu",
        noise_scale: float = 1.0,
    ):
        if len(widths) < 2:
            raise ContractError("a KAN needs at least input and output widths")
        self._widths = list(widths)
        self.layers = [
            KanLayer(a, b, rng, grid=grid, base_activation=base_activation, noise_scale=noise_scale)
            for a, b in zip(widths[:-1], widths[1:])
        ]

    @property
    def widths(self) -> list[int]:
        return list(self._widths)

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x


def kan_layer_forward(layer: KanLayer, x: Tensor) -> Tensor:
    return layer(x)


def kan_forward(net: KanNetwork, window: Tensor) -> Tensor:
    return net(window)
