"""Shared neural building blocks: activations, dense layer, dropout, softmax, Adam."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import tensor as T
from .errors import ContractError
from .tensor import Tensor

ACTIVATIONS = ("silu", "gelu", "mish", "sigmoid", "tanh")

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def silu(x: Tensor) -> Tensor:
    return x * T.sigmoid(x)


def gelu(x: Tensor) -> Tensor:
    # exact erf form, not the tanh approximation
    return x * (0.5 * (1.0 + T.erf(x * _INV_SQRT2)))


def mish(x: Tensor) -> Tensor:
    return x * T.tanh(T.softplus(x))


_ACTIVATION_FNS = {
    "silu": silu,
    "gelu": gelu,
    "mish": mish,
    "sigmoid": T.sigmoid,
    "tanh": T.tanh,
}


def activation(kind: str, x: Tensor) -> Tensor:
    try:
        fn = _ACTIVATION_FNS[kind.lower()]
    except KeyError:
        raise ContractError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}") from None
    return fn(x)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-p) so the expectation is kept."""
    if not 0.0 <= p < 1.0:
        raise ContractError(f"dropout rate must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ContractError("dropout in training mode needs a random generator")
    keep = (rng.random(x.shape) >= p).astype(np.float64) / (1.0 - p)
    return x * Tensor(keep)


def softmax(logits: Tensor) -> Tensor:
    """Softmax over a vector. The max is subtracted as a constant, which leaves gradients exact."""
    if logits.size < 1:
        raise ContractError("softmax of an empty vector")
    shift = float(np.max(logits.data))
    e = T.exp(logits - shift)
    total = T.tensor_sum(e)
    inv = Tensor._from_op(
        np.full(logits.shape, 1.0 / total.data),
        "reciprocal_bcast",
        (total,),
        lambda g, s=float(total.data): (np.asarray(-np.sum(g) / (s * s)),),
    )
    return e * inv


def init_params(shape, fan_in: int, rng: np.random.Generator, requires_grad: bool = True) -> Tensor:
    """Uniform draw in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    if fan_in < 1:
        raise ContractError(f"fan_in must be >= 1, got {fan_in}")
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=requires_grad)


class Module:
    """Parameter container; parameters are discovered from attributes, like torch modules."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            yield from _walk(f"{prefix}{name}", value)

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise ContractError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ContractError(f"{name}: stored shape {arr.shape} != parameter shape {p.shape}")
            p.data = arr.copy()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


def _walk(name, value):
    if isinstance(value, Tensor):
        if value.requires_grad:
            yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(prefix=name + ".")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(f"{name}.{i}", item)


class DenseLayer(Module):
    """y = x W^T + b with W of shape (out, in)."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.weight = init_params((out_dim, in_dim), in_dim, rng)
        self.bias = init_params((out_dim,), in_dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight.T + self.bias


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict[str, Tensor]) -> None:
    """One bias-corrected Adam update over named parameters; grads are cleared afterwards."""
    for name, p in params.items():
        if p.grad is None:
            raise ContractError(f"parameter {name!r} has no gradient")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = p.grad
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        p.data = p.data - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p.grad = None
