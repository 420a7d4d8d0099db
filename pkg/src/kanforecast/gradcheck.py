"""Central finite-difference gradients, used to audit the tape's backward rules."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tape, Tensor, no_grad


def numerical_grad(f: Callable[[], Tensor], param: Tensor, step: float = 1e-5) -> np.ndarray:
    """d f() / d param by central differences; ``f`` must re-run the forward pass."""
    param.data = np.ascontiguousarray(param.data)
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = float(f().data)
            flat[i] = orig - step
            down = float(f().data)
            flat[i] = orig
            grad.reshape(-1)[i] = (up - down) / (2 * step)
    return grad


def analytic_grads(f: Callable[[], Tensor], params: list[Tensor]) -> list[np.ndarray]:
    for p in params:
        p.grad = None
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    return [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """max |a-b| / max(|a|, |b|, floor) over elements."""
    a, b = np.asarray(a), np.asarray(b)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def max_gradient_error(f: Callable[[], Tensor], params: list[Tensor], step: float = 1e-5) -> float:
    """Worst relative error between tape gradients and finite differences over ``params``."""
    analytic = analytic_grads(f, params)
    return max(relative_error(g, numerical_grad(f, p, step)) for g, p in zip(analytic, params))
