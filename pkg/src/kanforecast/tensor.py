"""
Dense 1-D/2-D float64 arrays with tape-based reverse-mode differentiation.

Every differentiable operation that touches a ``requires_grad`` tensor appends
a node to the active :class:`Tape`.  Nodes are stored in creation order, so the
inputs of a node always precede it and a backward pass is a single reverse
sweep over the list.

Typical use::

    with Tape() as tape:
        loss = (x * x).sum()
    tape.backward(loss)

Outside an explicit ``with Tape()`` block a per-thread default tape is used;
``loss.backward()`` sweeps it and then clears it.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import special

from .errors import ContractError, DimensionError

__all__ = [
    "Tensor",
    "Tape",
    "no_grad",
    "as_tensor",
    "matmul",
    "add",
    "sub",
    "mul",
    "neg",
    "tanh",
    "sigmoid",
    "exp",
    "log",
    "erf",
    "softplus",
    "clamp",
    "concat",
    "slice_cols",
    "reshape",
    "transpose",
    "tensor_sum",
    "tensor_mean",
]

_local = threading.local()


def _stack() -> list:
    if not hasattr(_local, "tapes"):
        _local.tapes = []
        _local.default = Tape()
        _local.grad_enabled = True
    return _local.tapes


def _active_tape() -> "Tape | None":
    stack = _stack()
    if not _local.grad_enabled:
        return None
    return stack[-1] if stack else _local.default


@contextmanager
def no_grad():
    """Disable tape recording inside the block."""
    _stack()
    prev = _local.grad_enabled
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = prev


class _Node:
    __slots__ = ("kind", "inputs", "backward")

    def __init__(self, kind, inputs, backward):
        self.kind = kind
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Append-only record of differentiable operations for one forward pass."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _stack().pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, kind: str, inputs: tuple, backward: Callable) -> int:
        self.nodes.append(_Node(kind, inputs, backward))
        return len(self.nodes) - 1

    def clear(self) -> None:
        self.nodes = []

    def backward(self, loss: "Tensor") -> None:
        """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf."""
        if loss.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss.tape_id is None:
            if loss.requires_grad:
                _accumulate_leaf(loss, np.ones_like(loss.data))
            return
        if loss._tape is not self:
            raise ContractError("loss was not recorded on this tape")

        pending = {loss.tape_id: np.ones_like(loss.data)}
        for idx in range(loss.tape_id, -1, -1):
            g = pending.pop(idx, None)
            if g is None:
                continue
            node = self.nodes[idx]
            for inp, gi in zip(node.inputs, node.backward(g)):
                if gi is None or not inp.requires_grad:
                    continue
                if inp.tape_id is None:
                    _accumulate_leaf(inp, gi)
                elif inp.tape_id in pending:
                    pending[inp.tape_id] = pending[inp.tape_id] + gi
                else:
                    pending[inp.tape_id] = gi


def _accumulate_leaf(t: "Tensor", g: np.ndarray) -> None:
    g = np.asarray(g, dtype=np.float64).reshape(t.data.shape)
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad = t.grad + g


class Tensor:
    """A float64 array (scalar, vector or matrix) that can carry a gradient."""

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim > 2:
            raise DimensionError(f"tensors are at most 2-D, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.tape_id: int | None = None
        self._tape: Tape | None = None

    @classmethod
    def _from_op(cls, data: np.ndarray, kind: str, inputs: tuple, backward: Callable) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.tape_id = None
        out._tape = None
        out.requires_grad = False
        if any(t.requires_grad for t in inputs):
            tape = _active_tape()
            if tape is not None:
                out.requires_grad = True
                out._tape = tape
                out.tape_id = tape.record(kind, inputs, backward)
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self) -> None:
        tape = self._tape
        if tape is None:
            Tape().backward(self)
            return
        tape.backward(self)
        if tape is getattr(_local, "default", None):
            tape.clear()

    def sum(self) -> "Tensor":
        return tensor_sum(self)

    def mean(self) -> "Tensor":
        return tensor_mean(self)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _operands(a, b) -> tuple[Tensor, Tensor]:
    # python/numpy scalars become constants of the other operand's shape
    if not isinstance(a, Tensor):
        a = Tensor(np.broadcast_to(np.asarray(a, dtype=np.float64), b.shape))
    if not isinstance(b, Tensor):
        b = Tensor(np.broadcast_to(np.asarray(b, dtype=np.float64), a.shape))
    return a, b


def _is_row_bias(mat: tuple, vec: tuple) -> bool:
    if len(mat) != 2:
        return False
    return vec == (mat[1],) or vec == (1, mat[1])


def _binary_shapes(a: Tensor, b: Tensor, opname: str) -> str:
    """Return 'same', 'bias_b' or 'bias_a'; anything else is rejected."""
    if a.shape == b.shape:
        return "same"
    if _is_row_bias(a.shape, b.shape):
        return "bias_b"
    if _is_row_bias(b.shape, a.shape):
        return "bias_a"
    raise DimensionError(f"{opname}: incompatible shapes {a.shape} and {b.shape}")


def _reduce_to(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    return g.sum(axis=0).reshape(shape)


def add(a, b) -> Tensor:
    a, b = _operands(a, b)
    _binary_shapes(a, b, "add")
    sa, sb = a.shape, b.shape
    out = a.data + b.data
    return Tensor._from_op(out, "add", (a, b), lambda g: (_reduce_to(g, sa), _reduce_to(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _operands(a, b)
    _binary_shapes(a, b, "sub")
    sa, sb = a.shape, b.shape
    out = a.data - b.data
    return Tensor._from_op(out, "sub", (a, b), lambda g: (_reduce_to(g, sa), -_reduce_to(g, sb)))


def mul(a, b) -> Tensor:
    a, b = _operands(a, b)
    _binary_shapes(a, b, "mul")
    ad, bd = a.data, b.data
    out = ad * bd
    return Tensor._from_op(
        out, "mul", (a, b),
        lambda g: (_reduce_to(g * bd, ad.shape), _reduce_to(g * ad, bd.shape)),
    )


def neg(a: Tensor) -> Tensor:
    return Tensor._from_op(-a.data, "neg", (a,), lambda g: (-g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product. 1-D operands are treated as a row (left) or column (right)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0 or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    out = ad @ bd

    def backward(g):
        ga = g @ bd.T if bd.ndim == 2 else np.multiply.outer(g, bd)
        if ad.ndim == 2:
            gb = ad.T @ g
        else:
            gb = np.multiply.outer(ad, g)
        return ga.reshape(ad.shape), gb.reshape(bd.shape)

    return Tensor._from_op(out, "matmul", (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    return Tensor._from_op(a.data.T, "transpose", (a,), lambda g: (g.T,))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    src = a.shape
    out = a.data.reshape(shape)
    if out.ndim > 2:
        raise DimensionError(f"reshape: tensors are at most 2-D, got {tuple(shape)}")
    return Tensor._from_op(out, "reshape", (a,), lambda g: (g.reshape(src),))


def _unary(kind: str, a: Tensor, value: np.ndarray, dvalue: Callable[[], np.ndarray]) -> Tensor:
    return Tensor._from_op(value, kind, (a,), lambda g: (g * dvalue(),))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _unary("tanh", a, y, lambda: 1.0 - y * y)


def sigmoid(a: Tensor) -> Tensor:
    y = special.expit(a.data)
    return _unary("sigmoid", a, y, lambda: y * (1.0 - y))


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return _unary("exp", a, y, lambda: y)


def log(a: Tensor) -> Tensor:
    x = a.data
    return _unary("log", a, np.log(x), lambda: 1.0 / x)


_INV_SQRT_PI_2 = 2.0 / np.sqrt(np.pi)


def erf(a: Tensor) -> Tensor:
    x = a.data
    return _unary("erf", a, special.erf(x), lambda: _INV_SQRT_PI_2 * np.exp(-x * x))


def softplus(a: Tensor) -> Tensor:
    """ln(1 + e^x), evaluated without overflow."""
    x = a.data
    return _unary("softplus", a, np.logaddexp(0.0, x), lambda: special.expit(x))


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    if lo > hi:
        raise ContractError(f"clamp: lo={lo} exceeds hi={hi}")
    x = a.data
    return _unary("clamp", a, np.clip(x, lo, hi), lambda: ((x >= lo) & (x <= hi)).astype(np.float64))


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ContractError("concat needs at least one tensor")
    if len(parts) == 1:
        return parts[0]
    ndim = parts[0].ndim
    for p in parts[1:]:
        other = [s for i, s in enumerate(p.shape) if i != axis]
        first = [s for i, s in enumerate(parts[0].shape) if i != axis]
        if p.ndim != ndim or other != first:
            raise DimensionError(
                f"concat(axis={axis}): incompatible shapes {[q.shape for q in parts]}"
            )
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except (ValueError, np.exceptions.AxisError) as exc:
        raise DimensionError(f"concat: {exc}") from None
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._from_op(out, "concat", tuple(parts), backward)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    """Columns ``start:stop`` of a matrix (or elements of a vector)."""
    shape = a.shape
    out = a.data[..., start:stop]

    def backward(g):
        full = np.zeros(shape)
        full[..., start:stop] = g
        return (full,)

    return Tensor._from_op(out, "slice", (a,), backward)


def tensor_sum(a: Tensor) -> Tensor:
    shape = a.shape
    return Tensor._from_op(np.asarray(a.data.sum()), "sum", (a,), lambda g: (np.full(shape, float(g)),))


def tensor_mean(a: Tensor) -> Tensor:
    shape, n = a.shape, a.data.size
    return Tensor._from_op(
        np.asarray(a.data.mean()), "mean", (a,), lambda g: (np.full(shape, float(g) / n),)
    )


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
