"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations record a node on the active :class:`Tape` whenever one of their
inputs requires a gradient.  ``backward`` walks the tape in reverse, so the
recording order doubles as the topological order.
"""
from __future__ import annotations

import math
import threading
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def values(self) -> np.ndarray:
        """Row-major flat view of the data."""
        return self.data.reshape(-1)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # operator sugar
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


class _Node:
    __slots__ = ("out", "parents", "backward")

    def __init__(self, out: Tensor, parents: tuple[Tensor, ...], backward: Callable):
        self.out = out
        self.parents = parents
        self.backward = backward


_state = threading.local()


def _tape_stack() -> list:
    stack = getattr(_state, "stack", None)
    if stack is None:
        stack = _state.stack = []
    return stack


class Tape:
    """Ordered record of differentiable operations.

    Use as a context manager; operations executed inside the block are
    recorded if any input requires a gradient.  Tapes nest, the innermost
    one receives the records.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _tape_stack().pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, loss: Tensor, params: Sequence[Tensor] | None = None):
        return backward(self, loss, params)


class no_grad:
    """Suspend recording, e.g. during rollout inference."""

    def __enter__(self):
        _tape_stack().append(None)

    def __exit__(self, *exc):
        _tape_stack().pop()


def _active_tape() -> Tape | None:
    stack = _tape_stack()
    return stack[-1] if stack else None


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    # the sum is non-finite iff some element is (overflow of the sum itself is
    # treated as an error too)
    if arr.size and not math.isfinite(float(np.sum(arr))):
        raise NonFiniteError(f"{op}: non-finite value in output of shape {arr.shape}")
    return arr


def _make(data: np.ndarray, op: str, parents: tuple[Tensor, ...], backward_fn,
          check: bool = True) -> Tensor:
    # ops that map finite inputs to finite outputs pass check=False
    if check:
        _check_finite(data, op)
    tape = _active_tape()
    out = Tensor(data)
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        tape.nodes.append(_Node(out, parents, backward_fn))
    return out


def _check_broadcast(op: str, sa: tuple, sb: tuple) -> None:
    if sa == sb:
        return
    if len(sa) == 0 or len(sb) == 0 or math.prod(sa) == 1 or math.prod(sb) == 1:
        return
    short, long_ = (sa, sb) if len(sa) <= len(sb) else (sb, sa)
    if long_[len(long_) - len(short):] == short:
        return
    # keepdims-style singleton axes at equal rank
    if len(sa) == len(sb) and all(a == b or a == 1 or b == 1 for a, b in zip(sa, sb)):
        return
    raise ShapeError(f"{op}: cannot combine shapes {sa} and {sb} "
                     "(only scalar, trailing-dimension or singleton-axis broadcasting)")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, "add", (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, "sub", (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a.shape, b.shape)
    ad, bd = a.data, b.data

    def back(g):
        return (_unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
                _unbroadcast(g * ad, bd.shape) if b.requires_grad else None)
    return _make(ad * bd, "mul", (a, b), back)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("div", a.shape, b.shape)
    ad, bd = a.data, b.data
    out = ad / bd

    def back(g):
        ga = _unbroadcast(g / bd, ad.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * out / bd, bd.shape) if b.requires_grad else None
        return ga, gb
    return _make(out, "div", (a, b), back)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, "neg", (a,), lambda g: (-g,), check=False)


def square(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _make(ad * ad, "square", (a,), lambda g: (2.0 * g * ad,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _make(out, "sqrt", (a,), lambda g: (0.5 * g / out,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, "exp", (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    if np.any(ad <= 0):
        raise NonFiniteError("log: non-positive input")
    return _make(np.log(ad), "log", (a,), lambda g: (g / ad,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, "tanh", (a,), lambda g: (g * (1.0 - out * out),), check=False)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _make(out, "sigmoid", (a,), lambda g: (g * out * (1.0 - out),), check=False)


def softplus(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    out = np.logaddexp(0.0, ad)
    return _make(out, "softplus", (a,), lambda g: (g * 0.5 * (1.0 + np.tanh(0.5 * ad)),))


def elu(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    neg = np.expm1(np.minimum(ad, 0.0))      # 0 on the positive side
    out = np.maximum(ad, 0.0)
    out += neg
    return _make(out, "elu", (a,), lambda g: (g * (neg + 1.0),), check=False)


def relu(a) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0
    return _make(np.where(pos, a.data, 0.0), "relu", (a,), lambda g: (g * pos,), check=False)


def clip(a, lo: float | None, hi: float | None) -> Tensor:
    """Clamp with zero gradient outside ``[lo, hi]``."""
    a = as_tensor(a)
    ad = a.data
    out = np.clip(ad, lo, hi)
    inside = out == ad
    return _make(out, "clip", (a,), lambda g: (g * inside,), check=False)


def minimum(a, b) -> Tensor:
    """Elementwise minimum; ties send the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("minimum", a.shape, b.shape)
    pick_a = a.data <= b.data
    out = np.where(pick_a, a.data, b.data)
    sa, sb = a.shape, b.shape
    return _make(out, "minimum", (a, b),
                 lambda g: (_unbroadcast(g * pick_a, sa), _unbroadcast(g * ~pick_a, sb)), check=False)


def maximum(a, b) -> Tensor:
    """Elementwise maximum; ties send the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("maximum", a.shape, b.shape)
    pick_a = a.data >= b.data
    out = np.where(pick_a, a.data, b.data)
    sa, sb = a.shape, b.shape
    return _make(out, "maximum", (a, b),
                 lambda g: (_unbroadcast(g * pick_a, sa), _unbroadcast(g * ~pick_a, sb)), check=False)


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim < 1 or bd.ndim < 1:
        raise ShapeError("matmul: scalars are not allowed, use mul")
    if bd.ndim == 1:
        if ad.shape[-1] != bd.shape[0]:
            raise ShapeError(f"matmul: inner dimensions differ {ad.shape} @ {bd.shape}")

        def back_vec(g):
            ga = np.multiply.outer(g, bd) if a.requires_grad else None
            gb = (ad.reshape(-1, bd.shape[0]).T @ g.reshape(-1)) if b.requires_grad else None
            return ga, gb
        return _make(ad @ bd, "matmul", (a, b), back_vec)
    if ad.ndim < 2:
        raise ShapeError(f"matmul: left operand must be at least 2-D, got {ad.shape}")
    if ad.shape[-1] != bd.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ {ad.shape} @ {bd.shape}")
    if bd.ndim == 2:
        k, m = bd.shape

        lead = ad.shape[:-1]

        def back2(g):
            ga = (g.reshape(-1, m) @ bd.T).reshape(lead + (k,)) if a.requires_grad else None
            gb = ad.reshape(-1, k).T @ g.reshape(-1, m) if b.requires_grad else None
            return ga, gb
        # one flat GEMM instead of a stacked loop
        return _make((ad.reshape(-1, k) @ bd).reshape(lead + (m,)), "matmul", (a, b), back2)
    if ad.shape[:-2] != bd.shape[:-2]:
        raise ShapeError(f"matmul: batch dimensions differ {ad.shape} @ {bd.shape}")

    def backn(g):
        ga = g @ np.swapaxes(bd, -1, -2) if a.requires_grad else None
        gb = np.swapaxes(ad, -1, -2) @ g if b.requires_grad else None
        return ga, gb
    return _make(ad @ bd, "matmul", (a, b), backn)


def transpose(a) -> Tensor:
    """Swap the last two axes."""
    a = as_tensor(a)
    if a.ndim < 2:
        raise ShapeError("transpose: need at least 2 dimensions")
    return _make(np.swapaxes(a.data, -1, -2), "transpose", (a,),
                 lambda g: (np.swapaxes(g, -1, -2),), check=False)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    src = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError as err:
        raise ShapeError(f"reshape: {src} -> {shape}: {err}") from None
    return _make(out, "reshape", (a,), lambda g: (g.reshape(src),), check=False)


def take(a, index) -> Tensor:
    """Basic (slice/integer) indexing."""
    a = as_tensor(a)
    src = a.shape
    out = a.data[index]

    def back(g):
        full = np.zeros(src)
        full[index] = g
        return (full,)
    return _make(np.array(out, dtype=np.float64), "take", (a,), back, check=False)


def concat(tensors: Iterable, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: empty input")
    nd = ts[0].ndim
    ax = axis % nd
    for t in ts[1:]:
        if t.ndim != nd or t.shape[:ax] + t.shape[ax + 1:] != ts[0].shape[:ax] + ts[0].shape[ax + 1:]:
            raise ShapeError(f"concat: incompatible shapes {[t.shape for t in ts]} on axis {axis}")
    sizes = np.cumsum([t.shape[ax] for t in ts])[:-1]
    out = np.concatenate([t.data for t in ts], axis=ax)
    return _make(out, "concat", tuple(ts), lambda g: tuple(np.split(g, sizes, axis=ax)),
                 check=False)


# ---------------------------------------------------------------- reductions

def _norm_axes(axis, nd):
    if axis is None:
        return tuple(range(nd))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % nd for a in axis)


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    src = a.shape
    axes = _norm_axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, src),)
    return _make(np.asarray(out), "sum", (a,), back)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    src = a.shape
    axes = _norm_axes(axis, a.ndim)
    n = math.prod(src[i] for i in axes)
    out = a.data.mean(axis=axes, keepdims=keepdims)

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / n, src),)
    return _make(np.asarray(out), "mean", (a,), back)


def var(a, axis=None, keepdims: bool = False) -> Tensor:
    """Population variance."""
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    n = math.prod(a.shape[i] for i in axes)
    centered = a.data - a.data.mean(axis=axes, keepdims=True)
    out = (centered * centered).mean(axis=axes, keepdims=keepdims)

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (g * (2.0 / n) * centered,)
    return _make(np.asarray(out), "var", (a,), back)


def max_(a, axis: int) -> Tensor:
    """Max-reduction over one axis; ties route the gradient to the lowest index."""
    a = as_tensor(a)
    ax = axis % a.ndim
    idx = np.expand_dims(np.argmax(a.data, axis=ax), ax)
    out = np.take_along_axis(a.data, idx, axis=ax).squeeze(ax)
    src = a.shape

    def back(g):
        full = np.zeros(src)
        np.put_along_axis(full, idx, np.expand_dims(g, ax), axis=ax)
        return (full,)
    return _make(out, "max", (a,), back, check=False)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift; one tape node."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    xd = x.data
    centered = xd - xd.mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv
    out = xhat * gamma.data
    out += beta.data
    n = xd.shape[-1]

    def back(g):
        gx = None
        if x.requires_grad:
            gh = g * gamma.data
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                        - xhat * (gh * xhat).sum(axis=-1, keepdims=True) / n)
        gg = _unbroadcast(g * xhat, gamma.shape) if gamma.requires_grad else None
        gb = _unbroadcast(g, beta.shape) if beta.requires_grad else None
        return gx, gg, gb
    return _make(out, "layer_norm", (x, gamma, beta), back)


def affine(x, w, b) -> Tensor:
    """``x @ w + b`` for a 2-D ``w`` and 1-D ``b``; one tape node."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    xd, wd = x.data, w.data
    if wd.ndim != 2 or b.shape != (wd.shape[1],) or xd.ndim < 1 or xd.shape[-1] != wd.shape[0]:
        raise ShapeError(f"affine: incompatible shapes {xd.shape}, {wd.shape}, {b.shape}")
    k, m = wd.shape
    lead = xd.shape[:-1]
    x2 = xd.reshape(-1, k)
    out = x2 @ wd
    out += b.data

    def back(g):
        g2 = g.reshape(-1, m)
        gx = (g2 @ wd.T).reshape(lead + (k,)) if x.requires_grad else None
        gw = x2.T @ g2 if w.requires_grad else None
        gb = g2.sum(axis=0) if b.requires_grad else None
        return gx, gw, gb
    return _make(out.reshape(lead + (m,)), "affine", (x, w, b), back)


# ---------------------------------------------------------------- backward

def backward(tape: Tape, loss: Tensor, params: Sequence[Tensor] | None = None):
    """Reverse sweep over ``tape``.

    Returns a list of gradients aligned with ``params`` when given, otherwise
    a dict ``{tensor: grad}`` for every leaf that requires a gradient.
    Parameters the loss does not depend on get zeros.
    """
    if loss.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    end = next((i for i in range(len(tape.nodes) - 1, -1, -1) if tape.nodes[i].out is loss), None)
    if end is None:
        raise ValueError("backward: loss was not recorded on this tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.shape)}
    leaves: dict[int, Tensor] = {}
    for node in reversed(tape.nodes[:end + 1]):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        leaves.pop(id(node.out), None)
        for p, pg in zip(node.parents, node.backward(g)):
            if pg is None or not p.requires_grad:
                continue
            k = id(p)
            leaves[k] = p
            prev = grads.get(k)
            grads[k] = pg if prev is None else prev + pg

    if params is not None:
        return [np.array(grads[id(p)]) if id(p) in grads else np.zeros(p.shape) for p in params]
    return {leaves[k]: np.array(grads[k]) for k in leaves}
