"""Dense float64 tensors with define-by-run reverse-mode autodiff.

Every operation computes its forward value eagerly with numpy and, when a
Tape is active and some input requires gradients, records a backward rule
on that tape. Broadcasting follows numpy's trailing-axis alignment, which
is the only form supported here.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf

from dima.errors import ContractViolationError, DomainError

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    """Immutable dense array of float64 values.

    `data` is a row-major numpy array; `requires_grad` marks a leaf whose
    gradient should be produced by `backward`. Tensors created by ops are
    never modified afterwards.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractViolationError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; non-Tensor operands are wrapped as constants.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return pow_const(self, float(p))


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# Tape
# ---------------------------------------------------------------------------

_TAPE_STACK: list = []


class Tape:
    """Ordered record of primitive ops for one forward pass.

    Used as a context manager; ops executed inside record themselves if any
    input requires gradients. A tape supports exactly one backward pass.
    """

    def __init__(self):
        # entries: (out, inputs, backward_fn) in execution order
        self.entries = []
        self._consumed = False

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False

    def record(self, out, inputs, backward_fn):
        self.entries.append((out, inputs, backward_fn))

    def backward(self, loss: Tensor) -> "GradStore":
        return backward(self, loss)


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _record(out: Tensor, inputs, backward_fn):
    """Mark `out` differentiable and record the rule if a tape is active."""
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(out, inputs, backward_fn)
    return out


class GradStore:
    """Gradients produced by one backward pass, keyed by tensor identity."""

    def __init__(self, grads: dict):
        self._grads = grads

    def __getitem__(self, t: Tensor) -> np.ndarray:
        return self._grads[id(t)]

    def get(self, t: Tensor, default=None):
        return self._grads.get(id(t), default)

    def __contains__(self, t: Tensor) -> bool:
        return id(t) in self._grads


def backward(tape: Tape, loss: Tensor) -> GradStore:
    """Reverse sweep over the tape; returns gradients of `loss`.

    Gradients accumulate additively across fan-out. Leaves with
    requires_grad also receive `.grad`.
    """
    if loss.size != 1:
        raise ContractViolationError(f"backward expects a scalar loss, got shape {loss.shape}")
    if tape._consumed:
        raise ContractViolationError("tape already consumed by a previous backward pass")
    tape._consumed = True

    grads: dict = {id(loss): np.ones_like(loss.data)}
    produced = {id(out) for out, _, _ in tape.entries}
    for out, inputs, backward_fn in reversed(tape.entries):
        g = grads.get(id(out))
        if g is None:
            continue
        for t, gt in backward_fn(g):
            if not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gt
            else:
                grads[key] = gt
    # expose leaf gradients on the tensors themselves
    for out, inputs, _ in tape.entries:
        for t in inputs:
            if t.requires_grad and id(t) not in produced and id(t) in grads:
                t.grad = grads[id(t)]
    return GradStore(grads)


# ---------------------------------------------------------------------------
# Broadcasting helpers (trailing-axis alignment only)
# ---------------------------------------------------------------------------

def _check_broadcast(a_shape, b_shape):
    for da, db in zip(reversed(a_shape), reversed(b_shape)):
        if da != db and da != 1 and db != 1:
            raise ContractViolationError(
                f"shapes {a_shape} and {b_shape} are not broadcast-compatible"
            )


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of trailing-axis broadcast)."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# Elementwise primitives
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a.shape, b.shape)
    out = Tensor(a.data + b.data)
    return _record(out, (a, b), lambda g: (
        (a, _unbroadcast(g, a.shape)),
        (b, _unbroadcast(g, b.shape)),
    ))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a.shape, b.shape)
    out = Tensor(a.data - b.data)
    return _record(out, (a, b), lambda g: (
        (a, _unbroadcast(g, a.shape)),
        (b, _unbroadcast(-g, b.shape)),
    ))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a.shape, b.shape)
    out = Tensor(a.data * b.data)
    return _record(out, (a, b), lambda g: (
        (a, _unbroadcast(g * b.data, a.shape)),
        (b, _unbroadcast(g * a.data, b.shape)),
    ))


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a.shape, b.shape)
    out = Tensor(a.data / b.data)
    return _record(out, (a, b), lambda g: (
        (a, _unbroadcast(g / b.data, a.shape)),
        (b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape)),
    ))


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)
    return _record(out, (a,), lambda g: ((a, -g),))


def exp(a: Tensor) -> Tensor:
    out = Tensor(np.exp(a.data))
    y = out.data
    return _record(out, (a,), lambda g: ((a, g * y),))


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise DomainError("log of non-positive value")
    out = Tensor(np.log(a.data))
    return _record(out, (a,), lambda g: ((a, g / a.data),))


def tanh(a: Tensor) -> Tensor:
    out = Tensor(np.tanh(a.data))
    y = out.data
    return _record(out, (a,), lambda g: ((a, g * (1.0 - y * y)),))


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0))
    return _record(out, (a,), lambda g: ((a, g * (a.data > 0.0)),))


def gelu(a: Tensor) -> Tensor:
    """Exact GELU: x * Phi(x) with the Gaussian CDF."""
    x = a.data
    phi = 0.5 * (1.0 + _erf(x * _INV_SQRT2))
    out = Tensor(x * phi)

    def bw(g):
        pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
        return ((a, g * (phi + x * pdf)),)

    return _record(out, (a,), bw)


def pow_const(a: Tensor, p: float) -> Tensor:
    out = Tensor(a.data ** p)
    return _record(out, (a,), lambda g: ((a, g * p * a.data ** (p - 1.0)),))


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient flows only through the interior."""
    out = Tensor(np.clip(a.data, lo, hi))
    inside = (a.data > lo) & (a.data < hi)
    return _record(out, (a,), lambda g: ((a, g * inside),))


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; ties route the gradient to `a`."""
    _check_broadcast(a.shape, b.shape)
    out = Tensor(np.minimum(a.data, b.data))
    take_a = a.data <= b.data
    return _record(out, (a, b), lambda g: (
        (a, _unbroadcast(g * take_a, a.shape)),
        (b, _unbroadcast(g * ~take_a, b.shape)),
    ))


def round_ste(a: Tensor) -> Tensor:
    """Round to nearest integer; the gradient passes through unchanged."""
    out = Tensor(np.round(a.data))
    return _record(out, (a,), lambda g: ((a, g),))


def huber(a: Tensor, beta: float = 1.0) -> Tensor:
    """Smooth-L1 penalty of each element: 0.5*x^2/beta inside |x|<beta, |x|-beta/2 outside."""
    x = a.data
    inside = np.abs(x) < beta
    out = Tensor(np.where(inside, 0.5 * x * x / beta, np.abs(x) - 0.5 * beta))
    return _record(out, (a,), lambda g: ((a, g * np.where(inside, x / beta, np.sign(x))),))


# ---------------------------------------------------------------------------
# Reductions and shape ops
# ---------------------------------------------------------------------------

def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = Tensor(np.sum(a.data, axis=axis, keepdims=keepdims))

    def bw(g):
        if axis is None:
            return ((a, np.broadcast_to(g.reshape(()), a.shape).copy()),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return ((a, np.broadcast_to(g, a.shape).copy()),)

    return _record(out, (a,), bw)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        count = a.shape[axis]
    return mul(sum(a, axis=axis, keepdims=keepdims), Tensor(1.0 / count))


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape))
    return _record(out, (a,), lambda g: ((a, g.reshape(a.shape)),))


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = Tensor(np.transpose(a.data, axes))
    return _record(out, (a,), lambda g: ((a, np.transpose(g, inv)),))


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = list(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        parts = np.split(g, splits, axis=axis)
        return tuple(zip(tensors, parts))

    return _record(out, tuple(tensors), bw)


def take(a: Tensor, indices, axis: int = 0) -> Tensor:
    """Gather along `axis`; backward scatter-adds into the source."""
    idx = np.asarray(indices, dtype=np.intp)
    out = Tensor(np.take(a.data, idx, axis=axis))

    def bw(g):
        ga = np.zeros_like(a.data)
        moved = np.moveaxis(ga, axis, 0)
        np.add.at(moved, idx, np.moveaxis(g, axis, 0))
        return ((a, ga),)

    return _record(out, (a,), bw)


# ---------------------------------------------------------------------------
# Matrix multiply
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product.

    Supported forms: (m,k)@(k,n); batched (...,m,k)@(...,k,n) with identical
    leading dims; and (...,k)@(k,n) where the left operand is folded to 2-D.
    """
    ad, bd = a.data, b.data
    if ad.shape[-1] != bd.shape[-2 if bd.ndim > 1 else 0]:
        raise ContractViolationError(
            f"matmul inner dimensions differ: {a.shape} @ {b.shape}"
        )
    if ad.ndim == bd.ndim:
        if ad.ndim > 2 and ad.shape[:-2] != bd.shape[:-2]:
            raise ContractViolationError(
                f"matmul batch dimensions differ: {a.shape} @ {b.shape}"
            )
        out = Tensor(ad @ bd)

        def bw(g):
            return (
                (a, g @ np.swapaxes(bd, -1, -2)),
                (b, np.swapaxes(ad, -1, -2) @ g),
            )

        return _record(out, (a, b), bw)
    if bd.ndim == 2:
        out = Tensor(ad @ bd)

        def bw2(g):
            k = ad.shape[-1]
            ga = g @ bd.T
            gb = ad.reshape(-1, k).T @ g.reshape(-1, g.shape[-1])
            return ((a, ga), (b, gb))

        return _record(out, (a, b), bw2)
    raise ContractViolationError(f"unsupported matmul operand ranks: {a.shape} @ {b.shape}")


# ---------------------------------------------------------------------------
# Normalization and softmax
# ---------------------------------------------------------------------------

def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Stable softmax (max-subtraction); rows sum to 1."""
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ContractViolationError(f"softmax axis {axis} invalid for shape {a.shape}")
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)
    out = Tensor(y)

    def bw(g):
        dot = np.sum(g * y, axis=axis, keepdims=True)
        return ((a, (g - dot) * y),)

    return _record(out, (a,), bw)


def standardize(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Zero-mean unit-variance over the last axis (the layer-norm core)."""
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = xc * inv
    out = Tensor(y)

    def bw(g):
        gm = g.mean(axis=-1, keepdims=True)
        gym = (g * y).mean(axis=-1, keepdims=True)
        return ((a, (g - gm - y * gym) * inv),)

    return _record(out, (a,), bw)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Standardize the last axis, then apply the learned affine."""
    if gain.shape[-1] != a.shape[-1] or bias.shape[-1] != a.shape[-1]:
        raise ContractViolationError(
            f"layer_norm affine width {gain.shape}/{bias.shape} does not match input {a.shape}"
        )
    return add(mul(standardize(a, eps), gain), bias)
