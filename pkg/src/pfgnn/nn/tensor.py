"""Reverse-mode automatic differentiation on float64 numpy arrays.

A Tensor wraps an ndarray plus the closure that maps its output gradient to
parent gradients. backward() walks the implicit graph in reverse topological
order and accumulates into .grad. Everything is double precision; no
broadcasting beyond scalars and trailing-axis bias vectors is supported, so
every pairing the vjp closures see is one they handle exactly.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp", "name")

    # keep numpy from consuming Tensor operands; arithmetic with an ndarray
    # on the left must come back through the reflected operators below
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, _parents=(), _vjp=None, name=""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(
            p.requires_grad for p in _parents
        )
        self._parents = _parents
        self._vjp = _vjp
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    # -- graph ---------------------------------------------------------------

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self) -> None:
        """Accumulate gradients of self (a scalar) into every reachable
        tensor with requires_grad."""
        if self.data.size != 1:
            raise ValueError(f"backward needs a scalar, got shape {self.data.shape}")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        # First contribution to a node is adopted by reference; vjps may hand
        # back the incoming gradient itself (add, sum), so the buffer can be
        # shared with a sibling. Copy before the first in-place accumulation.
        owned: set[int] = set()
        for node in reversed(order):
            if node._vjp is None:
                continue
            grads = node._vjp(node.grad)
            for parent, g in zip(node._parents, grads):
                if not parent.requires_grad or g is None:
                    continue
                if parent.grad is None:
                    parent.grad = g if g.shape == parent.data.shape else g.reshape(parent.data.shape)
                elif id(parent) in owned:
                    parent.grad += g
                else:
                    parent.grad = parent.grad + g
                    owned.add(id(parent))

    # -- operators -----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None):
        return tensor_sum(self, axis)

    def gather(self, idx):
        return gather0(self, idx)

    def clip_min(self, floor):
        return clip_min(self, floor)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to the given shape, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Tensor(out, _parents=(a, b), _vjp=vjp)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return Tensor(out, _parents=(a, b), _vjp=vjp)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def vjp(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return Tensor(out, _parents=(a, b), _vjp=vjp)


def matmul(x: Tensor, w: Tensor) -> Tensor:
    """x (..., n, d) @ w (d, m). The weight is 2-D; batch axes stay on x."""
    x, w = as_tensor(x), as_tensor(w)
    if w.data.ndim != 2:
        raise ValueError(f"matmul weight must be 2-D, got shape {w.data.shape}")
    # collapse batch axes so BLAS sees one big GEMM instead of a stack of
    # tiny ones; the reshape is free for contiguous inputs
    xshape = x.data.shape
    x2 = x.data.reshape(-1, xshape[-1])
    out = (x2 @ w.data).reshape(xshape[:-1] + (w.data.shape[1],))

    def vjp(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = (g2 @ w.data.T).reshape(xshape)
        gw = x2.T @ g2
        return gx, gw

    return Tensor(out, _parents=(x, w), _vjp=vjp)


def neighbor_sum(h: Tensor, adj: np.ndarray) -> Tensor:
    """Aggregate neighbor rows: adj (n, n) @ h (..., n, d), adj constant."""
    h = as_tensor(h)
    out = np.matmul(adj, h.data)

    def vjp(g):
        return (np.matmul(adj.T, g),)

    return Tensor(out, _parents=(h,), _vjp=vjp)


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0

    def vjp(g):
        return (g * mask,)

    return Tensor(x.data * mask, _parents=(x,), _vjp=vjp)


def softplus(x: Tensor) -> Tensor:
    """log(1 + exp(x)), computed stably."""
    x = as_tensor(x)
    out = np.logaddexp(0.0, x.data)
    sig = 1.0 / (1.0 + np.exp(-x.data))

    def vjp(g):
        return (g * sig,)

    return Tensor(out, _parents=(x,), _vjp=vjp)


def tensor_sum(x: Tensor, axis=None) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, x.data.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.data.shape).copy(),)

    return Tensor(out, _parents=(x,), _vjp=vjp)


def concat(parts: list[Tensor]) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = np.concatenate([p.data for p in parts])
    sizes = [p.data.shape[0] for p in parts]

    def vjp(g):
        grads = []
        off = 0
        for s in sizes:
            grads.append(g[off:off + s])
            off += s
        return tuple(grads)

    return Tensor(out, _parents=tuple(parts), _vjp=vjp)


def gather0(x: Tensor, idx) -> Tensor:
    """Select rows along axis 0; duplicate indices accumulate on backward."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    out = x.data[idx]

    def vjp(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        return (gx,)

    return Tensor(out, _parents=(x,), _vjp=vjp)


def gather_rows(h: Tensor, rows) -> Tensor:
    """Per-slice row pick: h (K, n, d) with rows (K,) -> (K, d)."""
    h = as_tensor(h)
    rows = np.asarray(rows, dtype=np.intp)
    k = np.arange(h.data.shape[0])
    out = h.data[k, rows]

    def vjp(g):
        gh = np.zeros_like(h.data)
        gh[k, rows] = g
        return (gh,)

    return Tensor(out, _parents=(h,), _vjp=vjp)


def scale_rows(h: Tensor, rows, s: Tensor) -> Tensor:
    """Multiply one row per slice elementwise: row rows[k] of h[k] by s[k].

    h (K, n, d), rows (K,), s (K, d); all other rows pass through."""
    h, s = as_tensor(h), as_tensor(s)
    rows = np.asarray(rows, dtype=np.intp)
    k = np.arange(h.data.shape[0])
    out = h.data.copy()
    out[k, rows] = out[k, rows] * s.data

    def vjp(g):
        gh = g.copy()
        gh[k, rows] = g[k, rows] * s.data
        gs = g[k, rows] * h.data[k, rows]
        return gh, gs

    return Tensor(out, _parents=(h, s), _vjp=vjp)


def tile0(x: Tensor, k: int) -> Tensor:
    """Stack k copies of x along a fresh leading axis."""
    x = as_tensor(x)
    out = np.broadcast_to(x.data, (k,) + x.data.shape).copy()

    def vjp(g):
        return (g.sum(axis=0),)

    return Tensor(out, _parents=(x,), _vjp=vjp)


def weighted_sum0(w: Tensor, x: Tensor) -> Tensor:
    """sum_k w[k] * x[k] for w (K,) and x (K, ...)."""
    w, x = as_tensor(w), as_tensor(x)
    wb = w.data.reshape((-1,) + (1,) * (x.data.ndim - 1))
    out = (wb * x.data).sum(axis=0)

    def vjp(g):
        gw = (x.data * g).reshape(x.data.shape[0], -1).sum(axis=1)
        gx = wb * g
        return gw, gx

    return Tensor(out, _parents=(w, x), _vjp=vjp)


def log_softmax(x: Tensor) -> Tensor:
    """Log-softmax over the last axis, stable."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    soft = np.exp(out)

    def vjp(g):
        return (g - soft * g.sum(axis=-1, keepdims=True),)

    return Tensor(out, _parents=(x,), _vjp=vjp)


def pick(x: Tensor, index) -> Tensor:
    """Scalar element of a vector."""
    x = as_tensor(x)
    index = int(index)
    out = x.data[index]

    def vjp(g):
        gx = np.zeros_like(x.data)
        gx[index] = g
        return (gx,)

    return Tensor(out, _parents=(x,), _vjp=vjp)


def pick_rows(x: Tensor, idx) -> Tensor:
    """One element per row: x (K, n) with idx (K,) -> (K,)."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    k = np.arange(x.data.shape[0])
    out = x.data[k, idx]

    def vjp(g):
        gx = np.zeros_like(x.data)
        gx[k, idx] = g
        return (gx,)

    return Tensor(out, _parents=(x,), _vjp=vjp)


def log(x: Tensor) -> Tensor:
    x = as_tensor(x)

    def vjp(g):
        return (g / x.data,)

    return Tensor(np.log(x.data), _parents=(x,), _vjp=vjp)


def reshape(x: Tensor, shape) -> Tensor:
    x = as_tensor(x)
    old = x.data.shape

    def vjp(g):
        return (g.reshape(old),)

    return Tensor(x.data.reshape(shape), _parents=(x,), _vjp=vjp)


def rms_norm(x: Tensor, eps: float = 1e-8) -> Tensor:
    """Scale each last-axis row to unit root-mean-square. Keeps activations
    O(1) at any depth; an all-zero row stays zero."""
    x = as_tensor(x)
    d = x.data.shape[-1]
    r = np.sqrt((x.data ** 2).mean(axis=-1, keepdims=True) + eps)
    out = x.data / r

    def vjp(g):
        dot = (g * x.data).sum(axis=-1, keepdims=True)
        return (g / r - x.data * dot / (d * r ** 3),)

    return Tensor(out, _parents=(x,), _vjp=vjp)


def clip_min(x: Tensor, floor: float) -> Tensor:
    """Elementwise max(x, floor); gradient passes where x > floor."""
    x = as_tensor(x)
    mask = x.data > floor

    def vjp(g):
        return (g * mask,)

    return Tensor(np.maximum(x.data, floor), _parents=(x,), _vjp=vjp)


def cross_entropy(logits: Tensor, target: int) -> Tensor:
    """Negative log-likelihood of the target class under softmax(logits)."""
    return -pick(log_softmax(logits), target)


def check_finite(x: Tensor, context: str = "") -> Tensor:
    if not np.all(np.isfinite(x.data)):
        from ..errors import NumericalError

        raise NumericalError(f"non-finite values in {context or 'tensor'}")
    return x
