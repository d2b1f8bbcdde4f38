"""Minimal reverse-mode autodiff over float64 numpy arrays.

Every value is a :class:`Tensor` node in a computation graph. Operations
record their parents and a backward closure; calling :func:`backward` on a
scalar loss propagates exact gradients to every parameter in the graph.
The op set is deliberately small: element-wise arithmetic, sigmoid/tanh,
channel-wise linear maps, 1D convolution with zero "same" padding, shape
ops, concatenation, and a scaled sum-of-squares loss. Everything is
computed at 64-bit precision with a fixed accumulation order, so repeated
runs are bit-identical.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from .errors import ConfigurationError, DimensionError, UsageError

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph recording inside the context (cheap inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _as_f64(data) -> np.ndarray:
    return np.asarray(data, dtype=np.float64)


class Tensor:
    """A node in the computation graph holding a float64 ndarray.

    ``grad`` is populated by :func:`backward` and accumulates across calls
    until :meth:`zero_grad`, which the training loop relies on for chunked
    full-batch gradients.
    """

    __slots__ = ("data", "grad", "name", "is_param", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None, name="", is_param=False):
        self.data = _as_f64(data)
        self.grad = None
        self.name = name
        self.is_param = is_param
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)


def constant(data, name=""):
    return Tensor(data, name=name)


def parameter(data, name):
    """A leaf tensor that optimizers update and checkpoints serialize."""
    return Tensor(np.array(data, dtype=np.float64), name=name, is_param=True)


def _node(data, parents, backward_fn, name=""):
    if not _GRAD_ENABLED:
        return Tensor(data, name=name)
    return Tensor(data, parents=parents, backward=backward_fn, name=name)


def _accumulate(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g, dtype=np.float64)
    else:
        t.grad = t.grad + g


# ----------------------------------------------------------------------
# element-wise ops


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"add: shape {a.data.shape} vs {b.data.shape}")

    def bwd(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _node(a.data + b.data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"sub: shape {a.data.shape} vs {b.data.shape}")

    def bwd(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _node(a.data - b.data, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    def bwd(g):
        _accumulate(a, -g)

    return _node(-a.data, (a,), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product of same-shape tensors."""
    if a.data.shape != b.data.shape:
        raise DimensionError(f"mul: shape {a.data.shape} vs {b.data.shape}")

    def bwd(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _node(a.data * b.data, (a, b), bwd)


def mul_broadcast(x: Tensor, w: Tensor) -> Tensor:
    """x * w where w's shape equals the trailing shape of x (peephole term)."""
    nd = w.data.ndim
    if x.data.shape[x.data.ndim - nd:] != w.data.shape:
        raise DimensionError(
            f"mul_broadcast: trailing {x.data.shape} does not match {w.data.shape}")
    lead = tuple(range(x.data.ndim - nd))

    def bwd(g):
        _accumulate(x, g * w.data)
        gw = g * x.data
        if lead:
            gw = gw.sum(axis=lead)
        _accumulate(w, gw)

    return _node(x.data * w.data, (x, w), bwd)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bwd(g):
        _accumulate(x, g * out * (1.0 - out))

    return _node(out, (x,), bwd)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def bwd(g):
        _accumulate(x, g * (1.0 - out * out))

    return _node(out, (x,), bwd)


# ----------------------------------------------------------------------
# linear maps


def dense(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """w @ x + b for a vector or matrix x of shape (in_dim,) or (in_dim, k)."""
    vec = x.data.ndim == 1
    xm = x.data.reshape(x.data.shape[0], -1)
    if w.data.ndim != 2 or w.data.shape[1] != xm.shape[0]:
        raise DimensionError(
            f"dense: weights {w.data.shape} incompatible with input {x.data.shape}")
    out = w.data @ xm
    if b is not None:
        if b.data.shape != (w.data.shape[0],):
            raise DimensionError(f"dense: bias {b.data.shape} vs out {w.data.shape[0]}")
        out = out + b.data[:, None]
    if vec:
        out = out[:, 0]

    def bwd(g):
        gm = g.reshape(w.data.shape[0], -1)
        _accumulate(w, gm @ xm.T)
        if b is not None:
            _accumulate(b, gm.sum(axis=1))
        gx = w.data.T @ gm
        _accumulate(x, gx[:, 0] if vec else gx)

    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, bwd)


def channel_linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Apply w (out_ch, in_ch) across the channel axis of x (..., in_ch, m)."""
    if x.data.ndim < 2 or w.data.ndim != 2 or x.data.shape[-2] != w.data.shape[1]:
        raise DimensionError(
            f"channel_linear: weights {w.data.shape} vs input {x.data.shape}")
    out = np.matmul(w.data, x.data)
    if b is not None:
        if b.data.shape != (w.data.shape[0],):
            raise DimensionError(f"channel_linear: bias {b.data.shape}")
        out = out + b.data[:, None]

    def bwd(g):
        gb = g.reshape(-1, g.shape[-2], g.shape[-1])
        xb = x.data.reshape(-1, x.data.shape[-2], x.data.shape[-1])
        _accumulate(w, np.tensordot(gb, xb, axes=([0, 2], [0, 2])))
        if b is not None:
            _accumulate(b, gb.sum(axis=(0, 2)))
        _accumulate(x, np.matmul(w.data.T, g))

    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, bwd)


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """1D convolution over positions with zero "same" padding.

    x: (..., in_ch, positions); w: (out_ch, in_ch, width) with odd width;
    b: (out_ch,). Output keeps the position count:
    out[c, l] = b[c] + sum_{c', k} w[c, c', k] * x[c', l + k - (width-1)/2],
    positions outside the track contributing zero.
    """
    if w.data.ndim != 3:
        raise DimensionError(f"conv1d: kernel must be 3-d, got {w.data.shape}")
    cout, cin, width = w.data.shape
    if width % 2 == 0:
        raise ConfigurationError(f"conv1d: kernel width must be odd, got {width}")
    if x.data.ndim < 2 or x.data.shape[-2] != cin:
        raise DimensionError(
            f"conv1d: input channels {x.data.shape} vs kernel in_ch {cin}")
    if b is not None and b.data.shape != (cout,):
        raise DimensionError(f"conv1d: bias {b.data.shape} vs out_ch {cout}")

    lead = x.data.shape[:-2]
    length = x.data.shape[-1]
    pad = (width - 1) // 2
    xb = x.data.reshape(-1, cin, length)
    n = xb.shape[0]
    xpad = np.zeros((n, cin, length + 2 * pad), dtype=np.float64)
    xpad[:, :, pad:pad + length] = xb

    out = np.zeros((n, cout, length), dtype=np.float64)
    for k in range(width):
        out += np.matmul(w.data[:, :, k], xpad[:, :, k:k + length])
    if b is not None:
        out += b.data[None, :, None]
    out = out.reshape(lead + (cout, length))

    def bwd(g):
        gb = g.reshape(n, cout, length)
        gw = np.empty_like(w.data)
        for k in range(width):
            gw[:, :, k] = np.tensordot(gb, xpad[:, :, k:k + length],
                                       axes=([0, 2], [0, 2]))
        _accumulate(w, gw)
        if b is not None:
            _accumulate(b, gb.sum(axis=(0, 2)))
        gxpad = np.zeros_like(xpad)
        wt = np.ascontiguousarray(w.data.transpose(1, 0, 2))
        for k in range(width):
            gxpad[:, :, k:k + length] += np.matmul(wt[:, :, k], gb)
        _accumulate(x, gxpad[:, :, pad:pad + length].reshape(x.data.shape))

    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, bwd)


# ----------------------------------------------------------------------
# shape ops


def reshape(x: Tensor, shape) -> Tensor:
    def bwd(g):
        _accumulate(x, g.reshape(x.data.shape))

    return _node(x.data.reshape(shape), (x,), bwd)


def moveaxis(x: Tensor, src: int, dst: int) -> Tensor:
    def bwd(g):
        _accumulate(x, np.moveaxis(g, dst, src))

    return _node(np.ascontiguousarray(np.moveaxis(x.data, src, dst)), (x,), bwd)


def broadcast_leading(x: Tensor, leading: tuple) -> Tensor:
    """Replicate x across new leading axes, e.g. (c, l) -> (n, t, c, l)."""
    leading = tuple(leading)
    out = np.broadcast_to(x.data, leading + x.data.shape).copy()
    axes = tuple(range(len(leading)))

    def bwd(g):
        _accumulate(x, g.sum(axis=axes))

    return _node(out, (x,), bwd)


def concat(tensors, axis: int) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise UsageError("concat: empty tensor list")
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(idx)])

    return _node(np.concatenate([t.data for t in tensors], axis=axis),
                 tuple(tensors), bwd)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along an axis."""
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[idx] = g
        _accumulate(x, gx)

    return _node(np.ascontiguousarray(x.data[idx]), (x,), bwd)


# ----------------------------------------------------------------------
# losses


def scaled_sse(pred: Tensor, target: np.ndarray, denom: float) -> Tensor:
    """sum((pred - target)^2) / denom as a scalar node.

    Summing raw squared error against an explicit denominator lets chunked
    evaluation of a full-batch mean keep a deterministic accumulation order.
    """
    target = _as_f64(target)
    if pred.data.shape != target.shape:
        raise DimensionError(f"loss: shape {pred.data.shape} vs {target.shape}")
    diff = pred.data - target
    val = np.float64((diff * diff).sum() / denom)

    def bwd(g):
        _accumulate(pred, (2.0 / denom) * g * diff)

    return _node(val, (pred,), bwd)


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean squared error over all entries of congruent tensors."""
    target = _as_f64(target)
    return scaled_sse(pred, target, float(target.size))


# ----------------------------------------------------------------------
# reverse pass


def backward(loss: Tensor):
    """Propagate d(loss)/d(node) to every ancestor of a scalar loss.

    Gradients add into ``.grad`` so chunked losses can accumulate; call
    ``zero_grad`` on parameters between optimizer steps.
    """
    if loss.data.shape != ():
        raise UsageError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    if loss._backward is None and not loss._parents:
        return  # constant loss: nothing depends on parameters

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))

    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
