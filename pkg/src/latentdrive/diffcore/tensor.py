"""Dense float tensors with reverse-mode automatic differentiation on numpy.

Every tensor wraps one ndarray (float64 by default, float32 behind the
precision switch). Ops build a DAG of closures; ``backward()`` on a scalar
walks it in reverse topological order and accumulates gradients into leaf
tensors. Repeated backward calls accumulate; clearing is explicit via
``zero_grad`` (a leaf grad of ``None`` means zero).
"""

from __future__ import annotations

import contextvars
import math

import numpy as np

_GRAD_ENABLED = contextvars.ContextVar("latentdrive_grad_enabled", default=True)

_DEFAULT_DTYPE = np.float64


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible; carries both shapes."""

    def __init__(self, op, lhs_shape, rhs_shape=None):
        self.op = op
        self.lhs_shape = tuple(lhs_shape)
        self.rhs_shape = tuple(rhs_shape) if rhs_shape is not None else None
        if self.rhs_shape is None:
            msg = f"{op}: invalid shape {self.lhs_shape}"
        else:
            msg = f"{op}: incompatible shapes {self.lhs_shape} and {self.rhs_shape}"
        super().__init__(msg)


def set_default_dtype(dtype) -> None:
    """Switch the dtype new tensors are created with (float64 or float32)."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported default dtype {dtype}")
    _DEFAULT_DTYPE = dtype


def get_default_dtype():
    return _DEFAULT_DTYPE


class no_grad:
    """Context manager that disables graph construction (inference mode).

    The flag is a contextvar so worker threads get independent state.
    """

    def __enter__(self):
        self._token = _GRAD_ENABLED.set(False)
        return self

    def __exit__(self, *exc):
        _GRAD_ENABLED.reset(self._token)
        return False


def grad_enabled() -> bool:
    return _GRAD_ENABLED.get()


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A dense real-valued array node in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        if isinstance(data, np.ndarray) and data.dtype.type in (np.float32, np.float64):
            arr = data
        else:
            arr = np.asarray(data, dtype=_DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph plumbing ------------------------------------------------------

    def detach(self) -> "Tensor":
        """A view of the same values cut out of the graph (stop-gradient)."""
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad = self.grad + g

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar; accumulates into leaf ``grad``s."""
        if self.data.size != 1:
            raise ValueError(
                f"backward requires a scalar, got shape {self.data.shape}"
            )
        if not self.requires_grad:
            return
        # Iterative topo sort; graphs can be long chains during training.
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))

        flowing = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = flowing.pop(id(node), None)
            if g is None:
                continue
            if node._backward_fn is None:
                node._accumulate_grad(g)
                continue
            parent_grads = node._backward_fn(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if parent._backward_fn is None:
                    parent._accumulate_grad(pg)
                elif id(parent) in flowing:
                    flowing[id(parent)] = flowing[id(parent)] + pg
                else:
                    flowing[id(parent)] = pg

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -other)

    def __rsub__(self, other):
        return add(-self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _build(data: np.ndarray, parents: tuple, backward_fn) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED.get() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward_fn = backward_fn
    return out


# -- elementwise arithmetic ---------------------------------------------------


def add(a, b) -> Tensor:
    a = _as_tensor(a)
    if isinstance(b, Tensor):
        data = a.data + b.data

        def bwd(g):
            return (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape))

        return _build(data, (a, b), bwd)
    const = b

    def bwd_const(g):
        return (_unbroadcast(g, a.data.shape),)

    return _build(a.data + const, (a,), bwd_const)


def mul(a, b) -> Tensor:
    a = _as_tensor(a)
    if isinstance(b, Tensor):
        data = a.data * b.data

        def bwd(g):
            return (
                _unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape),
            )

        return _build(data, (a, b), bwd)
    const = b

    def bwd_const(g):
        return (_unbroadcast(g * const, a.data.shape),)

    return _build(a.data * const, (a,), bwd_const)


def power(a: Tensor, exponent: float) -> Tensor:
    a = _as_tensor(a)
    data = a.data**exponent

    def bwd(g):
        return (g * exponent * a.data ** (exponent - 1.0),)

    return _build(data, (a,), bwd)


def absolute(a: Tensor) -> Tensor:
    a = _as_tensor(a)

    def bwd(g):
        return (g * np.sign(a.data),)

    return _build(np.abs(a.data), (a,), bwd)


def exp(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    data = np.exp(a.data)

    def bwd(g):
        return (g * data,)

    return _build(data, (a,), bwd)


def log(a: Tensor) -> Tensor:
    a = _as_tensor(a)

    def bwd(g):
        return (g / a.data,)

    return _build(np.log(a.data), (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    data = np.tanh(a.data)

    def bwd(g):
        return (g * (1.0 - data * data),)

    return _build(data, (a,), bwd)


_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def gelu(a: Tensor) -> Tensor:
    """Smooth GELU (tanh form), the nonlinearity between affine layers."""
    a = _as_tensor(a)
    x = a.data
    x2 = x * x
    inner = _GELU_C * (x + _GELU_A * (x2 * x))
    t = np.tanh(inner, out=inner)
    data = 0.5 * x * (1.0 + t)

    def bwd(g):
        dinner = _GELU_C * (1.0 + 3.0 * _GELU_A * x2)
        grad = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
        return (g * grad,)

    return _build(data, (a,), bwd)


def clamp_min(a: Tensor, floor: float) -> Tensor:
    """max(a, floor); gradient passes only where a > floor."""
    a = _as_tensor(a)
    mask = a.data > floor

    def bwd(g):
        return (g * mask,)

    return _build(np.where(mask, a.data, floor), (a,), bwd)


# -- shape ops ----------------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    old_shape = a.data.shape

    def bwd(g):
        return (g.reshape(old_shape),)

    return _build(a.data.reshape(shape), (a,), bwd)


def swapaxes(a: Tensor, ax1: int, ax2: int) -> Tensor:
    a = _as_tensor(a)

    def bwd(g):
        return (np.swapaxes(g, ax1, ax2),)

    return _build(np.swapaxes(a.data, ax1, ax2), (a,), bwd)


def broadcast_to(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    old_shape = a.data.shape

    def bwd(g):
        return (_unbroadcast(g, old_shape),)

    return _build(np.broadcast_to(a.data, shape).copy(), (a,), bwd)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _build(data, tuple(tensors), bwd)


def take(a: Tensor, idx) -> Tensor:
    """Indexing / gather. Fancy (array) indices scatter-add on backward."""
    a = _as_tensor(a)
    data = a.data[idx]
    if np.isscalar(data) or data.ndim == 0:
        data = np.asarray(data)

    def _has_array(i):
        if isinstance(i, (np.ndarray, list)):
            return True
        if isinstance(i, tuple):
            return any(isinstance(j, (np.ndarray, list)) for j in i)
        return False

    fancy = _has_array(idx)

    def bwd(g):
        full = np.zeros_like(a.data)
        if fancy:
            np.add.at(full, idx, g)
        else:
            full[idx] += g
        return (full,)

    return _build(data, (a,), bwd)


# -- reductions ---------------------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _build(data, (a,), bwd)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    if axis is None:
        count = a.data.size
    elif isinstance(axis, tuple):
        count = int(np.prod([a.data.shape[ax] for ax in axis]))
    else:
        count = a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


# -- linear algebra -----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError("matmul", a.data.shape, b.data.shape)
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError("matmul", a.data.shape, b.data.shape)
    try:
        data = a.data @ b.data
    except ValueError as e:  # batch dims not broadcastable
        raise ShapeError("matmul", a.data.shape, b.data.shape) from e

    def bwd(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return (_unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape))

    return _build(data, (a, b), bwd)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax (max-subtraction) along ``axis``."""
    a = _as_tensor(a)
    data = a.data - a.data.max(axis=axis, keepdims=True)
    np.exp(data, out=data)
    data /= data.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        return (data * (g - dot),)

    return _build(data, (a,), bwd)


# -- convolution ----------------------------------------------------------------


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D convolution, NHWC input, (kh, kw, cin, cout) kernel."""
    x = _as_tensor(x)
    kernel = _as_tensor(kernel)
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise ShapeError("conv2d", x.data.shape, kernel.data.shape)
    n, h, w, cin = x.data.shape
    kh, kw, kcin, cout = kernel.data.shape
    if kcin != cin:
        raise ShapeError("conv2d", x.data.shape, kernel.data.shape)
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    if ho <= 0 or wo <= 0:
        raise ShapeError("conv2d", x.data.shape, kernel.data.shape)

    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    sn, sh, sw, sc = xp.strides
    cols = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, ho, wo, kh, kw, cin),
        strides=(sn, sh * stride, sw * stride, sh, sw, sc),
        writeable=False,
    ).reshape(n * ho * wo, kh * kw * cin)
    kmat = kernel.data.reshape(kh * kw * cin, cout)
    data = (cols @ kmat).reshape(n, ho, wo, cout)

    def bwd(g):
        gmat = g.reshape(n * ho * wo, cout)
        gk = (cols.T @ gmat).reshape(kernel.data.shape)
        gcols = (gmat @ kmat.T).reshape(n, ho, wo, kh, kw, cin)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, i : i + ho * stride : stride, j : j + wo * stride : stride, :] += gcols[
                    :, :, :, i, j, :
                ]
        if padding:
            gx = gxp[:, padding:-padding, padding:-padding, :]
        else:
            gx = gxp
        return (gx, gk)

    return _build(data, (x, kernel), bwd)
