"""Define-by-run reverse-mode differentiation over float64 numpy arrays.

There is no compiled graph: each operation returns a Tensor that records
its parent Tensors and a closure mapping the output gradient to parent
gradients. `backward()` walks that implicit DAG once in reverse
topological order and accumulates into the `.grad` slot of every
reachable leaf that requires gradients. Graphs are rebuilt per document,
since candidate counts change the shapes anyway.

Every op checks its result for NaN/Inf and raises NumericError naming
the offending op; silent propagation is never allowed. Constant
subgraphs are pruned at construction (no parents recorded), so their
gradient is exactly zero by omission.
"""

from __future__ import annotations

import numpy as np

from . import geometry


class NumericError(RuntimeError):
    """A forward op produced NaN or Inf."""


class GraphError(RuntimeError):
    """backward() was called on something with no recorded computation."""


def _ensure_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced by op '{op}'")


class Tensor:
    """A node in the implicit graph: an array plus how it was computed."""

    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        _ensure_finite(arr, "leaf")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None

    # -- construction of op results ------------------------------------

    @staticmethod
    def _result(data: np.ndarray, op: str, parents: tuple["Tensor", ...], vjp) -> "Tensor":
        _ensure_finite(data, op)
        t = Tensor.__new__(Tensor)
        t.data = data
        t.grad = None
        t.op = op
        t.requires_grad = any(p.requires_grad for p in parents)
        if t.requires_grad:
            t._parents = parents
            t._vjp = vjp
        else:
            # Constant subgraph: drop the tape so backward never visits it.
            t._parents = ()
            t._vjp = None
        return t

    # -- basic introspection -------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.data.shape}, grad={self.requires_grad})"

    # -- backward ------------------------------------------------------

    def backward(self, seed: np.ndarray | float | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's .grad.

        `seed` defaults to 1 for scalar outputs and is required otherwise.
        Repeated calls accumulate, which is how per-document losses sum
        into a batch gradient.
        """
        if self.op == "leaf":
            raise GraphError("backward called before any forward computation")
        if not self.requires_grad:
            return
        if seed is None:
            if self.data.size != 1:
                raise ValueError("backward on a non-scalar requires an explicit seed")
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(seed, dtype=np.float64)
            if seed.shape != self.data.shape:
                seed = np.broadcast_to(seed, self.data.shape).copy()

        order = self._toposort()
        grads: dict[int, np.ndarray] = {id(self): seed}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is None:
                # A leaf that requires grad: park the accumulated gradient.
                if node.op == "leaf":
                    node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                held = grads.get(key)
                grads[key] = pg if held is None else held + pg

    def _toposort(self) -> list["Tensor"]:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        return order

    # -- operator sugar ------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            return _binary(self, other, np.add(self.data, other.data), "add",
                           lambda g: (_unbroadcast(g, self.data.shape),
                                      _unbroadcast(g, other.data.shape)))
        return _scalar_op(self, np.add(self.data, float(other)), "add_scalar", lambda g: g)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return _binary(self, other, np.subtract(self.data, other.data), "sub",
                           lambda g: (_unbroadcast(g, self.data.shape),
                                      _unbroadcast(-g, other.data.shape)))
        return _scalar_op(self, np.subtract(self.data, float(other)), "sub_scalar", lambda g: g)

    def __rsub__(self, other):
        return _scalar_op(self, np.subtract(float(other), self.data), "rsub_scalar",
                          lambda g: -g)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return _binary(self, other, np.multiply(self.data, other.data), "mul",
                           lambda g: (_unbroadcast(g * other.data, self.data.shape),
                                      _unbroadcast(g * self.data, other.data.shape)))
        f = float(other)
        return _scalar_op(self, np.multiply(self.data, f), "mul_scalar", lambda g: g * f)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return _binary(self, other, np.true_divide(self.data, other.data), "div",
                           lambda g: (_unbroadcast(g / other.data, self.data.shape),
                                      _unbroadcast(-g * self.data / (other.data * other.data),
                                                   other.data.shape)))
        f = float(other)
        return _scalar_op(self, np.true_divide(self.data, f), "div_scalar", lambda g: g / f)

    def __rtruediv__(self, other):
        f = float(other)
        return _scalar_op(self, np.true_divide(f, self.data), "rdiv_scalar",
                          lambda g: -g * f / (self.data * self.data))

    def __neg__(self):
        return _scalar_op(self, np.negative(self.data), "neg", lambda g: -g)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return gather(self, idx)

    # -- reductions and shape ------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = np.sum(self.data, axis=axis, keepdims=keepdims)
        shape = self.data.shape

        def vjp(g):
            gg = g
            if not keepdims and axis is not None:
                gg = np.expand_dims(gg, axis)
            return (np.broadcast_to(gg, shape).copy(),)

        return Tensor._result(np.asarray(out), "sum", (self,), vjp)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = np.mean(self.data, axis=axis, keepdims=keepdims)
        shape = self.data.shape
        n = self.data.size if axis is None else shape[axis]

        def vjp(g):
            gg = g
            if not keepdims and axis is not None:
                gg = np.expand_dims(gg, axis)
            return (np.broadcast_to(gg / n, shape).copy(),)

        return Tensor._result(np.asarray(out), "mean", (self,), vjp)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        return Tensor._result(np.reshape(self.data, shape), "reshape", (self,),
                              lambda g: (np.reshape(g, old),))

    def transpose(self) -> "Tensor":
        if self.data.ndim != 2:
            raise ValueError("transpose supports 2-D tensors only")
        return Tensor._result(self.data.T, "transpose", (self,), lambda g: (g.T,))

    @property
    def T(self) -> "Tensor":
        return self.transpose()


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the parent's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _binary(a: Tensor, b: Tensor, data, op, vjp) -> Tensor:
    return Tensor._result(data, op, (a, b), vjp)


def _scalar_op(a: Tensor, data, op, vjp_single) -> Tensor:
    return Tensor._result(data, op, (a,), lambda g: (vjp_single(g),))


def constant(x) -> Tensor:
    """Wrap an array as a non-differentiable leaf."""
    if isinstance(x, Tensor):
        return x.detach()
    return Tensor(x)


def parameter(x) -> Tensor:
    return Tensor(x, requires_grad=True)


# -- primitive library -------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    data = np.matmul(a.data, b.data)
    an, bn = a.data.ndim, b.data.ndim

    def vjp(g):
        if an == 2 and bn == 2:
            return (g @ b.data.T, a.data.T @ g)
        if bn == 1:
            # (..., k) @ (k,) -> (...): vector on the right.
            ga = g[..., None] * b.data
            gb = np.sum(a.data * g[..., None], axis=tuple(range(an - 1)))
            return (ga, gb)
        if an == 1 and bn == 2:
            return (g @ b.data.T, np.outer(a.data, g))
        raise NotImplementedError(f"matmul backward for ndim {an} @ {bn}")

    return Tensor._result(data, "matmul", (a, b), vjp)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _scalar_op(x, y, "tanh", lambda g: g * (1.0 - y * y))


def arctanh(x: Tensor) -> Tensor:
    """arctanh with the kernel clamp; straight-through gradient at the clamp."""
    clipped = np.clip(x.data, 0.0, 1.0 - geometry.ATANH_EPS)
    y = np.arctanh(clipped)
    return _scalar_op(x, y, "arctanh", lambda g: g / (1.0 - clipped * clipped))


def sqrt(x: Tensor) -> Tensor:
    y = np.sqrt(x.data)
    return _scalar_op(x, y, "sqrt", lambda g: g * 0.5 / np.maximum(y, geometry.MIN_NORM))


def maximum(x: Tensor, floor: float) -> Tensor:
    """Elementwise max with a constant; gradient passes where x wins."""
    f = float(floor)
    y = np.maximum(x.data, f)
    mask = x.data > f
    return _scalar_op(x, y, "maximum", lambda g: g * mask)


def relu(x: Tensor) -> Tensor:
    y = np.maximum(x.data, 0.0)
    mask = x.data > 0.0
    return _scalar_op(x, y, "relu", lambda g: g * mask)


def norm_lastdim(x: Tensor) -> Tensor:
    """Euclidean norm along the last axis, keepdims; zero-safe backward."""
    y = np.sqrt(np.sum(x.data * x.data, axis=-1, keepdims=True))
    safe = np.maximum(y, geometry.MIN_NORM)
    return _scalar_op(x, y, "norm", lambda g: g * x.data / safe)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def vjp(g):
        inner = np.sum(g * y, axis=axis, keepdims=True)
        return (y * (g - inner),)

    return Tensor._result(y, "softmax", (x,), vjp)


def concat(parts: list[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ValueError("concat of zero tensors")
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._result(data, "concat", tuple(parts), vjp)


def gather(x: Tensor, idx) -> Tensor:
    """Row/element selection with scatter-add backward."""
    data = x.data[idx]
    if isinstance(data, np.ndarray) and data.base is not None:
        data = data.copy()
    shape = x.data.shape

    def vjp(g):
        z = np.zeros(shape, dtype=np.float64)
        np.add.at(z, idx, g)
        return (z,)

    return Tensor._result(np.asarray(data), "gather", (x,), vjp)


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None, window: int) -> Tensor:
    """Valid 1-D convolution over a (M, d) sequence, stride 1.

    `weight` has shape (out, window*d): each output row sees the window's
    tokens concatenated. Returns (M - window + 1, out).
    """
    m, d = x.data.shape
    rows = m - window + 1
    if rows < 1:
        raise ValueError(f"window {window} longer than sequence of {m} tokens")
    win = np.concatenate([x.data[i:i + rows] for i in range(window)], axis=1)
    out = win @ weight.data.T
    if bias is not None:
        out = out + bias.data

    def vjp(g):
        dwin = g @ weight.data
        dx = np.zeros((m, d), dtype=np.float64)
        for i in range(window):
            dx[i:i + rows] += dwin[:, i * d:(i + 1) * d]
        dw = g.T @ win
        if bias is None:
            return (dx, dw)
        return (dx, dw, g.sum(axis=0))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._result(out, "conv1d", parents, vjp)


def ball_guard(x: Tensor, c: float) -> Tensor:
    """Graph version of the rounding-escape projection; straight-through.

    The guard only fires when a result rounds onto/past the ball boundary,
    which well-conditioned training never reaches, so the backward treats
    it as identity rather than differentiating the rescale.
    """
    data = geometry.ball_guard(x.data, c)
    return _scalar_op(x, data, "ball_guard", lambda g: g)
