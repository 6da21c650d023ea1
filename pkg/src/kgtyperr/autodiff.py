"""Minimal reverse-mode automatic differentiation over numpy arrays.

Graphs are built define-by-run: every operation records its parents and a
backward closure, and ``backward`` on a scalar loss walks the graph in
reverse topological order. Only the broadcasting the models actually use is
supported: same-shape elementwise ops, a trailing-axis row broadcast
((n, k) op (k,)), and Python scalars. Everything is float64.
"""

from __future__ import annotations

import numpy as np

# Floor applied inside log() so probability terms never produce -inf.
LOG_FLOOR = 1e-12

# When True every op validates that its output is finite and raises
# NonFiniteError naming the offending node. Cheap at the scales this
# engine is meant for.
CHECK_FINITE = True


class NonFiniteError(FloatingPointError):
    """Raised when a forward pass produces NaN or inf."""


class Tensor:
    """A node in the computation graph.

    ``data`` is always a float64 ndarray. Gradients accumulate into
    ``grad`` during backward and are zeroed lazily on the next backward
    pass through a fresh graph (graphs are rebuilt per batch, so nodes are
    not reused across passes).
    """

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, op="leaf", parents=(), backward=None):
        arr = np.asarray(data, dtype=np.float64)
        if CHECK_FINITE and not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"non-finite values in node '{op}'")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self.op = op
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.data.shape})"

    def item(self) -> float:
        return float(self.data)

    # Operator sugar; keeps model code readable.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, neg(_wrap(other)))

    def __rsub__(self, other):
        return add(_wrap(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __truediv__(self, other):
        return div(self, other)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False, op="const")


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True, op="param")


def _wrap(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return constant(x)


def _accumulate(node: Tensor, g: np.ndarray) -> None:
    if node.grad is None:
        node.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        node.grad += g


def _reduce_broadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient back down to the shape of a broadcast operand."""
    if g.shape == tuple(shape):
        return g
    # Only the (n, k) op (k,) row broadcast and scalars occur here.
    if shape == ():
        return np.sum(g)
    extra = g.ndim - len(shape)
    for _ in range(extra):
        g = g.sum(axis=0)
    return g


def _make(op, data, parents, backward):
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, op=op, parents=tuple(parents), backward=backward if req else None)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _reduce_broadcast(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _reduce_broadcast(g, b.data.shape))

    return _make("add", out_data, (a, b), backward)


def neg(a) -> Tensor:
    a = _wrap(a)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, -g)

    return _make("neg", -a.data, (a,), backward)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _reduce_broadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _reduce_broadcast(g * a.data, b.data.shape))

    return _make("mul", out_data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data / b.data

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _reduce_broadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _reduce_broadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make("div", out_data, (a, b), backward)


# ---------------------------------------------------------------------------
# nonlinearities


def relu(a) -> Tensor:
    a = _wrap(a)
    mask = a.data > 0.0

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g * mask)

    return _make("relu", a.data * mask, (a,), backward)


def tanh(a) -> Tensor:
    a = _wrap(a)
    out_data = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g * (1.0 - out_data * out_data))

    return _make("tanh", out_data, (a,), backward)


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    x = a.data
    out_data = np.empty_like(x)
    pos = x >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_data[~pos] = ex / (1.0 + ex)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g * out_data * (1.0 - out_data))

    return _make("sigmoid", out_data, (a,), backward)


def log(a) -> Tensor:
    """Natural log clamped below at LOG_FLOOR; the gradient follows the clamp."""
    a = _wrap(a)
    clamped = np.maximum(a.data, LOG_FLOOR)
    inside = a.data > LOG_FLOOR

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g * inside / clamped)

    return _make("log", np.log(clamped), (a,), backward)


def logsigmoid(a) -> Tensor:
    """log(sigmoid(x)) in the overflow-safe form -softplus(-x)."""
    a = _wrap(a)
    x = a.data
    out_data = np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))
    sig = np.empty_like(x)
    pos = x >= 0
    sig[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    sig[~pos] = ex / (1.0 + ex)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g * (1.0 - sig))

    return _make("logsigmoid", out_data, (a,), backward)


def exp(a) -> Tensor:
    a = _wrap(a)
    out_data = np.exp(a.data)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g * out_data)

    return _make("exp", out_data, (a,), backward)


def sqrt(a) -> Tensor:
    a = _wrap(a)
    out_data = np.sqrt(a.data)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g * 0.5 / np.maximum(out_data, LOG_FLOOR))

    return _make("sqrt", out_data, (a,), backward)


# ---------------------------------------------------------------------------
# shape / reduction


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _make("matmul", out_data, (a, b), backward)


def gather_rows(table, indices) -> Tensor:
    """Row lookup into a 2-d table; the embedding-table primitive."""
    table = _wrap(table)
    idx = np.asarray(indices, dtype=np.intp)
    out_data = table.data[idx]

    def backward(g):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, idx, g)
            _accumulate(table, acc)

    return _make("gather_rows", out_data, (table,), backward)


def concat(tensors, axis=1) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                _accumulate(t, g[tuple(sl)])

    return _make("concat", out_data, tuple(tensors), backward)


def sum_all(a) -> Tensor:
    a = _wrap(a)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, np.broadcast_to(g, a.data.shape))

    return _make("sum", np.sum(a.data), (a,), backward)


def sum_axis(a, axis) -> Tensor:
    a = _wrap(a)
    out_data = np.sum(a.data, axis=axis)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape))

    return _make("sum_axis", out_data, (a,), backward)


def mean_all(a) -> Tensor:
    a = _wrap(a)
    n = a.data.size

    def backward(g):
        if a.requires_grad:
            _accumulate(a, np.broadcast_to(g / n, a.data.shape))

    return _make("mean", np.mean(a.data), (a,), backward)


# ---------------------------------------------------------------------------
# backward pass


def _topo_order(root: Tensor):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            order.append(node)
        else:
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Reverse-accumulate d(loss)/d(node) into .grad for the whole graph."""
    if loss.data.shape != ():
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    order = _topo_order(loss)
    for node in order:
        node.grad = None
    loss.grad = np.array(1.0)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


class ParamStore:
    """Named parameter tensors with stable insertion ordering.

    Ordering is preserved on every iteration so checkpoints written from
    equal stores are byte-identical.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = parameter(np.array(data, dtype=np.float64))
        self._params[name] = t
        return t

    def adopt(self, name: str, tensor: Tensor) -> Tensor:
        """Register an existing tensor under this store (shared storage)."""
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def snapshot(self) -> dict[str, np.ndarray]:
        """Copy of all parameter values; safe to share across threads."""
        return {k: v.data.copy() for k, v in self._params.items()}

    def load_snapshot(self, snap: dict[str, np.ndarray]) -> None:
        for k, v in snap.items():
            self._params[k].data = np.array(v, dtype=np.float64, copy=True)


def grad(loss: Tensor, store: ParamStore) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss for every parameter in the store.

    Parameters the loss does not reach get zero gradients, which keeps
    optimizer bookkeeping uniform.
    """
    backward(loss)
    out = {}
    for name, p in store.items():
        out[name] = p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
    return out


def flatten_grads(grads: dict[str, np.ndarray], order: list[str]) -> np.ndarray:
    return np.concatenate([np.ravel(grads[name]) for name in order]) if order else np.zeros(0)


def finite_diff_check(loss_fn, store: ParamStore, step: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central differences.

    ``loss_fn`` must be a pure function of the store's current values and
    return a scalar Tensor. The relative error denominator is
    max(1, |analytic|) per coordinate.
    """
    global CHECK_FINITE
    analytic = grad(loss_fn(), store)
    worst = 0.0
    saved_check = CHECK_FINITE
    CHECK_FINITE = False  # pure value sweep; NaN would surface in the comparison anyway
    try:
        for name, p in store.items():
            flat = p.data.reshape(-1)
            gflat = analytic[name].reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                up = loss_fn().item()
                flat[i] = orig - step
                down = loss_fn().item()
                flat[i] = orig
                numeric = (up - down) / (2.0 * step)
                err = abs(numeric - gflat[i]) / max(1.0, abs(gflat[i]))
                if err > worst:
                    worst = err
    finally:
        CHECK_FINITE = saved_check
    return worst
