"""Reverse-mode differentiation over a small fixed set of matrix primitives.

Every value is a 2-D float64 matrix.  Building an expression eagerly records
the computation; ``backward`` walks the record in reverse topological order,
``replay`` re-executes it in place (used by the finite-difference checker).
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operands with incompatible shapes, or a non-matrix value."""


PRIMITIVES = frozenset(
    {"matmul", "add", "sigmoid", "tanh", "relu", "hadamard", "concat", "slice", "sum", "abs"}
)


class Tensor:
    """One node of the recorded computation.

    Leaves (``op is None``) hold data only; interior nodes remember their
    primitive and parents.  ``trainable`` marks optimizable leaves.
    """

    __slots__ = ("data", "op", "parents", "extra", "grad", "name", "trainable")

    def __init__(self, data, op=None, parents=(), extra=None, name=None, trainable=False):
        arr = data if isinstance(data, np.ndarray) and data.dtype == np.float64 else np.asarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D matrices, got shape {arr.shape} for {name or op or 'leaf'}")
        if arr.size and not np.isfinite(arr.sum()):
            raise FloatingPointError(f"non-finite values in {name or op or 'leaf'}")
        self.data = arr
        self.op = op
        self.parents = parents
        self.extra = extra
        self.grad = None
        self.name = name
        self.trainable = trainable

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def label(self) -> str:
        return self.name or self.op or "leaf"

    def __repr__(self) -> str:
        return f"Tensor({self.label()}, shape={self.shape})"


def constant(values, name: str | None = None) -> Tensor:
    return Tensor(values, name=name)


def parameter(values, name: str) -> Tensor:
    return Tensor(np.array(values, dtype=np.float64), name=name, trainable=True)


# ---------------------------------------------------------------------------
# primitive forward kernels, shared by op constructors and replay


def _sigmoid_kernel(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


def _apply(op: str, datas: list[np.ndarray], extra) -> np.ndarray:
    if op == "matmul":
        return datas[0] @ datas[1]
    if op == "add":
        return datas[0] + datas[1]
    if op == "hadamard":
        return datas[0] * datas[1]
    if op == "sigmoid":
        return _sigmoid_kernel(datas[0])
    if op == "tanh":
        return np.tanh(datas[0])
    if op == "relu":
        return np.maximum(datas[0], 0.0)
    if op == "concat":
        return np.concatenate(datas, axis=extra)
    if op == "slice":
        r0, r1, c0, c1 = extra
        return datas[0][r0:r1, c0:c1].copy()
    if op == "sum":
        return np.array([[datas[0].sum()]])
    if op == "abs":
        return np.abs(datas[0])
    raise ValueError(f"unknown primitive {op!r}")


def _make(op: str, parents: tuple[Tensor, ...], extra=None) -> Tensor:
    return Tensor(_apply(op, [p.data for p in parents], extra), op=op, parents=parents, extra=extra)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        out = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        out = None
    if out is None or (out != a.shape and out != b.shape):
        raise ShapeError(f"{op}: cannot combine {a.shape} ({a.label()}) with {b.shape} ({b.label()})")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeError(f"matmul: cannot multiply {a.shape} ({a.label()}) by {b.shape} ({b.label()})")
    return _make("matmul", (a, b))


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    return _make("add", (a, b))


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "hadamard")
    return _make("hadamard", (a, b))


def sigmoid(x: Tensor) -> Tensor:
    return _make("sigmoid", (x,))


def tanh(x: Tensor) -> Tensor:
    return _make("tanh", (x,))


def relu(x: Tensor) -> Tensor:
    return _make("relu", (x,))


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if axis not in (0, 1):
        raise ShapeError(f"concat: axis must be 0 or 1, got {axis}")
    if not parts:
        raise ShapeError("concat: no operands")
    other = 1 - axis
    ref = parts[0].shape[other]
    for p in parts[1:]:
        if p.shape[other] != ref:
            raise ShapeError(f"concat: mismatched shapes {[p.shape for p in parts]} along axis {axis}")
    return _make("concat", tuple(parts), extra=axis)


def slice_block(x: Tensor, r0: int, r1: int, c0: int | None = None, c1: int | None = None) -> Tensor:
    c0 = 0 if c0 is None else c0
    c1 = x.cols if c1 is None else c1
    if not (0 <= r0 < r1 <= x.rows and 0 <= c0 < c1 <= x.cols):
        raise ShapeError(f"slice: bounds [{r0}:{r1}, {c0}:{c1}] invalid for {x.shape} ({x.label()})")
    return _make("slice", (x,), extra=(r0, r1, c0, c1))


def sum_all(x: Tensor) -> Tensor:
    return _make("sum", (x,))


def absolute(x: Tensor) -> Tensor:
    return _make("abs", (x,))


# ---------------------------------------------------------------------------
# composed helpers (no new primitives, no new backward rules)


def scale(x: Tensor, s: float) -> Tensor:
    return hadamard(x, constant([[float(s)]]))


def neg(x: Tensor) -> Tensor:
    return scale(x, -1.0)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, neg(b))


def mean_all(x: Tensor) -> Tensor:
    return scale(sum_all(x), 1.0 / x.data.size)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add(matmul(x, w), b)


# ---------------------------------------------------------------------------
# traversal


def topo_order(root: Tensor) -> list[Tensor]:
    """Parents-before-children ordering of every node reachable from root."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    for axis in (0, 1):
        if shape[axis] == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _add_grad(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.array(g)
    else:
        t.grad = t.grad + g


def backward(loss: Tensor, params: Iterable[Tensor] = ()) -> None:
    """Accumulate d(loss)/d(node) into .grad for every node reachable from loss.

    Parameters listed in ``params`` but not reachable get explicit zero grads.
    """
    if loss.shape != (1, 1):
        raise ShapeError(f"loss must be scalar (1, 1), got {loss.shape}")
    params = list(params)
    order = topo_order(loss)
    for node in order:
        node.grad = None
    for p in params:
        p.grad = None
    loss.grad = np.ones((1, 1))
    for node in reversed(order):
        g = node.grad
        if node.op is None or g is None:
            continue
        op = node.op
        if op == "matmul":
            a, b = node.parents
            _add_grad(a, g @ b.data.T)
            _add_grad(b, a.data.T @ g)
        elif op == "add":
            a, b = node.parents
            _add_grad(a, _unbroadcast(g, a.shape))
            _add_grad(b, _unbroadcast(g, b.shape))
        elif op == "hadamard":
            a, b = node.parents
            _add_grad(a, _unbroadcast(g * b.data, a.shape))
            _add_grad(b, _unbroadcast(g * a.data, b.shape))
        elif op == "sigmoid":
            (x,) = node.parents
            _add_grad(x, g * node.data * (1.0 - node.data))
        elif op == "tanh":
            (x,) = node.parents
            _add_grad(x, g * (1.0 - node.data * node.data))
        elif op == "relu":
            (x,) = node.parents
            _add_grad(x, g * (x.data > 0.0))
        elif op == "concat":
            axis = node.extra
            offset = 0
            for p in node.parents:
                span = p.shape[axis]
                piece = g[offset:offset + span, :] if axis == 0 else g[:, offset:offset + span]
                _add_grad(p, piece)
                offset += span
        elif op == "slice":
            (x,) = node.parents
            r0, r1, c0, c1 = node.extra
            full = np.zeros_like(x.data)
            full[r0:r1, c0:c1] = g
            _add_grad(x, full)
        elif op == "sum":
            (x,) = node.parents
            _add_grad(x, np.full_like(x.data, g[0, 0]))
        elif op == "abs":
            (x,) = node.parents
            _add_grad(x, g * np.sign(x.data))
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)


def replay(order: Sequence[Tensor]) -> None:
    """Recompute every interior node of a recorded graph in place."""
    for node in order:
        if node.op is not None:
            node.data = _apply(node.op, [p.data for p in node.parents], node.extra)


def finite_diff_check(loss: Tensor, params: Sequence[Tensor] | None = None, epsilon: float = 1e-4) -> float:
    """Worst relative disagreement between analytic and central-difference grads.

    Perturbs each parameter element by +/-epsilon and replays the recorded
    graph, so any masks baked in as constants stay frozen.  Restores all
    state before returning.
    """
    if not (1e-6 <= epsilon <= 1e-3):
        raise ValueError(f"epsilon must lie in [1e-6, 1e-3], got {epsilon}")
    if loss.shape != (1, 1):
        raise ShapeError(f"loss must be scalar (1, 1), got {loss.shape}")
    order = topo_order(loss)
    if params is None:
        params = [n for n in order if n.trainable]
    backward(loss, params)
    analytic = [p.grad.reshape(-1).copy() for p in params]
    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + epsilon
            replay(order)
            hi = loss.data[0, 0]
            flat[i] = saved - epsilon
            replay(order)
            lo = loss.data[0, 0]
            flat[i] = saved
            numeric = (hi - lo) / (2.0 * epsilon)
            rel = abs(numeric - ana[i]) / max(abs(ana[i]), abs(numeric), 1e-8)
            if rel > worst:
                worst = rel
    replay(order)
    return worst
