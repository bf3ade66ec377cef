"""Dense float64 matrices and a small reverse-mode gradient tape.

Only the handful of operations needed to differentiate the NKDCD objective are
provided: affine layers, leakyReLU, add/subtract, squared norm, matmul (with an
optional transposed right operand), row gathering, column concatenation and
reshape.  Values are plain 2-D ``numpy.ndarray`` objects of dtype float64.

Example
-------
>>> w = Node(np.array([[3.0]]), requires_grad=True)
>>> loss = squared_norm(w)
>>> grads = backward(loss)
>>> float(grads[w][0, 0])
6.0
"""
from __future__ import annotations

from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

LEAKY_SLOPE = 0.1


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class ContractError(RuntimeError):
    """Raised when an operation's precondition is violated."""


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(1, -1)
    elif m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got array with shape {m.shape}")
    return m


# ---------------------------------------------------------------------------
# plain-array numerics


def affine_forward(x, w, b) -> np.ndarray:
    """Return ``x @ w + b`` with ``b`` broadcast over rows."""
    x, w, b = as_matrix(x), as_matrix(w), as_matrix(b)
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"affine: x has shape {x.shape} but w has shape {w.shape}")
    if b.shape not in ((1, w.shape[1]), (x.shape[0], w.shape[1])):
        raise ShapeError(f"affine: bias shape {b.shape} does not broadcast to "
                         f"({x.shape[0]}, {w.shape[1]})")
    return x @ w + b


def leaky_relu(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return np.where(y >= 0.0, y, LEAKY_SLOPE * y)


def leaky_relu_grad(y) -> np.ndarray:
    # subgradient at 0 taken from the identity branch
    y = np.asarray(y, dtype=np.float64)
    return np.where(y >= 0.0, 1.0, LEAKY_SLOPE)


# ---------------------------------------------------------------------------
# tape


class Node:
    """A value in the computation graph.

    Leaves created with ``requires_grad=True`` are parameters; ``backward``
    returns their gradients keyed by the node object itself.
    """

    __slots__ = ("value", "parents", "op", "_backward", "requires_grad", "grad")

    def __init__(self, value, parents: Sequence["Node"] = (), op: str = "leaf",
                 backward_fn: Optional[Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]] = None,
                 requires_grad: bool = False):
        self.value = as_matrix(value) if op == "leaf" else value
        self.parents = tuple(parents)
        self.op = op
        self._backward = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(op={self.op!r}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return subtract(self, other)


def _lift(a) -> Node:
    return a if isinstance(a, Node) else Node(a)


def affine(x, w, b=None) -> Node:
    x, w = _lift(x), _lift(w)
    if b is None:
        return matmul(x, w)
    b = _lift(b)
    out = affine_forward(x.value, w.value, b.value)
    xv, wv, bshape = x.value, w.value, b.value.shape

    def bw(g):
        gb = g.sum(axis=0, keepdims=True) if bshape[0] == 1 else g
        return g @ wv.T, xv.T @ g, gb

    return Node(out, (x, w, b), "affine", bw)


def leaky(y) -> Node:
    y = _lift(y)
    yv = y.value
    slope = leaky_relu_grad(yv)
    return Node(yv * slope, (y,), "leaky_relu", lambda g: (g * slope,))


def add(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    _same_shape("add", a, b)
    return Node(a.value + b.value, (a, b), "add", lambda g: (g, g))


def subtract(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    _same_shape("subtract", a, b)
    return Node(a.value - b.value, (a, b), "subtract", lambda g: (g, -g))


def scale(a, c: float) -> Node:
    a = _lift(a)
    return Node(a.value * c, (a,), "scale", lambda g: (g * c,))


def squared_norm(a) -> Node:
    """Sum of squared entries, returned as a 1x1 node."""
    a = _lift(a)
    av = a.value
    out = np.array([[np.sum(av * av)]])
    return Node(out, (a,), "squared_norm", lambda g: (2.0 * g[0, 0] * av,))


def matmul(a, b, transpose_b: bool = False) -> Node:
    a, b = _lift(a), _lift(b)
    av, bv = a.value, b.value
    inner_b = bv.shape[1] if transpose_b else bv.shape[0]
    if av.shape[1] != inner_b:
        raise ShapeError(f"matmul: left operand {av.shape} vs right operand {bv.shape}"
                         f"{' (transposed)' if transpose_b else ''}")
    if transpose_b:
        out = av @ bv.T
        return Node(out, (a, b), "matmul", lambda g: (g @ bv, g.T @ av))
    out = av @ bv
    return Node(out, (a, b), "matmul", lambda g: (g @ bv.T, av.T @ g))


def take_rows(a, index) -> Node:
    a = _lift(a)
    idx = np.asarray(index, dtype=np.intp)
    av = a.value
    nrows = av.shape[0]

    def bw(g):
        out = np.zeros((nrows, g.shape[1]))
        np.add.at(out, idx, g)
        return (out,)

    return Node(av[idx], (a,), "slice", bw)


def concat_cols(parts: Sequence) -> Node:
    parts = [_lift(p) for p in parts]
    rows = {p.value.shape[0] for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat: row counts differ {[p.value.shape for p in parts]}")
    widths = [p.value.shape[1] for p in parts]
    cuts = np.cumsum(widths)[:-1]
    out = np.concatenate([p.value for p in parts], axis=1)
    return Node(out, parts, "concat", lambda g: tuple(np.split(g, cuts, axis=1)))


def reshape(a, rows: int, cols: int) -> Node:
    a = _lift(a)
    shape = a.value.shape
    if shape[0] * shape[1] != rows * cols:
        raise ShapeError(f"reshape: cannot view {shape} as ({rows}, {cols})")
    return Node(a.value.reshape(rows, cols), (a,), "reshape",
                lambda g: (g.reshape(shape),))


def sum_nodes(nodes: Sequence[Node]) -> Node:
    total = nodes[0]
    for n in nodes[1:]:
        total = add(total, n)
    return total


def _same_shape(name, a, b):
    if a.value.shape != b.value.shape:
        raise ShapeError(f"{name}: operand shapes {a.value.shape} and {b.value.shape} differ")


def _topological(root: Node) -> List[Node]:
    order: List[Node] = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Node, params: Sequence[Node] = ()) -> Dict[Node, np.ndarray]:
    """Reverse-mode sweep from a scalar node.

    Returns a dict mapping every parameter leaf reachable from ``loss`` to
    d(loss)/d(parameter).  Anything listed in ``params`` that the loss does not
    depend on is reported with an all-zero gradient.
    """
    if loss.value.shape != (1, 1):
        raise ContractError(f"backward needs a scalar (1x1) loss, got shape {loss.value.shape}")
    order = _topological(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones((1, 1))
    grads: Dict[Node, np.ndarray] = {}
    for node in reversed(order):
        g = node.grad
        if node.op == "leaf":
            if g is None:
                g = np.zeros_like(node.value)
            grads[node] = g
            continue
        if g is None:
            continue
        for parent, pg in zip(node.parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            parent.grad = pg if parent.grad is None else parent.grad + pg
        node.grad = None
    for p in params:
        if p not in grads:
            grads[p] = np.zeros_like(p.value)
    return grads


def numeric_gradient(f: Callable[[], float], param: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central finite differences of ``f`` with respect to ``param`` (mutated in place)."""
    out = np.zeros_like(param)
    it = np.nditer(param, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = param[i]
        param[i] = orig + step
        fp = f()
        param[i] = orig - step
        fm = f()
        param[i] = orig
        out[i] = (fp - fm) / (2.0 * step)
    return out
