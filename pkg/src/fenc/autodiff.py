"""Reverse-mode automatic differentiation over float64 numpy arrays.

A ``Tape`` records every primitive operation as an append-only node list, so
parents always precede children and the backward pass is a single reverse
sweep. ``Var`` is a lightweight handle (tape + node index) with operator
overloading; values are plain ``np.ndarray`` with dtype float64.

Gradients only flow into nodes created with ``Tape.leaf``; ``Tape.constant``
creates nodes the backward pass treats as fixed.
"""

from __future__ import annotations

import numpy as np

from .errors import FencError, ShapeError


def _as_f64(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class _Node:
    __slots__ = ("value", "parents", "backward", "name")

    def __init__(self, value, parents=(), backward=None, name=None):
        self.value = value
        self.parents = parents
        self.backward = backward  # grad_out -> tuple of parent grads
        self.name = name


class Var:
    """Handle to one node on a tape. Supports numpy-style arithmetic."""

    __slots__ = ("tape", "index")

    def __init__(self, tape: "Tape", index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    @property
    def shape(self):
        return self.value.shape

    def _lift(self, other) -> "Var":
        if isinstance(other, Var):
            return other
        return self.tape.constant(other)

    def __add__(self, other):
        other = self._lift(other)
        a, b = self.value, other.value
        out = a + b
        sa, sb = a.shape, b.shape

        def backward(g):
            return _unbroadcast(g, sa), _unbroadcast(g, sb)

        return self.tape._record(out, (self.index, other.index), backward)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        a, b = self.value, other.value
        out = a - b
        sa, sb = a.shape, b.shape

        def backward(g):
            return _unbroadcast(g, sa), _unbroadcast(-g, sb)

        return self.tape._record(out, (self.index, other.index), backward)

    def __rsub__(self, other):
        return self._lift(other).__sub__(self)

    def __mul__(self, other):
        other = self._lift(other)
        a, b = self.value, other.value
        out = a * b
        sa, sb = a.shape, b.shape

        def backward(g):
            return _unbroadcast(g * b, sa), _unbroadcast(g * a, sb)

        return self.tape._record(out, (self.index, other.index), backward)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __matmul__(self, other):
        other = self._lift(other)
        a, b = self.value, other.value
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError("matmul", f"({a.shape[0]}, n) @ (n, m)",
                             f"{a.shape} @ {b.shape}")
        out = a @ b

        def backward(g):
            return g @ b.T, a.T @ g

        return self.tape._record(out, (self.index, other.index), backward)

    def __getitem__(self, rows):
        """Row slice along axis 0."""
        val = self.value
        out = val[rows]
        shape = val.shape

        def backward(g):
            full = np.zeros(shape)
            full[rows] = g
            return (full,)

        return self.tape._record(out, (self.index,), backward)

    def reshape(self, *shape) -> "Var":
        val = self.value
        out = val.reshape(*shape)
        orig = val.shape

        def backward(g):
            return (g.reshape(orig),)

        return self.tape._record(out, (self.index,), backward)


class Tape:
    """Append-only record of primitive operations for one backward pass."""

    __slots__ = ("nodes", "_leaves")

    def __init__(self):
        self.nodes: list[_Node] = []
        self._leaves: dict[str, int] = {}

    def _record(self, value, parents=(), backward=None, name=None) -> Var:
        self.nodes.append(_Node(_as_f64(value), parents, backward, name))
        return Var(self, len(self.nodes) - 1)

    def leaf(self, value, name: str) -> Var:
        """Register a named differentiable leaf. Repeated names share a node."""
        if name in self._leaves:
            return Var(self, self._leaves[name])
        var = self._record(value, (), None, name)
        self._leaves[name] = var.index
        return var

    def constant(self, value) -> Var:
        return self._record(value, (), None, None)


def relu(x: Var) -> Var:
    val = x.value
    out = np.maximum(val, 0.0)

    def backward(g):
        return (g * (val > 0.0),)

    return x.tape._record(out, (x.index,), backward)


def tanh(x: Var) -> Var:
    out = np.tanh(x.value)

    def backward(g):
        return (g * (1.0 - out * out),)

    return x.tape._record(out, (x.index,), backward)


def square(x: Var) -> Var:
    val = x.value

    def backward(g):
        return (g * (2.0 * val),)

    return x.tape._record(val * val, (x.index,), backward)


def vsum(x: Var, axis=None, keepdims=False) -> Var:
    val = x.value
    out = val.sum(axis=axis, keepdims=keepdims)
    shape = val.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return x.tape._record(out, (x.index,), backward)


def vmean(x: Var, axis=None, keepdims=False) -> Var:
    val = x.value
    out = val.mean(axis=axis, keepdims=keepdims)
    shape = val.shape
    count = val.size if axis is None else shape[axis]

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape) / count,)

    return x.tape._record(out, (x.index,), backward)


def stack_heads(parts: list[Var]) -> Var:
    """Stack [m, d] vars into [m, k, d] along a new head axis."""
    tape = parts[0].tape
    vals = [p.value for p in parts]
    out = np.stack(vals, axis=1)

    def backward(g):
        return tuple(g[:, i, :] for i in range(len(parts)))

    return tape._record(out, tuple(p.index for p in parts), backward)


def backward(tape: Tape, loss: Var) -> dict[str, np.ndarray]:
    """Propagate d(loss)/d(node) to every reachable node; return leaf grads.

    The loss must be scalar. Nodes are visited in reverse insertion order
    exactly once, so parent gradients are fully accumulated before use.
    """
    if loss.value.shape != ():
        raise FencError(
            f"backward requires a scalar loss, got shape {loss.value.shape}")
    nodes = tape.nodes
    grads: list = [None] * len(nodes)
    grads[loss.index] = np.asarray(1.0)
    for i in range(loss.index, -1, -1):
        g = grads[i]
        if g is None:
            continue
        node = nodes[i]
        if node.backward is None:
            continue
        for parent, pg in zip(node.parents, node.backward(g)):
            if grads[parent] is None:
                grads[parent] = pg
            else:
                grads[parent] = grads[parent] + pg
    out = {}
    for name, idx in tape._leaves.items():
        if grads[idx] is not None:
            out[name] = np.asarray(grads[idx])
    return out
