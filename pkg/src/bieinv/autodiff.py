"""Reverse-mode differentiation on an explicit tape, and spatial gradients.

The training loop uses hand-derived adjoints in the numeric core for speed;
this module provides general differentiation for everything else and serves
as the independent oracle the core is checked against. Tape nodes carry
vector-jacobian closures and are visited exactly once, in reverse order, per
backward pass.
"""

import numpy as np

from . import network as _network
from ._core_py import KEYS
from .errors import ContractViolation, NumericError


def _unbroadcast(g, shape):
    g = np.asarray(g, dtype=float)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


class _Node:
    __slots__ = ("op", "value", "parents")

    def __init__(self, op, value, parents):
        self.op = op
        self.value = value
        self.parents = parents


class Tape:
    def __init__(self):
        self.nodes = []
        self.visits = None

    def emit(self, op, value, parents):
        value = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(value)):
            raise NumericError(f"non-finite value at node {len(self.nodes)} ({op})")
        self.nodes.append(_Node(op, value, parents))
        return Var(self, len(self.nodes) - 1)

    def leaf(self, value, name="leaf"):
        return self.emit(name, value, [])

    def backward(self, out_index):
        """Adjoints of node `out_index` w.r.t. every node (None if unreached)."""
        grads = [None] * len(self.nodes)
        grads[out_index] = np.ones_like(self.nodes[out_index].value)
        self.visits = [0] * len(self.nodes)
        for i in range(len(self.nodes) - 1, -1, -1):
            self.visits[i] += 1
            g = grads[i]
            if g is None or i > out_index:
                continue
            for pi, vjp in self.nodes[i].parents:
                c = vjp(g)
                grads[pi] = c if grads[pi] is None else grads[pi] + c
        return grads


def _val(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)


def _tape_of(a, b=None):
    for x in (a, b):
        if isinstance(x, Var):
            return x.tape
    raise ContractViolation("operation needs at least one tape variable")


class Var:
    """Handle to a tape node; supports the arithmetic the losses need."""

    __array_ufunc__ = None  # force NumPy to defer to our reflected operators

    def __init__(self, tape, index):
        self.tape = tape
        self.index = index

    @property
    def value(self):
        return self.tape.nodes[self.index].value

    @property
    def shape(self):
        return self.value.shape

    def _binary(self, other, op, out, vjp_self, vjp_other):
        parents = [(self.index, vjp_self)]
        if isinstance(other, Var):
            if other.tape is not self.tape:
                raise ContractViolation("operands live on different tapes")
            parents.append((other.index, vjp_other))
        return self.tape.emit(op, out, parents)

    def __add__(self, other):
        av, bv = self.value, _val(other)
        return self._binary(other, "add", av + bv,
                            lambda g: _unbroadcast(g, av.shape),
                            lambda g: _unbroadcast(g, bv.shape))

    __radd__ = __add__

    def __sub__(self, other):
        av, bv = self.value, _val(other)
        return self._binary(other, "sub", av - bv,
                            lambda g: _unbroadcast(g, av.shape),
                            lambda g: _unbroadcast(-g, bv.shape))

    def __rsub__(self, other):
        av, bv = self.value, _val(other)
        return self._binary(None, "rsub", bv - av,
                            lambda g: _unbroadcast(-g, av.shape), None)

    def __mul__(self, other):
        av, bv = self.value, _val(other)
        return self._binary(other, "mul", av * bv,
                            lambda g: _unbroadcast(g * bv, av.shape),
                            lambda g: _unbroadcast(g * av, bv.shape))

    __rmul__ = __mul__

    def __neg__(self):
        av = self.value
        return self._binary(None, "neg", -av, lambda g: -g, None)

    def __truediv__(self, other):
        av, bv = self.value, _val(other)
        return self._binary(other, "div", av / bv,
                            lambda g: _unbroadcast(g / bv, av.shape),
                            lambda g: _unbroadcast(-g * av / (bv * bv), bv.shape))

    def __pow__(self, n):
        if not isinstance(n, (int, float)):
            raise ContractViolation("only constant exponents are supported")
        av = self.value
        return self._binary(None, "pow", av**n,
                            lambda g: g * n * av**(n - 1), None)

    def __matmul__(self, other):
        av, bv = self.value, _val(other)
        return self._binary(other, "matmul", av @ bv,
                            lambda g: _mm_vjp_left(g, av, bv),
                            lambda g: _mm_vjp_right(g, av, bv))

    def __rmatmul__(self, other):
        av = _val(other)
        bv = self.value
        return self._binary(None, "rmatmul", av @ bv,
                            lambda g: _mm_vjp_right(g, av, bv), None)

    @property
    def T(self):
        av = self.value
        return self._binary(None, "transpose", av.T, lambda g: np.asarray(g).T, None)

    def sum(self):
        av = self.value
        return self._binary(None, "sum", av.sum(),
                            lambda g: np.full(av.shape, g), None)

    def mean(self):
        av = self.value
        return self._binary(None, "mean", av.mean(),
                            lambda g: np.full(av.shape, g / av.size), None)

    def abs(self):
        av = self.value
        return self._binary(None, "abs", np.abs(av),
                            lambda g: g * np.sign(av), None)


def _mm_vjp_left(g, av, bv):
    if av.ndim == 1 and bv.ndim == 1:
        return g * bv
    if av.ndim == 2 and bv.ndim == 1:
        return np.outer(g, bv)
    if av.ndim == 1 and bv.ndim == 2:
        return bv @ g
    return g @ bv.T


def _mm_vjp_right(g, av, bv):
    if av.ndim == 1 and bv.ndim == 1:
        return g * av
    if av.ndim == 2 and bv.ndim == 1:
        return av.T @ g
    if av.ndim == 1 and bv.ndim == 2:
        return np.outer(av, g)
    return av.T @ g


def cubic(v):
    """The network activation max(x^3, 0) as a tape op."""
    av = v.value
    out = np.where(av > 0, av * av * av, 0.0)
    return v._binary(None, "cubic", out,
                     lambda g: g * np.where(av > 0, 3.0 * av * av, 0.0), None)


def network_forward(pv, X):
    """The residual-network forward pass in tape ops (oracle for the core)."""
    X = np.asarray(X, dtype=float)
    h0 = cubic(X @ pv["w_in"].T + pv["b_in"])
    t1 = cubic(h0 @ pv["A1"].T + pv["a1"])
    h1 = cubic(t1 @ pv["B1"].T + pv["c1"]) + h0
    t2 = cubic(h1 @ pv["A2"].T + pv["a2"])
    h2 = cubic(t2 @ pv["B2"].T + pv["c2"]) + h1
    return h2 @ pv["w_out"] + pv["b_out"]


def value_and_grad(loss, params):
    """Loss value and exact reverse-mode gradient at `params`.

    `params` may be a NetworkParams (loss receives a dict of layer Vars and
    the gradient comes back as one vector aligned with the flat layout), a
    dict of arrays, or a single array.
    """
    tape = Tape()
    if isinstance(params, _network.NetworkParams):
        leaves = {k: tape.leaf(v.copy(), k) for k, v in params.views.items()}
        out = loss(leaves)
        grads = _leaf_grads(tape, out, [leaves[k] for k in KEYS])
        flat = np.concatenate([np.asarray(g).ravel() for g in grads])
        return _scalar_of(out), flat
    if isinstance(params, dict):
        leaves = {k: tape.leaf(np.asarray(v, dtype=float).copy(), k)
                  for k, v in params.items()}
        out = loss(leaves)
        names = list(leaves)
        grads = _leaf_grads(tape, out, [leaves[k] for k in names])
        return _scalar_of(out), dict(zip(names, grads))
    leaf = tape.leaf(np.asarray(params, dtype=float).copy())
    out = loss(leaf)
    grads = _leaf_grads(tape, out, [leaf])
    return _scalar_of(out), grads[0]


def _scalar_of(out):
    if isinstance(out, Var):
        v = out.value
        if v.ndim != 0 and v.size != 1:
            raise ContractViolation("loss must evaluate to a scalar")
        return float(v)
    return float(out)


def _leaf_grads(tape, out, leaf_vars):
    if isinstance(out, Var):
        all_grads = tape.backward(out.index)
        grads = [all_grads[v.index] if all_grads[v.index] is not None
                 else np.zeros_like(v.value) for v in leaf_vars]
    else:
        grads = [np.zeros_like(v.value) for v in leaf_vars]
    for v, g in zip(leaf_vars, grads):
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient at node {v.index}")
    return grads


def spatial_gradient(net, x):
    """d(net output)/dx_k at x; [d] for a single point, [n, d] for a batch."""
    single = np.asarray(x).ndim == 1
    _, J = _network.forward_grad(net, np.atleast_2d(np.asarray(x, dtype=float)))
    return J[0] if single else J
