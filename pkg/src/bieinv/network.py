"""Residual network shared by the source approximator and the solution
generator, plus the affine discriminator.

Architecture: scalar output y = w_out . h2 + b_out where h2 is produced by
two residual blocks h_i = act(B_i act(A_i h + a_i) + c_i) + h applied to the
activated input embedding act(w_in x + b_in), with act(x) = max(x^3, 0).

Parameters live in one flat float64 vector (layout in `_core_py`); named
views are exposed for inspection and serialization. The heavy numeric entry
points dispatch to the selected backend.
"""

import numpy as np

from . import _core_py
from ._backend import core
from .errors import ContractViolation, DataError

DEFAULT_WIDTH = 10


class NetworkParams:
    """Flat parameter vector with named array views (views share memory)."""

    def __init__(self, theta, width, dim):
        theta = np.ascontiguousarray(theta, dtype=float)
        expected = _core_py.param_count(width, dim)
        if theta.shape != (expected,):
            raise ContractViolation(
                f"parameter vector for width {width}, dim {dim} must have "
                f"length {expected}, got shape {theta.shape}")
        self.theta = theta
        self.width = width
        self.dim = dim
        self.views = _core_py.unpack(theta, width, dim)

    def copy(self):
        return NetworkParams(self.theta.copy(), self.width, self.dim)

    def __len__(self):
        return len(self.theta)


class DiscriminatorParams:
    """Single affine layer over a feature vector of residual statistics."""

    def __init__(self, w, b):
        self.w = np.ascontiguousarray(w, dtype=float)
        self.b = np.ascontiguousarray(np.atleast_1d(b), dtype=float)
        if self.w.ndim != 1 or self.b.shape != (1,):
            raise ContractViolation("discriminator needs a weight vector and a scalar bias")

    @classmethod
    def zeros(cls, k):
        return cls(np.zeros(k), np.zeros(1))

    def score(self, feats):
        return float(self.w @ feats + self.b[0])

    def copy(self):
        return DiscriminatorParams(self.w.copy(), self.b.copy())


def param_count(width, dim):
    return _core_py.param_count(width, dim)


def init(seed, width=DEFAULT_WIDTH, dim=2):
    """Deterministic uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization."""
    if width < 1:
        raise ContractViolation("width must be >= 1")
    return init_from_rng(np.random.default_rng(seed), width, dim)


def init_from_rng(rng, width=DEFAULT_WIDTH, dim=2):
    m, d = width, dim
    p = NetworkParams(np.zeros(param_count(m, d)), m, d)
    v = p.views

    def fill(name, fan_in):
        s = 1.0 / np.sqrt(fan_in)
        v[name][...] = rng.uniform(-s, s, size=v[name].shape)

    fill("w_in", d)
    fill("b_in", d)
    for k in (1, 2):
        fill(f"A{k}", m)
        fill(f"a{k}", m)
        fill(f"B{k}", m)
        fill(f"c{k}", m)
    fill("w_out", m)
    fill("b_out", m)
    return p


def activation(x):
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0, x * x * x, 0.0)
    return float(out) if out.ndim == 0 else out


def activation_prime(x):
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0, 3.0 * x * x, 0.0)
    return float(out) if out.ndim == 0 else out


def _as_points(X, dim):
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    if X.ndim != 2 or X.shape[1] != dim:
        raise ContractViolation(f"points must have shape [n, {dim}], got {X.shape}")
    return X


def forward(p, X):
    """Network values at the rows of X (scalar per row)."""
    return core.forward(p.theta, p.width, p.dim, _as_points(X, p.dim))


def forward_cache(p, X):
    return core.forward_cache(p.theta, p.width, p.dim, _as_points(X, p.dim))


def backward(p, X, C, ybar):
    """Parameter gradient of sum(ybar * y) given the cache of forward_cache."""
    return core.backward(p.theta, p.width, p.dim, _as_points(X, p.dim),
                         np.ascontiguousarray(C), np.ascontiguousarray(ybar, dtype=float))


def forward_grad(p, X):
    """Values and spatial jacobian [n, d] in one pass."""
    return core.forward_grad(p.theta, p.width, p.dim, _as_points(X, p.dim))


def forward_grad_cache(p, X):
    return core.forward_grad_cache(p.theta, p.width, p.dim, _as_points(X, p.dim))


def fused_backward(p, X, C, T, ybar, Jbar):
    """Parameter gradient of sum(ybar * y) + sum(Jbar * J)."""
    return core.fused_backward(
        p.theta, p.width, p.dim, _as_points(X, p.dim),
        np.ascontiguousarray(C), np.ascontiguousarray(T),
        np.ascontiguousarray(ybar, dtype=float),
        np.ascontiguousarray(np.atleast_2d(Jbar), dtype=float))


def to_snapshot(p):
    """Flat key-value text: one line per layer, row-major repr values."""
    lines = [f"width {p.width}", f"dim {p.dim}"]
    for name in _core_py.KEYS:
        vals = " ".join(repr(float(v)) for v in p.views[name].ravel())
        lines.append(f"{name} {vals}")
    return "\n".join(lines) + "\n"


def from_snapshot(text):
    fields = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        fields[parts[0]] = parts[1:]
    for key in ("width", "dim"):
        if key not in fields:
            raise DataError(f"snapshot is missing the {key} header")
    m = int(fields["width"][0])
    d = int(fields["dim"][0])
    p = NetworkParams(np.zeros(param_count(m, d)), m, d)
    for name in _core_py.KEYS:
        if name not in fields:
            raise DataError(f"snapshot is missing layer {name}")
        flat = np.array([float(v) for v in fields[name]])
        if flat.size != p.views[name].size:
            raise DataError(
                f"layer {name} has {flat.size} values, expected {p.views[name].size}")
        p.views[name][...] = flat.reshape(p.views[name].shape)
    return p


def save_snapshot(p, path):
    with open(path, "w") as fh:
        fh.write(to_snapshot(p))


def load_snapshot(path):
    with open(path) as fh:
        return from_snapshot(fh.read())
