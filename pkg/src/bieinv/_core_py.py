"""Reference NumPy implementation of the network numeric core.

Both backends (this module and the compiled extension) operate on a single
flat parameter vector and share the cache layout, so they are interchangeable
and can be compared element by element.

Architecture: cubic-ReLU embedding, two residual blocks of two dense layers
each, scalar linear head. Parameter order in the flat vector:

    w_in [m,d], b_in [m], A1 [m,m], a1 [m], B1 [m,m], c1 [m],
    A2 [m,m], a2 [m], B2 [m,m], c2 [m], w_out [m], b_out [1]

Value cache C has shape [10, n, m] with slots (z0, h0, s1, t1, v1, h1, s2,
t2, v2, h2); the tangent cache T for the fused value+gradient pass has shape
[9, d, n, m] with slots (P0, q1, T1, r1, P1, q2, T2, r2, P2).
"""

import numpy as np

KEYS = ["w_in", "b_in", "A1", "a1", "B1", "c1",
        "A2", "a2", "B2", "c2", "w_out", "b_out"]

N_CACHE = 10
N_TANGENT = 9


def shapes(m, d):
    return [("w_in", (m, d)), ("b_in", (m,)), ("A1", (m, m)), ("a1", (m,)),
            ("B1", (m, m)), ("c1", (m,)), ("A2", (m, m)), ("a2", (m,)),
            ("B2", (m, m)), ("c2", (m,)), ("w_out", (m,)), ("b_out", (1,))]


def param_count(m, d):
    return m * d + 4 * m * m + 6 * m + 1


def unpack(theta, m, d):
    """Name -> reshaped view into the flat vector (no copies)."""
    out = {}
    off = 0
    for name, shape in shapes(m, d):
        size = int(np.prod(shape))
        out[name] = theta[off:off + size].reshape(shape)
        off += size
    if off != len(theta):
        raise ValueError(f"parameter vector has length {len(theta)}, expected {off}")
    return out


def act(x):
    return np.where(x > 0, x * x * x, 0.0)


def dact(x):
    return np.where(x > 0, 3.0 * x * x, 0.0)


def ddact(x):
    return np.where(x > 0, 6.0 * x, 0.0)


def forward(theta, m, d, X):
    p = unpack(theta, m, d)
    h0 = act(X @ p["w_in"].T + p["b_in"])
    t1 = act(h0 @ p["A1"].T + p["a1"])
    h1 = act(t1 @ p["B1"].T + p["c1"]) + h0
    t2 = act(h1 @ p["A2"].T + p["a2"])
    h2 = act(t2 @ p["B2"].T + p["c2"]) + h1
    return h2 @ p["w_out"] + p["b_out"][0]


def forward_cache(theta, m, d, X):
    p = unpack(theta, m, d)
    n = X.shape[0]
    C = np.empty((N_CACHE, n, m))
    z0, h0, s1, t1, v1, h1, s2, t2, v2, h2 = C
    z0[:] = X @ p["w_in"].T + p["b_in"]
    h0[:] = act(z0)
    s1[:] = h0 @ p["A1"].T + p["a1"]
    t1[:] = act(s1)
    v1[:] = t1 @ p["B1"].T + p["c1"]
    h1[:] = act(v1) + h0
    s2[:] = h1 @ p["A2"].T + p["a2"]
    t2[:] = act(s2)
    v2[:] = t2 @ p["B2"].T + p["c2"]
    h2[:] = act(v2) + h1
    y = h2 @ p["w_out"] + p["b_out"][0]
    return y, C


def backward(theta, m, d, X, C, ybar):
    """Gradient of sum(ybar * y) with respect to the flat parameters."""
    p = unpack(theta, m, d)
    z0, h0, s1, t1, v1, h1, s2, t2, v2, h2 = C
    g = np.zeros(param_count(m, d))
    gv = unpack(g, m, d)
    gv["w_out"][:] = h2.T @ ybar
    gv["b_out"][0] = ybar.sum()
    dh2 = ybar[:, None] * p["w_out"][None, :]
    dv2 = dh2 * dact(v2)
    gv["B2"][:] = dv2.T @ t2
    gv["c2"][:] = dv2.sum(0)
    ds2 = (dv2 @ p["B2"]) * dact(s2)
    gv["A2"][:] = ds2.T @ h1
    gv["a2"][:] = ds2.sum(0)
    dh1 = ds2 @ p["A2"] + dh2
    dv1 = dh1 * dact(v1)
    gv["B1"][:] = dv1.T @ t1
    gv["c1"][:] = dv1.sum(0)
    ds1 = (dv1 @ p["B1"]) * dact(s1)
    gv["A1"][:] = ds1.T @ h0
    gv["a1"][:] = ds1.sum(0)
    dh0 = ds1 @ p["A1"] + dh1
    dz0 = dh0 * dact(z0)
    gv["w_in"][:] = dz0.T @ X
    gv["b_in"][:] = dz0.sum(0)
    return g


def forward_grad(theta, m, d, X):
    y, J, _, _ = forward_grad_cache(theta, m, d, X)
    return y, J


def forward_grad_cache(theta, m, d, X):
    """Value, spatial jacobian and both caches for the fused backward."""
    p = unpack(theta, m, d)
    n = X.shape[0]
    C = np.empty((N_CACHE, n, m))
    T = np.empty((N_TANGENT, d, n, m))
    z0, h0, s1, t1, v1, h1, s2, t2, v2, h2 = C
    P0, q1, T1, r1, P1, q2, T2, r2, P2 = T
    z0[:] = X @ p["w_in"].T + p["b_in"]
    h0[:] = act(z0)
    dz = dact(z0)
    for k in range(d):
        P0[k] = dz * p["w_in"][:, k][None, :]
    s1[:] = h0 @ p["A1"].T + p["a1"]
    t1[:] = act(s1)
    ds = dact(s1)
    for k in range(d):
        q1[k] = P0[k] @ p["A1"].T
        T1[k] = ds * q1[k]
    v1[:] = t1 @ p["B1"].T + p["c1"]
    h1[:] = act(v1) + h0
    dv = dact(v1)
    for k in range(d):
        r1[k] = T1[k] @ p["B1"].T
        P1[k] = dv * r1[k] + P0[k]
    s2[:] = h1 @ p["A2"].T + p["a2"]
    t2[:] = act(s2)
    ds = dact(s2)
    for k in range(d):
        q2[k] = P1[k] @ p["A2"].T
        T2[k] = ds * q2[k]
    v2[:] = t2 @ p["B2"].T + p["c2"]
    h2[:] = act(v2) + h1
    dv = dact(v2)
    for k in range(d):
        r2[k] = T2[k] @ p["B2"].T
        P2[k] = dv * r2[k] + P1[k]
    y = h2 @ p["w_out"] + p["b_out"][0]
    J = np.column_stack([P2[k] @ p["w_out"] for k in range(d)])
    return y, J, C, T


def fused_backward(theta, m, d, X, C, T, ybar, Jbar):
    """Gradient of sum(ybar * y) + sum(Jbar * J) w.r.t. the flat parameters."""
    p = unpack(theta, m, d)
    z0, h0, s1, t1, v1, h1, s2, t2, v2, h2 = C
    P0, q1, T1, r1, P1, q2, T2, r2, P2 = T
    g = np.zeros(param_count(m, d))
    gv = unpack(g, m, d)
    ks = range(Jbar.shape[1])
    gv["w_out"][:] = h2.T @ ybar + sum(P2[k].T @ Jbar[:, k] for k in ks)
    gv["b_out"][0] = ybar.sum()
    dh2 = ybar[:, None] * p["w_out"][None, :]
    dP2 = [Jbar[:, k][:, None] * p["w_out"][None, :] for k in ks]
    dv2 = dh2 * dact(v2) + sum(dP2[k] * ddact(v2) * r2[k] for k in ks)
    dr2 = [dP2[k] * dact(v2) for k in ks]
    dh1 = dh2.copy()
    dP1 = [dP2[k].copy() for k in ks]
    gv["B2"][:] = dv2.T @ t2 + sum(dr2[k].T @ T2[k] for k in ks)
    gv["c2"][:] = dv2.sum(0)
    dt2 = dv2 @ p["B2"]
    dT2 = [dr2[k] @ p["B2"] for k in ks]
    ds2 = dt2 * dact(s2) + sum(dT2[k] * ddact(s2) * q2[k] for k in ks)
    dq2 = [dT2[k] * dact(s2) for k in ks]
    gv["A2"][:] = ds2.T @ h1 + sum(dq2[k].T @ P1[k] for k in ks)
    gv["a2"][:] = ds2.sum(0)
    dh1 += ds2 @ p["A2"]
    for k in ks:
        dP1[k] += dq2[k] @ p["A2"]
    dv1 = dh1 * dact(v1) + sum(dP1[k] * ddact(v1) * r1[k] for k in ks)
    dr1 = [dP1[k] * dact(v1) for k in ks]
    dh0 = dh1.copy()
    dP0 = [dP1[k].copy() for k in ks]
    gv["B1"][:] = dv1.T @ t1 + sum(dr1[k].T @ T1[k] for k in ks)
    gv["c1"][:] = dv1.sum(0)
    dt1 = dv1 @ p["B1"]
    dT1 = [dr1[k] @ p["B1"] for k in ks]
    ds1 = dt1 * dact(s1) + sum(dT1[k] * ddact(s1) * q1[k] for k in ks)
    dq1 = [dT1[k] * dact(s1) for k in ks]
    gv["A1"][:] = ds1.T @ h0 + sum(dq1[k].T @ P0[k] for k in ks)
    gv["a1"][:] = ds1.sum(0)
    dh0 += ds1 @ p["A1"]
    for k in ks:
        dP0[k] += dq1[k] @ p["A1"]
    dz0 = dh0 * dact(z0) + sum(dP0[k] * ddact(z0) * p["w_in"][:, k][None, :] for k in ks)
    gv["w_in"][:] = dz0.T @ X
    for k in ks:
        gv["w_in"][:, k] += (dP0[k] * dact(z0)).sum(0)
    gv["b_in"][:] = dz0.sum(0)
    return g
