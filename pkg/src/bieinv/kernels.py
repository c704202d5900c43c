"""Free-space Laplace kernels and their boundary integration helpers.

The single layer kernel is -ln(r)/(2*pi) in 2D and 1/(4*pi*r) in 3D; its
normal derivative at the integration point y (outward normal n_y) is
-((y - x) . n_y)/(2*pi*r^2), resp. the 3D analogue with r^3. Points closer
than `R_MIN` are treated as coincident and rejected, with the offending pair
named in the error.
"""

from collections import namedtuple

import numpy as np

from .errors import SingularityError

R_MIN = 1e-12

KernelMatrices = namedtuple(
    "KernelMatrices",
    ["g_bb", "dgdn_bb", "g_bi", "g_ib", "dgdn_ib", "g_ii", "Xq", "wq"])


def _pair_distances(X, Y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    diff = Y[None, :, :] - X[:, None, :]
    r = np.sqrt(np.sum(diff * diff, axis=2))
    return diff, r


def _check_singular(r, X, Y):
    bad = np.argwhere(r <= R_MIN)
    if len(bad):
        i, j = bad[0]
        raise SingularityError(
            f"evaluation point {np.atleast_2d(X)[i].tolist()} coincides with "
            f"integration point {np.atleast_2d(Y)[j].tolist()} (r <= {R_MIN:g})"
        )


def fundamental_solution(x, y):
    """Kernel value for a single pair of points (2- or 3-vectors)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = float(np.linalg.norm(y - x))
    if r <= R_MIN:
        raise SingularityError(
            f"evaluation point {x.tolist()} coincides with integration point "
            f"{y.tolist()} (r <= {R_MIN:g})"
        )
    if x.shape[-1] == 2:
        return -np.log(r) / (2 * np.pi)
    return 1.0 / (4 * np.pi * r)


def normal_derivative(x, y, n_y):
    """d/dn_y of the kernel for a single pair of points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n_y = np.asarray(n_y, dtype=float)
    r = float(np.linalg.norm(y - x))
    if r <= R_MIN:
        raise SingularityError(
            f"evaluation point {x.tolist()} coincides with integration point "
            f"{y.tolist()} (r <= {R_MIN:g})"
        )
    dot = float((y - x) @ n_y)
    if x.shape[-1] == 2:
        return -dot / (2 * np.pi * r * r)
    return -dot / (4 * np.pi * r**3)


def kernel_matrix(X, Y):
    """Single layer kernel, rows indexed by X, columns by Y."""
    diff, r = _pair_distances(X, Y)
    _check_singular(r, X, Y)
    if diff.shape[2] == 2:
        return -np.log(r) / (2 * np.pi)
    return 1.0 / (4 * np.pi * r)


def normal_kernel_matrix(X, Y, NY):
    """Double layer kernel (normal derivative at Y), same layout."""
    diff, r = _pair_distances(X, Y)
    _check_singular(r, X, Y)
    NY = np.atleast_2d(np.asarray(NY, dtype=float))
    dot = np.einsum("ijk,jk->ij", diff, NY)
    if diff.shape[2] == 2:
        return -dot / (2 * np.pi * r * r)
    return -dot / (4 * np.pi * r**3)


def precompute(colloc):
    """All kernel matrices a training run needs, rows indexed by source points
    and columns by integration nodes. Matrices are immutable once built.

    b = boundary sources, i = interior; the second letter names the
    integration set (so g_bi couples boundary sources to interior nodes).
    """
    P, Q = colloc.P.pos, colloc.Q.pos
    NQ = colloc.Q.normal
    Xp, Xq = colloc.Xp, colloc.Xq
    return KernelMatrices(
        g_bb=kernel_matrix(P, Q),
        dgdn_bb=normal_kernel_matrix(P, Q, NQ),
        g_bi=kernel_matrix(P, Xq),
        g_ib=kernel_matrix(Xp, Q),
        dgdn_ib=normal_kernel_matrix(Xp, Q, NQ),
        g_ii=kernel_matrix(Xp, Xq),
        Xq=Xq, wq=colloc.wq)


def single_layer_edge_moment(c, L):
    """Exact integral of -ln|t - c|/(2*pi) for t in (0, L), 0 <= c <= L.

    Used to integrate the single layer kernel across a collocation point's
    own edge, where Gauss quadrature alone misses the log singularity.
    """
    a = float(c)
    b = float(L) - a
    total = 0.0
    for s in (a, b):
        if s > 0.0:
            total += s * np.log(s) - s
    return -total / (2 * np.pi)


def single_layer_face_moment(s0, t0, ulen, vlen):
    """Exact integral of 1/(4*pi*r) over the rectangle (0,ulen)x(0,vlen)
    about the interior point (s0, t0).

    Antiderivative of 1/r on a plane: F(s,t) = s*ln(t+rho) + t*ln(s+rho)
    with rho = hypot(s, t); summing F over the four signed corner offsets
    gives the moment.
    """
    def F(s, t):
        rho = np.hypot(s, t)
        out = 0.0
        if abs(s) > 0:
            out += s * np.log(t + rho)
        if abs(t) > 0:
            out += t * np.log(s + rho)
        return out

    s1, s2 = -float(s0), float(ulen) - float(s0)
    t1, t2 = -float(t0), float(vlen) - float(t0)
    return (F(s2, t2) - F(s1, t2) - F(s2, t1) + F(s1, t1)) / (4 * np.pi)
