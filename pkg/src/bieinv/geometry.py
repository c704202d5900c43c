"""Domains, boundary parameterization and point sampling.

Three shapes are supported: the unit square, the L-shape (unit square with
the block (0,0.5)x(0.5,1) removed) and the unit cube. Boundaries are split
into straight segments (edges in 2D, rectangular faces in 3D) with outward
unit normals. Integration nodes sit at Gauss-Legendre abscissae, source and
check points at evenly spaced midpoints, so the two sets never coincide.
"""

import numpy as np

from .errors import ConfigurationError, GeometryError
from .quadrature import composite_gauss

UNIT_SQUARE = "unit_square"
L_SHAPE = "l_shape"
UNIT_CUBE = "unit_cube"

SHAPES = (UNIT_SQUARE, L_SHAPE, UNIT_CUBE)

_SQUARE_EDGES = [
    ((0.0, 0.0), (1.0, 0.0), (0.0, -1.0)),
    ((1.0, 0.0), (1.0, 1.0), (1.0, 0.0)),
    ((1.0, 1.0), (0.0, 1.0), (0.0, 1.0)),
    ((0.0, 1.0), (0.0, 0.0), (-1.0, 0.0)),
]

# counter-clockwise walk; the removed block is (0,0.5)x(0.5,1)
_L_EDGES = [
    ((0.0, 0.0), (1.0, 0.0), (0.0, -1.0)),
    ((1.0, 0.0), (1.0, 1.0), (1.0, 0.0)),
    ((1.0, 1.0), (0.5, 1.0), (0.0, 1.0)),
    ((0.5, 1.0), (0.5, 0.5), (-1.0, 0.0)),
    ((0.5, 0.5), (0.0, 0.5), (0.0, 1.0)),
    ((0.0, 0.5), (0.0, 0.0), (-1.0, 0.0)),
]

# (origin, u-direction, v-direction, outward normal); all faces are unit squares
_CUBE_FACES = [
    ((0.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (-1.0, 0.0, 0.0)),
    ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (1.0, 0.0, 0.0)),
    ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 1.0), (0.0, -1.0, 0.0)),
    ((0.0, 1.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 1.0), (0.0, 1.0, 0.0)),
    ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, -1.0)),
    ((0.0, 0.0, 1.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
]


class Edge:
    def __init__(self, seg_id, a, b, normal):
        self.seg_id = seg_id
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.normal = np.asarray(normal, dtype=float)
        self.length = float(np.linalg.norm(self.b - self.a))

    def point_at(self, t):
        # t is arclength in [0, length]
        return self.a + (t / self.length) * (self.b - self.a)


class Face:
    def __init__(self, seg_id, origin, udir, vdir, normal, ulen=1.0, vlen=1.0):
        self.seg_id = seg_id
        self.origin = np.asarray(origin, dtype=float)
        self.udir = np.asarray(udir, dtype=float)
        self.vdir = np.asarray(vdir, dtype=float)
        self.normal = np.asarray(normal, dtype=float)
        self.ulen = float(ulen)
        self.vlen = float(vlen)
        self.area = self.ulen * self.vlen

    def point_at(self, s, t):
        return self.origin + s * self.udir + t * self.vdir


class BoundarySet:
    """Flat arrays describing a set of boundary points.

    `param` is arclength along the owning edge (2D) or local (s, t) face
    coordinates (3D). `weight` is None for source/check points.
    """

    def __init__(self, pos, normal, weight, segment, param):
        self.pos = pos
        self.normal = normal
        self.weight = weight
        self.segment = segment
        self.param = param

    def __len__(self):
        return len(self.pos)


class Domain:
    def __init__(self, kind):
        if kind not in SHAPES:
            raise ConfigurationError(f"unsupported domain kind {kind!r}")
        self.kind = kind
        if kind == UNIT_CUBE:
            self.d = 3
            self.segments = [Face(i, *f) for i, f in enumerate(_CUBE_FACES)]
            self.measure = 1.0
            self.boundary_measure = 6.0
        else:
            self.d = 2
            edges = _SQUARE_EDGES if kind == UNIT_SQUARE else _L_EDGES
            self.segments = [Edge(i, *e) for i, e in enumerate(edges)]
            self.measure = 1.0 if kind == UNIT_SQUARE else 0.75
            self.boundary_measure = sum(e.length for e in self.segments)

    def contains(self, X, margin=0.0):
        """Strict interior membership, optionally with a boundary clearance."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        m = margin
        inside = np.all((X > m) & (X < 1.0 - m), axis=1)
        if self.kind == L_SHAPE:
            x, y = X[:, 0], X[:, 1]
            # half-open predicate: the removed block owns its closure
            inside &= ~((x <= 0.5 + m) & (y >= 0.5 - m))
        return inside

    def corners(self):
        """2D corner vertices with their interior angles (radians)."""
        if self.d != 2:
            raise GeometryError("corners() is 2D only")
        out = []
        n = len(self.segments)
        for i, e in enumerate(self.segments):
            out.append((e.a.copy(), _interior_angle(self.segments[(i - 1) % n], e)))
        return out


def _interior_angle(prev_edge, edge):
    # angle between the incoming and outgoing directions, measured inside
    t_in = (prev_edge.b - prev_edge.a) / prev_edge.length
    t_out = (edge.b - edge.a) / edge.length
    cross = t_in[0] * t_out[1] - t_in[1] * t_out[0]
    dot = float(t_in @ t_out)
    turn = np.arctan2(cross, dot)  # positive = convex (CCW walk)
    return np.pi - turn


def domain(kind):
    return Domain(kind)


def build_domain(kind, nodes_per_edge, panels_per_edge=1):
    """Boundary integration nodes: Gauss-Legendre per edge (tensor per face).

    2D: `nodes_per_edge` Gauss points on each of `panels_per_edge` equal
    panels per edge. 3D: the same composite rule per axis on each face,
    giving 6*(nodes_per_edge*panels_per_edge)^2 nodes.
    """
    if nodes_per_edge < 2:
        raise ConfigurationError("nodes_per_edge must be >= 2")
    dom = Domain(kind)
    if dom.d == 2:
        pos, nrm, wts, seg, par = [], [], [], [], []
        for e in dom.segments:
            rule = composite_gauss(nodes_per_edge, panels_per_edge, 0.0, e.length)
            for t, w in zip(rule.nodes, rule.weights):
                pos.append(e.point_at(t))
                nrm.append(e.normal)
                wts.append(w)
                seg.append(e.seg_id)
                par.append(t)
        return BoundarySet(
            np.array(pos), np.array(nrm), np.array(wts),
            np.array(seg, dtype=int), np.array(par),
        )
    pos, nrm, wts, seg, par = [], [], [], [], []
    for f in dom.segments:
        ru = composite_gauss(nodes_per_edge, panels_per_edge, 0.0, f.ulen)
        rv = composite_gauss(nodes_per_edge, panels_per_edge, 0.0, f.vlen)
        for s, ws in zip(ru.nodes, ru.weights):
            for t, wt in zip(rv.nodes, rv.weights):
                pos.append(f.point_at(s, t))
                nrm.append(f.normal)
                wts.append(ws * wt)
                seg.append(f.seg_id)
                par.append((s, t))
    return BoundarySet(
        np.array(pos), np.array(nrm), np.array(wts),
        np.array(seg, dtype=int), np.array(par),
    )


def boundary_sources(kind, per_edge):
    """Evenly spaced boundary points at segment midoffsets (staggered from
    the Gauss nodes). 3D: a per_edge x per_edge grid per face."""
    if per_edge < 1:
        raise ConfigurationError("per_edge must be >= 1")
    dom = Domain(kind)
    pos, nrm, seg, par = [], [], [], []
    if dom.d == 2:
        for e in dom.segments:
            for k in range(per_edge):
                t = (k + 0.5) / per_edge * e.length
                pos.append(e.point_at(t))
                nrm.append(e.normal)
                seg.append(e.seg_id)
                par.append(t)
        return BoundarySet(
            np.array(pos), np.array(nrm), None,
            np.array(seg, dtype=int), np.array(par),
        )
    for f in dom.segments:
        for i in range(per_edge):
            for j in range(per_edge):
                s = (i + 0.5) / per_edge * f.ulen
                t = (j + 0.5) / per_edge * f.vlen
                pos.append(f.point_at(s, t))
                nrm.append(f.normal)
                seg.append(f.seg_id)
                par.append((s, t))
    return BoundarySet(
        np.array(pos), np.array(nrm), None,
        np.array(seg, dtype=int), np.array(par),
    )


def sample_interior(kind, count, seed, margin=0.0):
    """Uniform iid interior points; weights sum to the domain measure.

    Rejection sampling keeps the L-shape membership exact. A nonzero margin
    keeps points away from the boundary (kernel rows blow up as 1/r near it)
    without touching the weight convention.
    """
    if count < 1:
        raise ConfigurationError("count must be >= 1")
    dom = Domain(kind)
    rng = np.random.default_rng(seed) if isinstance(seed, (int, np.integer)) else seed
    if kind == L_SHAPE:
        pts = np.empty((count, 2))
        have = 0
        while have < count:
            cand = margin + (1 - 2 * margin) * rng.uniform(0, 1, size=(count, 2))
            keep = cand[dom.contains(cand, margin=margin)]
            take = min(count - have, len(keep))
            pts[have:have + take] = keep[:take]
            have += take
    else:
        pts = margin + (1 - 2 * margin) * rng.uniform(0, 1, size=(count, dom.d))
    w = np.full(count, dom.measure / count)
    return pts, w


def interior_lattice(kind, n):
    """Midpoint lattice with exact cell weights (n cells per axis)."""
    if n < 1:
        raise ConfigurationError("lattice resolution must be >= 1")
    dom = Domain(kind)
    axes = [(np.arange(n) + 0.5) / n] * dom.d
    grids = np.meshgrid(*axes, indexing="ij")
    X = np.column_stack([g.ravel() for g in grids])
    if kind == L_SHAPE:
        X = X[dom.contains(X)]
    w = np.full(len(X), 1.0 / n**dom.d)
    return X, w


def corner_coefficient(P, kind, tol=1e-9):
    """Jump factor c(P): interior angle fraction on the boundary, 1 inside.

    2D corners give interior_angle/(2*pi); in 3D the analogue is the interior
    solid angle over 4*pi (1/2 on faces, 1/4 on cube edges, 1/8 at vertices).
    """
    dom = Domain(kind)
    P = np.asarray(P, dtype=float)
    if P.shape != (dom.d,):
        raise GeometryError(f"point has wrong dimension for {kind}: {P}")
    if dom.d == 2:
        for corner, angle in dom.corners():
            if np.linalg.norm(P - corner) <= tol:
                return float(angle / (2 * np.pi))
        for e in dom.segments:
            t = float((P - e.a) @ (e.b - e.a)) / e.length
            if -tol <= t <= e.length + tol:
                off = np.linalg.norm(P - e.point_at(np.clip(t, 0, e.length)))
                if off <= tol:
                    return 0.5
        if dom.contains(P[None, :])[0]:
            return 1.0
        raise GeometryError(f"point {P.tolist()} is neither on the boundary nor interior")
    on_axis = [abs(c) <= tol or abs(c - 1.0) <= tol for c in P]
    k = sum(on_axis)
    if k == 0:
        if dom.contains(P[None, :])[0]:
            return 1.0
        raise GeometryError(f"point {P.tolist()} is neither on the boundary nor interior")
    if any(c < -tol or c > 1.0 + tol for c in P):
        raise GeometryError(f"point {P.tolist()} lies outside the cube")
    return 0.5**k


def min_pair_distance(A, B):
    """Smallest distance between points of A and points of B."""
    d = A[:, None, :] - B[None, :, :]
    return float(np.sqrt(np.sum(d * d, axis=2)).min())
