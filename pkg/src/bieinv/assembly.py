"""Boundary-integral residuals and losses.

For a source point P with jump factor c(P), the data-only part of the first
residual is

    F(P) = c(P) u(P) + int_G u q* dG - int_G u* q dG

(q* is the kernel's normal derivative at the integration point). The full
residuals are R1(P) = F(P) - int_D u* g dD with g replaced by the
approximator network, and R2(p) = u2(p) - (int u* q - int u q* + int u* g)
at interior source points, with u2 the generator network. Losses are mean
squared residuals; Loss3 compares the generator against held-out boundary
values at check points.

The single-layer integral over a source point's own segment is split into a
regularized part (the Neumann density minus its value at the source point,
handled by the panel quadrature) plus the exact kernel moment over that
segment; the double-layer term needs no treatment because (y-x).n_y vanishes
identically for y on the source's own flat segment.
"""

from collections import namedtuple

import numpy as np

from . import network
from .errors import ConfigurationError, ContractViolation, DataError, GeometryError
from .geometry import (Domain, boundary_sources, build_domain, interior_lattice,
                       min_pair_distance, sample_interior)
from .kernels import (kernel_matrix, normal_kernel_matrix, precompute,
                      single_layer_edge_moment, single_layer_face_moment)

BoundaryTerms = namedtuple("BoundaryTerms", ["F", "c"])

# smallest allowed separation between evaluation and integration points;
# staggering should guarantee far more than this
MIN_STAGGER = 1e-9


class CollocationSet:
    """Source, check and integration point sets plus the boundary data
    sampled at them. `P`/`C`/`Q` are BoundarySet objects; u/q arrays follow
    the same ordering.
    """

    def __init__(self, dom, P, C, Q, Xp, Xq, wq,
                 uP, qP, uC, qC, uQ, qQ):
        self.dom = dom
        self.P = P
        self.C = C
        self.Q = Q
        self.Xp = Xp
        self.Xq = Xq
        self.wq = wq
        self.uP = uP
        self.qP = qP
        self.uC = uC
        self.qC = qC
        self.uQ = uQ
        self.qQ = qQ

    def check_view(self):
        """The same set with check points in the source slot (for F at checks)."""
        return CollocationSet(self.dom, self.C, self.C, self.Q, self.Xp,
                              self.Xq, self.wq, self.uC, self.qC, self.uC,
                              self.qC, self.uQ, self.qQ)


def build_collocation(pdata, cfg, rng):
    """Sample all point sets for a problem and attach its boundary data.

    `cfg` needs: boundary_sources_per_edge, checks_per_edge, interior_sources,
    boundary_order, boundary_panels, interior_mode ('lattice'|'mc'),
    interior_lattice, margin.
    """
    dom = Domain(pdata.kind)
    Q = build_domain(pdata.kind, cfg.boundary_order, cfg.boundary_panels)
    P = boundary_sources(pdata.kind, cfg.boundary_sources_per_edge)
    C = boundary_sources(pdata.kind, cfg.checks_per_edge)
    for name, S in (("source", P), ("check", C)):
        gap = min_pair_distance(S.pos, Q.pos)
        if gap <= MIN_STAGGER:
            raise GeometryError(
                f"{name} points collide with integration nodes (gap {gap:.2e}); "
                "choose counts that stagger the two sets")
    Xp, _ = sample_interior(pdata.kind, cfg.interior_sources, rng, margin=cfg.margin)
    if cfg.interior_mode == "lattice":
        Xq, wq = interior_lattice(pdata.kind, cfg.interior_lattice)
    elif cfg.interior_mode == "mc":
        Xq, wq = sample_interior(pdata.kind, cfg.interior_lattice**dom.d, rng)
    else:
        raise ConfigurationError(f"unknown interior_mode {cfg.interior_mode!r}")
    uQ = pdata.u_bar(Q.pos, Q.segment, Q.param)
    qQ = pdata.q_bar(Q.pos, Q.segment, Q.param)
    for name, vals in (("Dirichlet", uQ), ("Neumann", qQ)):
        bad = np.flatnonzero(~np.isfinite(vals))
        if len(bad):
            raise DataError(
                f"missing {name} value at integration node "
                f"{Q.pos[bad[0]].tolist()} (segment {Q.segment[bad[0]]})")
    return CollocationSet(
        dom, P, C, Q, Xp, Xq, wq,
        uP=pdata.u_bar(P.pos, P.segment, P.param),
        qP=pdata.q_bar(P.pos, P.segment, P.param),
        uC=pdata.u_bar(C.pos, C.segment, C.param),
        qC=pdata.q_bar(C.pos, C.segment, C.param),
        uQ=uQ, qQ=qQ)


def boundary_terms(colloc, kern=None):
    """Data-only part F(P) of R1 at the boundary source points."""
    dom = colloc.dom
    P, Q = colloc.P, colloc.Q
    Gm = kern.g_bb if kern is not None else kernel_matrix(P.pos, Q.pos)
    Hm = kern.dgdn_bb if kern is not None else normal_kernel_matrix(P.pos, Q.pos, Q.normal)
    t_dgdn = Hm @ (colloc.uQ * Q.weight)
    t_uq = np.empty(len(P))
    for i in range(len(P)):
        own = Q.segment == P.segment[i]
        qs = colloc.qQ.copy()
        qs[own] -= colloc.qP[i]
        seg = dom.segments[P.segment[i]]
        if dom.d == 2:
            mom = single_layer_edge_moment(P.param[i], seg.length)
        else:
            mom = single_layer_face_moment(P.param[i][0], P.param[i][1],
                                           seg.ulen, seg.vlen)
        t_uq[i] = Gm[i] @ (qs * Q.weight) + colloc.qP[i] * mom
    # staggered source points sit on open segment interiors, never corners
    c = np.full(len(P), 0.5)
    return BoundaryTerms(F=c * colloc.uP + t_dgdn - t_uq, c=c)


def residual_r1(terms, kern, approximator):
    """R1 per boundary source point with the approximator as the source."""
    y1 = network.forward(approximator, kern_interior_nodes(kern))
    return residual_r1_values(terms.F, kern.g_bi * kern.wq[None, :], y1)


def residual_r1_values(F, K1, y1):
    return F - K1 @ y1


def kern_interior_nodes(kern):
    if kern.Xq is None:
        raise ContractViolation("kernel matrices carry no interior nodes")
    return kern.Xq


def residual_r2(colloc, kern, approximator, generator):
    """R2 per interior source point: generator value minus the boundary-data
    reconstruction of u there."""
    y1 = network.forward(approximator, colloc.Xq)
    y2 = network.forward(generator, colloc.Xp)
    T = (kern.g_ib @ (colloc.qQ * colloc.Q.weight)
         - kern.dgdn_ib @ (colloc.uQ * colloc.Q.weight)
         + (kern.g_ii * colloc.wq[None, :]) @ y1)
    return y2 - T


def loss1(r):
    r = np.asarray(r, dtype=float)
    return float(np.mean(r * r)) if r.size else 0.0


loss2 = loss1


def loss3(generator, checks):
    """Mean squared mismatch of the generator against held-out values."""
    if len(checks.pos) == 0:
        raise ConfigurationError("check set is empty")
    mis = network.forward(generator, checks.pos) - checks.u
    return float(np.mean(mis * mis))


class CheckSet:
    """Held-out points with observed values and precomputed R1-style rows."""

    def __init__(self, pos, u, F, K, c):
        self.pos = pos
        self.u = u
        self.F = F
        self.K = K
        self.c = c

    def __len__(self):
        return len(self.pos)


class System:
    """Everything the trainer needs, precomputed once."""

    def __init__(self, colloc, F, K1, B_int, C_int, K2, checks):
        self.colloc = colloc
        self.Xq = colloc.Xq
        self.wq = colloc.wq
        self.Xp = colloc.Xp
        self.F = F
        self.K1 = K1
        self.B_int = B_int
        self.C_int = C_int
        self.K2 = K2
        self.checks = checks

    def target_interior(self, y1):
        """Reconstruction of u at the interior source points from data + source."""
        return self.C_int + self.K2 @ y1 - self.B_int

    def resample_interior(self, pdata, rng, margin):
        """Redraw the interior source points and their reconstruction rows."""
        Xp, _ = sample_interior(pdata.kind, len(self.Xp), rng, margin=margin)
        self.Xp = Xp
        self.colloc.Xp = Xp
        Q = self.colloc.Q
        self.B_int = normal_kernel_matrix(Xp, Q.pos, Q.normal) @ (self.colloc.uQ * Q.weight)
        self.C_int = kernel_matrix(Xp, Q.pos) @ (self.colloc.qQ * Q.weight)
        self.K2 = kernel_matrix(Xp, self.Xq) * self.wq[None, :]


def build_system(pdata, cfg, rng):
    """Build collocation, kernel matrices, and all precomputed residual parts."""
    colloc = build_collocation(pdata, cfg, rng)
    kern = precompute(colloc)
    terms = boundary_terms(colloc, kern)
    terms_c = boundary_terms(colloc.check_view())
    K1 = kern.g_bi * colloc.wq[None, :]
    Kc = kernel_matrix(colloc.C.pos, colloc.Xq) * colloc.wq[None, :]
    B_int = kern.dgdn_ib @ (colloc.uQ * colloc.Q.weight)
    C_int = kern.g_ib @ (colloc.qQ * colloc.Q.weight)
    K2 = kern.g_ii * colloc.wq[None, :]
    pos, u, F, K, c = (colloc.C.pos, colloc.uC, terms_c.F, Kc, terms_c.c)
    if getattr(cfg, "use_interior_data", False):
        data = pdata.interior_data()
        if data is None:
            raise DataError("interior supervision enabled but the problem has no interior data")
        Xd, ud = data
        Bd = normal_kernel_matrix(Xd, colloc.Q.pos, colloc.Q.normal) @ (colloc.uQ * colloc.Q.weight)
        Cd = kernel_matrix(Xd, colloc.Q.pos) @ (colloc.qQ * colloc.Q.weight)
        Kd = kernel_matrix(Xd, colloc.Xq) * colloc.wq[None, :]
        pos = np.vstack([pos, Xd])
        u = np.concatenate([u, ud])
        F = np.concatenate([F, ud + Bd - Cd])
        K = np.vstack([K, Kd])
        c = np.concatenate([c, np.ones(len(Xd))])
    checks = CheckSet(pos, u, F, K, c)
    return System(colloc, terms.F, K1, B_int, C_int, K2, checks)


def interior_reconstruction(colloc, probes, y1=None):
    """u at arbitrary interior probes from boundary data plus a source field.

    y1 gives the source values at the interior integration nodes; omit it for
    harmonic (source-free) data.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    Q = colloc.Q
    vals = (kernel_matrix(probes, Q.pos) @ (colloc.qQ * Q.weight)
            - normal_kernel_matrix(probes, Q.pos, Q.normal) @ (colloc.uQ * Q.weight))
    if y1 is not None:
        vals = vals + (kernel_matrix(probes, colloc.Xq) * colloc.wq[None, :]) @ y1
    return vals
