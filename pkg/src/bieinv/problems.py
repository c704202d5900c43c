"""Built-in inverse problem instances.

Each factory returns a ProblemData bundle: Dirichlet/Neumann boundary data
callables keyed by (position, segment, parameter), the volumetric source f,
and whatever exact references exist for error reporting. Problems without
closed-form data synthesize it with the finite-difference forward solver and
interpolate per-segment tables to the collocation nodes (linear in the edge
parameter; bilinear on cube faces).
"""

import functools

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import forward_fdm
from .errors import ConfigurationError
from .geometry import Domain, L_SHAPE, UNIT_CUBE, UNIT_SQUARE

# Published benchmark errors for the smooth 2D test case (relative L2 of the
# reconstructed solution and medium), emitted alongside our own numbers.
REFERENCE_ERRORS = {
    "solution": {"pinn": 0.3117, "wan": 0.2978, "drm": 0.2281, "ours": 0.0121},
    "medium": {"pinn": 0.0313, "wan": 0.0526, "drm": 0.9872, "ours": 0.0143},
}


class ProblemData:
    """Everything a run needs: data callables plus optional references.

    u_bar/q_bar take (pos [n,d], segment [n], param) where param is the
    arclength along the segment in 2D and the in-face (s, t) pair in 3D.
    """

    def __init__(self, name, kind, u_bar, q_bar, f, eps_exact=None,
                 u_exact=None, g_exact=None, grad_u_exact=None, regions=None,
                 region_values=None, grid=None, interior=None):
        self.name = name
        self.kind = kind
        self.u_bar = u_bar
        self.q_bar = q_bar
        self.f = f
        self.eps_exact = eps_exact
        self.u_exact = u_exact
        self.g_exact = g_exact
        self.grad_u_exact = grad_u_exact
        self.regions = regions
        self.region_values = region_values
        self.grid = grid
        self._interior = interior

    def interior_data(self):
        return self._interior

    def u_ref(self, P):
        """Reference solution values: exact if known, grid otherwise."""
        if self.u_exact is not None:
            return self.u_exact(np.atleast_2d(P))
        if self.grid is not None:
            return forward_fdm.interpolate(self.grid, P)
        return None


def equivalent_source(f_val, eps_val, grad_eps, grad_u):
    """g = (f + grad(eps) . grad(u)) / eps, the source the harmonic layer sees."""
    return (np.asarray(f_val, dtype=float)
            + np.sum(np.asarray(grad_eps) * np.asarray(grad_u), axis=-1)) / eps_val


def _normal_flux(kind, grad_u):
    normals = {s.seg_id: s.normal for s in Domain(kind).segments}
    def q_bar(pos, segment, param):
        g = np.atleast_2d(grad_u(np.atleast_2d(pos)))
        out = np.empty(len(g))
        for sid in np.unique(segment):
            m = segment == sid
            out[m] = g[m] @ normals[int(sid)]
        return out
    return q_bar


def _from_tables_2d(tables):
    def lookup(pos, segment, param):
        out = np.empty(len(pos))
        for sid in np.unique(segment):
            m = segment == sid
            t, v = tables[int(sid)]
            out[m] = np.interp(np.asarray(param)[m], t, v)
        return out
    return lookup


def _from_tables_3d(tables):
    interps = {}
    for sid, ((sax, tax), V) in tables.items():
        interps[sid] = RegularGridInterpolator((sax, tax), V, method="linear",
                                               bounds_error=False, fill_value=None)
    def lookup(pos, segment, param):
        out = np.empty(len(pos))
        par = np.atleast_2d(param)
        for sid in np.unique(segment):
            m = segment == sid
            out[m] = interps[int(sid)](par[m])
        return out
    return lookup


# smooth 2D benchmark: u = exp(phi(x)) sin(pi y) with phi = pi^2 (x^2 - x) / 2,
# eps = exp(-phi) / pi, f = 0. The pair satisfies -div(eps grad u) = 0 and the
# equivalent source is g = -phi'(x)^2 u.

def _phi(x):
    return 0.5 * np.pi**2 * (x * x - x)


def _dphi(x):
    return 0.5 * np.pi**2 * (2.0 * x - 1.0)


def smooth_u(P):
    P = np.atleast_2d(P)
    return np.exp(_phi(P[:, 0])) * np.sin(np.pi * P[:, 1])


def smooth_grad_u(P):
    P = np.atleast_2d(P)
    e = np.exp(_phi(P[:, 0]))
    return np.column_stack([
        _dphi(P[:, 0]) * e * np.sin(np.pi * P[:, 1]),
        np.pi * e * np.cos(np.pi * P[:, 1]),
    ])


def smooth_eps(P):
    P = np.atleast_2d(P)
    return np.exp(-_phi(P[:, 0])) / np.pi


def smooth_g(P):
    P = np.atleast_2d(P)
    return -_dphi(P[:, 0]) ** 2 * smooth_u(P)


def smooth_2d(interior=None):
    def u_bar(pos, segment, param):
        return smooth_u(pos)
    return ProblemData(
        name="smooth_2d", kind=UNIT_SQUARE,
        u_bar=u_bar, q_bar=_normal_flux(UNIT_SQUARE, smooth_grad_u),
        f=lambda P: np.zeros(len(np.atleast_2d(P))),
        eps_exact=smooth_eps, u_exact=smooth_u, g_exact=smooth_g,
        grad_u_exact=smooth_grad_u, interior=interior)


# harmonic checks: eps = 1, f = 0, so g = 0 and the boundary residual of the
# integral identity must vanish to quadrature accuracy.

_HARMONIC = {
    "const": (lambda P: np.ones(len(P)),
              lambda P: np.zeros_like(P)),
    "linear": (lambda P: P[:, 0].copy(),
               lambda P: np.column_stack([np.ones(len(P)), np.zeros(len(P))])),
    "saddle": (lambda P: P[:, 0] ** 2 - P[:, 1] ** 2,
               lambda P: np.column_stack([2.0 * P[:, 0], -2.0 * P[:, 1]])),
}


def harmonic_2d(which="saddle"):
    if which not in _HARMONIC:
        raise ConfigurationError(
            f"unknown harmonic case {which!r}, expected one of {sorted(_HARMONIC)}")
    u_fn, grad_fn = _HARMONIC[which]
    def u_exact(P):
        return u_fn(np.atleast_2d(P))
    def grad_u(P):
        return grad_fn(np.atleast_2d(P))
    def u_bar(pos, segment, param):
        return u_exact(pos)
    return ProblemData(
        name=f"harmonic_{which}", kind=UNIT_SQUARE,
        u_bar=u_bar, q_bar=_normal_flux(UNIT_SQUARE, grad_u),
        f=lambda P: np.zeros(len(np.atleast_2d(P))),
        eps_exact=lambda P: np.ones(len(np.atleast_2d(P))),
        u_exact=u_exact, g_exact=lambda P: np.zeros(len(np.atleast_2d(P))),
        grad_u_exact=grad_u)


# piecewise L-shape: unit L with the upper-left quarter removed, eps = 10 on
# the lower strip and 5 on the upper-right quadrant, f = 1, u = 1 on the open
# bottom edge and 0 elsewhere. Neumann data comes from the forward solve.

def piecewise_eps(P):
    P = np.atleast_2d(P)
    return np.where(P[:, 1] < 0.5, 10.0, 5.0)


def _lshape_dirichlet(P):
    P = np.atleast_2d(P)
    x, y = P[:, 0], P[:, 1]
    tol = 1e-9
    return np.where((np.abs(y) < tol) & (x > tol) & (x < 1.0 - tol), 1.0, 0.0)


@functools.lru_cache(maxsize=4)
def _lshape_grid(h):
    return forward_fdm.solve_forward(
        L_SHAPE, piecewise_eps, lambda P: np.ones(len(np.atleast_2d(P))),
        _lshape_dirichlet, h)


LSHAPE_REGIONS = [
    ("lower", lambda P: np.atleast_2d(P)[:, 1] < 0.5),
    ("upper_right", lambda P: (np.atleast_2d(P)[:, 0] >= 0.5)
                              & (np.atleast_2d(P)[:, 1] >= 0.5)),
]


def piecewise_lshape(h=1.0 / 64.0, interior=None):
    grid = _lshape_grid(h)
    qt = forward_fdm.extract_neumann(grid)
    def u_bar(pos, segment, param):
        return _lshape_dirichlet(pos)
    return ProblemData(
        name="piecewise_lshape", kind=L_SHAPE,
        u_bar=u_bar, q_bar=_from_tables_2d(qt),
        f=lambda P: np.ones(len(np.atleast_2d(P))),
        eps_exact=piecewise_eps,
        g_exact=lambda P: np.ones(len(np.atleast_2d(P))) / piecewise_eps(P),
        regions=LSHAPE_REGIONS, region_values={"lower": 10.0, "upper_right": 5.0},
        grid=grid, interior=interior)


# 3D cube: eps = sin(x1) + cos(x2) + x3, f = 10, u = 0 on the whole boundary.

def cube_eps(P):
    P = np.atleast_2d(P)
    return np.sin(P[:, 0]) + np.cos(P[:, 1]) + P[:, 2]


@functools.lru_cache(maxsize=4)
def _cube_grid(h):
    return forward_fdm.solve_forward(
        UNIT_CUBE, cube_eps, lambda P: np.full(len(np.atleast_2d(P)), 10.0),
        lambda P: np.zeros(len(np.atleast_2d(P))), h)


def cube_3d(h=1.0 / 32.0, interior=None):
    grid = _cube_grid(h)
    qt = forward_fdm.extract_neumann(grid)
    def u_bar(pos, segment, param):
        return np.zeros(len(np.atleast_2d(pos)))
    return ProblemData(
        name="cube_3d", kind=UNIT_CUBE,
        u_bar=u_bar, q_bar=_from_tables_3d(qt),
        f=lambda P: np.full(len(np.atleast_2d(P)), 10.0),
        eps_exact=cube_eps, grid=grid, interior=interior)


def forward_grid(name, h):
    """Forward solve of a named problem: (grid, eps callable, f callable)."""
    zero = lambda P: np.zeros(len(np.atleast_2d(P)))
    if name == "smooth_2d":
        grid = forward_fdm.solve_forward(UNIT_SQUARE, smooth_eps, zero, smooth_u, h)
        return grid, smooth_eps, zero
    if name == "piecewise_lshape":
        ones = lambda P: np.ones(len(np.atleast_2d(P)))
        return _lshape_grid(h), piecewise_eps, ones
    if name == "cube_3d":
        tens = lambda P: np.full(len(np.atleast_2d(P)), 10.0)
        return _cube_grid(h), cube_eps, tens
    if name.startswith("harmonic_"):
        pdata = make_problem(name)
        grid = forward_fdm.solve_forward(UNIT_SQUARE, pdata.eps_exact, zero,
                                         pdata.u_exact, h)
        return grid, pdata.eps_exact, zero
    raise ConfigurationError(f"no forward model registered for problem {name!r}")


PROBLEMS = {
    "smooth_2d": smooth_2d,
    "piecewise_lshape": piecewise_lshape,
    "cube_3d": cube_3d,
    "harmonic_const": lambda: harmonic_2d("const"),
    "harmonic_linear": lambda: harmonic_2d("linear"),
    "harmonic_saddle": lambda: harmonic_2d("saddle"),
}


def make_problem(name, **kwargs):
    if name not in PROBLEMS:
        raise ConfigurationError(
            f"unknown problem {name!r}, expected one of {sorted(PROBLEMS)}")
    return PROBLEMS[name](**kwargs)
