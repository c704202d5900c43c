"""Medium coefficient recovery from the learned source and solution fields.

The equivalent source satisfies grad(eps).grad(u) - g*eps + f = 0. For a
smooth medium this transport equation is minimized over a third
residual-block network (optionally parameterized as eps = exp(s), which
keeps the field positive); one anchor point pins the scale the equation
leaves free. For piecewise-constant media the gradient term vanishes and
each region's value is the weighted median of f/g over its interior nodes.
"""

import warnings

import numpy as np

from . import network, trainer
from .errors import ConfigurationError, NumericError, RecoveryWarning


class MediumField:
    """Recovered medium: callable on points, plus how it was represented."""

    def __init__(self, evaluator, kind, params=None, region_values=None,
                 positivity_fraction=None):
        self._evaluator = evaluator
        self.kind = kind
        self.params = params
        self.region_values = region_values
        self.positivity_fraction = positivity_fraction

    def __call__(self, X):
        return self._evaluator(np.atleast_2d(np.asarray(X, dtype=float)))


def _values_of(obj, X):
    if isinstance(obj, network.NetworkParams):
        return network.forward(obj, X)
    return np.asarray(obj(X), dtype=float)


def _gradients_of(obj, X):
    if isinstance(obj, network.NetworkParams):
        return network.forward_grad(obj, X)[1]
    return np.asarray(obj(X), dtype=float)


def _source_values(f, X):
    if f is None:
        return np.zeros(len(X))
    if np.isscalar(f):
        return np.full(len(X), float(f))
    return np.asarray(f(X), dtype=float)


def recover_smooth(g_net, u_net, f, anchor, cfg, points, check_grid=None):
    """Train a network surrogate for a smooth medium.

    g_net / u_net are the trained approximator and generator; either may
    instead be a callable (g values, resp. grad-u rows) for closed-loop use.
    `anchor` is a (point, value) pair fixing the scale. `points` are the
    interior collocation nodes the residual is averaged over.
    """
    if anchor is None:
        raise ConfigurationError("smooth recovery needs an anchor (point, value)")
    anchor_x, anchor_val = anchor
    anchor_val = float(anchor_val)
    Xr = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = Xr.shape
    gv = _values_of(g_net, Xr)
    Ug = _gradients_of(u_net, Xr)
    fv = _source_values(f, Xr)
    Xa = np.atleast_2d(np.asarray(anchor_x, dtype=float))
    exp_mode = cfg.recovery_parametrization == "exp"
    if exp_mode and anchor_val <= 0:
        raise ConfigurationError("exp parametrization needs a positive anchor value")

    rng = np.random.default_rng(cfg.recovery_seed)
    pe = network.init_from_rng(rng, cfg.width, d)
    pe.views["b_out"][:] = np.log(anchor_val) if exp_mode else anchor_val
    opt = trainer.Adam(len(pe), cfg.recovery_lr, cfg.adam_beta1,
                       cfg.adam_beta2, cfg.adam_eps)
    best = (np.inf, pe.theta.copy())
    for _ in range(cfg.recovery_epochs):
        y, J, C, T = network.forward_grad_cache(pe, Xr)
        flux = np.sum(J * Ug, axis=1)
        if exp_mode:
            # residual is scaled by 1/eps so that shrinking eps cannot buy
            # loss: with f = 0 the medium enters through grad(y) alone
            ei = np.exp(-np.clip(y, -300.0, 300.0))
            r = flux - gv + fv * ei
            rb = (2.0 / n) * r
            ybar = -rb * fv * ei
            Jbar = rb[:, None] * Ug
        else:
            r = flux - gv * y + fv
            rb = (2.0 / n) * r
            ybar = -rb * gv
            Jbar = rb[:, None] * Ug
        loss = float(np.mean(r * r))
        if not np.isfinite(loss):
            # diverged: restart from the best state seen, more cautiously
            pe.theta[:] = best[1]
            opt = trainer.Adam(len(pe), opt.lr * 0.5, cfg.adam_beta1,
                               cfg.adam_beta2, cfg.adam_eps)
            continue
        if loss < best[0]:
            best = (loss, pe.theta.copy())
        g1 = network.fused_backward(pe, Xr, C, T, ybar, Jbar)
        ya, ca = network.forward_cache(pe, Xa)
        if exp_mode:
            ea = np.exp(ya[0])
            cot = 2.0 * cfg.recovery_anchor_weight * (ea - anchor_val) * ea
        else:
            cot = 2.0 * cfg.recovery_anchor_weight * (ya[0] - anchor_val)
        g2 = network.backward(pe, Xa, ca, np.array([cot]))
        opt.step(pe.theta, g1 + g2)
    y, J, _, _ = network.forward_grad_cache(pe, Xr)
    flux = np.sum(J * Ug, axis=1)
    if exp_mode:
        r = flux - gv + fv * np.exp(-np.clip(y, -300.0, 300.0))
    else:
        r = flux - gv * y + fv
    final_loss = float(np.mean(r * r))
    if not (final_loss <= best[0]):
        pe.theta[:] = best[1]

    if exp_mode:
        evaluator = lambda X: np.exp(network.forward(pe, X))
    else:
        evaluator = lambda X: network.forward(pe, X)
    frac_nonpos = None
    if check_grid is not None:
        vals = evaluator(np.atleast_2d(np.asarray(check_grid, dtype=float)))
        frac_nonpos = float(np.mean(vals <= 0))
        if frac_nonpos > 0.01:
            warnings.warn(
                f"recovered medium nonpositive on {frac_nonpos:.1%} of the "
                "evaluation grid", RecoveryWarning, stacklevel=2)
    return MediumField(evaluator, "NetworkSurrogate", params=pe,
                       positivity_fraction=frac_nonpos)


def weighted_median(values, weights):
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values)
    cum = np.cumsum(weights[order])
    return float(values[order][np.searchsorted(cum, 0.5 * cum[-1])])


def recover_piecewise(g_net, u_net, f, regions, anchor_region_values=None,
                      points=None, weights=None):
    """Per-region constants for a piecewise-uniform medium.

    With grad(eps) = 0 inside each region the transport equation reduces to
    eps = f/g pointwise; each region's estimate is the weighted median of
    that ratio over its interior nodes. `u_net` is accepted for interface
    symmetry with recover_smooth; the pointwise estimate needs only the
    source surrogate. `regions` are boolean predicates over point batches.
    """
    if points is None:
        raise ConfigurationError("piecewise recovery needs interior nodes")
    Xr = np.atleast_2d(np.asarray(points, dtype=float))
    if weights is None:
        weights = np.full(len(Xr), 1.0 / len(Xr))
    gv = _values_of(g_net, Xr)
    fv = _source_values(f, Xr)
    values = []
    claimed = np.zeros(len(Xr), dtype=bool)
    for idx, predicate in enumerate(regions):
        # regions claim nodes in declaration order, mirroring the evaluator
        mask = np.asarray(predicate(Xr), dtype=bool) & ~claimed
        claimed |= mask
        if anchor_region_values is not None and anchor_region_values.get(idx) is not None:
            values.append(float(anchor_region_values[idx]))
            continue
        if mask.sum() < 5:
            raise ConfigurationError(
                f"region {idx} covers only {int(mask.sum())} interior nodes; "
                "need at least 5")
        g_region = gv[mask]
        if np.median(np.abs(g_region)) < 1e-10:
            raise NumericError(
                f"source term is near zero over region {idx}; the pointwise "
                "ratio f/g is ill-conditioned there")
        values.append(weighted_median(fv[mask] / g_region, weights[mask]))

    region_values = np.array(values)

    def evaluator(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(len(X), np.nan)
        for idx, predicate in enumerate(regions):
            mask = np.asarray(predicate(X), dtype=bool) & np.isnan(out)
            out[mask] = region_values[idx]
        if np.isnan(out).any():
            bad = X[np.isnan(out)][0]
            raise ConfigurationError(
                f"point {bad.tolist()} belongs to no declared region")
        return out

    return MediumField(evaluator, "PiecewiseConstants",
                       region_values=region_values)
