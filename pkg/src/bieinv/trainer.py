"""Alternating training of approximator, generator and discriminator.

Each epoch: one optimizer step of the approximator on Loss1, one of the
generator on Loss2 (using the approximator's current state), one of the
discriminator on the check-point mismatch features, then one refinement step
of each of the first two networks with the discriminator-weighted feedback
penalty (weight lambda) added to its loss. With lambda = 0 the last three
stages are skipped.

The discriminator is a single affine layer scoring the vector of absolute
check mismatches |u2(C) - ubar(C)| against Loss3; its rectified, uniformly
mixed weights decide which check points the feedback penalties emphasize.
"""

import time

import numpy as np

from . import assembly, network
from .errors import TrainingDiverged

LOSS_ABORT = 1e6
MAX_LR_HALVINGS = 3


class Adam:
    """Bias-corrected adaptive-moment steps on one flat parameter vector."""

    def __init__(self, size, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        # overflow in v on an exploding gradient just drives the step to
        # zero; the caller's divergence guard owns the recovery
        with np.errstate(over="ignore"):
            self.m = self.beta1 * self.m + (1 - self.beta1) * grad
            self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
            mhat = self.m / (1 - self.beta1**self.t)
            vhat = self.v / (1 - self.beta2**self.t)
            theta -= self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def state(self):
        # lr is deliberately not part of the state: the divergence guard
        # halves it, and a restore must not undo the halving.
        return (self.m.copy(), self.v.copy(), self.t)

    def restore(self, s):
        self.m, self.v, self.t = s[0].copy(), s[1].copy(), s[2]


class RunMetrics:
    """Per-epoch loss and error series plus run summary values."""

    def __init__(self, epochs):
        self.epoch = np.arange(epochs)
        self.loss1 = np.full(epochs, np.nan)
        self.loss2 = np.full(epochs, np.nan)
        self.loss3 = np.full(epochs, np.nan)
        self.l2_u = np.full(epochs, np.nan)
        self.l2_eps = np.full(epochs, np.nan)
        self.wall_time = 0.0
        self.final_l2_u = np.nan
        self.final_l2_eps = np.nan


class TrainResult:
    def __init__(self, p1, p2, p3, metrics, system, lr_halvings):
        self.p1 = p1
        self.p2 = p2
        self.p3 = p3
        self.metrics = metrics
        self.system = system
        self.lr_halvings = lr_halvings


class EvalContext:
    """Reference fields on a fixed grid for per-epoch error tracking."""

    def __init__(self, Xg, u_ref=None, eps_ref=None, g_ref=None):
        self.Xg = Xg
        self.u_ref = u_ref
        self.eps_ref = eps_ref
        self.g_ref = g_ref


def rel_l2(pred, ref):
    denom = np.linalg.norm(ref)
    if denom == 0.0:
        return float(np.linalg.norm(pred))
    return float(np.linalg.norm(pred - ref) / denom)


def _snapshot(p1, p2, th3, o1, o2, o3, rng_resample, epoch):
    return {
        "epoch": epoch,
        "theta1": p1.theta.copy(),
        "theta2": p2.theta.copy(),
        "theta3": th3.copy(),
        "o1": o1.state(),
        "o2": o2.state(),
        "o3": o3.state(),
        "rng": rng_resample.bit_generator.state if rng_resample is not None else None,
    }


def _restore(snap, p1, p2, th3, o1, o2, o3, rng_resample):
    p1.theta[:] = snap["theta1"]
    p2.theta[:] = snap["theta2"]
    th3[:] = snap["theta3"]
    o1.restore(snap["o1"])
    o2.restore(snap["o2"])
    o3.restore(snap["o3"])
    if rng_resample is not None and snap["rng"] is not None:
        rng_resample.bit_generator.state = snap["rng"]


def train(pdata, cfg, eval_ctx=None, on_checkpoint=None, log=None):
    """Run the full alternating schedule on one problem.

    Returns a TrainResult carrying the three parameter sets, per-epoch
    metrics, and the assembled system (reused by recovery and reporting).
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    system = assembly.build_system(pdata, cfg, rng)
    result = train_on_system(system, pdata, cfg, eval_ctx=eval_ctx,
                             on_checkpoint=on_checkpoint, log=log)
    result.metrics.wall_time = time.perf_counter() - t0
    return result


def train_on_system(system, pdata, cfg, eval_ctx=None, on_checkpoint=None, log=None):
    S = system
    lam = cfg.feedback
    epochs = cfg.epochs
    dim = S.Xq.shape[1]
    rng_nets = np.random.default_rng(cfg.seed + 1000)
    p1 = network.init_from_rng(rng_nets, cfg.width, dim)
    p2 = network.init_from_rng(rng_nets, cfg.width, dim)
    Nc = len(S.checks)
    th3 = np.zeros(Nc + 1)
    th3[:Nc] = rng_nets.uniform(-1 / np.sqrt(Nc), 1 / np.sqrt(Nc), size=Nc)
    o1 = Adam(len(p1), cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    o2 = Adam(len(p2), cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    o3 = Adam(len(th3), cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    rng_resample = (np.random.default_rng(cfg.seed + 7000)
                    if cfg.resample_interior else None)
    metrics = RunMetrics(epochs)
    cadence = max(1, cfg.checkpoint_every)
    snap = _snapshot(p1, p2, th3, o1, o2, o3, rng_resample, 0)
    halvings = 0
    baseline = None
    nb = 2.0 / len(S.F)
    ep = 0
    while ep < epochs:
        if rng_resample is not None:
            S.resample_interior(pdata, rng_resample, cfg.margin)

        # non-finite values are detected below and handled by the guard, so
        # the arithmetic that produces them should not also warn
        with np.errstate(over="ignore", invalid="ignore"):
            y1, c1 = network.forward_cache(p1, S.Xq)
            R1 = S.F - S.K1 @ y1
            l1 = float(np.mean(R1 * R1))
            o1.step(p1.theta, network.backward(p1, S.Xq, c1, -nb * (S.K1.T @ R1)))

            y1 = network.forward(p1, S.Xq)
            T = S.target_interior(y1)
            y2, c2 = network.forward_cache(p2, S.Xp)
            R2 = y2 - T
            l2 = float(np.mean(R2 * R2))
            o2.step(p2.theta, network.backward(p2, S.Xp, c2, (2.0 / len(T)) * R2))

            mis = network.forward(p2, S.checks.pos) - S.checks.u
            l3 = float(np.mean(mis * mis))

        # abort threshold is relative to the first epoch: a cubic-activation
        # init can legitimately start with a large loss and train down
        if baseline is None and np.isfinite(max(l1, l2, l3)):
            baseline = LOSS_ABORT * max(1.0, l1, l2, l3)
        if not (np.isfinite(l1) and np.isfinite(l2) and np.isfinite(l3)
                and max(l1, l2, l3) <= (baseline or LOSS_ABORT)):
            if halvings >= MAX_LR_HALVINGS:
                raise TrainingDiverged(
                    f"losses blew up at epoch {ep} and stayed non-finite or "
                    f"above {LOSS_ABORT:g}x their starting level after "
                    f"{halvings} learning-rate halvings",
                    epoch=ep, checkpoint=snap, metrics=metrics)
            halvings += 1
            _restore(snap, p1, p2, th3, o1, o2, o3, rng_resample)
            for o in (o1, o2, o3):
                o.lr *= 0.5
            ep = snap["epoch"]
            continue

        if lam > 0:
            feats = np.abs(mis)
            score = th3[:Nc] @ feats + th3[Nc]
            dsc = 2.0 * (score - l3)
            o3.step(th3, np.concatenate([dsc * feats, [dsc]]))
            w_hat = np.maximum(th3[:Nc], 0.0) + 1.0 / Nc
            w_hat /= w_hat.sum()

            y1, c1 = network.forward_cache(p1, S.Xq)
            R1 = S.F - S.K1 @ y1
            Rc = S.checks.F - S.checks.K @ y1
            cot = (-nb * (S.K1.T @ R1)
                   - lam * 2.0 * (S.checks.K.T @ (w_hat * Rc / S.checks.c**2)))
            o1.step(p1.theta, network.backward(p1, S.Xq, c1, cot))

            y1 = network.forward(p1, S.Xq)
            T = S.target_interior(y1)
            y2, c2 = network.forward_cache(p2, S.Xp)
            g2a = network.backward(p2, S.Xp, c2, (2.0 / len(T)) * (y2 - T))
            u2c, cc = network.forward_cache(p2, S.checks.pos)
            g2b = network.backward(p2, S.checks.pos, cc,
                                   lam * 2.0 * w_hat * (u2c - S.checks.u))
            o2.step(p2.theta, g2a + g2b)

        metrics.loss1[ep] = l1
        metrics.loss2[ep] = l2
        metrics.loss3[ep] = l3
        if eval_ctx is not None and eval_ctx.u_ref is not None:
            metrics.l2_u[ep] = rel_l2(network.forward(p2, eval_ctx.Xg), eval_ctx.u_ref)
        ep += 1
        if ep % cadence == 0 or ep == epochs:
            snap = _snapshot(p1, p2, th3, o1, o2, o3, rng_resample, ep)
            if on_checkpoint is not None:
                on_checkpoint(ep, p1, p2)
        if log is not None and (ep % max(1, epochs // 10) == 0 or ep == epochs):
            log(ep, {"loss1": l1, "loss2": l2, "loss3": l3,
                     "l2_u": metrics.l2_u[ep - 1]})

    if eval_ctx is not None and eval_ctx.u_ref is not None and epochs > 0:
        metrics.final_l2_u = metrics.l2_u[epochs - 1]
    p3 = network.DiscriminatorParams(th3[:Nc], th3[Nc:Nc + 1])
    return TrainResult(p1, p2, p3, metrics, system, halvings)
