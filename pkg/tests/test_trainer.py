import numpy as np
import pytest

from bieinv import assembly, network, problems, trainer
from bieinv.config import RunConfig
from bieinv.errors import TrainingDiverged


def test_rel_l2():
    assert trainer.rel_l2(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert trainer.rel_l2(np.array([2.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)
    # zero reference falls back to the absolute norm
    assert trainer.rel_l2(np.array([3.0, 4.0]), np.zeros(2)) == pytest.approx(5.0)


def test_adam_first_step_has_unit_scale():
    """After one update the step is lr * sign(g) up to the eps fudge."""
    opt = trainer.Adam(3, lr=0.01)
    theta = np.zeros(3)
    g = np.array([2.0, -0.5, 1e-12])
    opt.step(theta, g)
    assert theta[0] == pytest.approx(-0.01, rel=1e-6)
    assert theta[1] == pytest.approx(+0.01, rel=1e-6)
    # a near-zero gradient component moves by much less than lr
    assert abs(theta[2]) < 0.001


def test_adam_state_round_trip_excludes_lr():
    opt = trainer.Adam(2, lr=0.5)
    opt.step(np.zeros(2), np.ones(2))
    s = opt.state()
    opt.lr = 0.25
    opt.restore(s)
    assert opt.lr == 0.25
    assert opt.t == 1


def test_adam_converges_on_quadratic():
    opt = trainer.Adam(2, lr=0.05)
    theta = np.array([3.0, -2.0])
    for _ in range(600):
        opt.step(theta, 2 * (theta - np.array([1.0, 1.0])))
    assert np.allclose(theta, [1.0, 1.0], atol=1e-3)


@pytest.fixture(scope="module")
def smooth_small():
    pdata = problems.smooth_2d()
    cfg = RunConfig(epochs=120, interior_sources=30, interior_lattice=12,
                    boundary_sources_per_edge=6, checks_per_edge=3,
                    boundary_order=8, boundary_panels=2, seed=1)
    system = assembly.build_system(pdata, cfg, np.random.default_rng(cfg.seed))
    return pdata, cfg, system


def test_training_fills_metrics_and_reduces_loss(smooth_small):
    pdata, cfg, system = smooth_small
    res = trainer.train_on_system(system, pdata, cfg)
    m = res.metrics
    assert np.all(np.isfinite(m.loss1)) and np.all(np.isfinite(m.loss2))
    assert len(m.loss1) == cfg.epochs
    # the boundary residual must come down substantially from its start
    assert m.loss1[-1] < 0.2 * m.loss1[0]
    assert res.lr_halvings == 0


def test_training_is_deterministic(smooth_small):
    pdata, cfg, system = smooth_small
    a = trainer.train_on_system(system, pdata, cfg)
    b = trainer.train_on_system(system, pdata, cfg)
    assert np.array_equal(a.p1.theta, b.p1.theta)
    assert np.array_equal(a.p2.theta, b.p2.theta)
    assert np.array_equal(a.metrics.loss1, b.metrics.loss1)


def test_eval_context_tracks_solution_error(smooth_small):
    pdata, cfg, system = smooth_small
    Xg = np.random.default_rng(0).uniform(0.1, 0.9, size=(50, 2))
    ctx = trainer.EvalContext(Xg, u_ref=pdata.u_exact(Xg))
    res = trainer.train_on_system(system, pdata, cfg, eval_ctx=ctx)
    assert np.all(np.isfinite(res.metrics.l2_u))
    assert res.metrics.final_l2_u == res.metrics.l2_u[-1]


def test_feedback_off_changes_trajectory(smooth_small):
    pdata, cfg, system = smooth_small
    on = trainer.train_on_system(system, pdata, cfg)
    off = trainer.train_on_system(system, pdata, cfg.replace(feedback=0.0))
    assert not np.array_equal(on.p2.theta, off.p2.theta)
    # with feedback off the discriminator keeps its initial weights,
    # which match the run that trained it only at epoch zero
    rng = np.random.default_rng(cfg.seed + 1000)
    network.init_from_rng(rng, cfg.width, 2)
    network.init_from_rng(rng, cfg.width, 2)
    nc = len(system.checks)
    th0 = rng.uniform(-1 / np.sqrt(nc), 1 / np.sqrt(nc), size=nc)
    assert np.array_equal(off.p3.w, th0)
    assert not np.array_equal(on.p3.w, th0)
    # the mismatch loss is still reported
    assert np.all(np.isfinite(off.metrics.loss3))


def test_divergence_guard_aborts_with_context(smooth_small):
    pdata, cfg, system = smooth_small
    bad = cfg.replace(lr=1e8, epochs=400)
    with pytest.raises(TrainingDiverged) as err:
        trainer.train_on_system(system, pdata, bad)
    exc = err.value
    assert isinstance(exc.epoch, int)
    assert "theta1" in exc.checkpoint
    assert isinstance(exc.metrics, trainer.RunMetrics)


def test_checkpoint_callback_fires_on_cadence(smooth_small):
    pdata, cfg, system = smooth_small
    seen = []
    trainer.train_on_system(system, pdata, cfg.replace(checkpoint_every=40),
                            on_checkpoint=lambda ep, p1, p2: seen.append(ep))
    assert seen == [40, 80, 120]


def test_log_callback_receives_losses(smooth_small):
    pdata, cfg, system = smooth_small
    rows = []
    trainer.train_on_system(system, pdata, cfg,
                            log=lambda ep, stats: rows.append((ep, stats)))
    assert rows
    ep, stats = rows[-1]
    assert ep == cfg.epochs
    assert set(stats) == {"loss1", "loss2", "loss3", "l2_u"}


def test_resampling_interior_keeps_training_stable():
    pdata = problems.smooth_2d()
    cfg = RunConfig(epochs=60, interior_sources=25, interior_lattice=10,
                    boundary_sources_per_edge=6, checks_per_edge=3,
                    boundary_order=8, boundary_panels=2, seed=2,
                    resample_interior=True)
    res = trainer.train(pdata, cfg)
    assert np.all(np.isfinite(res.metrics.loss2))
    assert res.metrics.wall_time > 0


def test_snapshot_restore_resumes_identically(smooth_small):
    pdata, cfg, system = smooth_small
    p1 = network.init_from_rng(np.random.default_rng(5), 10, 2)
    p2 = network.init_from_rng(np.random.default_rng(6), 10, 2)
    th3 = np.random.default_rng(7).normal(size=5)
    o1 = trainer.Adam(len(p1))
    o2 = trainer.Adam(len(p2))
    o3 = trainer.Adam(len(th3))
    o1.step(p1.theta, np.ones(len(p1)))
    snap = trainer._snapshot(p1, p2, th3, o1, o2, o3, None, epoch=17)
    p1.theta += 1.0
    th3 *= -2.0
    o1.step(p1.theta, np.ones(len(p1)))
    trainer._restore(snap, p1, p2, th3, o1, o2, o3, None)
    assert np.array_equal(p1.theta, snap["theta1"])
    assert np.array_equal(th3, snap["theta3"])
    assert o1.t == 1
