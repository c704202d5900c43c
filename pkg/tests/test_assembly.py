import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bieinv import assembly, geometry, problems
from bieinv.config import RunConfig
from bieinv.errors import DataError, GeometryError


def _cfg(**kw):
    base = dict(boundary_sources_per_edge=10, checks_per_edge=5,
                interior_sources=40, boundary_order=10, boundary_panels=4,
                interior_lattice=16, margin=0.03)
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture(scope="module", params=["harmonic_const", "harmonic_linear", "harmonic_saddle"])
def harmonic_system(request):
    pdata = problems.make_problem(request.param)
    rng = np.random.default_rng(0)
    return pdata, assembly.build_system(pdata, _cfg(), rng)


def test_harmonic_data_has_vanishing_boundary_residual(harmonic_system):
    """Pure boundary data of a Laplace solution must close the identity
    without any volume term, so F itself is the residual."""
    _, system = harmonic_system
    assert np.max(np.abs(system.F)) < 1e-6


def test_harmonic_interior_reconstruction(harmonic_system):
    pdata, system = harmonic_system
    rng = np.random.default_rng(7)
    probes = 0.1 + 0.8 * rng.uniform(size=(20, 2))
    u_hat = assembly.interior_reconstruction(system.colloc, probes)
    u_ref = pdata.u_exact(probes)
    assert np.max(np.abs(u_hat - u_ref)) < 1e-5


def test_target_interior_matches_reconstruction(harmonic_system):
    """The trainer's dense path and the probe path agree on the same points."""
    _, system = harmonic_system
    y1 = np.random.default_rng(3).normal(size=len(system.Xq))
    T = system.target_interior(y1)
    direct = assembly.interior_reconstruction(system.colloc, system.colloc.Xp, y1)
    assert np.allclose(T, direct, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(alpha=st.floats(-2.0, 3.0))
def test_residual_is_affine_in_the_source(alpha):
    """R1(a*y + (1-a)*z) == a*R1(y) + (1-a)*R1(z) for any affine combination."""
    F = np.array([1.0, -2.0, 0.5])
    K1 = np.arange(12.0).reshape(3, 4)
    y = np.array([1.0, 0.0, -1.0, 2.0])
    z = np.array([0.5, 1.5, 1.0, -0.5])
    mixed = assembly.residual_r1_values(F, K1, alpha * y + (1 - alpha) * z)
    combo = (alpha * assembly.residual_r1_values(F, K1, y)
             + (1 - alpha) * assembly.residual_r1_values(F, K1, z))
    assert np.allclose(mixed, combo, atol=1e-10)


def test_check_set_len_and_fields():
    pdata = problems.make_problem("harmonic_linear")
    system = assembly.build_system(pdata, _cfg(checks_per_edge=3), np.random.default_rng(1))
    assert len(system.checks) == 3 * 4
    assert system.checks.pos.shape == (12, 2)
    assert system.checks.K.shape[0] == 12
    # boundary checks carry the free-term coefficient of an edge point
    assert np.allclose(system.checks.c, 0.5)


def test_smooth_problem_system_shapes():
    pdata = problems.smooth_2d()
    cfg = _cfg()
    system = assembly.build_system(pdata, cfg, np.random.default_rng(2))
    nb = 10 * 4
    nq = 16 * 16
    assert system.F.shape == (nb,)
    assert system.K1.shape == (nb, nq)
    assert system.K2.shape == (40, nq)
    assert system.B_int.shape == (40,)
    assert len(system.colloc.Q) == 10 * 4 * 4


def test_source_and_integration_sets_stay_staggered():
    pdata = problems.make_problem("harmonic_const")
    colloc = assembly.build_collocation(pdata, _cfg(), np.random.default_rng(0))
    gap = geometry.min_pair_distance(colloc.P.pos, colloc.Q.pos)
    assert gap > assembly.MIN_STAGGER
    gap_c = geometry.min_pair_distance(colloc.C.pos, colloc.Q.pos)
    assert gap_c > assembly.MIN_STAGGER


def test_interior_supervision_requires_data():
    pdata = problems.make_problem("harmonic_saddle")
    cfg = _cfg(use_interior_data=True)
    if pdata.interior_data() is None:
        with pytest.raises(DataError):
            assembly.build_system(pdata, cfg, np.random.default_rng(0))


def test_resample_interior_moves_points_but_keeps_shapes():
    pdata = problems.smooth_2d()
    cfg = _cfg()
    system = assembly.build_system(pdata, cfg, np.random.default_rng(5))
    before = system.colloc.Xp.copy()
    K2_before = system.K2.copy()
    system.resample_interior(pdata, np.random.default_rng(99), cfg.margin)
    assert system.colloc.Xp.shape == before.shape
    assert not np.allclose(system.colloc.Xp, before)
    assert system.K2.shape == K2_before.shape
    assert not np.allclose(system.K2, K2_before)
    # moved rows must still agree with a from-scratch reconstruction
    y1 = np.random.default_rng(1).normal(size=len(system.Xq))
    direct = assembly.interior_reconstruction(system.colloc, system.colloc.Xp, y1)
    assert np.allclose(system.target_interior(y1), direct, atol=1e-12)


def test_source_free_reconstruction_equals_zero_source():
    pdata = problems.make_problem("harmonic_saddle")
    system = assembly.build_system(pdata, _cfg(), np.random.default_rng(4))
    probes = np.array([[0.3, 0.3], [0.6, 0.2]])
    a = assembly.interior_reconstruction(system.colloc, probes)
    b = assembly.interior_reconstruction(system.colloc, probes, np.zeros(len(system.Xq)))
    assert np.allclose(a, b)
