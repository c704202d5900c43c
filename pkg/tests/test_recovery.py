import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bieinv import geometry, problems, recovery
from bieinv.config import RunConfig
from bieinv.errors import ConfigurationError, NumericError


def test_weighted_median_plain():
    assert recovery.weighted_median([3.0, 1.0, 2.0], [1, 1, 1]) == 2.0


def test_weighted_median_respects_weights():
    # the heavy value dominates half the total mass
    assert recovery.weighted_median([1.0, 10.0], [1.0, 3.0]) == 10.0
    assert recovery.weighted_median([1.0, 10.0], [3.0, 1.0]) == 1.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=25))
def test_weighted_median_with_unit_weights_is_an_element(vals):
    m = recovery.weighted_median(vals, np.ones(len(vals)))
    assert m in vals
    below = sum(v < m for v in vals)
    above = sum(v > m for v in vals)
    assert below <= len(vals) / 2 and above <= len(vals) / 2


def _recover_cfg(**kw):
    base = dict(recovery_epochs=2500, recovery_lr=3e-3, recovery_seed=5)
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def lattice16():
    X, _ = geometry.interior_lattice("unit_square", 16)
    return X


def test_constant_medium_round_trip(lattice16):
    """eps = 2, u = x^2 + y^2: the pointwise balance has the constant as its
    only consistent scale once the anchor fixes one point."""
    med = recovery.recover_smooth(
        g_net=lambda X: np.full(len(X), -4.0),
        u_net=lambda X: 2.0 * X,
        f=lambda X: np.full(len(X), -8.0),
        anchor=(np.array([0.25, 0.25]), 2.0),
        cfg=_recover_cfg(),
        points=lattice16)
    vals = med(lattice16)
    assert np.max(np.abs(vals - 2.0)) / 2.0 < 0.05
    assert med.positivity_fraction is None


def test_smooth_pair_round_trip(lattice16):
    """The variable-coefficient pair with f = 0; exact inputs in, medium out."""
    pd = problems.smooth_2d()
    anchor_x = np.array([0.5, 0.5])
    med = recovery.recover_smooth(
        g_net=lambda X: pd.g_exact(X),
        u_net=lambda X: pd.grad_u_exact(X),
        f=None,
        anchor=(anchor_x, float(pd.eps_exact(anchor_x[None, :])[0])),
        cfg=_recover_cfg(recovery_epochs=4000),
        points=lattice16,
        check_grid=lattice16)
    ref = pd.eps_exact(lattice16)
    err = np.linalg.norm(med(lattice16) - ref) / np.linalg.norm(ref)
    assert err < 0.08
    assert med.positivity_fraction == 0.0


def test_linear_parametrization_round_trip(lattice16):
    pd = problems.smooth_2d()
    anchor_x = np.array([0.5, 0.5])
    med = recovery.recover_smooth(
        g_net=lambda X: pd.g_exact(X),
        u_net=lambda X: pd.grad_u_exact(X),
        f=None,
        anchor=(anchor_x, float(pd.eps_exact(anchor_x[None, :])[0])),
        cfg=_recover_cfg(recovery_parametrization="linear", recovery_epochs=4000),
        points=lattice16)
    ref = pd.eps_exact(lattice16)
    err = np.linalg.norm(med(lattice16) - ref) / np.linalg.norm(ref)
    assert err < 0.10


def test_smooth_recovery_needs_anchor(lattice16):
    with pytest.raises(ConfigurationError):
        recovery.recover_smooth(lambda X: np.zeros(len(X)), lambda X: X, None,
                                None, _recover_cfg(), lattice16)


def test_exp_parametrization_rejects_nonpositive_anchor(lattice16):
    with pytest.raises(ConfigurationError):
        recovery.recover_smooth(lambda X: np.zeros(len(X)), lambda X: X, None,
                                (np.array([0.5, 0.5]), -1.0), _recover_cfg(),
                                lattice16)


# piecewise: two horizontal bands
LOWER = lambda X: X[:, 1] < 0.5
UPPER = lambda X: X[:, 1] >= 0.5


def test_piecewise_exact_ratio(lattice16):
    """g = f/eps per band, so the medians reproduce (10, 5) exactly."""
    def g(X):
        return np.where(X[:, 1] < 0.5, 1.0 / 10.0, 1.0 / 5.0)

    med = recovery.recover_piecewise(g, None, 1.0, [LOWER, UPPER], points=lattice16)
    assert med.region_values == pytest.approx([10.0, 5.0])
    vals = med(np.array([[0.3, 0.2], [0.3, 0.8]]))
    assert vals.tolist() == [10.0, 5.0]


def test_piecewise_scalar_source_and_constant_g(lattice16):
    med = recovery.recover_piecewise(lambda X: np.full(len(X), 0.2), None, 1.0,
                                     [lambda X: np.ones(len(X), dtype=bool)],
                                     points=lattice16)
    assert med.region_values == pytest.approx([5.0])


def test_piecewise_median_rejects_outliers(lattice16):
    rng = np.random.default_rng(0)

    def g(X):
        base = np.full(len(X), 0.5)
        # corrupt a tenth of the nodes badly; the median must not move much
        k = rng.choice(len(X), size=len(X) // 10, replace=False)
        base[k] = 50.0
        return base

    med = recovery.recover_piecewise(g, None, 1.0,
                                     [lambda X: np.ones(len(X), dtype=bool)],
                                     points=lattice16)
    assert med.region_values[0] == pytest.approx(2.0, rel=1e-6)


def test_piecewise_noise_robustness(lattice16):
    """1% multiplicative noise moves each band estimate by well under 2%."""
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(20):
        noise = 1.0 + 0.01 * rng.standard_normal(len(lattice16))

        def g(X, noise=noise):
            return np.where(X[:, 1] < 0.5, 0.1, 0.2) * noise

        med = recovery.recover_piecewise(g, None, 1.0, [LOWER, UPPER],
                                         points=lattice16)
        worst = max(worst,
                    abs(med.region_values[0] - 10.0) / 10.0,
                    abs(med.region_values[1] - 5.0) / 5.0)
    assert worst < 0.02


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(0.1, 50.0))
def test_piecewise_scale_invariance(scale):
    """Scaling f and g together leaves the recovered medium unchanged."""
    X, _ = geometry.interior_lattice("unit_square", 8)
    base = recovery.recover_piecewise(
        lambda P: np.full(len(P), 0.25), None, 1.0,
        [lambda P: np.ones(len(P), dtype=bool)], points=X)
    scaled = recovery.recover_piecewise(
        lambda P: scale * np.full(len(P), 0.25), None,
        lambda P: np.full(len(P), scale), [lambda P: np.ones(len(P), dtype=bool)],
        points=X)
    assert scaled.region_values[0] == pytest.approx(base.region_values[0], rel=1e-12)


def test_piecewise_needs_points():
    with pytest.raises(ConfigurationError):
        recovery.recover_piecewise(lambda X: np.ones(len(X)), None, 1.0, [LOWER])


def test_piecewise_thin_region_rejected(lattice16):
    thin = lambda X: X[:, 1] > 100.0
    with pytest.raises(ConfigurationError) as err:
        recovery.recover_piecewise(lambda X: np.ones(len(X)), None, 1.0,
                                   [LOWER, thin], points=lattice16)
    assert "region 1" in str(err.value)


def test_piecewise_vanishing_source_rejected(lattice16):
    with pytest.raises(NumericError):
        recovery.recover_piecewise(lambda X: np.zeros(len(X)), None, 1.0,
                                   [LOWER, UPPER], points=lattice16)


def test_piecewise_pinned_region_skips_estimation(lattice16):
    med = recovery.recover_piecewise(
        lambda X: np.full(len(X), 0.2), None, 1.0, [LOWER, UPPER],
        anchor_region_values={0: 7.0}, points=lattice16)
    assert med.region_values[0] == 7.0
    assert med.region_values[1] == pytest.approx(5.0)


def test_evaluator_rejects_unclaimed_points(lattice16):
    med = recovery.recover_piecewise(lambda X: np.full(len(X), 0.5), None, 1.0,
                                     [lambda X: X[:, 0] < 0.5],
                                     points=lattice16[lattice16[:, 0] < 0.5])
    with pytest.raises(ConfigurationError) as err:
        med(np.array([[0.9, 0.5]]))
    assert "0.9" in str(err.value)


def test_first_matching_region_wins(lattice16):
    both = recovery.recover_piecewise(
        lambda X: np.where(X[:, 1] < 0.5, 0.5, 0.25), None, 1.0,
        [LOWER, lambda X: np.ones(len(X), dtype=bool)], points=lattice16)
    # the catch-all region only sees what the first one left over
    assert both(np.array([[0.5, 0.25]]))[0] == pytest.approx(2.0)
    assert both(np.array([[0.5, 0.75]]))[0] == pytest.approx(4.0)
