"""Shared fixtures: tiny configs and problems reused across test modules."""

import numpy as np
import pytest

from bieinv.config import RunConfig
from bieinv import problems


@pytest.fixture(scope="session")
def smooth_problem():
    return problems.smooth_2d()


@pytest.fixture
def tiny_cfg(tmp_path):
    """A config small enough for sub-second training runs."""
    return RunConfig(
        epochs=60,
        interior_sources=30,
        interior_lattice=12,
        boundary_sources_per_edge=6,
        checks_per_edge=3,
        boundary_order=8,
        boundary_panels=2,
        eval_grid=8,
        recovery_epochs=300,
        checkpoint_every=20,
        plots=False,
        out_dir=str(tmp_path / "out"),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(42)
