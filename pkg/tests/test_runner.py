import csv
import json
import pathlib

import numpy as np
import pytest

from bieinv import config, forward_fdm, runner
from bieinv.errors import ConfigurationError, TrainingDiverged


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = config.RunConfig(
        epochs=60, interior_sources=30, interior_lattice=12,
        boundary_sources_per_edge=6, checks_per_edge=3, boundary_order=8,
        boundary_panels=2, eval_grid=8, recovery_epochs=400,
        checkpoint_every=20, plots=False, out_dir=str(out))
    return cfg, runner.run_experiment(cfg)


def test_run_writes_expected_artifacts(tiny_run):
    cfg, res = tiny_run
    out = pathlib.Path(cfg.out_dir)
    for name in ("metrics.csv", "field_u.csv", "field_eps.csv",
                 "net_source.txt", "net_solution.txt", "manifest.json"):
        assert (out / name).exists(), name


def test_metrics_csv_layout(tiny_run):
    cfg, res = tiny_run
    with open(pathlib.Path(cfg.out_dir) / "metrics.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "loss1", "loss2", "loss3", "l2_u", "l2_eps"]
    assert len(rows) - 1 == cfg.epochs
    assert int(rows[-1][0]) == cfg.epochs - 1
    # the final row carries the recovered-medium error
    assert float(rows[-1][5]) == pytest.approx(res.l2_eps)


def test_field_csv_layout(tiny_run):
    cfg, res = tiny_run
    with open(pathlib.Path(cfg.out_dir) / "field_u.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "y", "value", "reference", "abs_error"]
    assert len(rows) - 1 == cfg.eval_grid ** 2
    errs = np.array([float(r[4]) for r in rows[1:]])
    vals = np.array([float(r[2]) for r in rows[1:]])
    refs = np.array([float(r[3]) for r in rows[1:]])
    assert np.allclose(errs, np.abs(vals - refs))


def test_manifest_contents(tiny_run):
    cfg, res = tiny_run
    with open(pathlib.Path(cfg.out_dir) / "manifest.json") as fh:
        man = json.load(fh)
    assert man["status"] == "ok"
    assert man["config_hash"] == cfg.hash()
    assert man["l2_u"] == pytest.approx(res.l2_u)
    assert man["problem"] == "smooth_2d"
    assert man["benchmark_context"]["solution"]["ours"] == 0.0121
    assert man["seed"] == cfg.seed
    assert "wall_time_s" in man and "code_version" in man


def test_reported_errors_are_consistent(tiny_run):
    cfg, res = tiny_run
    assert res.l2_u == res.train_result.metrics.final_l2_u
    assert np.isfinite(res.l2_eps)
    assert res.medium.positivity_fraction is not None


def test_rerun_is_byte_identical(tiny_run, tmp_path):
    cfg, _ = tiny_run
    cfg2 = cfg.replace(out_dir=str(tmp_path / "again"))
    runner.run_experiment(cfg2)
    a = (pathlib.Path(cfg.out_dir) / "metrics.csv").read_bytes()
    b = (pathlib.Path(cfg2.out_dir) / "metrics.csv").read_bytes()
    assert a == b
    fa = (pathlib.Path(cfg.out_dir) / "field_u.csv").read_bytes()
    fb = (pathlib.Path(cfg2.out_dir) / "field_u.csv").read_bytes()
    assert fa == fb


def test_diverged_run_still_writes_manifest(tmp_path):
    cfg = config.RunConfig(
        epochs=40, interior_sources=20, interior_lattice=10,
        boundary_sources_per_edge=5, checks_per_edge=3, boundary_order=6,
        boundary_panels=2, eval_grid=6, plots=False, lr=1e8,
        out_dir=str(tmp_path / "blown"))
    with pytest.raises(TrainingDiverged):
        runner.run_experiment(cfg)
    with open(tmp_path / "blown" / "manifest.json") as fh:
        man = json.load(fh)
    assert man["status"] == "diverged"
    assert "error" in man
    assert (tmp_path / "blown" / "metrics.csv").exists()


def test_evaluation_grid_stays_inside():
    from bieinv import geometry
    for kind in ("unit_square", "l_shape", "unit_cube"):
        X = runner.evaluation_grid(kind, 6)
        assert geometry.Domain(kind).contains(X).all()


def test_rung_sizes_frozen():
    cfg = config.RunConfig()
    assert runner._rung_sizes(cfg, 16) == (16, 4, 16, 13)
    assert runner._rung_sizes(cfg, 32) == (32, 8, 64, 26)
    assert runner._rung_sizes(cfg, 64) == (64, 16, 256, 51)
    assert runner._rung_sizes(cfg, 128) == (128, 32, 1024, 102)


def test_convergence_ladder_validation(tmp_path):
    cfg = config.RunConfig(ladder=(8, 16), out_dir=str(tmp_path))
    with pytest.raises(ConfigurationError, match="at least 3"):
        runner.run_convergence_study(cfg)
    cfg = config.RunConfig(ladder=(8, 16, 16), out_dir=str(tmp_path))
    with pytest.raises(ConfigurationError, match="strictly increasing"):
        runner.run_convergence_study(cfg)


def test_tiny_convergence_study(tmp_path):
    cfg = config.RunConfig(
        ladder=(8, 12, 16), trials=1, convergence_epochs=40,
        checks_per_edge=3, boundary_order=6, boundary_panels=2,
        eval_grid=8, recovery_epochs=200, plots=False,
        out_dir=str(tmp_path / "study"))
    summary = runner.run_convergence_study(cfg)
    out = tmp_path / "study"
    assert (out / "convergence.csv").exists()
    assert (out / "convergence_trials.csv").exists()
    assert (out / "convergence_summary.json").exists()
    assert len(summary["rungs"]) == 3
    assert summary["quantity"] == "l2_u"
    assert np.isfinite(summary["slope"])
    with open(out / "convergence_trials.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["m_b", "m_i", "seed", "loss", "l2_u", "l2_eps"]
    assert len(rows) - 1 == 3 * cfg.trials


def test_run_forward_writes_ingestible_data(tmp_path):
    cfg = config.RunConfig(problem="smooth_2d", fdm_h=1.0 / 16.0,
                           out_dir=str(tmp_path / "fwd"), plots=False)
    info = runner.run_forward(cfg)
    out = tmp_path / "fwd"
    assert (out / "boundary_data.csv").exists()
    assert (out / "forward_u.csv").exists()
    assert info["flux_balance"] < 1e-6
    assert info["nodes"] > 0
    tables, report = runner.ingest_boundary_data(out / "boundary_data.csv",
                                                 "unit_square")
    assert set(tables) == {0, 1, 2, 3}
    assert report["duplicates"] == 0


def test_inverse_run_from_generated_data_file(tmp_path):
    fwd = config.RunConfig(problem="smooth_2d", fdm_h=1.0 / 32.0,
                           out_dir=str(tmp_path / "fwd"), plots=False)
    runner.run_forward(fwd)
    cfg = config.RunConfig(
        problem="smooth_2d", data_file=str(tmp_path / "fwd" / "boundary_data.csv"),
        epochs=50, interior_sources=25, interior_lattice=10,
        boundary_sources_per_edge=5, checks_per_edge=3, boundary_order=6,
        boundary_panels=2, eval_grid=6, recovery_epochs=200, plots=False,
        out_dir=str(tmp_path / "inv"))
    res = runner.run_experiment(cfg)
    assert res.manifest["ingestion"]["rows"] > 0
    assert res.pdata.name == "smooth_2d+file"
    assert np.isfinite(res.l2_u)


def test_run_check_all_pass(capsys):
    lines = []
    ok = runner.run_check(log=lines.append)
    assert ok is True
    assert len(lines) == 4
    assert all(line.startswith("[PASS]") for line in lines)
