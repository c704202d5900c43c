"""Experiment orchestration: run, evaluate, and write artifacts.

A run is build -> train -> recover -> evaluate. Every run directory gets
metrics.csv (per-epoch losses and errors), field_u.csv / field_eps.csv,
network snapshots, a manifest with the config hash, and (when matplotlib is
importable) static plots. All floating-point CSV values are written with a
fixed format so reruns with the same config and seed are byte-identical.
"""

import csv
import json
import pathlib
import time
import warnings

import numpy as np
from scipy.spatial import cKDTree

from . import assembly, forward_fdm, network, problems, recovery, trainer
from ._backend import BACKEND
from ._version import __version__
from .config import load_config
from .errors import ConfigurationError, DataError, IngestionError, TrainingDiverged
from .geometry import Domain, interior_lattice
from .problems import make_problem

FLOAT_FMT = "%.12e"


def _fmt(v):
    return FLOAT_FMT % float(v)


def evaluation_grid(kind, n):
    """Cell-center lattice restricted to the domain interior."""
    X, _ = interior_lattice(kind, n)
    return X


def write_metrics_csv(path, metrics):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss1", "loss2", "loss3", "l2_u", "l2_eps"])
        for i in range(len(metrics.epoch)):
            w.writerow([int(metrics.epoch[i]), _fmt(metrics.loss1[i]),
                        _fmt(metrics.loss2[i]), _fmt(metrics.loss3[i]),
                        _fmt(metrics.l2_u[i]), _fmt(metrics.l2_eps[i])])


def write_field_csv(path, X, values, reference=None):
    X = np.atleast_2d(X)
    d = X.shape[1]
    ref = (np.full(len(X), np.nan) if reference is None
           else np.asarray(reference, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z"][:d] + ["value", "reference", "abs_error"])
        for i in range(len(X)):
            w.writerow([_fmt(c) for c in X[i]]
                       + [_fmt(values[i]), _fmt(ref[i]),
                          _fmt(abs(values[i] - ref[i]))])


def _plane_slices(dim_n):
    # fixed axis index -> name built from the two free axes
    names = {2: "x1x2", 1: "x1x3", 0: "x2x3"}
    axes = (np.arange(dim_n) + 0.5) / dim_n
    out = []
    for fixed, name in names.items():
        u, v = np.meshgrid(axes, axes, indexing="ij")
        X = np.empty((dim_n * dim_n, 3))
        free = [k for k in range(3) if k != fixed]
        X[:, free[0]] = u.ravel()
        X[:, free[1]] = v.ravel()
        X[:, fixed] = 0.5
        out.append((name, X))
    return out


def _write_plots(out_dir, metrics, Xg, u_vals, u_ref, eps_vals, eps_ref, dim):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except Exception:
        return False
    fig, ax = plt.subplots(figsize=(6, 4))
    e = metrics.epoch
    for series, label in ((metrics.loss1, "loss1"), (metrics.loss2, "loss2"),
                          (metrics.loss3, "loss3")):
        if np.isfinite(series).any():
            ax.semilogy(e, series, label=label)
    if np.isfinite(metrics.l2_u).any():
        ax.semilogy(e, metrics.l2_u, label="l2_u", linestyle="--")
    ax.set_xlabel("epoch")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "losses.png", dpi=120)
    plt.close(fig)
    if dim == 2:
        fig, axes = plt.subplots(2, 2, figsize=(9, 7))
        panels = [(u_vals, "u recovered"), (u_ref, "u reference"),
                  (eps_vals, "eps recovered"), (eps_ref, "eps reference")]
        for ax, (vals, title) in zip(axes.ravel(), panels):
            if vals is None:
                ax.axis("off")
                continue
            sc = ax.scatter(Xg[:, 0], Xg[:, 1], c=vals, s=8)
            fig.colorbar(sc, ax=ax)
            ax.set_title(title)
            ax.set_aspect("equal")
        fig.tight_layout()
        fig.savefig(out_dir / "fields.png", dpi=120)
        plt.close(fig)
    return True


def _problem_kwargs(cfg):
    if cfg.problem in ("piecewise_lshape", "cube_3d"):
        return {"h": cfg.fdm_h}
    return {}


def build_problem(cfg):
    pdata = make_problem(cfg.problem, **_problem_kwargs(cfg))
    report = None
    if cfg.data_file:
        pdata, report = problem_from_file(pdata, cfg.data_file)
    return pdata, report


def _pick_anchor(cfg, pdata, result):
    if cfg.anchor_point is not None:
        return np.asarray(cfg.anchor_point, dtype=float), float(cfg.anchor_value)
    if pdata.eps_exact is None:
        raise ConfigurationError(
            "smooth recovery needs an anchor: set problem.anchor_point and "
            "problem.anchor_value")
    P = result.system.colloc.P.pos
    _, J = network.forward_grad(result.p2, P)
    k = int(np.argmax(np.linalg.norm(J, axis=1)))
    return P[k].copy(), float(pdata.eps_exact(P[k][None, :])[0])


def recover_medium(cfg, pdata, result, check_grid=None):
    mode = cfg.recovery_mode
    if mode == "auto":
        mode = "piecewise" if pdata.regions else "smooth"
    if mode == "piecewise":
        if not pdata.regions:
            raise ConfigurationError(
                "piecewise recovery requested but the problem declares no regions")
        preds = [pred for _, pred in pdata.regions]
        return recovery.recover_piecewise(result.p1, result.p2, pdata.f, preds,
                                          points=result.system.Xq)
    anchor = _pick_anchor(cfg, pdata, result)
    return recovery.recover_smooth(result.p1, result.p2, pdata.f, anchor, cfg,
                                   points=result.system.Xq, check_grid=check_grid)


class RunResult:
    def __init__(self, cfg, pdata, train_result, medium, l2_u, l2_eps, l2_g,
                 out_dir, manifest):
        self.cfg = cfg
        self.pdata = pdata
        self.train_result = train_result
        self.medium = medium
        self.l2_u = l2_u
        self.l2_eps = l2_eps
        self.l2_g = l2_g
        self.out_dir = out_dir
        self.manifest = manifest


def _manifest_base(cfg, status):
    return {
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "code_version": __version__,
        "backend": BACKEND,
        "status": status,
    }


def _write_manifest(out_dir, manifest):
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def run_experiment(cfg, log=None):
    """Execute one full inverse run and write its artifacts.

    Raises TrainingDiverged (after flushing partial metrics) if training
    aborts; other validation problems raise their usual error types.
    """
    t0 = time.perf_counter()
    out_dir = pathlib.Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pdata, ingest_report = build_problem(cfg)
    dom = Domain(pdata.kind)
    Xg = evaluation_grid(pdata.kind, cfg.eval_grid)
    u_ref = pdata.u_ref(Xg)
    eps_ref = pdata.eps_exact(Xg) if pdata.eps_exact is not None else None
    eval_ctx = trainer.EvalContext(Xg, u_ref=u_ref, eps_ref=eps_ref)

    try:
        result = trainer.train(pdata, cfg, eval_ctx=eval_ctx, log=log)
    except TrainingDiverged as exc:
        if exc.metrics is not None:
            write_metrics_csv(out_dir / "metrics.csv", exc.metrics)
        manifest = _manifest_base(cfg, "diverged")
        manifest["error"] = str(exc)
        manifest["wall_time_s"] = time.perf_counter() - t0
        _write_manifest(out_dir, manifest)
        raise

    medium = recover_medium(cfg, pdata, result, check_grid=Xg)
    metrics = result.metrics

    u_vals = network.forward(result.p2, Xg)
    eps_vals = medium(Xg)
    l2_u = trainer.rel_l2(u_vals, u_ref) if u_ref is not None else float("nan")
    l2_eps = (trainer.rel_l2(eps_vals, eps_ref)
              if eps_ref is not None else float("nan"))
    if pdata.g_exact is not None:
        Xq = result.system.Xq
        l2_g = trainer.rel_l2(network.forward(result.p1, Xq), pdata.g_exact(Xq))
    else:
        l2_g = float("nan")
    metrics.final_l2_u = l2_u
    metrics.final_l2_eps = l2_eps
    if len(metrics.l2_eps):
        metrics.l2_eps[-1] = l2_eps

    write_metrics_csv(out_dir / "metrics.csv", metrics)
    write_field_csv(out_dir / "field_u.csv", Xg, u_vals, u_ref)
    write_field_csv(out_dir / "field_eps.csv", Xg, eps_vals, eps_ref)
    if dom.d == 3:
        for name, Xs in _plane_slices(cfg.eval_grid):
            us = network.forward(result.p2, Xs)
            ur = pdata.u_ref(Xs)
            write_field_csv(out_dir / f"field_u_{name}.csv", Xs, us, ur)
            es = medium(Xs)
            er = pdata.eps_exact(Xs) if pdata.eps_exact is not None else None
            write_field_csv(out_dir / f"field_eps_{name}.csv", Xs, es, er)
    network.save_snapshot(result.p1, out_dir / "net_source.txt")
    network.save_snapshot(result.p2, out_dir / "net_solution.txt")
    if medium.params is not None:
        network.save_snapshot(medium.params, out_dir / "net_medium.txt")

    plots = False
    if cfg.plots:
        plots = _write_plots(out_dir, metrics, Xg, u_vals, u_ref, eps_vals,
                             eps_ref, dom.d)

    manifest = _manifest_base(cfg, "ok")
    manifest.update({
        "problem": pdata.name,
        "wall_time_s": metrics.wall_time,
        "l2_u": l2_u,
        "l2_eps": l2_eps,
        "l2_g": l2_g,
        "lr_halvings": result.lr_halvings,
        "plots": plots,
        "benchmark_context": problems.REFERENCE_ERRORS
            if pdata.name == "smooth_2d" else None,
        "medium_positivity_fraction": medium.positivity_fraction,
        "ingestion": ingest_report,
    })
    _write_manifest(out_dir, manifest)
    return RunResult(cfg, pdata, result, medium, l2_u, l2_eps, l2_g, out_dir,
                     manifest)


# convergence study


def _rung_sizes(cfg, m_b):
    # interior count scales as m_b^(d/(d-1)); in 2D that is quadratic
    per_edge = max(1, int(round(m_b / 4)))
    m_i = max(8, int(round(cfg.interior_scale * m_b * m_b)))
    lattice = max(8, int(round(3.2 * np.sqrt(m_i))))
    return 4 * per_edge, per_edge, m_i, lattice


def run_convergence_study(cfg, log=None):
    """Train across the boundary-count ladder and fit the log-log error slope.

    Writes convergence.csv (per-rung means), convergence_trials.csv and
    convergence_summary.json into the output directory; returns the summary.
    """
    if len(cfg.ladder) < 3:
        raise ConfigurationError(
            f"convergence.ladder needs at least 3 rungs, got {list(cfg.ladder)}")
    if any(b >= a for a, b in zip(cfg.ladder[1:], cfg.ladder[:-1])):
        raise ConfigurationError(
            f"convergence.ladder must be strictly increasing, got {list(cfg.ladder)}")
    out_dir = pathlib.Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pdata, _ = build_problem(cfg)
    Xg = evaluation_grid(pdata.kind, cfg.eval_grid)
    u_ref = pdata.u_ref(Xg)
    eps_ref = pdata.eps_exact(Xg) if pdata.eps_exact is not None else None
    eval_ctx = trainer.EvalContext(Xg, u_ref=u_ref, eps_ref=eps_ref)

    trial_rows = []
    mean_rows = []
    for m_b in cfg.ladder:
        mb_actual, per_edge, m_i, lattice = _rung_sizes(cfg, m_b)
        per_trial = []
        for t in range(cfg.trials):
            rcfg = cfg.replace(
                boundary_sources_per_edge=per_edge, interior_sources=m_i,
                interior_lattice=lattice, epochs=cfg.convergence_epochs,
                seed=cfg.seed + t)
            result = trainer.train(pdata, rcfg, eval_ctx=eval_ctx)
            loss = float(result.metrics.loss1[-1])
            l2_u = float(result.metrics.final_l2_u)
            try:
                medium = recover_medium(rcfg, pdata, result)
                l2_eps = (trainer.rel_l2(medium(Xg), eps_ref)
                          if eps_ref is not None else float("nan"))
            except (ConfigurationError, DataError):
                l2_eps = float("nan")
            per_trial.append((loss, l2_u, l2_eps))
            trial_rows.append((mb_actual, m_i, rcfg.seed, loss, l2_u, l2_eps))
            if log is not None:
                log(f"m_b={mb_actual} trial={t} loss={loss:.3e} "
                    f"l2_u={l2_u:.3e} l2_eps={l2_eps:.3e}")
        arr = np.array(per_trial)
        means = np.nanmean(arr, axis=0)
        mean_rows.append((mb_actual, m_i, means[0], means[1], means[2]))

    with open(out_dir / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m_b", "m_i", "loss", "l2_u", "l2_eps"])
        for mb, mi, loss, l2u, l2e in mean_rows:
            w.writerow([mb, mi, _fmt(loss), _fmt(l2u), _fmt(l2e)])
    with open(out_dir / "convergence_trials.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m_b", "m_i", "seed", "loss", "l2_u", "l2_eps"])
        for mb, mi, seed, loss, l2u, l2e in trial_rows:
            w.writerow([mb, mi, seed, _fmt(loss), _fmt(l2u), _fmt(l2e)])

    mbs = np.array([r[0] for r in mean_rows], dtype=float)
    errs = np.array([r[3] for r in mean_rows], dtype=float)
    log_mb = np.log(mbs)
    log_err = np.log(np.maximum(errs, 1e-300))
    slope, intercept = np.polyfit(log_mb, log_err, 1)
    fit = slope * log_mb + intercept
    dof = max(len(mbs) - 2, 1)
    stderr = float(np.sqrt(np.sum((log_err - fit) ** 2) / dof
                           / np.sum((log_mb - log_mb.mean()) ** 2)))
    degenerate = bool(np.ptp(log_err) < 0.05)
    summary = {
        "slope": float(slope),
        "intercept": float(intercept),
        "slope_stderr": stderr,
        "degenerate": degenerate,
        "quantity": "l2_u",
        "rungs": [{"m_b": int(r[0]), "m_i": int(r[1]), "loss": r[2],
                   "l2_u": r[3], "l2_eps": r[4]} for r in mean_rows],
        "config_hash": cfg.hash(),
        "code_version": __version__,
    }
    with open(out_dir / "convergence_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


# boundary data ingestion


def _project_param_2d(seg, pos, tol=1e-6):
    direction = (seg.b - seg.a) / seg.length
    t = float((pos - seg.a) @ direction)
    foot = seg.a + t * direction
    if not (-tol <= t <= seg.length + tol) or np.linalg.norm(pos - foot) > tol:
        return None
    return min(max(t, 0.0), seg.length)


def _project_param_3d(face, pos, tol=1e-6):
    rel = pos - face.origin
    s = float(rel @ face.udir)
    t = float(rel @ face.vdir)
    off = abs(float(rel @ face.normal))
    if off > tol or not (-tol <= s <= face.ulen + tol) or not (-tol <= t <= face.vlen + tol):
        return None
    return (min(max(s, 0.0), face.ulen), min(max(t, 0.0), face.vlen))


def ingest_boundary_data(path, kind):
    """Parse and validate a boundary data CSV.

    Expects a header `x,y[,z],u,q,segment`. Rows are projected onto their
    declared segment's parameter; duplicates resolve last-wins with a
    warning. Returns ({segment: (params, u, q)}, report dict).
    """
    dom = Domain(kind)
    segs = {s.seg_id: s for s in dom.segments}
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IngestionError(f"cannot read data file {path}: {exc}")
    if not rows:
        raise IngestionError(f"{path}: empty file")
    header = [h.strip().lower() for h in rows[0]]
    needed = ["x", "y"] + (["z"] if dom.d == 3 else []) + ["u", "q", "segment"]
    for col in needed:
        if col not in header:
            raise IngestionError(f"{path}: missing column {col!r}")
    ix = {c: header.index(c) for c in needed}

    per_seg = {sid: {} for sid in segs}
    duplicates = 0
    for rno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            pos = np.array([float(row[ix[c]]) for c in needed[:dom.d]])
            uval = float(row[ix["u"]])
            qval = float(row[ix["q"]])
            sid = int(float(row[ix["segment"]]))
        except (ValueError, IndexError):
            raise IngestionError(f"{path}: row {rno}: cannot parse values")
        if not (np.isfinite(pos).all() and np.isfinite(uval) and np.isfinite(qval)):
            raise IngestionError(f"{path}: row {rno}: non-finite entry")
        if sid not in segs:
            raise IngestionError(f"{path}: row {rno}: unknown segment {sid}")
        par = (_project_param_2d(segs[sid], pos) if dom.d == 2
               else _project_param_3d(segs[sid], pos))
        if par is None:
            raise IngestionError(
                f"{path}: row {rno}: point {pos.tolist()} does not lie on "
                f"segment {sid}")
        key = (round(par, 12) if dom.d == 2
               else (round(par[0], 12), round(par[1], 12)))
        if key in per_seg[sid]:
            duplicates += 1
        per_seg[sid][key] = (par, uval, qval, rno)

    tables = {}
    for sid, seg in segs.items():
        entries = list(per_seg[sid].values())
        if not entries:
            raise IngestionError(f"{path}: segment {sid} has no data rows")
        if dom.d == 2:
            entries.sort(key=lambda e: e[0])
            params = np.array([e[0] for e in entries])
            spacing = seg.length / len(params)
            gaps = np.diff(np.concatenate([[0.0], params, [seg.length]]))
            bad = np.flatnonzero(gaps > 1.5 * spacing)
            if len(bad):
                k = min(int(bad[0]), len(entries) - 1)
                raise IngestionError(
                    f"{path}: row {entries[k][3]}: coverage gap of "
                    f"{gaps[bad[0]]:.4g} on segment {sid} exceeds the node "
                    f"spacing {spacing:.4g}")
            tables[sid] = (params,
                           np.array([e[1] for e in entries]),
                           np.array([e[2] for e in entries]))
        else:
            pars = np.array([e[0] for e in entries])
            for axis, length in ((0, seg.ulen), (1, seg.vlen)):
                vals = np.unique(np.round(pars[:, axis], 12))
                spacing = length / len(vals)
                gaps = np.diff(np.concatenate([[0.0], vals, [length]]))
                if np.any(gaps > 1.5 * spacing):
                    raise IngestionError(
                        f"{path}: row {entries[0][3]}: coverage gap along "
                        f"axis {axis} of segment {sid}")
            tables[sid] = (pars,
                           np.array([e[1] for e in entries]),
                           np.array([e[2] for e in entries]))
    if duplicates:
        warnings.warn(f"{path}: {duplicates} duplicate boundary rows "
                      "(last occurrence wins)", stacklevel=2)
    report = {"rows": sum(len(v) for v in per_seg.values()),
              "duplicates": duplicates,
              "segments": {int(s): len(v) for s, v in per_seg.items()}}
    return tables, report


def _nearest_lookup_2d(tables, column):
    def lookup(pos, segment, param):
        out = np.empty(len(pos))
        par = np.asarray(param, dtype=float)
        for sid in np.unique(segment):
            m = segment == sid
            t = tables[int(sid)][0]
            v = tables[int(sid)][column]
            j = np.searchsorted(t, par[m])
            j = np.clip(j, 0, len(t) - 1)
            jl = np.maximum(j - 1, 0)
            pick = np.where(np.abs(t[j] - par[m]) <= np.abs(par[m] - t[jl]), j, jl)
            out[m] = v[pick]
        return out
    return lookup


def _nearest_lookup_3d(tables, column):
    trees = {sid: cKDTree(tab[0]) for sid, tab in tables.items()}
    def lookup(pos, segment, param):
        out = np.empty(len(pos))
        par = np.atleast_2d(param)
        for sid in np.unique(segment):
            m = segment == sid
            _, idx = trees[int(sid)].query(par[m])
            out[m] = tables[int(sid)][column][idx]
        return out
    return lookup


def problem_from_file(base, path):
    """Replace a problem's boundary data with an ingested CSV table."""
    dom = Domain(base.kind)
    tables, report = ingest_boundary_data(path, base.kind)
    make = _nearest_lookup_2d if dom.d == 2 else _nearest_lookup_3d
    pdata = problems.ProblemData(
        name=f"{base.name}+file", kind=base.kind,
        u_bar=make(tables, 1), q_bar=make(tables, 2), f=base.f,
        eps_exact=base.eps_exact, u_exact=base.u_exact, g_exact=base.g_exact,
        grad_u_exact=base.grad_u_exact, regions=base.regions,
        region_values=base.region_values, grid=base.grid)
    return pdata, report


# forward data generation and the quick invariant suite


def run_forward(cfg):
    """Solve the forward problem and export boundary data + fields."""
    out_dir = pathlib.Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid, eps_fn, f_fn = problems.forward_grid(cfg.problem, cfg.fdm_h)
    rows = forward_fdm.boundary_rows(grid)
    d = grid.X.shape[1]
    with open(out_dir / "boundary_data.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z"][:d] + ["u", "q", "segment"])
        for row in rows:
            w.writerow([_fmt(v) for v in row[:-1]] + [int(row[-1])])
    inside = grid.status != forward_fdm.OUTSIDE
    write_field_csv(out_dir / "forward_u.csv", grid.X[inside], grid.u[inside])
    balance = forward_fdm.flux_balance(grid, eps_fn, f_fn)
    info = {"problem": cfg.problem, "h": grid.h, "nodes": int(inside.sum()),
            "flux_balance": balance, "code_version": __version__}
    with open(out_dir / "forward_summary.json", "w") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return info


def run_check(log=print):
    """Fast invariant suite: quadrature identities, gradients, conservation."""
    checks = []

    pdata = make_problem("harmonic_saddle")
    cfg = load_config(overrides={"epochs": 1, "plots": False})
    rng = np.random.default_rng(0)
    system = assembly.build_system(pdata, cfg, rng)
    r1 = system.F - system.K1 @ np.zeros(len(system.Xq))
    checks.append(("harmonic boundary residual < 1e-3",
                   float(np.max(np.abs(r1))), np.max(np.abs(r1)) < 1e-3))

    probes = evaluation_grid(pdata.kind, 5)[:20]
    rec = assembly.interior_reconstruction(system.colloc, probes)
    err = float(np.max(np.abs(rec - pdata.u_exact(probes))))
    checks.append(("harmonic interior reconstruction < 2e-3", err, err < 2e-3))

    rng = np.random.default_rng(1)
    worst = 0.0
    h = 1e-5
    for _ in range(5):
        p = network.init_from_rng(rng, 6, 2)
        X = rng.uniform(0.05, 0.95, size=(7, 2))
        ybar = rng.normal(size=7)
        y, c = network.forward_cache(p, X)
        g = network.backward(p, X, c, ybar)
        fd = np.empty_like(g)
        for k in range(len(p)):
            tp = p.copy(); tp.theta[k] += h
            tm = p.copy(); tm.theta[k] -= h
            fd[k] = (network.forward(tp, X) @ ybar
                     - network.forward(tm, X) @ ybar) / (2 * h)
        worst = max(worst, np.linalg.norm(fd - g) / max(np.linalg.norm(fd), 1e-12))
    checks.append(("parameter gradients vs finite differences < 1e-5", worst,
                   worst < 1e-5))

    grid = forward_fdm.solve_forward(
        "unit_square", lambda P: np.ones(len(P)),
        lambda P: np.full(len(P), 2.0), lambda P: np.zeros(len(P)), 1.0 / 16.0)
    bal = forward_fdm.flux_balance(grid, lambda P: np.ones(len(P)),
                                   lambda P: np.full(len(P), 2.0))
    checks.append(("discrete flux balance < 1e-6", bal, bal < 1e-6))

    ok = True
    for name, value, passed in checks:
        ok &= bool(passed)
        if log is not None:
            log(f"[{'PASS' if passed else 'FAIL'}] {name} (value {value:.3e})")
    return ok
