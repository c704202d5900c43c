"""Command-line entry point.

Verbs: run (one experiment), convergence (boundary-count ladder study),
forward (finite-difference data generation), check (fast invariant suite).
Exit codes: 0 success, 2 configuration error, 3 data/ingestion error,
4 training abort, 1 anything else.
"""

import argparse
import sys

from . import runner
from ._version import __version__
from .config import load_config
from .errors import ConfigurationError, DataError, IngestionError, TrainingDiverged
from .problems import REFERENCE_ERRORS


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="bieinv",
        description="Boundary-integral inverse solver for elliptic media")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, text in (("run", "run one inverse experiment"),
                       ("convergence", "run the boundary-count ladder study"),
                       ("forward", "generate boundary data with the FDM solver"),
                       ("check", "run the fast invariant suite")):
        p = sub.add_parser(verb, help=text)
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--seed", type=int, default=None, help="override train.seed")
        p.add_argument("--out-dir", default=None, help="override output.dir")
        p.add_argument("--no-discriminator", action="store_true",
                       help="disable the feedback stage (train.feedback = 0)")
        p.add_argument("--resample-interior", action="store_true",
                       help="redraw interior points every epoch")
    return parser


def _progress(ep, stats):
    line = (f"epoch {ep}: loss1 {stats['loss1']:.3e} "
            f"loss2 {stats['loss2']:.3e} loss3 {stats['loss3']:.3e}")
    if stats.get("l2_u") is not None and stats["l2_u"] == stats["l2_u"]:
        line += f" l2_u {stats['l2_u']:.3e}"
    print(line, flush=True)


def _print_run_summary(res):
    print(f"wrote artifacts to {res.out_dir}")
    print(f"solution relative L2 error: {res.l2_u:.4e}")
    print(f"medium relative L2 error:   {res.l2_eps:.4e}")
    if res.l2_g == res.l2_g:
        print(f"source relative L2 error:   {res.l2_g:.4e}")
    if res.pdata.name == "smooth_2d":
        for field in ("solution", "medium"):
            ctx = ", ".join(f"{k} {v}" for k, v in REFERENCE_ERRORS[field].items())
            print(f"published {field} errors for this case: {ctx}")


def main(argv=None):
    args = _build_parser().parse_args(argv)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    if args.no_discriminator:
        overrides["feedback"] = 0.0
    if args.resample_interior:
        overrides["resample_interior"] = True
    try:
        cfg = load_config(args.config, overrides)
        if args.verb == "run":
            res = runner.run_experiment(cfg, log=_progress)
            _print_run_summary(res)
        elif args.verb == "convergence":
            summary = runner.run_convergence_study(cfg, log=print)
            flag = " (degenerate fit)" if summary["degenerate"] else ""
            print(f"fitted log-log slope of l2_u vs m_b: "
                  f"{summary['slope']:.3f}{flag}")
        elif args.verb == "forward":
            info = runner.run_forward(cfg)
            print(f"forward solve on {info['nodes']} nodes at h={info['h']:g}; "
                  f"flux balance {info['flux_balance']:.3e}")
        else:
            return 0 if runner.run_check() else 1
        return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DataError, IngestionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except TrainingDiverged as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
