"""Command-line interface.

Exit codes: 0 computed (possibly non-certified), 2 input error, 3 numerical
failure.  JSON goes to standard output with sorted keys.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import capacity, cpmap, fkdet, randmat, semicirc
from .errors import ConvergenceError, DomainError, SingularityError
from .io import InputError, dumps, kraus_document, load_document, load_matrix, write_csv

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _eps_list(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid broadening schedule {text!r}") from None
    if len(vals) < 1 or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("broadenings must be positive")
    return vals


def build_parser():
    parser = _Parser(prog="fkcap", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help="JSON input document (Kraus or Choi form)")
    common.add_argument("--config", help="JSON file overriding flag defaults")
    common.add_argument("--threads", type=int, default=1, help="worker threads (0 = all)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cap", parents=[common], help="capacity by operator scaling")
    p.add_argument("--tol", type=float, default=capacity.DEFAULT_TOL)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--oracle", action="store_true", help="also run the brute-force oracle (m <= 4)")
    p.add_argument("--seed", type=int, default=0, help="seed for oracle multi-starts")

    p = sub.add_parser("fkdet", parents=[common], help="Fuglede-Kadison determinant")
    p.add_argument("--route", choices=["capacity", "spectral", "both"], default="both")
    p.add_argument("--eps-schedule", type=_eps_list, default=list(semicirc.DEFAULT_EPS_SCHEDULE))
    p.add_argument("--grid-points", type=int, default=semicirc.DEFAULT_GRID_POINTS)
    p.add_argument("--tol", type=float, default=capacity.DEFAULT_TOL)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--check-corollary", action="store_true")

    p = sub.add_parser("density", parents=[common], help="spectral density of the hermitization")
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--grid-points", type=int, default=semicirc.DEFAULT_GRID_POINTS)
    p.add_argument("--csv", default=None)

    p = sub.add_parser("moments", parents=[common], help="moments from non-crossing pairings")
    p.add_argument("--kmax", type=int, default=5)

    p = sub.add_parser("randmat", parents=[common], help="Gaussian block random matrix experiment")
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default=None)

    p = sub.add_parser("scale", parents=[common], help="operator scaling {c1 a_i c2}")
    p.add_argument("--c1", default=None, help="JSON matrix file (identity if omitted)")
    p.add_argument("--c2", default=None, help="JSON matrix file (identity if omitted)")
    return parser


def _apply_config(parser, argv, args):
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise InputError(f"{args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise InputError(f"{args.config}: expected a JSON object")
    known = set(vars(args))
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(set(cfg) - known - {"command", "input", "config"})
    if unknown:
        raise InputError(f"{args.config}: unknown option(s) {', '.join(unknown)}")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    subparser.set_defaults(**{k: v for k, v in cfg.items() if k not in ("command", "input", "config")})
    return parser.parse_args(argv)


def _threads(n):
    return os.cpu_count() or 1 if n == 0 else max(1, n)


def _effective(args):
    return {k: v for k, v in sorted(vars(args).items())}


def _header(args, eta, label):
    return {
        "command": args.command,
        "config": _effective(args),
        "input": {"m": eta.m, "n": eta.n, "label": label, "integer": eta.integer_flag},
    }


def cmd_cap(args, eta, label):
    out = _header(args, eta, label)
    rep = capacity.estimate_capacity(eta, tol=args.tol, max_iters=args.max_iters)
    out["report"] = rep.to_dict()
    out["verdict"] = capacity.decide_rank_nondecreasing(eta).value
    if args.oracle:
        if eta.m > 4:
            out["oracle"] = None
            out["oracle_note"] = "oracle skipped: m > 4"
        else:
            orc = capacity.brute_force_capacity(eta, seed=args.seed)
            out["oracle"] = orc.to_dict()
            out["oracle_relative_gap"] = (
                abs(rep.cap_estimate - orc.value) / orc.value if orc.value > 0 else None
            )
    return out


def cmd_fkdet(args, eta, label):
    out = _header(args, eta, label)
    results = {}
    if args.route in ("capacity", "both"):
        results["capacity"] = fkdet.fk_det_capacity(eta, tol=args.tol, max_iters=args.max_iters)
    if args.route in ("spectral", "both"):
        results["spectral"] = fkdet.fk_det_spectral(
            eta, eps_schedule=args.eps_schedule, n_points=args.grid_points
        )
    out["results"] = {k: v.to_dict() for k, v in results.items()}
    if len(results) == 2:
        c, s = results["capacity"].value, results["spectral"].value
        out["relative_discrepancy"] = abs(s - c) / c if c > 0 else (0.0 if s == 0 else None)
    if args.check_corollary:
        if not eta.integer_flag:
            out["corollary"] = None
            out["corollary_note"] = "skipped: input entries are not all integers"
        else:
            out["corollary"] = fkdet.corollary_bound_check(
                eta, eps_schedule=args.eps_schedule, n_points=args.grid_points
            ).to_dict()
    return out


def cmd_density(args, eta, label):
    out = _header(args, eta, label)
    grid = semicirc.density(eta, n_points=args.grid_points, epsilon=args.eps)
    if args.csv:
        write_csv(args.csv, ["energy", "density"], zip(grid.energies.tolist(), grid.density.tolist()))
    out["summary"] = {
        "epsilon": grid.epsilon,
        "grid_points": int(grid.energies.size),
        "mass": grid.mass,
        "support_radius": grid.support_radius,
        "atom_at_zero": semicirc.atom_at_zero(eta),
        "failed_points": grid.n_failed,
    }
    return out


def cmd_moments(args, eta, label):
    if not 0 <= args.kmax <= 10:
        raise InputError("--kmax must lie in [0, 10]")
    out = _header(args, eta, label)
    out["hermitized"] = not eta.is_selfadjoint
    out["table"] = semicirc.moment_table(eta, args.kmax).to_dict()
    return out


def cmd_randmat(args, eta, label):
    out = _header(args, eta, label)
    cfg = randmat.McConfig(N=args.N, trials=args.trials, seed=args.seed, eta=eta)
    rep = randmat.run_experiment(cfg, threads=_threads(args.threads))
    if args.csv:
        write_csv(
            args.csv,
            ["trial", "N", "logdelta"],
            ((t, args.N, v) for t, v in enumerate(rep.per_trial_logdelta)),
        )
    out["report"] = rep.to_dict()
    return out


def cmd_scale(args, eta, label):
    m = eta.m
    c1 = load_matrix(args.c1, m) if args.c1 else np.eye(m)
    c2 = load_matrix(args.c2, m) if args.c2 else np.eye(m)
    new = cpmap.scale(eta, c1, c2)
    return kraus_document(new, label=f"scaled({label})" if label else "scaled")


COMMANDS = {
    "cap": cmd_cap,
    "fkdet": cmd_fkdet,
    "density": cmd_density,
    "moments": cmd_moments,
    "randmat": cmd_randmat,
    "scale": cmd_scale,
}


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    try:
        if args.config:
            args = _apply_config(parser, argv, args)
        eta, label = load_document(args.input)
        out = COMMANDS[args.command](args, eta, label)
    except (InputError, DomainError) as exc:
        print(f"fkcap: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, SingularityError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"fkcap: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    sys.stdout.write(dumps(out))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
