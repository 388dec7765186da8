"""Command-line front end.

Every command reads a model file (``--model``), prints a JSON document
(or CSV rows with ``--csv``) on stdout and diagnostics on stderr.

Exit codes: 0 success, 1 usage or validation error, 2 undecidable
classification, 3 numerical failure (including a failed ``validate``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings

import numpy as np

from . import __version__
from .analytic import invariant_law, total_pop_laplace
from .conditions import analyze
from .diffusion import extinction_criterion, hit_prob, laplace_Ta_diffusion, scale_function
from .errors import (
    ClassificationFailedError,
    DomainError,
    LogBranchError,
    UndecidableError,
    ValidityWarning,
)
from .hitting import MeanExtinction, h_lambda_table, laplace_Ta, parse_start, sufficient_conditions
from .modelio import ModelFileError, diffusion_from_dict, load_document, model_from_dict, model_to_dict
from .quadrature import QuadratureConfig, jsonable
from .riccati import RiccatiConfig
from .simulator import Scheme, SimConfig, estimate_hitting, estimate_laplace, estimate_total_pop, simulate

EXIT_OK, EXIT_USAGE, EXIT_UNDECIDABLE, EXIT_NUMERIC = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _floats(text: str) -> list[float]:
    """``"0.5,1,2"`` or ``"lo:hi:n"`` (``n`` evenly spaced points)."""
    if ":" in text:
        lo, hi, n = text.split(":")
        return np.linspace(float(lo), float(hi), int(n)).tolist()
    return [float(t) for t in text.split(",") if t.strip()]


def _start(text: str) -> float:
    try:
        return parse_start(text)
    except (DomainError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="JSON model file")
    p.add_argument("--csv", action="store_true", help="emit CSV rows instead of JSON")
    p.add_argument("--quad-abs-tol", type=float, default=1e-10)
    p.add_argument("--quad-rel-tol", type=float, default=1e-8)


def _mc(p: argparse.ArgumentParser, paths: int = 10_000) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paths", type=int, default=paths)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tmax", type=float, default=50.0)
    p.add_argument("--eps", type=float, default=None, help="absorption threshold (default 1e-6 x)")
    p.add_argument("--jump-eps", type=float, default=1e-3)
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="logbranch", description="Logistic branching processes in a Brownian environment.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="conservativeness, polarity and recurrence")
    _common(p)
    p.add_argument("--echo-model", action="store_true", help="include the normalised model document")

    p = sub.add_parser("laplace", help="Laplace transforms of the invariant laws or of the total population")
    _common(p)
    p.add_argument("--what", choices=["nu", "rho", "totalpop"], required=True)
    p.add_argument("--lambda", dest="lam", type=_floats, default=[0.5, 1.0, 2.0],
                   help="comma list or lo:hi:n grid")
    p.add_argument("--x", type=float, default=1.0, help="start (totalpop)")
    p.add_argument("--a", type=float, default=0.5, help="target level (totalpop)")

    p = sub.add_parser("laplace-T", help="E_x[exp(-lambda T_a)] for the general model")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--x", type=_start, default=1.0)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--grid", type=_floats, default=None, help="x grid; emits a curve")
    p.add_argument("--dump-riccati", metavar="FILE", default=None, help="write (z, y, cumulative) CSV")

    p = sub.add_parser("mean-extinction", help="E_x[T_0]")
    _common(p)
    p.add_argument("--x", type=_start, default=1.0)
    p.add_argument("--grid", type=_floats, default=None)

    p = sub.add_parser("scale", help="scale function of the branching diffusion")
    _common(p)
    p.add_argument("--x", type=_floats, default=[1.0])

    p = sub.add_parser("hitprob", help="P_x(T_0 < T_y)")
    _common(p)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)

    p = sub.add_parser("laplace-T-diff", help="E_x[exp(-lambda T_a)] through the scale function")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--x", type=_start, default=1.0)
    p.add_argument("--a", type=float, default=0.0)

    p = sub.add_parser("simulate", help="Monte Carlo estimates")
    _common(p)
    _mc(p)
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="direct")
    p.add_argument("--what", choices=["hitting", "laplace", "totalpop"], default="hitting")
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--per-path", metavar="FILE", default=None, help="write per-path CSV")

    p = sub.add_parser("validate", help="compare the analytic Laplace transform of T_a with Monte Carlo")
    _common(p)
    _mc(p, paths=100_000)
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--scheme", choices=["direct", "lamperti"], default="direct")
    return parser


def _quad(args) -> QuadratureConfig:
    return QuadratureConfig(abs_tol=args.quad_abs_tol, rel_tol=args.quad_rel_tol)


def _sim(args, scheme: str) -> SimConfig:
    return SimConfig(dt=args.dt, n_paths=args.paths, t_max=args.tmax, extinction_eps=args.eps,
                     jump_eps=args.jump_eps, seed=args.seed, scheme=Scheme(scheme), workers=args.workers)


def _rows(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _emit(args, doc: dict, header=None, rows=None) -> str:
    if args.csv and header is not None:
        return _rows(header, rows)
    return json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n"


def _cmd_analyze(args, doc):
    model = model_from_dict(doc)
    rep = analyze(model, _quad(args))
    out = {"command": "analyze", "report": rep.to_dict()}
    if args.echo_model:
        out["model"] = model_to_dict(model)
    code = EXIT_UNDECIDABLE if rep.undecidable else EXIT_OK
    flat = [("conservative", out["report"]["conservative"]), ("polar_at_zero", out["report"]["polar_at_zero"]),
            ("recurrence", out["report"]["recurrence"])]
    return _emit(args, out, ["property", "value"], flat), code


def _cmd_laplace(args, doc):
    model = model_from_dict(doc)
    cfg = _quad(args)
    rows = []
    if args.what == "totalpop":
        for lam in args.lam:
            rows.append((lam, total_pop_laplace(model, lam, args.x, args.a, cfg=cfg)))
        out = {"command": "laplace", "what": "totalpop", "x": args.x, "a": args.a}
    else:
        law = invariant_law(model, cfg)
        for lam in args.lam:
            val = float(law.nu_laplace(lam)) if args.what == "nu" else float(law.rho_laplace(lam))
            rows.append((lam, val))
        out = {"command": "laplace", "what": args.what, "normalizer": law.normalizer}
    out["rows"] = [list(r) for r in rows]
    return _emit(args, out, ["lambda", "value"], rows), EXIT_OK


def _cmd_laplace_T(args, doc):
    model = model_from_dict(doc)
    valid = sufficient_conditions(model)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        hl = h_lambda_table(model, args.lam, RiccatiConfig(), _quad(args))
        xs = args.grid if args.grid is not None else [args.x]
        rows = [(x, laplace_Ta(model, args.lam, x, args.a, hl=hl)) for x in xs]
    if args.dump_riccati:
        with open(args.dump_riccati, "w") as fh:
            fh.write(_rows(["z", "y", "cumulative"], hl.riccati.to_rows()))
    out = {"command": "laplace-T", "lambda": args.lam, "a": args.a, "valid": valid}
    if args.grid is None:
        out.update(x=args.x, value=rows[0][1])
    else:
        out["rows"] = [list(r) for r in rows]
    return _emit(args, out, ["x", "value"], rows), EXIT_OK


def _cmd_mean(args, doc):
    model = model_from_dict(doc)
    me = MeanExtinction(model)
    xs = args.grid if args.grid is not None else [args.x]
    rows = [(x, me(x)) for x in xs]
    out = {"command": "mean-extinction"}
    if args.grid is None:
        out.update(x=args.x, value=rows[0][1])
    else:
        out["rows"] = [list(r) for r in rows]
    return _emit(args, out, ["x", "value"], rows), EXIT_OK


def _cmd_scale(args, doc):
    diff = diffusion_from_dict(doc)
    sf = scale_function(diff, _quad(args))
    rows = [(x, sf(x)) for x in args.x]
    verdict = extinction_criterion(diff, _quad(args))
    out = {"command": "scale", "S_inf": sf.limit, "extinction_certain": verdict.value.value,
           "rows": [list(r) for r in rows]}
    code = EXIT_UNDECIDABLE if verdict.value.value == "undecidable" else EXIT_OK
    return _emit(args, out, ["x", "S"], rows), code


def _cmd_hitprob(args, doc):
    diff = diffusion_from_dict(doc)
    val = hit_prob(diff, args.x, args.y, _quad(args))
    out = {"command": "hitprob", "x": args.x, "y": args.y, "value": val}
    return _emit(args, out, ["x", "y", "value"], [(args.x, args.y, val)]), EXIT_OK


def _cmd_laplace_T_diff(args, doc):
    diff = diffusion_from_dict(doc)
    val = laplace_Ta_diffusion(diff, args.lam, args.x, args.a)
    out = {"command": "laplace-T-diff", "lambda": args.lam, "x": args.x, "a": args.a, "value": val}
    return _emit(args, out, ["x", "value"], [(args.x, val)]), EXIT_OK


def _model_for_sim(doc, scheme):
    return diffusion_from_dict(doc) if scheme == "diffusion1d" else model_from_dict(doc)


def _cmd_simulate(args, doc):
    model = _model_for_sim(doc, args.scheme)
    cfg = _sim(args, args.scheme)
    if args.what == "hitting":
        est = estimate_hitting(model, args.x, args.a, cfg).to_dict()
    elif args.what == "laplace":
        est = estimate_laplace(model, args.x, args.a, args.lam, cfg).to_dict()
    else:
        est = estimate_total_pop(model, args.x, args.a, args.lam, cfg).to_dict()
    if args.per_path:
        res = simulate(model, args.x, cfg, args.a)
        rows = zip(res.hit_time.tolist(), res.integral.tolist(), res.censored.tolist(), res.exploded.tolist())
        with open(args.per_path, "w") as fh:
            fh.write(_rows(["hit_time", "integral", "censored", "exploded"], rows))
    out = {"command": "simulate", "what": args.what, "scheme": args.scheme, **est}
    return _emit(args, out, list(est), [list(est.values())]), EXIT_OK


def _cmd_validate(args, doc):
    model = model_from_dict(doc)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        analytic = laplace_Ta(model, args.lam, args.x, args.a)
    est = estimate_laplace(model, args.x, args.a, args.lam, _sim(args, args.scheme))
    z = (analytic - est.value) / est.stderr if est.stderr > 0 else (0.0 if analytic == est.value else math.inf)
    passed = abs(z) < 3.0 and est.censored_fraction < 0.01
    out = {"command": "validate", "lambda": args.lam, "x": args.x, "a": args.a, "analytic": analytic,
           "estimate": est.value, "stderr": est.stderr, "n": est.n, "censored_fraction": est.censored_fraction,
           "z_score": z, "passed": passed}
    return _emit(args, out, list(out), [list(out.values())]), EXIT_OK if passed else EXIT_NUMERIC


_COMMANDS = {
    "analyze": _cmd_analyze,
    "laplace": _cmd_laplace,
    "laplace-T": _cmd_laplace_T,
    "mean-extinction": _cmd_mean,
    "scale": _cmd_scale,
    "hitprob": _cmd_hitprob,
    "laplace-T-diff": _cmd_laplace_T_diff,
    "simulate": _cmd_simulate,
    "validate": _cmd_validate,
}


def run(argv=None, stdout=None, stderr=None) -> int:
    """Parse ``argv``, run the command and return the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        doc = load_document(args.model)
        text, code = _COMMANDS[args.command](args, doc)
    except (ModelFileError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_USAGE
    except (UndecidableError, ClassificationFailedError) as exc:
        print(f"undecidable: {exc}", file=stderr)
        return EXIT_UNDECIDABLE
    except (LogBranchError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=stderr)
        return EXIT_NUMERIC
    stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
