"""Command line entry point: ``radseries <subcommand> ...``.

Exit codes: 0 success / all checks pass, 1 input error, 2 verification
failure, 3 capacity error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import distribution as D
from .errors import CapacityError, InputError, RadseriesError
from .kfunctional import k12_exact, k12_holmstedt
from .scenario import (
    dist_summary,
    load_scenario,
    parse_grid,
    report_json,
    run_scenario,
    write_dist_csv,
    write_profile_csv,
)
from .spaces import CoefficientFamily
from .verify import DEFAULT_GRIDS
from .weaknorms import kw_profile, weak_lp_norm

EXIT_OK, EXIT_INPUT, EXIT_FAIL, EXIT_CAPACITY = 0, 1, 2, 3

log = logging.getLogger("radseries")


def _out(args):
    return open(args.out, "w") if getattr(args, "out", None) else sys.stdout


def _fmt(x):
    return repr(float(x))


def cmd_kfun(args):
    fam = CoefficientFamily.from_csv(args.coeffs, "linf")
    if fam.dim != 1:
        raise InputError(f"kfun expects a single-column scalar sequence, got {fam.dim} columns")
    a = fam.coeffs[:, 0]
    fh = _out(args)
    fh.write("t,k_exact,k_holmstedt,rho,l1_part,l2_part\n")
    for t in parse_grid(args.t):
        k = k12_exact(a, t)
        l1 = np.abs(k.l1_part).sum()
        l2 = np.sqrt((k.l2_part**2).sum())
        fh.write(",".join(_fmt(x) for x in (t, k.value, k12_holmstedt(a, t), k.rho, l1, l2)) + "\n")
    return EXIT_OK


def cmd_weaknorm(args):
    fam = CoefficientFamily.from_csv(args.coeffs, args.space)
    r = weak_lp_norm(fam, args.p, require_exact=args.require_exact, seed=args.seed)
    fh = _out(args)
    fh.write(",".join(["p", "value", "exactness"] + [f"w{j + 1}" for j in range(fam.dim)]) + "\n")
    fh.write(",".join([_fmt(args.p), _fmt(r.value), r.exactness.value] + [_fmt(x) for x in r.witness.vector]) + "\n")
    return EXIT_OK


def cmd_kwprofile(args):
    fam = CoefficientFamily.from_csv(args.coeffs, args.space)
    prof = kw_profile(fam, parse_grid(args.t_grid), seed=args.seed)
    if args.out:
        write_profile_csv(prof, args.out)
    else:
        m = fam.dim
        sys.stdout.write(",".join(["t", "kw", "exactness"] + [f"w{j + 1}" for j in range(m)]) + "\n")
        for t, v, e, w in prof.rows():
            sys.stdout.write(",".join([_fmt(t), _fmt(v), e] + [_fmt(x) for x in w]) + "\n")
    return EXIT_OK


def cmd_dist(args):
    fam = CoefficientFamily.from_csv(args.coeffs, args.space)
    if args.mc:
        if args.samples is None:
            raise InputError("--mc needs --samples")
        d = D.sample_mc(fam, args.samples, seed=args.seed, workers=args.threads)
    else:
        d = D.enumerate_exact(fam, workers=args.threads, max_n=args.exact_max_n)
    summary = dist_summary(d, parse_grid(args.p_grid), parse_grid(args.q_grid))
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_dist_csv(d, out / "dist.csv")
        (out / "dist_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write("value,probability,cumulative\n")
        for v, p, c in d.to_rows():
            sys.stdout.write(f"{_fmt(v)},{_fmt(p)},{_fmt(c)}\n")
        sys.stderr.write(json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_verify(args):
    s = load_scenario(args.scenario)
    if args.exact_max_n is not None:
        s.max_n = args.exact_max_n
    bundle = run_scenario(s, workers=args.threads, out_dir=args.out_dir)
    rep = report_json(bundle)
    text = json.dumps(rep, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    summary = rep["summary"]
    log.info("checks: %s passed of %s", summary.get("passed", 0), summary.get("checks", 0))
    _print_table(rep, sys.stderr if args.out is None else sys.stdout)
    return EXIT_OK if bundle.all_pass else EXIT_FAIL


def _fit_text(k, v):
    if isinstance(v, float):
        return f"{k}={v:.4g}"
    if isinstance(v, list) and v and all(isinstance(x, float) for x in v):
        return f"{k}={min(v):.4g}..{max(v):.4g}"
    return None


def _print_table(rep, fh):
    if not rep.get("checks"):
        fh.write("no checks run\n")
    for c in rep.get("checks", []):
        fits = ", ".join(t for k, v in c["fitted_constants"].items() if (t := _fit_text(k, v)))
        fh.write(f"{c['status']:4}  {c['check_id']:15} worst_margin={c['worst_margin']!s:>24}  {fits}\n")
    s = rep.get("summary", {})
    if s:
        fh.write(f"{s['passed']}/{s['checks']} checks passed\n")


def cmd_report(args):
    path = Path(args.report)
    if not path.exists():
        raise InputError(f"report not found: {path}")
    try:
        rep = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    prov = rep.get("provenance", {})
    if prov:
        sys.stdout.write(f"scenario {prov.get('scenario_hash')}  instance {prov.get('instance_hash')}  version {prov.get('version')}\n")
    _print_table(rep, sys.stdout)
    return EXIT_OK if rep.get("summary", {}).get("all_pass", True) else EXIT_FAIL


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # the subcommand copies must not reset values given before the subcommand
    def d(value):
        return argparse.SUPPRESS if suppress else value

    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=d(0))
    g.add_argument("--threads", type=int, default=d(1), help="worker threads for enumeration and sampling")
    g.add_argument("--out-dir", default=d(None))
    g.add_argument("--exact-max-n", type=int, default=d(None), help="raise the exact-enumeration cap (default 24)")
    g.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return g


def build_parser():
    g = _global_flags(suppress=True)
    parser = argparse.ArgumentParser(prog="radseries", parents=[_global_flags(suppress=False)], description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kfun", parents=[g], help="scalar K-functional on a t-grid")
    p.add_argument("--coeffs", required=True)
    p.add_argument("--t", required=True, help="grid: start:stop:step or comma list")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_kfun)

    p = sub.add_parser("weaknorm", parents=[g], help="weak-l_p norm of a coefficient family")
    p.add_argument("--coeffs", required=True)
    p.add_argument("--space", default="linf")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--require-exact", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_weaknorm)

    p = sub.add_parser("kwprofile", parents=[g], help="K^w profile on a t-grid")
    p.add_argument("--coeffs", required=True)
    p.add_argument("--space", default="linf")
    p.add_argument("--t-grid", default="0:6:0.1")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_kwprofile)

    p = sub.add_parser("dist", parents=[g], help="law of ||sum eps_n x_n||")
    p.add_argument("--coeffs", required=True)
    p.add_argument("--space", default="linf")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", default=True)
    mode.add_argument("--mc", action="store_true")
    p.add_argument("--samples", type=int)
    p.add_argument("--p-grid", default=",".join(str(x) for x in DEFAULT_GRIDS["p"]))
    p.add_argument("--q-grid", default=",".join(str(x) for x in DEFAULT_GRIDS["q"]))
    p.set_defaults(fn=cmd_dist)

    p = sub.add_parser("verify", parents=[g], help="run a scenario and its inequality checks")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("report", parents=[g], help="print a verification report")
    p.add_argument("report")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command != "verify" and args.exact_max_n is None:
        args.exact_max_n = D.DEFAULT_EXACT_MAX_N
    try:
        return args.fn(args)
    except CapacityError as exc:
        sys.stderr.write(f"capacity error: {exc}\n")
        return EXIT_CAPACITY
    except RadseriesError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return getattr(exc, "exit_code", EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
