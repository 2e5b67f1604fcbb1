"""Command-line entry point: ``recede <subcommand> problem.json [options]``.

Exit codes: 0 success (or condition holds), 2 condition violated,
3 inconclusive, 1 usage, parse or runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fixtures
from .asymptotics import AsymCfg, asym_fn, q_asym_fn, sublevel_asym_fn
from .conditions import CheckCfg, recession_check
from .cones import asymptotic_cone
from .errors import RecedeError
from .infinity import son_cq_check
from .models import ProblemSpec, _vec, load_problem
from .solver import SolveCfg, solve
from .stability import SharpCfg, perturb_grid, semicontinuity_diagnostics, weak_sharp_certify

EXIT_OK, EXIT_ERROR, EXIT_VIOLATED, EXIT_INCONCLUSIVE = 0, 1, 2, 3
VERDICT_EXIT = {"holds": EXIT_OK, "violated": EXIT_VIOLATED, "inconclusive": EXIT_INCONCLUSIVE}
SUBCOMMANDS = ("cone", "asymfn", "check", "infinity", "solve", "stability", "sharp", "fixtures")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, infinities to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _threads():
    raw = os.environ.get("RECEDE_THREADS")
    if raw is None:
        return None
    try:
        k = int(raw)
    except ValueError:
        raise UsageError(f"RECEDE_THREADS must be a positive integer, got {raw!r}")
    if k < 1:
        raise UsageError(f"RECEDE_THREADS must be a positive integer, got {raw!r}")
    return k


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="recede", description="Asymptotic analysis and tilt-stability experiments "
                                            "for desk-scale problems.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("input", nargs="?", help="problem document (JSON); not used by 'fixtures'")
    ap.add_argument("--kind", default=None, help="plain | q | sublevel (asymfn, check)")
    ap.add_argument("--lambda", dest="lam", type=float, default=None, help="sublevel height")
    ap.add_argument("--dir", default=None, help="direction as comma-separated floats")
    ap.add_argument("--eps", type=float, default=0.5, help="perturbation radius (stability)")
    ap.add_argument("--rings", type=int, default=10)
    ap.add_argument("--rays", type=int, default=16)
    ap.add_argument("--R", type=float, default=None, help="far radius (sharp)")
    ap.add_argument("--samples", type=int, default=None, help="sample count override")
    ap.add_argument("--seed", type=int, default=None, help="seed override")
    ap.add_argument("--method", default="auto", choices=("auto", "exact", "multistart"))
    ap.add_argument("--out", default=None, help="write the report here instead of stdout")
    ap.add_argument("--format", default=None, choices=("json", "csv"))
    ap.add_argument("--profile-csv", default=None, help="sharp: also write ratio-vs-R CSV")
    ap.add_argument("--write-problems", default=None, metavar="DIR",
                    help="fixtures: write the built-in problem documents to DIR")
    return ap


def _problem(args) -> ProblemSpec:
    if not args.input:
        raise UsageError(f"'{args.subcommand}' needs a problem document")
    p = load_problem(args.input)
    opts = p.options
    if args.seed is not None:
        opts = replace(opts, seed=args.seed)
    if args.samples is not None and args.subcommand != "sharp":
        opts = replace(opts, samples=args.samples)
    return ProblemSpec(p.dimension, p.f, p.X, opts, p.flags)


def _direction(args, n):
    if args.dir is None:
        raise UsageError("--dir is required")
    try:
        vals = [float(s) for s in args.dir.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--dir must be comma-separated floats, got {args.dir!r}")
    return _vec(vals, n, "dir")


def _kind(args, default="plain"):
    kind = args.kind or default
    if kind not in ("plain", "q", "sublevel"):
        raise UsageError(f"--kind must be plain, q or sublevel, got {kind!r}")
    if kind == "sublevel" and args.lam is None:
        raise UsageError("--kind sublevel needs --lambda")
    return kind


def cmd_cone(args):
    p = _problem(args)
    C = asymptotic_cone(p.X, seed=p.options.seed)
    return dumps({"cone": C.to_dict()}), EXIT_OK


def cmd_asymfn(args):
    p = _problem(args)
    d = _direction(args, p.dimension)
    kind = _kind(args)
    cfg = AsymCfg.from_options(p.options)
    if kind == "plain":
        est = asym_fn(p.f, d, cfg)
    elif kind == "q":
        est = q_asym_fn(p.f, d, cfg)
    else:
        est = sublevel_asym_fn(p.f, args.lam, d, cfg)
    rep = est.to_dict()
    rep.update({"direction": d.tolist(), "kind": kind})
    if kind == "sublevel":
        rep["lambda"] = args.lam
    return dumps(rep), EXIT_OK


def cmd_check(args):
    p = _problem(args)
    kind = _kind(args)
    r = recession_check(p, kind, args.lam, CheckCfg.for_problem(p))
    rep = r.to_dict()
    rep["kind"] = kind
    return dumps(rep), VERDICT_EXIT[r.verdict]


def cmd_infinity(args):
    p = _problem(args)
    plain = recession_check(p, "plain", cfg=CheckCfg.for_problem(p))
    normal = son_cq_check(p)
    rep = {"recession_condition": plain.to_dict(), "normal_cone_condition": normal.to_dict()}
    return dumps(rep), VERDICT_EXIT[normal.verdict]


def cmd_solve(args):
    p = _problem(args)
    r = solve(p, args.method, SolveCfg(seed=p.options.seed))
    return dumps(r.to_dict()), EXIT_OK


def cmd_stability(args):
    p = _problem(args)
    rep = perturb_grid(p, args.eps, args.rings, args.rays, SolveCfg(seed=p.options.seed))
    diag = None
    if rep.base.status == "optimal":
        diag = semicontinuity_diagnostics(rep)
    rows = rep.to_rows()
    if (args.format or "csv") == "json":
        return dumps({"epsilon": rep.epsilon, "rings": rep.rings, "rays": rep.rays,
                      "records": rows, "diagnostics": diag}), EXIT_OK
    n = p.dimension
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"u_{i + 1}" for i in range(n)]
               + ["norm_u", "status", "mu", "sol_points", "excess", "deficiency"])
    for r in rows:
        w.writerow([repr(v) for v in r["u"]] + [
            repr(r["norm_u"]), r["status"], _cell(r["mu"]),
            json.dumps(_clean(r["sol_points"])), _cell(r["excess"]), _cell(r["deficiency"])])
    return buf.getvalue(), EXIT_OK


def _cell(v):
    if v is None:
        return ""
    return v if isinstance(v, str) else repr(float(v))


def cmd_sharp(args):
    p = _problem(args)
    if args.R is None:
        raise UsageError("--R is required")
    base = solve(p, cfg=SolveCfg(seed=p.options.seed))
    cfg = SharpCfg(seed=p.options.seed)
    if args.samples is not None:
        cfg = replace(cfg, samples=args.samples)
    cert = weak_sharp_certify(p, base, args.R, cfg)
    if args.profile_csv:
        with open(args.profile_csv, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["R", "c_emp"])
            for R, c in cert.profile:
                w.writerow([repr(R), _cell(_clean(c))])
    d = cert.to_dict()
    rep = {k: d[k] for k in ("R", "c_emp", "witness", "verdict")}
    rep["details"] = {k: d[k] for k in d if k not in rep}
    return dumps(rep), EXIT_OK


def cmd_fixtures(args):
    if args.write_problems:
        out = Path(args.write_problems)
        out.mkdir(parents=True, exist_ok=True)
        for name, doc in fixtures.PROBLEMS.items():
            (out / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    rows = fixtures.run_suite()
    counts = fixtures.summary(rows)
    if args.format == "json":
        text = dumps({"rows": rows, "summary": counts})
    else:
        text = fixtures.format_table(rows) + "\n\n" + "  ".join(
            f"{k}={v}" for k, v in counts.items()) + "\n"
    return text, EXIT_OK if counts[fixtures.FAIL] == 0 else EXIT_ERROR


COMMANDS = {
    "cone": cmd_cone, "asymfn": cmd_asymfn, "check": cmd_check, "infinity": cmd_infinity,
    "solve": cmd_solve, "stability": cmd_stability, "sharp": cmd_sharp, "fixtures": cmd_fixtures,
}


def run_command(argv) -> int:
    try:
        args = build_parser().parse_args(argv)
        _threads()
        text, code = COMMANDS[args.subcommand](args)
    except UsageError as exc:
        print(f"recede: usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (RecedeError, ValueError, OSError) as exc:
        print(f"recede: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
