"""Built-in example problems and the self-check suite run by ``recede fixtures``.

Each row compares an observed quantity with its expected value. Two rows
record published claims that disagree with the definitions implemented
here; they are tagged ``EXPECTED-DISCREPANCY`` instead of failing.
"""
from __future__ import annotations

import math

from .asymptotics import SQUASH_SLOPE, asym_fn, q_asym_fn, sublevel_asym_fn
from .conditions import alpha_robust_test, coercivity_probe, recession_check
from .cones import asymptotic_cone, cone_contains
from .infinity import normal_cone_at_infinity, son_cq_check
from .models import Tilt, problem_from_dict
from .solver import solve
from .stability import perturb_grid, semicontinuity_diagnostics, weak_sharp_certify

PASS, FAIL, DISCREPANCY = "PASS", "FAIL", "EXPECTED-DISCREPANCY"

PROBLEMS = {
    "strip": {
        "dimension": 2,
        "function": {"kind": "quadratic", "Q": [[0, 0], [0, 2]], "c": [0, 0], "beta": 0},
        "set": {"kind": "polyhedron", "A": [[-1, 0], [1, 0], [0, -1]], "b": [0, 1, 0]},
    },
    "sqrt_abs": {
        "dimension": 1,
        "function": {"kind": "sqrt_abs"},
        "set": {"kind": "whole_space"},
    },
    "rational_squash": {
        "dimension": 1,
        "function": {"kind": "rational_squash"},
        "set": {"kind": "whole_space"},
    },
    "zero_halfline": {
        "dimension": 1,
        "function": {"kind": "affine", "c": [0], "beta": 0},
        "set": {"kind": "box", "lo": [0], "hi": ["inf"]},
    },
    "affine_halfline": {
        "dimension": 1,
        "function": {"kind": "affine", "c": [1], "beta": 0},
        "set": {"kind": "box", "lo": [0], "hi": ["inf"]},
    },
    "plus_sqrt": {
        "dimension": 1,
        "function": {"kind": "plus_sqrt"},
        "set": {"kind": "whole_space"},
    },
}


def problem(name: str):
    return problem_from_dict(PROBLEMS[name])


def _row(fixture, check, expected, observed, ok, discrepancy=False):
    status = PASS if ok else (DISCREPANCY if discrepancy else FAIL)
    return {"fixture": fixture, "check": check, "expected": str(expected),
            "observed": str(observed), "status": status}


def _fmt(v):
    if isinstance(v, float):
        return "+inf" if v == math.inf else ("-inf" if v == -math.inf else f"{v:.6g}")
    return str(v)


def strip_rows():
    p = problem("strip")
    rows = []
    C = asymptotic_cone(p.X)
    exact = (C.kind == "polyhedral" and cone_contains(C, [0, 1]) and not cone_contains(C, [1, 1])
             and not cone_contains(C, [-1, 1]))
    rows.append(_row("strip", "asymptotic cone", "{u1 = 0, u2 >= 0}", C.to_dict()["A"], exact))
    down = cone_contains(C, [0, -1])
    rows.append(_row("strip", "printed cone {0} x R contains (0,-1)", True, down, down,
                     discrepancy=True))
    v1 = asym_fn(p.f, [1, 0]).value
    v2 = asym_fn(p.f, [0, 1]).value
    rows.append(_row("strip", "f_inf((1,0)), f_inf((0,1))", "0, +inf",
                     f"{_fmt(v1)}, {_fmt(v2)}", v1 == 0.0 and v2 == math.inf))
    r = recession_check(p, "plain")
    rows.append(_row("strip", "recession condition (plain)", "holds/exact",
                     f"{r.verdict}/{r.mode}", r.verdict == "holds" and r.mode == "exact"))
    N = normal_cone_at_infinity(p.X)
    gens = sorted(tuple(float(v) for v in g) for P in N.pieces for g in P)
    rows.append(_row("strip", "normal cone at infinity generators", [(-1.0, 0.0), (1.0, 0.0)],
                     gens, gens == [(-1.0, 0.0), (1.0, 0.0)]))
    s = son_cq_check(p)
    rows.append(_row("strip", "0 not in subdiff(inf) + normal cone(inf)", "violated",
                     s.verdict, s.verdict == "violated"))
    c = coercivity_probe(p)["verdict"]
    rows.append(_row("strip", "coercivity", "coercive_on_X", c, c == "coercive_on_X"))
    sol = solve(p)
    ok = sol.status == "optimal" and abs(sol.f_star) < 1e-9 and sol.hull_flag and len(sol.points) == 2
    rows.append(_row("strip", "solution set", "segment [0,1] x {0}",
                     f"{sol.status} {sol.points.tolist()}", ok))
    cert = weak_sharp_certify(p, sol, 3.0)
    rows.append(_row("strip", "weak sharpness c(R=3)", "in [2.7, 2.9], sharp",
                     f"{cert.c_emp:.4f}, {cert.verdict}",
                     2.7 <= cert.c_emp <= 2.9 and cert.verdict == "sharp"))
    rep = perturb_grid(p, 0.5)
    d = semicontinuity_diagnostics(rep)
    got = (d["usc"], d["lsc"], d["value_usc"], d["value_lsc"])
    rows.append(_row("strip", "usc / lsc / value usc / value lsc", "pass/fail/pass/pass",
                     "/".join(got), got == ("pass", "fail", "pass", "pass")))
    return rows


def sqrt_abs_rows():
    p = problem("sqrt_abs")
    rows = []
    r = recession_check(p, "plain")
    rows.append(_row("sqrt_abs", "recession condition (plain)", "violated, value 0",
                     f"{r.verdict}, {_fmt(r.witness_value)}",
                     r.verdict == "violated" and abs(r.witness_value) <= 1e-6))
    q = recession_check(p, "q")
    rows.append(_row("sqrt_abs", "recession condition (q)", "holds", q.verdict, q.verdict == "holds"))
    c = coercivity_probe(p)["verdict"]
    rows.append(_row("sqrt_abs", "coercivity", "coercive_on_X", c, c == "coercive_on_X"))
    sol = solve(p)
    ok = sol.status == "optimal" and len(sol.points) == 1 and abs(sol.points[0, 0]) <= 1e-3
    rows.append(_row("sqrt_abs", "argmin", "{0}", sol.points.ravel().tolist(), ok))
    cert = weak_sharp_certify(p, sol, 4.0)
    rows.append(_row("sqrt_abs", "weak sharpness", "not_sharp", cert.verdict,
                     cert.verdict == "not_sharp"))
    vals = [sublevel_asym_fn(p.f, 1.0, [s]).value for s in (1.0, -1.0)]
    within = all(0 < v <= 2 for v in vals)
    rows.append(_row("sqrt_abs", "sublevel asymptotic function in (0, 2]", "(0, 2]",
                     ", ".join(_fmt(v) for v in vals), within, discrepancy=True))
    return rows


def rational_squash_rows():
    p = problem("rational_squash")
    rows = []
    v = q_asym_fn(p.f, [1.0]).value
    rows.append(_row("rational_squash", "q-asymptotic value at 1", f"{SQUASH_SLOPE:.6f}",
                     _fmt(v), abs(v - SQUASH_SLOPE) <= 2e-3))
    c = coercivity_probe(p)["verdict"]
    rows.append(_row("rational_squash", "coercivity", "not_coercive", c, c == "not_coercive"))
    q = recession_check(p, "q")
    sol = solve(p)
    ok = q.verdict == "holds" and sol.status == "optimal" and sol.diameter() < 1e3
    rows.append(_row("rational_squash", "q-condition and nonempty compact argmin", "both",
                     f"{q.verdict}, {sol.status} {sol.points.ravel().tolist()}", ok))
    return rows


def halfline_rows():
    rows = []
    p = problem("zero_halfline")
    statuses = [solve(p.with_function(Tilt(p.f, [0.5 * s]))).status for s in (1.0, 0.5, 0.25)]
    rows.append(_row("zero_halfline", "tilts u = eps*{1,1/2,1/4}", "all unbounded_below",
                     statuses, all(s == "unbounded_below" for s in statuses)))
    p = problem("affine_halfline")
    r = recession_check(p, "plain")
    s = son_cq_check(p)
    rows.append(_row("affine_halfline", "plain condition / normal-cone condition", "holds/holds",
                     f"{r.verdict}/{s.verdict}", r.verdict == "holds" and s.verdict == "holds"))
    cert = weak_sharp_certify(p, solve(p), 5.0)
    rows.append(_row("affine_halfline", "weak sharpness c(R=5)", "1, sharp",
                     f"{cert.c_emp:.6g}, {cert.verdict}",
                     abs(cert.c_emp - 1.0) <= 1e-9 and cert.verdict == "sharp"))
    return rows


def plus_sqrt_rows():
    p = problem("plus_sqrt")
    rows = []
    a = alpha_robust_test(p.f, 0.9, ([-10.0], [10.0]))
    rows.append(_row("plus_sqrt", "alpha-robust quasiconvexity at 0.9", "passes", a["verdict"],
                     a["verdict"] == "passes"))
    d = semicontinuity_diagnostics(perturb_grid(p, 0.5))
    got = (d["usc"], d["lsc"], d["value_usc"], d["value_lsc"])
    rows.append(_row("plus_sqrt", "usc / lsc / value usc / value lsc", "pass/pass/pass/pass",
                     "/".join(got), all(g == "pass" for g in got)))
    return rows


SUITE = (strip_rows, sqrt_abs_rows, rational_squash_rows, halfline_rows, plus_sqrt_rows)


def run_suite() -> list:
    rows = []
    for fn in SUITE:
        rows.extend(fn())
    return rows


def format_table(rows) -> str:
    cols = ("status", "fixture", "check", "expected", "observed")
    width = {c: max(len(c), *(len(r[c]) for r in rows)) for c in cols[:4]}
    lines = ["  ".join(c.ljust(width[c]) if c in width else c for c in cols)]
    for r in rows:
        lines.append("  ".join(r[c].ljust(width[c]) if c in width else r[c] for c in cols))
    return "\n".join(lines)


def summary(rows) -> dict:
    out = {PASS: 0, FAIL: 0, DISCREPANCY: 0}
    for r in rows:
        out[r["status"]] += 1
    return out
