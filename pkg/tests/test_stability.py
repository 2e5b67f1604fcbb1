import math

import numpy as np
import pytest

from instances import instance
from recede.conditions import recession_check
from recede.errors import UnboundedRecordsPresent
from recede.fixtures import problem
from recede.models import Tilt
from recede.solver import solve
from recede.stability import (
    SharpCfg,
    grid_directions,
    perturb_grid,
    semicontinuity_diagnostics,
    weak_sharp_certify,
)


def strip_mu(u):
    return -max(u[0], 0.0) - max(u[1], 0.0) ** 2 / 4


def test_grid_layout():
    rep = perturb_grid(problem("strip"), 0.5, rings=3, rays=8)
    assert len(rep.records) == 3 * 8 + 1
    assert rep.base.ring == 0 and np.array_equal(rep.base.u, [0.0, 0.0])
    order = [(r.ring, r.ray) for r in rep.records]
    assert order == sorted(order)
    norms = sorted({round(r.norm_u, 12) for r in rep.records})
    assert norms == [0.0, round(0.5 / 3, 12), round(1.0 / 3, 12), 0.5]


def test_grid_directions():
    assert np.array_equal(grid_directions(1, 16, 0), [[1.0], [-1.0]])
    D = grid_directions(2, 4, 0)
    assert np.array_equal(D, [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    D3 = grid_directions(3, 10, 0)
    assert D3.shape == (10, 3) and np.allclose(np.linalg.norm(D3, axis=1), 1.0)


def test_strip_grid_matches_closed_form():
    rep = perturb_grid(problem("strip"), 0.5)
    assert len(rep.records) == 161
    for r in rep.records:
        assert r.status == "optimal"
        assert abs(r.mu - strip_mu(r.u)) <= 1e-4
        assert r.mu == r.result.f_star


def test_strip_semicontinuity():
    d = semicontinuity_diagnostics(perturb_grid(problem("strip"), 0.5))
    assert (d["usc"], d["lsc"]) == ("pass", "fail")
    assert (d["value_usc"], d["value_lsc"]) == ("pass", "pass")
    assert d["unbounded_records"] == 0


def test_unbounded_records_are_counted_or_raise():
    rep = perturb_grid(problem("zero_halfline"), 0.5, rings=2, rays=2)
    assert semicontinuity_diagnostics(rep)["unbounded_records"] == 2
    with pytest.raises(UnboundedRecordsPresent):
        semicontinuity_diagnostics(rep, strict=True)


def convex_holding_instances():
    out = [problem("strip"), problem("affine_halfline")]
    out += [instance("A", 0), instance("B", 1), instance("C", 2), instance("D", 3)]
    return out


def test_excess_shrinks_toward_zero_tilt():
    # the 0.05 bound is absolute; eps = 0.2 keeps the innermost ring at 0.02,
    # small enough for the Lipschitz constants of these instances
    for p in convex_holding_instances():
        assert recession_check(p, "plain").verdict == "holds"
        d = semicontinuity_diagnostics(perturb_grid(p, 0.2, rings=10, rays=8))
        t = d["tables"]
        assert t[0]["excess_max"] <= t[-1]["excess_max"] + 1e-12
        assert t[0]["excess_max"] <= 0.05


def test_value_is_continuous_at_zero_tilt():
    for p in convex_holding_instances():
        rep = perturb_grid(p, 0.5, rings=5, rays=8)
        mu0 = rep.base.mu
        outer = [r for r in rep.records if r.ring == rep.rings]
        L = max(abs(r.mu - mu0) / r.norm_u for r in outer)
        for r in rep.records:
            assert abs(r.mu - mu0) <= L * r.norm_u + 0.01


def test_tilts_along_a_violating_direction_are_unbounded():
    eps = 0.5
    cases = [problem("zero_halfline")] + [instance("E", k) for k in range(3)]
    for p in cases:
        r = recession_check(p, "plain")
        assert r.verdict == "violated"
        d = np.asarray(r.witness) / np.linalg.norm(r.witness)
        for s in (1.0, 0.5, 0.25):
            res = solve(p.with_function(Tilt(p.f, eps * s * d)))
            assert res.status == "unbounded_below"


def test_permuted_start_order_reproduces_each_record():
    p = problem("plus_sqrt")
    rep = perturb_grid(p, 0.5, rings=2, rays=2)
    perm = np.random.default_rng(3).permutation(64)
    for r in rep.records:
        again = solve(p.with_function(Tilt(p.f, r.u)), start_order=perm)
        assert abs(again.f_star - r.mu) <= 1e-8


def test_strip_sharpness_profile():
    p = problem("strip")
    base = solve(p)
    prev = -math.inf
    for R in (2.0, 3.0, 4.0, 6.0):
        cert = weak_sharp_certify(p, base, R)
        assert cert.c_emp >= prev - 1e-12
        assert abs(cert.c_emp - math.sqrt(R * R - 1)) <= 0.05 * math.sqrt(R * R - 1)
        assert cert.verdict == "sharp"
        prev = cert.c_emp


def test_sharpness_verdicts_on_fixtures():
    p = problem("affine_halfline")
    cert = weak_sharp_certify(p, solve(p), 5.0)
    assert cert.c_emp == pytest.approx(1.0, abs=1e-9)
    assert cert.verdict == "sharp"
    p = problem("sqrt_abs")
    cert = weak_sharp_certify(p, solve(p), 4.0)
    assert cert.verdict == "not_sharp"
    assert cert.fit_exponent == pytest.approx(-0.5, abs=0.05)


def test_sharpness_needs_an_optimal_base():
    p = problem("zero_halfline")
    base = solve(p.with_function(Tilt(p.f, [0.5])))
    with pytest.raises(ValueError):
        weak_sharp_certify(p, base, 3.0)


def test_sharpness_sample_count_and_witness():
    p = problem("strip")
    cert = weak_sharp_certify(p, solve(p), 3.0, SharpCfg(samples=20_000))
    assert cert.sample_count > 0
    x = np.asarray(cert.worst_witness)
    assert p.X.member(x[None, :], 1e-9)[0]
    assert np.linalg.norm(x) >= 3.0 - 1e-9
