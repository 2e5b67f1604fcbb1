import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recede.errors import NonSmoothPoint, ParseError, ValidationError
from recede.models import (
    MINUS_INF,
    PLUS_INF,
    Affine,
    Ball,
    Blackbox,
    Box,
    CapAbs,
    PlusSqrt,
    PNorm,
    Polyhedron,
    Quadratic,
    RationalSquash,
    SqrtAbs,
    Tilt,
    Union,
    WholeSpace,
    eval_f,
    ext_add,
    grad,
    grad_batch,
    ldp_project,
    member,
    parse_problem,
    problem_from_dict,
    project,
    serialize_problem,
)


def catalog(n, rng):
    M = rng.normal(size=(n, n))
    return [
        Affine(rng.normal(size=n), 0.3),
        Quadratic(M @ M.T, rng.normal(size=n), -1.0),
        Quadratic(M + M.T, rng.normal(size=n)),
        PNorm(2.0, n),
        PNorm(3.0, n),
        PNorm(1.0, n),
        SqrtAbs(n),
        RationalSquash(n),
        CapAbs(n),
        PlusSqrt(n),
    ]


def central_diff(f, x, h=1e-5):
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (eval_f(f, x + e) - eval_f(f, x - e)) / (2 * h)
    return g


def far_from_kinks(f, x):
    return f.kink_distance(x) > 0.05


# ---------------------------------------------------------------- examples


def test_eval_examples():
    assert eval_f(Quadratic([[0, 0], [0, 2]], [0, 0]), [3.0, 2.0]) == 4.0
    assert eval_f(SqrtAbs(1), [4.0]) == 2.0
    assert eval_f(RationalSquash(1), [1.0]) == 0.5
    assert eval_f(CapAbs(2), [0.25, -0.5]) == 0.75
    assert eval_f(CapAbs(2), [3.0, 0.0]) == 1.0
    assert eval_f(PlusSqrt(1), [-4.0]) == 6.0
    assert eval_f(PNorm(1.0, 3), [1, -2, 3]) == 6.0
    assert eval_f(Tilt(Affine([1.0, 1.0]), [0.5, -1.0]), [2.0, 1.0]) == 3.0 - 0.0


def test_rational_squash_gradient_oracle():
    # max of t -> d/dt t^2/(1+t^2) sits at t = 1/sqrt(3) with value 3*sqrt(3)/8
    x = np.array([1 / math.sqrt(3)])
    g = grad(RationalSquash(1), x)
    assert abs(g[0] - 3 * math.sqrt(3) / 8) < 1e-12
    assert abs(central_diff(RationalSquash(1), x)[0] - g[0]) < 1e-8


def test_grad_raises_at_kinks():
    with pytest.raises(NonSmoothPoint):
        grad(SqrtAbs(1), [0.0])
    with pytest.raises(NonSmoothPoint):
        grad(PNorm(1.0, 2), [1.0, 0.0])
    with pytest.raises(NonSmoothPoint):
        grad(CapAbs(1), [1.0])
    assert grad(Quadratic([[2.0]]), [0.0])[0] == 0.0


def test_extended_arithmetic():
    assert ext_add(PLUS_INF, 3.0) == PLUS_INF
    assert ext_add(MINUS_INF, -1.0) == MINUS_INF
    with pytest.raises(ValueError):
        ext_add(PLUS_INF, MINUS_INF)


def test_blackbox_domain_rules():
    f = Blackbox(lambda x: math.inf if x[0] < 0 else x[0], 1)
    with pytest.raises(ValidationError):
        eval_f(f, [-1.0])
    g = Blackbox(lambda x: math.inf if x[0] < 0 else x[0], 1, has_domain=True)
    assert eval_f(g, [-1.0]) == PLUS_INF


def test_membership_and_projection_examples():
    strip = Polyhedron([[-1, 0], [1, 0], [0, -1]], [0, 1, 0])
    assert member(strip, [0.5, 3.0])
    assert not member(strip, [1.5, 3.0])
    assert np.allclose(project(strip, [2.0, -1.0]), [1.0, 0.0])
    assert np.allclose(project(Box([0, 0], [1, math.inf]), [-1.0, 5.0]), [0.0, 5.0])
    assert np.allclose(project(Ball([0, 0], 2.0), [3.0, 4.0]), [1.2, 1.6])
    assert np.allclose(project(WholeSpace(2), [3.0, 4.0]), [3.0, 4.0])
    u = Union((Box([0], [1]), Box([3], [4])))
    assert member(u, [3.5]) and not member(u, [2.0])


def test_polyhedral_projection_with_nearly_parallel_facets():
    # alternating projections crawl here; the result must still be exact
    A = np.array([[1.0, 1e-3], [1.0, -1e-3], [-1.0, 0.0]])
    b = np.array([1.0, 1.0, 0.0])
    z = np.array([5.0, 0.3])
    p = project(Polyhedron(A, b), z)
    ref = ldp_project(A, b, z)
    assert np.all(A @ p <= b + 1e-9)
    assert np.linalg.norm(p - ref) < 1e-8


# ---------------------------------------------------------------- parsing


def test_parse_rejects_bad_documents():
    with pytest.raises(ParseError):
        parse_problem("{not json")
    with pytest.raises(ParseError):
        problem_from_dict({"function": {"kind": "sqrt_abs"}, "set": {"kind": "whole_space"}})
    with pytest.raises(ParseError):
        problem_from_dict({"dimension": 1, "function": {"kind": "sqrt_abs", "extra": 1},
                           "set": {"kind": "whole_space"}})
    with pytest.raises(ValidationError):
        problem_from_dict({"dimension": 2, "function": {"kind": "affine", "c": [1]},
                           "set": {"kind": "whole_space"}})
    with pytest.raises(ValidationError):
        problem_from_dict({"dimension": 1, "function": {"kind": "affine", "c": [1]},
                           "set": {"kind": "polyhedron", "A": [[1], [-1]], "b": [0, -1]}})
    with pytest.raises(ValidationError):
        problem_from_dict({"dimension": 1, "function": {"kind": "cap_abs"},
                           "set": {"kind": "whole_space"}, "flags": {"convex": True}})


def test_asymmetric_q_is_symmetrized_with_warning():
    with pytest.warns(UserWarning):
        f = Quadratic([[1.0, 2.0], [0.0, 1.0]])
    assert np.array_equal(f.Q, [[1.0, 1.0], [1.0, 1.0]])


def test_infinite_bounds_round_trip():
    doc = {"dimension": 1, "function": {"kind": "affine", "c": [1], "beta": 0},
           "set": {"kind": "box", "lo": [0], "hi": ["inf"]}}
    p = problem_from_dict(doc)
    assert p.X.hi[0] == PLUS_INF
    text = serialize_problem(p)
    assert json.loads(text)["set"]["hi"] == ["inf"]
    assert serialize_problem(parse_problem(text)) == text


# ---------------------------------------------------------------- properties


@pytest.mark.parametrize("n", [1, 2, 3])
def test_gradient_matches_central_differences(n):
    rng = np.random.default_rng(100 + n)
    for f in catalog(n, rng):
        checked = 0
        pts = rng.uniform(-3, 3, size=(400, n))
        for x in pts:
            if not far_from_kinks(f, x):
                continue
            g = grad(f, x)
            fd = central_diff(f, x)
            assert np.linalg.norm(g - fd) <= 1e-4 * max(1.0, np.linalg.norm(g)), (f.kind, x)
            checked += 1
            if checked == 100:
                break
        assert checked == 100, f.kind


def test_grad_batch_matches_pointwise():
    rng = np.random.default_rng(7)
    for f in catalog(3, rng):
        X = rng.uniform(0.2, 2.0, size=(20, 3)) * rng.choice([-1, 1], size=(20, 3))
        X = X * 0.3  # keep cap_abs on its linear piece for some rows
        assert np.allclose(grad_batch(f, X), [f._gradient(x) for x in X])
        t = Tilt(f, [0.1, -0.2, 0.3])
        assert np.allclose(grad_batch(t, X), [t._gradient(x) for x in X])


def test_tilt_evaluation_identity():
    rng = np.random.default_rng(11)
    for n in (1, 2, 3):
        for f in catalog(n, rng):
            for _ in range(100):
                u = rng.normal(size=n)
                x = rng.normal(size=n) * 5
                lhs = eval_f(Tilt(f, u), x)
                rhs = eval_f(f, x) - float(u @ x)
                assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def _sets(n, rng):
    A = rng.normal(size=(4, n))
    x0 = rng.normal(size=n)
    return [
        WholeSpace(n),
        Box(-np.ones(n), np.full(n, math.inf)),
        Box(-np.ones(n), np.ones(n)),
        Ball(rng.normal(size=n), 1.5),
        Polyhedron(A, A @ x0 + 0.5),
    ]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 3))
def test_projection_is_idempotent(seed, n):
    rng = np.random.default_rng(seed)
    tol = 1e-10
    for X in _sets(n, rng):
        x = rng.normal(size=n) * 10
        p = project(X, x)
        assert member(X, p, 1e-8)
        assert np.linalg.norm(project(X, p) - p) <= 2 * tol * max(1.0, np.linalg.norm(p))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_projection_matches_least_distance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    m = int(rng.integers(2, 7))
    A = rng.normal(size=(m, n))
    b = A @ rng.normal(size=n) + rng.uniform(0, 1, m)
    Z = rng.normal(size=(8, n)) * 10
    P = Polyhedron(A, b).project(Z)
    for z, p in zip(Z, P):
        # the residual must be a nonnegative combination of active normals
        act = A @ p >= b - 1e-8
        assert np.all(A @ p <= b + 1e-8)
        if act.any():
            lam = np.linalg.lstsq(A[act].T, z - p, rcond=None)[0]
            assert np.all(lam >= -1e-7)
            assert np.linalg.norm(A[act].T @ lam - (z - p)) <= 1e-7 * (1 + np.linalg.norm(z))
        else:
            assert np.linalg.norm(z - p) <= 1e-8


finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(
    Q=st.lists(finite, min_size=4, max_size=4),
    c=st.lists(finite, min_size=2, max_size=2),
    beta=finite,
    lo=st.lists(st.one_of(finite, st.just(-math.inf)), min_size=2, max_size=2),
)
def test_parse_serialize_round_trip(Q, c, beta, lo):
    Qm = np.array(Q).reshape(2, 2)
    Qm = Qm + Qm.T
    doc = {
        "dimension": 2,
        "function": {"kind": "tilt", "u": [0.5, -0.25],
                     "base": {"kind": "quadratic", "Q": Qm.tolist(), "c": c, "beta": beta}},
        "set": {"kind": "union", "members": [
            {"kind": "box", "lo": lo, "hi": ["inf", "inf"]},
            {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
        ]},
        "options": {"seed": 7, "samples": 100},
    }
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = problem_from_dict(doc)
    text = serialize_problem(p)
    q = parse_problem(text)
    assert serialize_problem(q) == text
    x = np.array([0.3, -0.7])
    assert eval_f(q.f, x) == eval_f(p.f, x)
