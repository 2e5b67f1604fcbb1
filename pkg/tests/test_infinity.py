import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from instances import random_polyhedron
from recede._lp import nonneg_lstsq
from recede.errors import NonsmoothUnsupported, NotConvexSet, TooManyConstraints
from recede.fixtures import problem
from recede.infinity import InfCfg, normal_cone_at_infinity, son_cq_check, subdiff_at_infinity
from recede.models import (
    Affine,
    Ball,
    Blackbox,
    Box,
    MembershipSet,
    PNorm,
    Polyhedron,
    ProblemSpec,
    Quadratic,
    RationalSquash,
    SqrtAbs,
    Tilt,
    WholeSpace,
)


def hausdorff(P, Q):
    if len(P) == 0 and len(Q) == 0:
        return 0.0
    if len(P) == 0 or len(Q) == 0:
        return math.inf
    return max(cKDTree(Q).query(P)[0].max(), cKDTree(P).query(Q)[0].max())


def angle_to_pieces(v, N):
    """Distance from unit ``v`` to the union of the piece cones."""
    best = math.inf
    for G in N.pieces:
        if len(G) == 0:
            continue
        lam, _ = nonneg_lstsq(G.T, v)
        best = min(best, float(np.linalg.norm(G.T @ lam - v)))
    return best


def test_strip_normal_cone_is_the_horizontal_axis():
    N = normal_cone_at_infinity(problem("strip").X)
    gens = sorted(tuple(g) for G in N.pieces for g in G)
    assert gens == [(-1.0, 0.0), (1.0, 0.0)]
    assert not N.empty


def test_bounded_sets_have_empty_normal_cone():
    for X in (Ball([0.0, 0.0], 2.0), Box([0, 0], [1, 1]),
              Polyhedron([[1, 0], [-1, 0], [0, 1], [0, -1]], [1, 1, 1, 1])):
        assert normal_cone_at_infinity(X).empty


def test_bounded_set_condition_holds():
    p = ProblemSpec(2, Quadratic(np.eye(2)), Box([0, 0], [1, 1]))
    r = son_cq_check(p)
    assert r.verdict == "holds"
    assert r.margin == math.inf


def test_whole_space_normal_cone_is_zero():
    N = normal_cone_at_infinity(WholeSpace(2))
    assert all(len(G) == 0 for G in N.pieces)


def test_unsupported_inputs():
    with pytest.raises(NotConvexSet):
        normal_cone_at_infinity(MembershipSet(lambda x: True, 1, [0.0]))
    A = np.vstack([np.cos(np.linspace(0, 3, 21)), np.sin(np.linspace(0, 3, 21))]).T
    with pytest.raises(TooManyConstraints):
        normal_cone_at_infinity(Polyhedron(A, np.ones(21)))
    with pytest.raises(NonsmoothUnsupported):
        subdiff_at_infinity(SqrtAbs(1))
    with pytest.raises(NonsmoothUnsupported):
        subdiff_at_infinity(PNorm(1.0, 2))
    with pytest.raises(NonsmoothUnsupported):
        subdiff_at_infinity(Blackbox(lambda x: 0.0, 1))


def test_affine_subdifferential_is_exact():
    S = subdiff_at_infinity(Affine([1.0, -2.0]))
    assert S.exact
    assert np.array_equal(S.points, [[1.0, -2.0]])
    assert len(S.rays) == 0
    T = subdiff_at_infinity(Tilt(Affine([1.0, -2.0]), [0.5, 0.5]))
    assert np.allclose(T.points, [[0.5, -2.5]])


def test_strip_subdifferential_and_condition():
    S = subdiff_at_infinity(problem("strip").f)
    G = S.cap
    seg = np.c_[np.zeros(200_001), np.linspace(-G, G, 200_001)]
    assert hausdorff(S.points, seg) <= 0.05
    assert sorted(map(tuple, np.round(S.rays, 12))) == [(0.0, -1.0), (0.0, 1.0)]
    r = son_cq_check(problem("strip"))
    assert r.verdict == "violated"
    assert r.details["delta"] <= 1e-6


def test_affine_half_line_condition_holds():
    r = son_cq_check(problem("affine_halfline"))
    assert r.verdict == "holds"


def test_normal_cone_matches_sampled_frechet_normals():
    rng = np.random.default_rng(17)
    tested = 0
    for s in range(40):
        X = random_polyhedron(s)
        N = normal_cone_at_infinity(X)
        gens = np.array([g for G in N.pieces for g in G]).reshape(-1, X.dim)
        if len(gens) == 0:
            continue
        n = X.dim
        Z = rng.normal(size=(4000, n))
        P = X.project(1e4 * Z / np.linalg.norm(Z, axis=1, keepdims=True) * 1.5)
        P = P[np.linalg.norm(P, axis=1) >= 1e4]
        samples = []
        for x in P:
            act = X.A @ x >= X.b - 1e-7 * np.linalg.norm(x)
            rows = X.A[act] / np.linalg.norm(X.A[act], axis=1, keepdims=True)
            if len(rows) == 0:
                continue
            samples.extend(rows)
            w = rng.uniform(size=len(rows))
            v = w @ rows
            if np.linalg.norm(v) > 1e-9:
                samples.append(v / np.linalg.norm(v))
        samples = np.array(samples)
        assert len(samples) > 0
        for v in samples:
            assert angle_to_pieces(v, N) <= 0.02
        for g in gens:
            assert np.min(np.linalg.norm(samples - g, axis=1)) <= 0.02
        tested += 1
        if tested == 10:
            break
    assert tested == 10


@pytest.mark.parametrize("f", [
    Quadratic([[0.0, 0.0], [0.0, 2.0]]),
    PNorm(2.0, 2),
    RationalSquash(2),
    Quadratic(np.eye(2), [1.0, 0.0]),
], ids=["strip", "pnorm2", "squash", "pd_quadratic"])
def test_scale_consistency(f):
    base = InfCfg(samples=4000)
    wide = InfCfg(samples=4000, shells=(2e2, 2e3, 2e4))
    a, b = subdiff_at_infinity(f, base), subdiff_at_infinity(f, wide)
    assert hausdorff(a.points, b.points) <= base.cluster_radius
    assert (len(a.rays) == 0) == (len(b.rays) == 0)
