"""Seeded random PSD-quadratic / polyhedron instances shared by the oracle suites.

Five families, six instances each:
  A  positive definite Q, bounded polyhedron
  B  positive definite Q, unbounded polyhedron
  C  rank-deficient Q whose kernel is cut off by the set's recession cone
  D  affine f, c strictly positive on a pointed recession cone
  E  affine f, c nonpositive on the whole recession cone (unbounded below)
"""
import numpy as np

from recede.models import (
    Affine,
    Box,
    CapAbs,
    PlusSqrt,
    PNorm,
    Polyhedron,
    ProblemSpec,
    Quadratic,
    RationalSquash,
    SqrtAbs,
    Tilt,
)


def _rows(rng, n, m):
    A = rng.normal(size=(m, n))
    return A / np.linalg.norm(A, axis=1, keepdims=True)


def _pointed_cone_rows(rng, n):
    # rows of a pointed cone around a random axis: a'u <= 0 contains -axis direction
    axis = rng.normal(size=n)
    axis /= np.linalg.norm(axis)
    m = n + 1 + int(rng.integers(0, 2))
    A = _rows(rng, n, m) * 0.6 + axis
    return A / np.linalg.norm(A, axis=1, keepdims=True)


def _polyhedron(rng, A, spread=1.0):
    x0 = rng.normal(size=A.shape[1]) * spread
    b = A @ x0 + rng.uniform(0.2, 1.5, size=len(A))
    return Polyhedron(A, b)


def _bounded_rows(rng, n):
    box = np.vstack([np.eye(n), -np.eye(n)])
    return np.vstack([box, _rows(rng, n, int(rng.integers(0, 3)))])


def instance(family, k, seed=2024):
    rng = np.random.default_rng([seed, ord(family), k])
    n = int(rng.integers(1, 4))
    if family == "A":
        M = rng.normal(size=(n, n))
        f = Quadratic(M @ M.T + 0.5 * np.eye(n), rng.normal(size=n))
        X = _polyhedron(rng, _bounded_rows(rng, n))
    elif family == "B":
        M = rng.normal(size=(n, n))
        f = Quadratic(M @ M.T + 0.5 * np.eye(n), rng.normal(size=n) * 2)
        X = _polyhedron(rng, _pointed_cone_rows(rng, n))
    elif family == "C":
        n = max(n, 2)
        r = n - 1
        M = rng.normal(size=(n, r))
        Q = M @ M.T
        kernel = np.linalg.svd(M.T)[2][-1]
        A = np.vstack([_rows(rng, n, 2), kernel, -kernel])
        f = Quadratic(Q, rng.normal(size=n))
        X = _polyhedron(rng, A)
    elif family == "D":
        A = _pointed_cone_rows(rng, n)
        w = rng.uniform(0.5, 1.5, size=len(A))
        f = Affine(-A.T @ w)
        X = _polyhedron(rng, A)
    elif family == "E":
        A = _pointed_cone_rows(rng, n)
        w = rng.uniform(0.5, 1.5, size=len(A))
        f = Affine(A.T @ w)
        X = _polyhedron(rng, A)
    else:
        raise ValueError(family)
    return ProblemSpec(n, f, X)


def qp_instances():
    return [(fam, k, instance(fam, k)) for fam in "ABCDE" for k in range(6)]


def random_polyhedron(seed, max_n=3, max_m=6):
    """Random nonempty ``{Ax <= b}``, biased so most draws have a nonzero cone."""
    rng = np.random.default_rng([seed, 77])
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    axis = rng.normal(size=n)
    axis /= np.linalg.norm(axis)
    A = _rows(rng, n, m) + rng.uniform(0.0, 1.5) * axis
    A = A / np.linalg.norm(A, axis=1, keepdims=True)
    return _polyhedron(rng, A)


def function_catalog(n, rng):
    """Catalog of built-in functions in dimension ``n`` with random data."""
    M = rng.normal(size=(n, n))
    e1 = np.zeros((n, n))
    e1[0, 0] = 1.0
    return [
        Affine(rng.normal(size=n)),
        Quadratic(M @ M.T, rng.normal(size=n)),
        Quadratic(e1, rng.normal(size=n)),
        Quadratic(M + M.T, rng.normal(size=n)),
        PNorm(2.0, n),
        PNorm(1.0, n),
        SqrtAbs(n),
        RationalSquash(n),
        CapAbs(n),
        PlusSqrt(n),
    ]


def quasiconvex_instances():
    """One-dimensional quasiconvex functions on a bounded interval and both half-lines."""
    fs = [RationalSquash(1), SqrtAbs(1), PlusSqrt(1), CapAbs(1), PNorm(2.0, 1),
          Affine([1.0]), Affine([-1.0]), Affine([0.0]), Quadratic([[2.0]], [-1.0]),
          Tilt(PNorm(2.0, 1), [0.5])]
    sets = [Box([-1.0], [2.0]), Box([0.0], [np.inf]), Box([-np.inf], [0.0])]
    return [ProblemSpec(1, f, X) for f in fs for X in sets]
