"""Small linear-programming and least-squares kit.

LPs go through ``scipy.optimize.linprog`` (HiGHS); nonnegative least squares
through ``scipy.optimize.lsq_linear`` (BVLS). Everything here is desk-scale: n <= 10,
a few dozen constraints.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog, lsq_linear

_FEAS_TOL = 1e-9


def _empty(n):
    return np.zeros((0, n))


def _lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None):
    kw = {}
    if A_ub is not None and len(A_ub):
        kw["A_ub"], kw["b_ub"] = A_ub, b_ub
    if A_eq is not None and len(A_eq):
        kw["A_eq"], kw["b_eq"] = A_eq, b_eq
    res = linprog(c, bounds=bounds, method="highs", **kw)
    return res


def feasible_point(A_ub, b_ub, A_eq=None, b_eq=None):
    """A point of ``{A_ub x <= b_ub, A_eq x = b_eq}`` or None when empty."""
    A_ub = np.asarray(A_ub, dtype=float)
    n = A_ub.shape[1]
    if A_ub.shape[0] == 0 and (A_eq is None or len(A_eq) == 0):
        return np.zeros(n)
    # a tiny pull toward the origin keeps the returned point deterministic and small
    res = _lp(np.zeros(n), A_ub, b_ub, A_eq, b_eq, bounds=[(None, None)] * n)
    if res.status != 0:
        return None
    return np.asarray(res.x, dtype=float)


def cone_nonzero(A_ub, A_eq=None, extra_ub=None):
    """Find ``u != 0`` with ``A_ub u <= 0``, ``A_eq u = 0`` (and ``extra_ub u <= 0``).

    Decided by 2n LP feasibility problems with the normalization
    ``u_i = +1`` or ``u_i = -1``. Returns the first witness found, scaled to
    unit Euclidean norm, or None if the cone is ``{0}``.
    """
    A_ub = np.asarray(A_ub, dtype=float)
    n = A_ub.shape[1]
    rows_ub = [A_ub]
    if extra_ub is not None:
        rows_ub.append(np.atleast_2d(np.asarray(extra_ub, dtype=float)))
    G = np.vstack(rows_ub) if rows_ub else _empty(n)
    E = _empty(n) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float)).reshape(-1, n)
    for i in range(n):
        for s in (1.0, -1.0):
            e = np.zeros(n)
            e[i] = 1.0
            A_eq_i = np.vstack([E, e])
            b_eq_i = np.zeros(len(A_eq_i))
            b_eq_i[-1] = s
            res = _lp(np.zeros(n), G, np.zeros(len(G)), A_eq_i, b_eq_i,
                      bounds=[(None, None)] * n)
            if res.status == 0:
                u = np.asarray(res.x, dtype=float)
                return u / np.linalg.norm(u)
    return None


def min_linear_on_cone(c, A_ub, A_eq=None):
    """Minimize ``c'u`` over ``{A_ub u <= 0, A_eq u = 0, |u_i| <= 1}``."""
    A_ub = np.asarray(A_ub, dtype=float)
    n = A_ub.shape[1]
    res = _lp(np.asarray(c, dtype=float), A_ub, np.zeros(len(A_ub)),
              A_eq, None if A_eq is None else np.zeros(len(A_eq)),
              bounds=[(-1.0, 1.0)] * n)
    if res.status != 0:
        return 0.0, np.zeros(n)
    return float(res.fun), np.asarray(res.x, dtype=float)


def coordinate_range(A_ub, b_ub, i, clip):
    """``(min x_i, max x_i)`` over the polyhedron, clipped to ``[-clip, clip]``."""
    A_ub = np.asarray(A_ub, dtype=float)
    n = A_ub.shape[1]
    out = []
    for s in (1.0, -1.0):
        c = np.zeros(n)
        c[i] = s
        res = _lp(c, A_ub, b_ub, bounds=[(-clip, clip)] * n)
        out.append(s * res.fun if res.status == 0 else -s * clip)
    return out[0], out[1]


def nonneg_lstsq(M, y):
    """``argmin ||M x - y||`` over ``x >= 0``; returns ``(x, residual norm)``.

    BVLS rather than ``nnls``: some scipy releases return a wrong active set
    from ``nnls`` on rank-deficient systems while reporting a zero residual.
    """
    M = np.asarray(M, dtype=float)
    y = np.asarray(y, dtype=float)
    x = lsq_linear(M, y, bounds=(0.0, np.inf), method="bvls", tol=1e-14).x
    x = np.maximum(x, 0.0)
    return x, float(np.linalg.norm(M @ x - y))


def cone_distance(g, generators):
    """``min ||g + V lam||`` over ``lam >= 0``; rows of ``generators`` span the cone."""
    g = np.asarray(g, dtype=float)
    V = np.asarray(generators, dtype=float).reshape(-1, g.size)
    if V.shape[0] == 0:
        return float(np.linalg.norm(g)), np.zeros(0)
    lam, rnorm = nonneg_lstsq(V.T, -g)
    return rnorm, lam


def cone_distance_batch(G, generators, max_enum=12):
    """Row-wise ``min ||g + V lam||`` over ``lam >= 0``.

    With few generators every linearly independent support is tried and the
    least-squares weights are kept when nonnegative (the optimal support is
    among them); otherwise falls back to one NNLS per row.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    n = G.shape[1]
    V = np.asarray(generators, dtype=float).reshape(-1, n)
    best = np.linalg.norm(G, axis=1)
    if len(V) == 0 or len(G) == 0:
        return best
    if len(V) > max_enum:
        return np.array([cone_distance(g, V)[0] for g in G])
    for size in range(1, min(n, len(V)) + 1):
        for S in itertools.combinations(range(len(V)), size):
            M = V[list(S)].T
            if np.linalg.matrix_rank(M, tol=1e-12) < size:
                continue
            W, *_ = np.linalg.lstsq(M, -G.T, rcond=None)
            ok = np.all(W >= -1e-12, axis=0)
            if not ok.any():
                continue
            d = np.linalg.norm(G + (M @ W).T, axis=1)
            best = np.where(ok, np.minimum(best, d), best)
    return best


def hull_distance(points, X, rays=None):
    """Euclidean distance from each row of ``X`` to ``conv(points) + cone(rays)``.

    Exact, by enumerating Caratheodory supports of size <= n+1: for each
    support the unconstrained least-squares projection onto its affine/conic
    hull is kept when all weights come out nonnegative. Vectorized over the
    query points.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = P.shape[1]
    R = np.zeros((0, n)) if rays is None else np.asarray(rays, dtype=float).reshape(-1, n)
    best = np.min(np.linalg.norm(X[:, None, :] - P[None, :, :], axis=-1), axis=1)
    items = [("p", i) for i in range(len(P))] + [("r", j) for j in range(len(R))]
    max_size = min(n + 1, len(items))
    for size in range(2, max_size + 1):
        for support in itertools.combinations(items, size):
            pts = [P[i] for k, i in support if k == "p"]
            rys = [R[j] for k, j in support if k == "r"]
            if not pts:
                continue
            p0 = pts[0]
            cols = [p - p0 for p in pts[1:]] + rys
            M = np.array(cols).T  # n x (size-1)
            if np.linalg.matrix_rank(M, tol=1e-12) < M.shape[1]:
                continue
            W, *_ = np.linalg.lstsq(M, (X - p0).T, rcond=None)  # (size-1) x k
            npts = len(pts) - 1
            w_pts = W[:npts]
            w_rays = W[npts:]
            w0 = 1.0 - w_pts.sum(axis=0)
            ok = (w0 >= -1e-12) & np.all(w_pts >= -1e-12, axis=0) & np.all(w_rays >= -1e-12, axis=0)
            if not np.any(ok):
                continue
            proj = p0 + (M @ W).T
            d = np.linalg.norm(X - proj, axis=1)
            best = np.where(ok, np.minimum(best, d), best)
    return best


def null_space(M, tol=1e-10):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return np.eye(M.shape[1])
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > tol * max(1.0, s.max() if s.size else 1.0)))
    return vt[rank:].T


def row_basis(M, tol=1e-10):
    """Orthonormal rows spanning the row space of ``M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return M.reshape(0, M.shape[1])
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > tol * max(1.0, s.max())))
    return vt[:rank]
