"""Normal cone and subdifferential at infinity, and the condition built from them.

For polyhedra the normal cone at infinity is exact: it is the union of
``cone(rows of A_I)`` over active sets ``I`` whose face is nonempty and
unbounded. For smooth f the subdifferential at infinity reduces to limit
points of gradients along ``|x| -> inf``; it is estimated on spheres of
growing radius.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial import cKDTree

from . import _lp
from ._random import stream, unit_sphere
from .conditions import CheckResult
from .errors import NonsmoothUnsupported, NotConvexSet, TooManyConstraints
from .models import (
    Affine,
    Ball,
    Blackbox,
    Box,
    CapAbs,
    FunctionModel,
    PlusSqrt,
    PNorm,
    Polyhedron,
    ProblemSpec,
    SetModel,
    SqrtAbs,
    Tilt,
    WholeSpace,
    _jmat,
    ext_to_json,
    grad_batch,
)

MAX_ROWS = 20
VIOLATED_BELOW = 1e-6
HOLDS_ABOVE = 1e-3


@dataclass
class InfNormalCone:
    """Union of finitely generated cones; ``pieces`` holds one generator matrix per cone."""

    dim: int
    pieces: list = field(default_factory=list)
    faces: list = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.pieces

    def to_dict(self) -> dict:
        return {"dim": self.dim,
                "pieces": [{"active": list(I), "generators": _jmat(P)}
                           for I, P in zip(self.faces, self.pieces)]}


@dataclass
class InfSubdiff:
    """Finite representation of the subdifferential at infinity.

    ``points`` are clustered gradient limit points with norm at most ``cap``;
    ``rays`` are unit directions along which gradients exceed the cap.
    """

    dim: int
    points: np.ndarray
    rays: np.ndarray
    cap: float
    exact: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self, full: bool = False, preview: int = 16) -> dict:
        d = {"dim": self.dim, "cap": self.cap, "exact": self.exact,
             "n_points": int(len(self.points)), "n_rays": int(len(self.rays))}
        if len(self.points):
            d["bbox"] = [_jmat(self.points.min(axis=0)[None, :])[0],
                         _jmat(self.points.max(axis=0)[None, :])[0]]
        if full:
            d["points"] = _jmat(self.points)
            d["rays"] = _jmat(self.rays)
        else:
            d["points_preview"] = _jmat(_spread(self.points, preview))
            d["rays_preview"] = _jmat(_spread(self.rays, preview))
        d.update(self.details)
        return d


def _spread(P, k):
    """Up to k rows of P, evenly spaced in lexicographic order."""
    if len(P) <= k:
        return P
    order = np.lexsort(P.T[::-1])
    return P[order[np.linspace(0, len(P) - 1, k).round().astype(int)]]


# --------------------------------------------------------------------------
# normal cone at infinity


def _as_rows(X: SetModel):
    if isinstance(X, Polyhedron):
        return X.A, X.b
    if isinstance(X, (Box, WholeSpace)):
        return X.as_polyhedron()
    raise NotConvexSet(f"the normal cone at infinity needs a polyhedral set, got {X.kind}")


def _face_unbounded(A, b, I):
    I = list(I)
    rest = [i for i in range(len(A)) if i not in I]
    A_eq = A[I] if I else None
    b_eq = b[I] if I else None
    if _lp.feasible_point(A[rest] if rest else np.zeros((0, A.shape[1])), b[rest],
                          A_eq, b_eq) is None:
        return False
    A_rest = A[rest] if rest else np.zeros((0, A.shape[1]))
    return _lp.cone_nonzero(A_rest, A_eq=A_eq) is not None


def normal_cone_at_infinity(X: SetModel) -> InfNormalCone:
    """Exact normal cone at infinity of a polyhedral set by face enumeration.

    Faces shrink as the active set grows, so an empty or bounded face prunes
    all of its supersets; only maximal contributing active sets are kept.
    """
    n = X.dim
    if isinstance(X, Ball) or (isinstance(X, Box) and X.bounded):
        return InfNormalCone(n)
    A, b = _as_rows(X)
    A = np.asarray(A, dtype=float).reshape(-1, n)
    b = np.asarray(b, dtype=float)
    m = len(A)
    if m > MAX_ROWS:
        raise TooManyConstraints(f"{m} constraints exceed the face-enumeration limit {MAX_ROWS}")
    if not _face_unbounded(A, b, ()):
        return InfNormalCone(n)
    good = {()}
    level = [()]
    while level:
        nxt = []
        for I in level:
            start = I[-1] + 1 if I else 0
            for j in range(start, m):
                J = I + (j,)
                if any(J[:k] + J[k + 1:] not in good for k in range(len(J))):
                    continue
                if _face_unbounded(A, b, J):
                    good.add(J)
                    nxt.append(J)
        level = nxt
    maximal = sorted((I for I in good if not any(set(I) < set(J) for J in good)),
                     key=lambda I: (len(I), I))
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    An = A / norms
    return InfNormalCone(n, pieces=[An[list(I)] for I in maximal], faces=maximal)


# --------------------------------------------------------------------------
# subdifferential at infinity


@dataclass
class InfCfg:
    shells: tuple = (1e2, 1e3, 1e4)
    samples: int = 10_000
    cap: float = 1e3
    cluster_radius: float = 0.05
    fill_rounds: int = 4
    fill_budget: int = 600_000
    seed: int = 42


def _check_smooth(f: FunctionModel):
    if isinstance(f, Tilt):
        return _check_smooth(f.base)
    if isinstance(f, (SqrtAbs, CapAbs, PlusSqrt)) or (isinstance(f, PNorm) and f.p == 1):
        raise NonsmoothUnsupported(f"{f.kind} has kinks reaching infinity")
    if isinstance(f, Blackbox) and f.grad_fn is None:
        raise NonsmoothUnsupported("blackbox without a gradient oracle")


def _cluster(P, radius):
    """Grid clustering; every point is within ``radius / 2`` of its cell mean."""
    if len(P) == 0:
        return P.reshape(0, P.shape[-1])
    cell = radius / (2.0 * math.sqrt(P.shape[1]))
    keys = np.round(P / cell).astype(np.int64)
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    sums = np.zeros((len(counts), P.shape[1]))
    np.add.at(sums, inv, P)
    return sums / counts[:, None]


def _edges(D):
    """Neighbour edges covering the direction cloud: the angular chain for n=2, else a spanning tree."""
    if D.shape[1] == 2:
        order = np.argsort(np.arctan2(D[:, 1], D[:, 0]), kind="stable")
        return order, np.roll(order, -1)
    k = min(len(D), 2 * D.shape[1] + 1)
    dist, idx = cKDTree(D).query(D, k)
    rows = np.repeat(np.arange(len(D)), k - 1)
    graph = coo_matrix((dist[:, 1:].ravel() + 1e-15, (rows, idx[:, 1:].ravel())),
                       shape=(len(D), len(D)))
    tree = minimum_spanning_tree(graph).tocoo()
    return tree.row, tree.col


def _fill_gaps(f, R, D, G, limit, h, cfg):
    """Subdivide neighbour edges whose gradients differ by more than h."""
    budget = cfg.fill_budget
    for _ in range(cfg.fill_rounds):
        if len(D) < 2 or budget <= 0:
            break
        I, J = _edges(D)
        gap = np.linalg.norm(G[I] - G[J], axis=1)
        sel = (np.linalg.norm(D[I] - D[J], axis=1) < 0.2) & (gap > h)
        if not sel.any():
            break
        I, J = I[sel], J[sel]
        m = np.minimum(np.ceil(gap[sel] / h).astype(int), 5000)
        keep = np.cumsum(m - 1) <= budget
        if not keep.any():
            break
        I, J, m = I[keep], J[keep], m[keep]
        budget -= int((m - 1).sum())
        e = np.repeat(np.arange(len(m)), m - 1)
        start = np.concatenate([[0], np.cumsum(m - 1)[:-1]])
        s = (np.arange(len(e)) - start[e] + 1) / m[e]
        Dn = (1 - s)[:, None] * D[I[e]] + s[:, None] * D[J[e]]
        Dn /= np.linalg.norm(Dn, axis=1, keepdims=True)
        Gn = grad_batch(f, R * Dn)
        ok = np.linalg.norm(Gn, axis=1) <= limit
        D = np.vstack([D, Dn[ok]])
        G = np.vstack([G, Gn[ok]])
    return D, G


def _shell(f, R, i, cfg):
    n = f.dim
    if n == 1:
        D = np.array([[1.0], [-1.0]])
    else:
        D = unit_sphere(stream(cfg.seed, "shell", i), cfg.samples, n)
    G = grad_batch(f, R * D)
    gn = np.linalg.norm(G, axis=1)
    rays = G[gn > cfg.cap] / gn[gn > cfg.cap, None]
    if n > 1:
        near = gn <= 2 * cfg.cap
        _, Gc = _fill_gaps(f, R, D[near], G[near], 2 * cfg.cap, cfg.cluster_radius / 2, cfg)
    else:
        Gc = G
    pts = Gc[np.linalg.norm(Gc, axis=1) <= cfg.cap]
    return _cluster(pts, cfg.cluster_radius), _cluster(rays, cfg.cluster_radius)


def _retain(P, Q, radius):
    if len(P) == 0 or len(Q) == 0:
        return P[:0]
    d, _ = cKDTree(Q).query(P, 1)
    return P[d <= radius]


def subdiff_at_infinity(f: FunctionModel, cfg: InfCfg | None = None) -> InfSubdiff:
    """Gradient limit points along ``|x| -> inf`` for smooth or affine f.

    Clusters found on the outermost shell are kept when the next shell
    reproduces them within ``cluster_radius``.
    """
    cfg = cfg or InfCfg()
    n = f.dim
    if isinstance(f, Affine):
        return InfSubdiff(n, f.c[None, :].copy(), np.zeros((0, n)), cfg.cap, exact=True)
    if isinstance(f, Tilt) and isinstance(f.base, Affine):
        return InfSubdiff(n, (f.base.c - f.u)[None, :], np.zeros((0, n)), cfg.cap, exact=True)
    _check_smooth(f)
    shells = sorted(cfg.shells)
    if len(shells) < 2:
        raise ValueError("need at least two shells")
    p_in, r_in = _shell(f, shells[-2], len(shells) - 2, cfg)
    p_out, r_out = _shell(f, shells[-1], len(shells) - 1, cfg)
    pts = _retain(p_out, p_in, cfg.cluster_radius)
    rays = _retain(r_out, r_in, cfg.cluster_radius)
    return InfSubdiff(n, pts, rays, cfg.cap,
                      details={"shells": [shells[-2], shells[-1]],
                               "cluster_radius": cfg.cluster_radius})


# --------------------------------------------------------------------------
# the competing condition


def son_cq_check(p: ProblemSpec, cfg: InfCfg | None = None) -> CheckResult:
    """Check ``0 not in df(inf) + N_X(inf)``.

    ``delta = min |g + nu|`` with g ranging over the stored points plus the
    cone of the unbounded rays, and nu over each normal-cone piece; each
    minimization is a nonnegative least-squares problem.
    """
    cfg = cfg or InfCfg(seed=p.options.seed)
    N = normal_cone_at_infinity(p.X)
    S = subdiff_at_infinity(p.f, cfg)
    details = {"normal_cone": N.to_dict(), "subdiff": S.to_dict()}
    if N.empty or len(S.points) == 0:
        details["delta"] = "inf"
        return CheckResult("holds", "exact" if S.exact else "sampled", margin=math.inf,
                           details=details)
    best = (math.inf, None, None)
    for P in N.pieces:
        V = np.vstack([P, S.rays]) if len(S.rays) else P
        dist = _lp.cone_distance_batch(S.points, V)
        # among (near-)ties prefer the smallest gradient as the witness
        tied = np.flatnonzero(dist <= dist.min() + 1e-12)
        i = int(tied[np.argmin(np.linalg.norm(S.points[tied], axis=1))])
        if dist[i] < best[0]:
            g = S.points[i]
            r, lam = _lp.cone_distance(g, V)
            nu = lam[:len(P)] @ P if len(P) else np.zeros(p.dimension)
            best = (float(dist[i]), g, nu)
    delta, g, nu = best
    details["delta"] = ext_to_json(delta)
    details["g"] = g.tolist()
    details["nu"] = nu.tolist()
    mode = "exact" if S.exact else "sampled"
    if delta <= VIOLATED_BELOW:
        return CheckResult("violated", mode, details=details)
    if delta >= HOLDS_ABOVE:
        return CheckResult("holds", mode, margin=delta, details=details)
    return CheckResult("inconclusive", mode, margin=delta, details=details)
