"""Desk-scale minimization of f over X with solution-set recovery.

Pipeline: an unboundedness screen on the asymptotic cone, then either the
exact active-set path (PSD quadratic or affine f over a polyhedral set) or
multistart projected descent run in lockstep over all starts.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _lp
from ._random import latin_hypercube, stream
from .asymptotics import AsymCfg, asym_fn
from .cones import asymptotic_cone, sample_cone_unit
from .errors import EmptySet, EmptySolSet, MaxIterations
from .models import (
    MINUS_INF,
    Box,
    MembershipSet,
    Polyhedron,
    ProblemSpec,
    SetModel,
    Union,
    WholeSpace,
    _jmat,
    _vec,
    ext_to_json,
    grad_batch,
    is_psd,
)

FEAS_TOL = 1e-6
MAX_EXACT_ROWS = 20


@dataclass
class SolveCfg:
    starts: int = 64
    max_iter: int = 10_000
    armijo: float = 1e-4
    step_tol: float = 1e-12
    value_tol: float = 1e-6
    cluster_radius: float = 1e-4
    box_halfwidth: float = 10.0
    screen_dirs: int = 64
    escape_norm: float = 1e7
    seed: int = 42


@dataclass
class SolverResult:
    """Outcome of a solve.

    ``points`` is the solution cloud. With ``hull_flag`` the solution set is
    ``conv(points) + cone(rays)``; otherwise it is the finite cloud itself.
    """

    status: str
    f_star: float
    points: np.ndarray
    hull_flag: bool = False
    rays: np.ndarray = None
    cluster_radius: float = 1e-4
    certificate: np.ndarray | None = None
    method: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.points.shape[1] if self.points.ndim == 2 else 0
        if self.rays is None:
            self.rays = np.zeros((0, n))

    @property
    def bounded(self) -> bool:
        return len(self.rays) == 0

    def diameter(self) -> float:
        if not self.bounded:
            return math.inf
        if len(self.points) < 2:
            return 0.0
        diff = self.points[:, None, :] - self.points[None, :, :]
        return float(np.linalg.norm(diff, axis=-1).max())

    def to_dict(self) -> dict:
        d = {
            "status": self.status,
            "f_star": ext_to_json(self.f_star),
            "sol_points": _jmat(self.points),
            "hull_flag": self.hull_flag,
            "sol_rays": _jmat(self.rays),
            "cluster_radius": self.cluster_radius,
            "certificate": None if self.certificate is None else _jmat(self.certificate[None, :])[0],
            "method": self.method,
        }
        if self.details:
            d["details"] = self.details
        return d


def dist_to_solset(x, s: SolverResult) -> float:
    """Euclidean distance from ``x`` to the solution set represented by ``s``."""
    if s.points is None or len(s.points) == 0:
        raise EmptySolSet("the solution set is empty")
    x = _vec(x, s.points.shape[1])
    return float(dist_to_solset_batch(x[None, :], s)[0])


def dist_to_solset_batch(X, s: SolverResult) -> np.ndarray:
    if s.points is None or len(s.points) == 0:
        raise EmptySolSet("the solution set is empty")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if s.hull_flag:
        return _lp.hull_distance(s.points, X, s.rays)
    diff = X[:, None, :] - s.points[None, :, :]
    return np.linalg.norm(diff, axis=-1).min(axis=1)


# --------------------------------------------------------------------------
# helpers


def _polyhedral(X: SetModel):
    if isinstance(X, (Polyhedron, Box, WholeSpace)):
        A, b = X.as_polyhedron()
        return np.asarray(A, dtype=float).reshape(-1, X.dim), np.asarray(b, dtype=float)
    return None


def _check_feasible(X: SetModel):
    rows = _polyhedral(X)
    if rows is not None:
        A, b = rows
        if len(A) and _lp.feasible_point(A, b) is None:
            return False
        return True
    if isinstance(X, Union):
        return any(_check_feasible(m) for m in X.members)
    try:
        a = X.anchor()
    except EmptySet:
        return False
    return bool(X.member(a[None, :], FEAS_TOL)[0])


def _dedupe(P, radius):
    """Greedy leader clustering in lexicographic order."""
    if len(P) == 0:
        return P
    P = P[np.lexsort(P.T[::-1])]
    keep = []
    for p in P:
        if all(np.linalg.norm(p - q) > radius for q in keep):
            keep.append(p)
    return np.array(keep)


def _unbounded(n, d, method, details=None):
    return SolverResult("unbounded_below", MINUS_INF, np.zeros((0, n)), certificate=d,
                        method=method, details=details or {})


# --------------------------------------------------------------------------
# unboundedness screen


def _screen_exact(A, Q, c):
    """Direction with ``Au <= 0, Qu = 0, c'u < 0`` (PSD quadratic / affine) or None."""
    n = len(c)
    val, u = _lp.min_linear_on_cone(c, A if len(A) else np.zeros((0, n)),
                                    Q if np.any(Q) else None)
    if val < -1e-12:
        return u / np.linalg.norm(u)
    return None


def _screen_sampled(p: ProblemSpec, cfg: SolveCfg):
    C = asymptotic_cone(p.X, seed=cfg.seed)
    if C.is_zero:
        return None
    acfg = AsymCfg.from_options(p.options)
    D = sample_cone_unit(C, cfg.screen_dirs, seed=cfg.seed)
    for d in D:
        est = asym_fn(p.f, d, acfg)
        negative = (est.bound == "exact" and est.value < 0) or (
            est.bound == "interval" and est.hi is not None and est.hi < 0)
        if negative:
            return d, est
    return None


# --------------------------------------------------------------------------
# exact path


def _kkt_point(Q, c, A, b, I):
    n = len(c)
    k = len(I)
    AI = A[list(I)] if k else np.zeros((0, n))
    K = np.block([[Q, AI.T], [AI, np.zeros((k, k))]])
    rhs = np.concatenate([-c, b[list(I)] if k else np.zeros(0)])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    if np.linalg.norm(K @ sol - rhs) > 1e-8 * max(1.0, np.linalg.norm(rhs)):
        return None
    x, lam = sol[:n], sol[n:]
    if k and np.any(lam < -1e-9):
        return None
    if len(A) and np.any(A @ x > b + 1e-9 * (1 + np.abs(b))):
        return None
    return x


def _face_vertices(E, e, A, b):
    """Vertices and extreme rays of ``{Ex = e, Ax <= b}``, lineality returned as +-rays."""
    n = A.shape[1] if len(A) else E.shape[1]
    L = _lp.null_space(np.vstack([E, A]) if len(A) else E)
    lin = L.T
    Eb = np.vstack([E, lin]) if len(lin) else E
    eb = np.concatenate([e, np.zeros(len(lin))])
    base = _lp.row_basis(Eb)
    r0 = len(base)
    verts, rays = [], []
    m = len(A)
    need = n - r0
    for S in itertools.combinations(range(m), need):
        M = np.vstack([Eb, A[list(S)]]) if need else Eb
        if np.linalg.matrix_rank(M, tol=1e-10) < n:
            continue
        rhs = np.concatenate([eb, b[list(S)]]) if need else eb
        x, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        if np.linalg.norm(M @ x - rhs) > 1e-8 * max(1.0, np.linalg.norm(rhs)):
            continue
        if m and np.any(A @ x > b + 1e-9 * (1 + np.abs(b))):
            continue
        verts.append(x)
    if need >= 1:
        for S in itertools.combinations(range(m), need - 1):
            M = np.vstack([Eb, A[list(S)]]) if need > 1 else Eb
            N = _lp.null_space(M)
            if N.shape[1] != 1:
                continue
            r = N[:, 0]
            for s in (1.0, -1.0):
                if np.all(A @ (s * r) <= 1e-9):
                    rays.append(s * r)
                    break
    for v in lin:
        rays.extend([v, -v])
    V = _dedupe(np.array(verts).reshape(-1, n), 1e-9)
    R = _dedupe(np.array(rays).reshape(-1, n), 1e-9)
    return V, R


def _solve_exact(p: ProblemSpec, A, b, Q, c, beta, cfg: SolveCfg) -> SolverResult:
    n = p.dimension
    d = _screen_exact(A, Q, c)
    if d is not None:
        return _unbounded(n, d, "exact", {"screen": "lp"})
    m = len(A)
    best = None
    for k in range(0, min(n, m) + 1):
        for I in itertools.combinations(range(m), k):
            if k and np.linalg.matrix_rank(A[list(I)], tol=1e-10) < k:
                continue
            x = _kkt_point(Q, c, A, b, I)
            if x is not None:
                best = x
                break
        if best is not None:
            break
    if best is None:
        raise MaxIterations("no KKT point found although the screen reported boundedness")
    fstar = float(0.5 * best @ Q @ best + c @ best + beta)
    # optimal set of a convex QP: X ∩ {Qx = Qx*, c'x = c'x*}
    E = np.vstack([Q, c[None, :]])
    e = np.concatenate([Q @ best, [c @ best]])
    keep = np.linalg.norm(E, axis=1) > 0
    V, R = _face_vertices(E[keep], e[keep], A, b)
    if len(V) == 0:
        V = best[None, :]
    return SolverResult("optimal", fstar, V, hull_flag=True, rays=R,
                        cluster_radius=cfg.cluster_radius, method="exact")


# --------------------------------------------------------------------------
# general path


def _project(X: SetModel, P: np.ndarray, owner: np.ndarray | None):
    if isinstance(X, Union):
        out = P.copy()
        for j, m in enumerate(X.members):
            sel = owner == j
            if sel.any():
                out[sel] = _project(m, P[sel], None)
        return out
    if isinstance(X, MembershipSet):
        return P
    return X.project(P)


def _starts(p: ProblemSpec, cfg: SolveCfg):
    X = p.X
    B = cfg.box_halfwidth
    a = X.anchor()
    Z = latin_hypercube(stream(cfg.seed, "starts"), cfg.starts - 1, a - B, a + B)
    owner = None
    if isinstance(X, Union):
        live = [j for j, m in enumerate(X.members) if _check_feasible(m)]
        owner = np.array([live[i % len(live)] for i in range(cfg.starts)])
        P = np.vstack([a, Z])
        return _project(X, P, owner), owner
    if isinstance(X, MembershipSet):
        ok = X.member(Z)
        P = np.vstack([a, Z[ok]])
        return P, None
    return _project(X, np.vstack([a, Z]), None), owner


def _grads(f, P):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        G = grad_batch(f, P)
    return np.nan_to_num(G, nan=0.0, posinf=1e12, neginf=-1e12)


def _descend(p: ProblemSpec, P, owner, cfg: SolveCfg):
    """Lockstep projected gradient with per-start Armijo backtracking."""
    f, X = p.f, p.X
    k = len(P)
    fx = f.values(P)
    alpha = np.ones(k)
    active = np.ones(k, dtype=bool)
    escaped = np.zeros(k, dtype=bool)
    it = 0
    for it in range(cfg.max_iter):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        x = P[idx]
        g = _grads(f, x)
        y = _project(X, x - alpha[idx, None] * g, None if owner is None else owner[idx])
        if isinstance(X, MembershipSet):
            inside = X.member(y)
            y = np.where(inside[:, None], y, x)
        fy = f.values(y)
        step = y - x
        ok = fy <= fx[idx] + cfg.armijo * np.einsum("ij,ij->i", g, step)
        tiny = np.linalg.norm(step, axis=1) <= cfg.step_tol * (1 + np.linalg.norm(x, axis=1))
        acc = idx[ok]
        P[acc] = y[ok]
        fx[acc] = fy[ok]
        alpha[acc] = np.minimum(alpha[acc] * 2.0, 1e6)
        rej = idx[~ok]
        alpha[rej] *= 0.5
        done = idx[tiny | (alpha[idx] < 1e-18)]
        active[done] = False
        far = np.linalg.norm(P, axis=1) > cfg.escape_norm
        escaped |= far
        active[far] = False
    converged = ~active | escaped
    return P, fx, converged, escaped, it + 1


def _polish(p: ProblemSpec, P, fx, cfg: SolveCfg):
    """Compass search plus snapping of near-zero coordinates (the catalog's kinks)."""
    f, X = p.f, p.X
    n = p.dimension
    E = np.vstack([np.eye(n), -np.eye(n)])
    for i in range(len(P)):
        x, v = P[i].copy(), fx[i]
        s = max(1e-3, 1e-3 * np.linalg.norm(x))
        while s > 1e-12:
            C = x + s * E
            C = C[X.member(C, 1e-12)]
            if len(C):
                vc = f.values(C)
                j = int(np.argmin(vc))
                if vc[j] < v:
                    x, v = C[j], vc[j]
                    continue
            s *= 0.5
        snap = np.where(np.abs(x) < 1e-6, 0.0, x)
        if X.member(snap[None, :], 1e-12)[0]:
            vs = float(f.values(snap[None, :])[0])
            if vs <= v:
                x, v = snap, vs
        P[i], fx[i] = x, v
    return P, fx


def _solve_general(p: ProblemSpec, cfg: SolveCfg, start_order=None) -> SolverResult:
    n = p.dimension
    hit = _screen_sampled(p, cfg)
    if hit is not None:
        d, est = hit
        return _unbounded(n, d, "multistart", {"screen": "asymptotic", "value": ext_to_json(est.value)})
    P, owner = _starts(p, cfg)
    if start_order is not None:
        order = np.asarray(start_order)
        P = P[order]
        owner = None if owner is None else owner[order]
    P, fx, conv, escaped, iters = _descend(p, P.copy(), owner, cfg)
    if escaped.any():
        i = int(np.flatnonzero(escaped)[np.argmin(fx[escaped])])
        d = P[i] / np.linalg.norm(P[i])
        return _unbounded(n, d, "multistart", {"screen": "escape", "norm": float(np.linalg.norm(P[i]))})
    P, fx = _polish(p, P, fx, cfg)
    best = float(np.min(fx))
    sel = fx <= best + cfg.value_tol
    pts = _dedupe(P[sel], cfg.cluster_radius)
    status = "optimal" if conv[sel].any() else "max_iter"
    return SolverResult(status, best, pts, hull_flag=False, cluster_radius=cfg.cluster_radius,
                        method="multistart", details={"iterations": iters,
                                                      "starts": int(len(fx))})


def solve(p: ProblemSpec, method: str = "auto", cfg: SolveCfg | None = None,
          start_order=None) -> SolverResult:
    """Minimize ``p.f`` over ``p.X``.

    ``method`` is ``auto``, ``exact`` or ``multistart``. An empty feasible
    set gives status ``infeasible``.
    """
    cfg = cfg or SolveCfg(seed=p.options.seed)
    n = p.dimension
    if not _check_feasible(p.X):
        return SolverResult("infeasible", math.inf, np.zeros((0, n)), method=method)
    q = p.f.as_quadratic()
    rows = _polyhedral(p.X)
    exact_ok = (q is not None and is_psd(q[0]) and rows is not None
                and len(rows[0]) <= MAX_EXACT_ROWS)
    if method == "exact" and not exact_ok:
        raise ValueError("the exact path needs a PSD quadratic or affine f over a polyhedral set")
    if method in ("auto", "exact") and exact_ok:
        Q, c, beta = q
        return _solve_exact(p, rows[0], rows[1], Q, c, beta, cfg)
    if method not in ("auto", "multistart"):
        raise ValueError(f"unknown method {method!r}")
    return _solve_general(p, cfg, start_order)
