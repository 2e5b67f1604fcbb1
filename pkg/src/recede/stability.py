"""Tilt-perturbation sweeps, semicontinuity diagnostics and weak sharpness.

A sweep solves ``min f(x) - <u, x>`` over X for u on a polar grid of the
ball of radius epsilon. Set-valued semicontinuity is judged through the
excess of ``Sol(u)`` over ``Sol(0)`` (outer/upper) and the deficiency of
``Sol(u)`` relative to ``Sol(0)`` (lower), ring by ring.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._random import stream, unit_sphere
from .cones import asymptotic_cone, sample_cone_unit
from .errors import NoFarFeasiblePoints, UnboundedRecordsPresent
from .models import MembershipSet, ProblemSpec, Tilt, Union, _jmat, ext_to_json
from .solver import SolveCfg, SolverResult, dist_to_solset_batch, solve

SET_TOL = 0.05
VALUE_TOL = 0.05
MONO_SLACK = 1e-6


@dataclass
class Record:
    ring: int
    ray: int
    u: np.ndarray
    result: SolverResult
    excess: float | None = None
    deficiency: float | None = None

    @property
    def norm_u(self) -> float:
        return float(np.linalg.norm(self.u))

    @property
    def status(self) -> str:
        return self.result.status

    @property
    def mu(self) -> float:
        return self.result.f_star


@dataclass
class StabilityReport:
    epsilon: float
    rings: int
    rays: int
    records: list

    @property
    def base(self) -> Record:
        return self.records[0]

    def to_rows(self) -> list:
        """Flat rows in grid order: u components, norm, status, mu, solution cloud, diagnostics."""
        rows = []
        for r in self.records:
            rows.append({
                "u": [float(v) for v in r.u],
                "norm_u": r.norm_u,
                "status": r.status,
                "mu": ext_to_json(r.mu),
                "sol_points": _jmat(r.result.points),
                "excess": None if r.excess is None else ext_to_json(r.excess),
                "deficiency": None if r.deficiency is None else ext_to_json(r.deficiency),
            })
        return rows


def grid_directions(n: int, rays: int, seed: int = 42) -> np.ndarray:
    """Unit rays of the polar grid: +-1 for n=1, equiangular for n=2, seeded sphere points above."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        a = 2 * np.pi * np.arange(rays) / rays
        D = np.c_[np.cos(a), np.sin(a)]
        D[np.abs(D) < 1e-15] = 0.0
        return D
    return unit_sphere(stream(seed, "grid"), rays, n)


def perturb_grid(p: ProblemSpec, epsilon: float, rings: int = 10, rays: int = 16,
                 cfg: SolveCfg | None = None, directions=None) -> StabilityReport:
    """Solve the tilted problems on ``{0} ∪ {r eps / rings * d}``, ordered by (ring, ray)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if rings < 1:
        raise ValueError("need at least one ring")
    cfg = cfg or SolveCfg(seed=p.options.seed)
    n = p.dimension
    D = grid_directions(n, rays, p.options.seed) if directions is None else np.atleast_2d(directions)
    recs = [Record(0, 0, np.zeros(n), solve(p, cfg=cfg))]
    for r in range(1, rings + 1):
        rad = r * epsilon / rings
        for j, d in enumerate(D):
            u = rad * d
            recs.append(Record(r, j, u, solve(p.with_function(Tilt(p.f, u)), cfg=cfg)))
    return StabilityReport(epsilon, rings, len(D), recs)


def _excess(sol: SolverResult, base: SolverResult) -> float:
    if not sol.bounded and not base.hull_flag:
        return math.inf
    if not sol.bounded:
        # rays of Sol(u) must recede inside Sol(0)
        for r in sol.rays:
            if all(np.linalg.norm(r - b) > 1e-9 for b in base.rays):
                return math.inf
    return float(dist_to_solset_batch(sol.points, base).max())


def _deficiency(sol: SolverResult, base: SolverResult) -> float:
    if not base.bounded:
        for r in base.rays:
            if all(np.linalg.norm(r - b) > 1e-9 for b in sol.rays):
                return math.inf
    return float(dist_to_solset_batch(base.points, sol).max())


def _decays(med: list, inner_max: float, tol: float) -> bool:
    """Ring medians nonincreasing toward the centre and the innermost ring within tol."""
    finite = all(math.isfinite(v) for v in med)
    mono = all(med[i] <= med[i + 1] + MONO_SLACK for i in range(len(med) - 1))
    return bool(finite and mono and inner_max <= tol)


def semicontinuity_diagnostics(rep: StabilityReport, delta_grid=None, set_tol: float = SET_TOL,
                               value_tol: float = VALUE_TOL, strict: bool = False) -> dict:
    """Excess/deficiency decay and value continuity at ``u = 0``.

    ``delta_grid`` restricts the rings used (by radius); records whose
    tilted problem is unbounded are skipped for the set diagnostics and
    counted, or raise :class:`UnboundedRecordsPresent` with ``strict``.
    """
    base = rep.base.result
    if base.status != "optimal":
        raise ValueError(f"base problem is not solved to optimality (status {base.status})")
    radii = {r: r * rep.epsilon / rep.rings for r in range(1, rep.rings + 1)}
    if delta_grid is not None:
        wanted = np.asarray(delta_grid, dtype=float)
        keep = {r for r, rad in radii.items() if np.any(np.abs(wanted - rad) <= 1e-12 * max(1, rad))}
    else:
        keep = set(radii)
    rings = sorted(keep)
    if not rings:
        raise ValueError("delta_grid selects no ring of the report")
    mu0 = base.f_star
    unbounded = 0
    table = []
    for r in rings:
        recs = [x for x in rep.records if x.ring == r]
        ex, de, mus = [], [], []
        for x in recs:
            mus.append(x.mu)
            if x.status != "optimal":
                unbounded += 1
                continue
            x.excess = _excess(x.result, base)
            x.deficiency = _deficiency(x.result, base)
            ex.append(x.excess)
            de.append(x.deficiency)
        table.append({
            "ring": r, "radius": radii[r],
            "excess_median": float(np.median(ex)) if ex else math.nan,
            "excess_max": float(np.max(ex)) if ex else math.nan,
            "deficiency_median": float(np.median(de)) if de else math.nan,
            "deficiency_max": float(np.max(de)) if de else math.nan,
            "mu_max": float(np.max(mus)), "mu_min": float(np.min(mus)),
            "skipped": len(recs) - len(ex),
        })
    if unbounded and strict:
        raise UnboundedRecordsPresent(f"{unbounded} records are unbounded below")
    inner = table[0]
    ex_med = [t["excess_median"] for t in table]
    de_med = [t["deficiency_median"] for t in table]
    usc = _decays(ex_med, inner["excess_max"], set_tol)
    lsc = _decays(de_med, inner["deficiency_max"], set_tol)
    value_usc = bool(inner["mu_max"] <= mu0 + value_tol)
    value_lsc = bool(inner["mu_min"] >= mu0 - value_tol)

    def largest(ok_ring):
        best = 0.0
        for t in table:
            if not ok_ring(t):
                break
            best = t["radius"]
        return best

    out = {
        "outer_sc": "pass" if usc else "fail",
        "usc": "pass" if usc else "fail",
        "lsc": "pass" if lsc else "fail",
        "value_usc": "pass" if value_usc else "fail",
        "value_lsc": "pass" if value_lsc else "fail",
        "unbounded_records": unbounded,
        "largest_passing_radius": {
            "usc": largest(lambda t: t["excess_max"] <= set_tol),
            "lsc": largest(lambda t: t["deficiency_max"] <= set_tol),
            "value": largest(lambda t: t["mu_max"] <= mu0 + value_tol and t["mu_min"] >= mu0 - value_tol),
        },
        "tables": table,
    }
    return out


# --------------------------------------------------------------------------
# weak sharp minima at infinity


@dataclass
class SharpCfg:
    samples: int = 100_000
    R_max: float | None = None
    spread: float = 1.1
    c_min: float = 1e-2
    flat_ratio: float = 1e-4
    doublings: int = 4
    decay_exponent: float = -0.1
    box_share: float = 0.25
    box_budget: int = 2_000_000
    seed: int = 42


@dataclass
class SharpnessCertificate:
    R: float
    R_max: float
    sample_count: int
    c_emp: float
    worst_witness: np.ndarray
    verdict: str
    profile: list = field(default_factory=list)
    fit_exponent: float | None = None

    def to_dict(self) -> dict:
        return {
            "R": self.R, "R_max": self.R_max, "sample_count": self.sample_count,
            "c_emp": ext_to_json(self.c_emp),
            "witness": [float(v) for v in self.worst_witness],
            "verdict": self.verdict,
            "profile": [{"R": r, "c_emp": ext_to_json(c)} for r, c in self.profile],
            "fit_exponent": self.fit_exponent,
        }


def _anchors(X, k, half, rng):
    Z = rng.uniform(-half, half, size=(k, X.dim))
    if isinstance(X, Union):
        out = []
        for j, m in enumerate(X.members):
            if m.convex:
                out.append(m.project(Z[j::len(X.members)]))
        return np.vstack(out) if out else X.anchor()[None, :]
    if isinstance(X, MembershipSet):
        return X.anchor()[None, :]
    return X.project(Z)


def far_feasible(p: ProblemSpec, R: float, R_max: float, k: int, cfg: SharpCfg, key=0):
    """Feasible points with ``R <= |x| <= R_max``: cone rays from anchors plus box rejection."""
    X, n = p.X, p.dimension
    rng = stream(cfg.seed, "far", key)
    parts = []
    C = asymptotic_cone(X, seed=cfg.seed)
    n_box = int(round(cfg.box_share * k)) if not C.is_zero else k
    if not C.is_zero:
        m = k - n_box
        A = _anchors(X, m, R_max, rng)
        A = A[rng.integers(len(A), size=m)]
        D = sample_cone_unit(C, min(m, 256), seed=cfg.seed + 7919 * (key + 1))
        D = D[rng.integers(len(D), size=m)]
        rho = rng.uniform(R, R_max, size=m)
        ad = np.einsum("ij,ij->i", A, D)
        disc = ad**2 - (A**2).sum(axis=1) + rho**2
        t = -ad + np.sqrt(np.maximum(disc, 0.0))
        Y = A + t[:, None] * D
        Y = Y[(t >= 0) & X.member(Y, 1e-9)]
        parts.append(Y)
    got, tried = 0, 0
    chunk = 200_000
    while got < n_box and tried < cfg.box_budget:
        Z = rng.uniform(-R_max, R_max, size=(chunk, n))
        tried += chunk
        r = np.linalg.norm(Z, axis=1)
        Z = Z[(r >= R) & (r <= R_max)]
        Z = Z[X.member(Z, 1e-9)]
        parts.append(Z[: n_box - got])
        got += min(len(Z), n_box - got)
    Y = np.vstack(parts) if parts else np.zeros((0, n))
    if len(Y) == 0:
        raise NoFarFeasiblePoints(f"no feasible point found with norm in [{R}, {R_max}]")
    return Y


def _min_ratio(p, base, R, R_max, cfg, key):
    Y = far_feasible(p, R, R_max, cfg.samples, cfg, key)
    gap = p.f.values(Y) - base.f_star
    dist = dist_to_solset_batch(Y, base)
    ok = dist > 1e-12
    if not ok.any():
        return math.inf, Y[0], len(Y)
    ratio = gap[ok] / dist[ok]
    i = int(np.argmin(ratio))
    return float(ratio[i]), Y[ok][i], int(ok.sum())


def weak_sharp_certify(p: ProblemSpec, base: SolverResult, R: float,
                       cfg: SharpCfg | None = None) -> SharpnessCertificate:
    """Empirical constant ``c`` in ``f(x) - f* >= c dist(x, Sol)`` for feasible ``|x| >= R``.

    The shell ``[R, R_max]`` is resampled at ``R * 2^k``; ratios that keep
    decaying like a negative power of R mean no positive constant exists,
    whatever the value at the first radius.
    """
    if base.status != "optimal":
        raise ValueError(f"base problem is not solved to optimality (status {base.status})")
    cfg = cfg or SharpCfg(seed=p.options.seed)
    spread = cfg.spread if cfg.R_max is None else cfg.R_max / R
    c_emp, worst, count = _min_ratio(p, base, R, R * spread, cfg, 0)
    profile = [(float(R), c_emp)]
    for k in range(1, cfg.doublings + 1):
        Rk = R * 2**k
        ck, _, _ = _min_ratio(p, base, Rk, Rk * spread, cfg, k)
        profile.append((float(Rk), ck))
    rs = np.array([r for r, _ in profile])
    cs = np.array([c for _, c in profile])
    fit = None
    if np.all(np.isfinite(cs)) and np.all(cs > 0):
        fit = float(np.polyfit(np.log(rs), np.log(cs), 1)[0])
    decaying = fit is not None and fit <= cfg.decay_exponent and bool(np.all(np.diff(cs) < 0))
    if decaying or np.all(cs <= cfg.flat_ratio):
        verdict = "not_sharp"
    elif c_emp >= cfg.c_min and cs.min() >= cfg.c_min:
        verdict = "sharp"
    else:
        verdict = "inconclusive"
    return SharpnessCertificate(float(R), float(R * spread), count, c_emp, worst, verdict,
                                profile=profile, fit_exponent=fit)
