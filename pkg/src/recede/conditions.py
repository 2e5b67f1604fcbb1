"""Recession conditions, coercivity and (robust) quasiconvexity checks.

The K-sets ``{d : f^inf(d) <= 0}`` are never built; a condition is decided
by evaluating the relevant asymptotic function on directions of the
feasible set's asymptotic cone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _lp
from ._random import stream, unit_ball
from .asymptotics import AsymCfg, _known_infimum, asym_fn, q_asym_fn, sublevel_asym_fn
from .cones import ConeRep, asymptotic_cone, sample_cone_unit
from .errors import EmptySublevelSet
from .models import (
    Box,
    FunctionModel,
    ProblemSpec,
    SetModel,
    Tilt,
    Union,
    _vec,
    ext_to_json,
    is_psd,
)

VIOLATION_TOL = 1e-3
HOLD_MARGIN = 1e-2


@dataclass
class CheckCfg:
    directions: int = 64
    violation_tol: float = VIOLATION_TOL
    hold_margin: float = HOLD_MARGIN
    asym: AsymCfg = field(default_factory=AsymCfg)
    force_sampled: bool = False

    @classmethod
    def for_problem(cls, p: ProblemSpec, **kw) -> "CheckCfg":
        return cls(asym=AsymCfg.from_options(p.options), **kw)


@dataclass
class CheckResult:
    """Outcome of a condition check.

    ``verdict`` is ``holds``, ``violated`` or ``inconclusive``; a violation
    always carries a unit ``witness`` direction and its asymptotic value.
    """

    verdict: str
    mode: str
    witness: np.ndarray | None = None
    witness_value: float | None = None
    margin: float | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"verdict": self.verdict, "mode": self.mode}
        if self.witness is not None:
            d["witness"] = {"direction": [float(v) for v in self.witness],
                            "value": ext_to_json(self.witness_value)}
        if self.margin is not None:
            d["margin"] = ext_to_json(self.margin)
        if self.details:
            d["details"] = self.details
        return d


def _polyhedral_pieces(C: ConeRep):
    """Constraint matrices of the cone pieces, or None when not all are polyhedral."""
    n = C.dim
    if C.kind == "whole":
        return [np.zeros((0, n))]
    if C.kind == "polyhedral":
        return [C.A]
    if C.kind == "ray_union":
        out = []
        for p in C.pieces:
            sub = _polyhedral_pieces(p)
            if sub is None:
                return None
            out.extend(sub)
        return out
    return None


def _convex_quadratic(f: FunctionModel):
    q = f.as_quadratic()
    if q is None or not is_psd(q[0]):
        return None
    return q


def exact_recession(A_pieces, Q, c) -> CheckResult:
    """Decide ``X^inf ∩ K(f) = {0}`` for PSD-quadratic or affine f over polyhedral cones.

    The condition fails iff some ``u != 0`` has ``Au <= 0``, ``Qu = 0`` and
    ``c'u <= 0``.
    """
    for A in A_pieces:
        u = _lp.cone_nonzero(A, A_eq=Q if np.any(Q) else None, extra_ub=c)
        if u is not None:
            return CheckResult("violated", "exact", witness=u, witness_value=float(c @ u))
    return CheckResult("holds", "exact")


def _estimate(f, d, kind, lam, cfg):
    if kind == "plain":
        return asym_fn(f, d, cfg)
    if kind == "q":
        return q_asym_fn(f, d, cfg)
    return sublevel_asym_fn(f, lam, d, cfg)


def recession_check(p: ProblemSpec, kind: str = "plain", lam: float | None = None,
                    cfg: CheckCfg | None = None) -> CheckResult:
    """Check ``X^inf ∩ K(f) = {0}`` with K built from the plain, q or sublevel function."""
    if kind not in ("plain", "q", "sublevel"):
        raise ValueError(f"unknown condition kind {kind!r}")
    if kind == "sublevel" and lam is None:
        raise ValueError("the sublevel condition needs a height lambda")
    cfg = cfg or CheckCfg.for_problem(p)
    f = p.f
    C = asymptotic_cone(p.X, seed=cfg.asym.seed)
    if C.is_zero:
        return CheckResult("holds", "exact", details={"cone": "zero"})
    quad = _convex_quadratic(f)
    pieces = _polyhedral_pieces(C)
    if quad is not None and pieces is not None and not cfg.force_sampled:
        if kind == "sublevel":
            known = _known_infimum(f)
            if known is not None and lam < known[0]:
                raise EmptySublevelSet(f"lambda={lam} is below inf f = {known[0]}")
        Q, c, _ = quad
        return exact_recession(pieces, Q, c)

    acfg = cfg.asym.sampled() if cfg.force_sampled else cfg.asym
    D = sample_cone_unit(C, cfg.directions, seed=acfg.seed)
    certified = []
    values = []
    for i, d in enumerate(D):
        est = _estimate(f, d, kind, lam, acfg)
        values.append(est.value)
        if est.value <= cfg.violation_tol:
            return CheckResult("violated", "sampled", witness=d, witness_value=est.value,
                               details={"index": i, "bound": est.bound})
        if est.bound in ("exact", "lower"):
            certified.append(est.value)
        elif est.bound == "interval":
            certified.append(est.lo if est.value != math.inf else est.value)
        else:
            certified.append(-math.inf)
    margin = min(certified)
    verdict = "holds" if margin >= cfg.hold_margin else "inconclusive"
    return CheckResult(verdict, "sampled", margin=margin,
                       details={"directions": len(D), "min_value": min(values)})


@dataclass
class CoercivityCfg:
    radii: tuple = (1e2, 1e3, 1e4)
    directions: int = 32
    anchors: int = 8
    ref_samples: int = 256
    ref_offset: float = 10.0
    flat_slope: float = 1e-6
    seed: int = 42


def _feasible_anchors(X: SetModel, k: int, seed: int) -> np.ndarray:
    """The set's anchor plus projections of box samples (boundary points when outside)."""
    pts = [X.anchor()]
    rng = stream(seed, "anchors")
    Z = rng.uniform(-10, 10, size=(k, X.dim))
    if isinstance(X, Union):
        for i, z in enumerate(Z):
            m = X.members[i % len(X.members)]
            if m.convex:
                try:
                    pts.append(m.project(z))
                except Exception:
                    continue
    elif X.convex:
        for z in Z:
            pts.append(X.project(z))
    return np.array(pts)


def coercivity_probe(p: ProblemSpec, cfg: CoercivityCfg | None = None) -> dict:
    """Probe ``f(x) -> +inf`` as ``|x| -> inf`` inside X along recession rays."""
    cfg = cfg or CoercivityCfg(seed=p.options.seed)
    f, X = p.f, p.X
    C = asymptotic_cone(X, seed=cfg.seed)
    if C.is_zero:
        return {"verdict": "coercive_on_X", "evidence": {"vacuous": True, "reason": "X is bounded"}}
    anchors = _feasible_anchors(X, cfg.anchors, cfg.seed)
    D = sample_cone_unit(C, cfg.directions, seed=cfg.seed)
    ball = X.anchor() + unit_ball(stream(cfg.seed, "refball"), cfg.ref_samples, X.dim)
    bound = float(np.max(f.values(ball))) + cfg.ref_offset
    t = np.asarray(cfg.radii, dtype=float)
    all_up = True
    rays = 0
    for a in anchors:
        pts = a[None, None, :] + t[None, :, None] * D[:, None, :]
        vals = f.values(pts)
        feas = X.member(pts, 1e-6).all(axis=1)
        for i in np.flatnonzero(feas):
            v = vals[i]
            rays += 1
            slope = (v[-1] - v[-2]) / (t[-1] - t[-2])
            if np.all(v <= bound) and slope <= cfg.flat_slope:
                return {"verdict": "not_coercive",
                        "evidence": {"anchor": a.tolist(), "direction": D[i].tolist(),
                                     "values": v.tolist(), "bound": bound, "slope": float(slope)}}
            if not (v[-1] > bound and np.all(np.diff(v) > 0)):
                all_up = False
    if rays and all_up:
        return {"verdict": "coercive_on_X", "evidence": {"rays": rays, "bound": bound}}
    return {"verdict": "inconclusive", "evidence": {"rays": rays, "bound": bound}}


@dataclass
class QCCfg:
    pairs: int = 10_000
    tilts: int = 32
    tol: float = 1e-9
    seed: int = 42


LAMBDAS = np.linspace(0.1, 0.9, 9)


def _box_bounds(box, n):
    if isinstance(box, Box):
        return box.lo, box.hi
    lo, hi = box
    return _vec(lo, n, "lo"), _vec(hi, n, "hi")


def quasiconvexity_test(f: FunctionModel, box, cfg: QCCfg | None = None, key=0) -> dict:
    """Sampled one-sided test of ``f(lx + (1-l)y) <= max(f(x), f(y))`` on a box."""
    cfg = cfg or QCCfg()
    lo, hi = _box_bounds(box, f.dim)
    if not np.all(hi > lo):
        raise ValueError("box must be nondegenerate")
    rng = stream(cfg.seed, "qc", key)
    x = rng.uniform(lo, hi, size=(cfg.pairs, f.dim))
    y = rng.uniform(lo, hi, size=(cfg.pairs, f.dim))
    mid = LAMBDAS[None, :, None] * x[:, None, :] + (1 - LAMBDAS)[None, :, None] * y[:, None, :]
    fm = f.values(mid)
    top = np.maximum(f.values(x), f.values(y))
    excess = fm - top[:, None]
    bad = excess > cfg.tol
    if not bad.any():
        return {"verdict": "passes", "witness": None, "pairs": cfg.pairs}
    i, j = np.argwhere(bad)[0]
    return {"verdict": "violated", "pairs": cfg.pairs,
            "witness": {"x": x[i].tolist(), "y": y[i].tolist(), "lambda": float(LAMBDAS[j]),
                        "f_mid": float(fm[i, j]), "max_end": float(top[i]),
                        "excess": float(excess[i, j])}}


def alpha_robust_test(f: FunctionModel, alpha: float, box, cfg: QCCfg | None = None) -> dict:
    """Quasiconvexity of ``f + <u, .>`` for sampled ``|u| < alpha``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    cfg = cfg or QCCfg()
    U = alpha * (1 - 1e-9) * unit_ball(stream(cfg.seed, "tilts"), cfg.tilts, f.dim)
    for k, u in enumerate(U):
        res = quasiconvexity_test(Tilt(f, -u), box, cfg, key=k)
        if res["verdict"] == "violated":
            w = dict(res["witness"])
            w["u"] = u.tolist()
            return {"verdict": "violated", "witness": w, "tilts": cfg.tilts}
    return {"verdict": "passes", "witness": None, "tilts": cfg.tilts, "pairs": cfg.pairs}
