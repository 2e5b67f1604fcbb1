"""Asymptotic, q-asymptotic and sublevel asymptotic functions.

Each estimator has a closed-form path for the catalog and a sampled path
that discretizes the defining limit or supremum. Sampled estimates keep
enough diagnostics (per-level minima, the driving ``(x, t)`` pair) to audit
how a value was reached.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._random import latin_hypercube, stream, unit_ball
from .errors import ConfigError, EmptySublevelSet
from .models import (
    MINUS_INF,
    PLUS_INF,
    Affine,
    CapAbs,
    FunctionModel,
    Options,
    PlusSqrt,
    PNorm,
    Quadratic,
    RationalSquash,
    SetModel,
    SqrtAbs,
    Tilt,
    _vec,
    ext_sub,
    ext_to_json,
    is_psd,
)

# max of d/dx x^2/(1+x^2), attained at x = 1/sqrt(3)
SQUASH_SLOPE = 3.0 * math.sqrt(3.0) / 8.0

# growth ratio of successive decade increments that counts as power-law blow-up
_BLOWUP_RATIO = 10.0**0.25


@dataclass(frozen=True)
class AsymCfg:
    t_min: float = 1e-6
    t_max: float = 1e8
    t_count: int = 64
    levels: int = 8
    dir_samples: int = 256
    rho0: float = 0.5
    cap: float = 1e6
    x_samples: int = 4096
    box_halfwidth: float = 10.0
    seed: int = 42
    force_sampled: bool = False

    def __post_init__(self):
        if not (self.t_min > 0):
            raise ConfigError("t_min must be positive")
        if not (self.t_max > self.t_min):
            raise ConfigError("t_max must exceed t_min")
        if self.levels < 2:
            raise ConfigError("need at least two shrink levels")
        if self.t_count < 2 or self.dir_samples < 1 or self.x_samples < 1:
            raise ConfigError("sample counts must be positive")
        if not (self.cap > 0):
            raise ConfigError("divergence cap must be positive")

    @classmethod
    def from_options(cls, opts: Options, **kw) -> "AsymCfg":
        return cls(t_min=opts.t_min, t_max=opts.t_max, x_samples=opts.samples,
                   seed=opts.seed, **kw)

    def sampled(self) -> "AsymCfg":
        return replace(self, force_sampled=True)


@dataclass
class Estimate:
    """Extended-real value of an asymptotic function.

    ``bound`` is ``exact``, ``lower``, ``upper`` or ``interval`` (then
    ``lo <= value <= hi``). ``raw`` is the sampled extremum before any
    divergence extrapolation.
    """

    value: float
    method: str
    bound: str
    lo: float | None = None
    hi: float | None = None
    levels: list = field(default_factory=list)
    monotone: bool | None = None
    divergence_flag: bool = False
    last_finite: float | None = None
    raw: float | None = None
    driver: dict | None = None

    @property
    def width(self) -> float:
        if self.bound == "interval" and self.lo is not None and self.hi is not None:
            return float(self.hi - self.lo)
        return 0.0

    def to_dict(self) -> dict:
        d = {
            "value": ext_to_json(self.value),
            "method": self.method,
            "bound": self.bound,
            "levels": [ext_to_json(v) for v in self.levels],
            "divergence_flag": self.divergence_flag,
        }
        if self.bound == "interval":
            d["interval"] = [ext_to_json(self.lo), ext_to_json(self.hi)]
        if self.monotone is not None:
            d["monotone"] = self.monotone
        if self.last_finite is not None:
            d["last_finite"] = ext_to_json(self.last_finite)
        if self.driver is not None:
            d["driver"] = self.driver
        return d


def _closed(value, diverged=None) -> Estimate:
    flag = value == PLUS_INF if diverged is None else diverged
    return Estimate(float(value), "closed", "exact", divergence_flag=bool(flag))


# --------------------------------------------------------------------------
# closed forms


def quadratic_asym(Q, c, d) -> float:
    """f^inf(d) for ``0.5 x'Qx + c'x + beta`` (any symmetric Q)."""
    nd = float(np.linalg.norm(d))
    qn = float(np.linalg.norm(Q, 2)) if Q.size else 0.0
    q = float(d @ Q @ d)
    tol = 1e-12 * max(qn, 1e-300) * nd * nd
    if qn > 0 and q > tol:
        return PLUS_INF
    if qn > 0 and q < -tol:
        return MINUS_INF
    Qd = Q @ d
    if not is_psd(Q) or np.linalg.norm(Qd) > 1e-9 * max(qn, 1.0) * max(nd, 1.0):
        return MINUS_INF
    return float(c @ d)


def quadratic_q_asym(Q, c, u) -> float:
    """f^inf_q(u) for a quadratic: +inf unless ``Qu = 0``, then ``c'u``."""
    qn = float(np.linalg.norm(Q, 2)) if Q.size else 0.0
    if np.linalg.norm(Q @ u) > 1e-9 * max(qn, 1.0) * max(float(np.linalg.norm(u)), 1.0):
        return PLUS_INF
    return float(c @ u)


def _asym_closed_value(f: FunctionModel, d: np.ndarray) -> float:
    q = f.as_quadratic()
    if q is not None:
        Q, c, _ = q
        return quadratic_asym(Q, c, d)
    if isinstance(f, Tilt):
        return ext_sub(_asym_closed_value(f.base, d), float(f.u @ d))
    if isinstance(f, PNorm):
        return float(np.linalg.norm(d, ord=f.p))
    if isinstance(f, (SqrtAbs, RationalSquash, CapAbs)):
        return 0.0
    if isinstance(f, PlusSqrt):
        return float(np.abs(d).sum())
    raise NotImplementedError(f"no closed form for {f.kind}")


def _q_closed_value(f: FunctionModel, u: np.ndarray) -> float:
    q = f.as_quadratic()
    if q is not None:
        Q, c, _ = q
        return quadratic_q_asym(Q, c, u)
    if isinstance(f, Tilt):
        return ext_sub(_q_closed_value(f.base, u), float(f.u @ u))
    nonzero = bool(np.any(u != 0))
    if isinstance(f, PNorm):
        return float(np.linalg.norm(u, ord=f.p))
    if isinstance(f, (SqrtAbs, PlusSqrt)):
        return PLUS_INF if nonzero else 0.0
    if isinstance(f, CapAbs):
        return float(np.abs(u).sum())
    if isinstance(f, RationalSquash):
        return SQUASH_SLOPE * float(np.linalg.norm(u))
    raise NotImplementedError(f"no closed form for {f.kind}")


def _known_infimum(f: FunctionModel):
    """``(inf f, minimizer)`` for catalog entries where it is obvious, else None."""
    if isinstance(f, (SqrtAbs, RationalSquash, CapAbs, PlusSqrt, PNorm)):
        return 0.0, np.zeros(f.dim)
    if isinstance(f, Affine):
        if np.any(f.c != 0):
            return MINUS_INF, None
        return f.beta, np.zeros(f.dim)
    if isinstance(f, Quadratic):
        if not f.convex:
            return MINUS_INF, None
        x, *_ = np.linalg.lstsq(f.Q, -f.c, rcond=None)
        if np.linalg.norm(f.Q @ x + f.c) > 1e-9 * max(1.0, np.linalg.norm(f.c)):
            return MINUS_INF, None
        return float(f.values(x[None, :])[0]), x
    return None


def _sublevel_closed_value(f: FunctionModel, lam: float, u: np.ndarray):
    """Closed form of f^inf_lambda where one is known, else None."""
    if f.convex and f.closed_form_asymptotics:
        return _asym_closed_value(f, u)
    nonzero = bool(np.any(u != 0))
    if isinstance(f, (SqrtAbs, PlusSqrt)) and lam >= 0:
        # the origin lies in S_lam and the difference quotient there blows up as t -> 0+
        return PLUS_INF if nonzero else 0.0
    if isinstance(f, CapAbs) and lam >= 0:
        return float(np.abs(u).sum())
    if isinstance(f, RationalSquash) and lam >= 0.25:
        return SQUASH_SLOPE * float(np.linalg.norm(u))
    return None


# --------------------------------------------------------------------------
# sampled estimators


def _level_grid(cfg: AsymCfg):
    lo = max(cfg.t_min, 1.0)
    hi = cfg.t_max / 10.0
    if hi <= lo:
        raise ConfigError("t_max is too small for the shrink-level schedule (need t_max > 10)")
    T = np.geomspace(lo, hi, cfg.levels)
    rho = cfg.rho0 / 2.0 ** np.arange(cfg.levels)
    return T, rho


def _asym_sampled(f: FunctionModel, d: np.ndarray, cfg: AsymCfg) -> Estimate:
    n = d.size
    nd = float(np.linalg.norm(d))
    T, rho = _level_grid(cfg)
    J = cfg.levels
    pool = []  # (t values, distances, quotient matrix)
    for j in range(J):
        rng = stream(cfg.seed, "asym", j)
        D = d + rho[j] * nd * unit_ball(rng, cfg.dir_samples, n)
        D = np.vstack([d, D])
        dist = np.linalg.norm(D - d, axis=1)
        t = np.geomspace(T[j], cfg.t_max, cfg.t_count)
        pts = t[:, None, None] * D[None, :, :]
        with np.errstate(over="ignore", invalid="ignore"):
            vals = f.values(pts) / t[:, None]
        pool.append((t, dist, vals))

    def level_min(j, t_hi=math.inf):
        best = math.inf
        r = rho[j] * nd * (1 + 1e-12)
        for t, dist, vals in pool:
            tm = (t >= T[j]) & (t <= t_hi)
            dm = dist <= r
            if tm.any() and dm.any():
                best = min(best, float(np.min(vals[np.ix_(tm, dm)])))
        return best

    levels = [level_min(j) for j in range(J)]
    m_last, m_prev = levels[-1], levels[-2]
    monotone = all(levels[j + 1] >= levels[j] - 1e-12 for j in range(J - 1))
    coarse = level_min(J - 1, t_hi=cfg.t_max / 10.0 * (1 + 1e-12))
    finite = math.isfinite(m_last) and math.isfinite(m_prev) and math.isfinite(coarse)
    gap = abs(m_last - m_prev) if finite else math.inf
    tail = abs(coarse - m_last) if finite else math.inf
    # halving radii leave a geometric tail of about one more gap; double it for slack
    half = 2.0 * gap + tail
    est = Estimate(m_last, "sampled", "interval", lo=m_last - half, hi=m_last + half,
                   levels=levels, monotone=monotone, raw=m_last)
    up = m_last > cfg.cap or _levels_blow_up(levels, nd)
    down = m_last < -cfg.cap or _levels_blow_up([-v for v in levels], nd)
    if up:
        est.value, est.lo, est.hi = PLUS_INF, min(m_last, cfg.cap), PLUS_INF
        est.divergence_flag, est.last_finite = True, m_last
    elif down:
        est.value, est.lo, est.hi = MINUS_INF, MINUS_INF, max(m_last, -cfg.cap)
        est.divergence_flag, est.last_finite = True, m_last
    return est


def _levels_blow_up(levels, scale) -> bool:
    """Level minima whose increments grow (T_j is geometric, so linear-in-t
    growth shows up as increments scaling with T_j); convergent estimates
    have shrinking increments instead."""
    if len(levels) < 3 or not all(math.isfinite(v) for v in levels[-3:]):
        return False
    a, b, c = levels[-1], levels[-2], levels[-3]
    inc1, inc2 = a - b, b - c
    floor = 1e-3 * max(scale, abs(c))
    return bool(inc2 > floor and inc1 >= _BLOWUP_RATIO * inc2)


def x_samples(f: FunctionModel, cfg: AsymCfg, X: SetModel | None = None) -> np.ndarray:
    """Shared base-point sample: the origin followed by a Latin hypercube of the domain box."""
    n = f.dim
    B = cfg.box_halfwidth
    pts = latin_hypercube(stream(cfg.seed, "xs"), cfg.x_samples, -B * np.ones(n), B * np.ones(n))
    pts = np.vstack([np.zeros(n), pts])
    if X is not None:
        pts = pts[X.member(pts)]
        try:
            a = X.anchor()
            pts = np.vstack([a, pts])
        except Exception:
            pass
    return pts


def t_grid(cfg: AsymCfg) -> np.ndarray:
    base = np.geomspace(cfg.t_min, cfg.t_max, cfg.t_count)
    extra = [cfg.t_min * 10, cfg.t_min * 100, cfg.t_max / 10, cfg.t_max / 100]
    extra = [t for t in extra if cfg.t_min < t < cfg.t_max]
    return np.unique(np.concatenate([base, extra]))


def _blows_up(M: np.ndarray, t: np.ndarray, at: float, step: float) -> bool:
    """Power-law growth of ``M`` over two decades ending at ``at``."""
    def val(x):
        i = int(np.argmin(np.abs(np.log(t) - math.log(x))))
        return M[i]

    a, b, c = val(at), val(at * step), val(at * step * step)
    inc1, inc2 = a - b, b - c
    floor = 1e-9 * max(1.0, abs(a), abs(c))
    return bool(inc2 > floor and inc1 >= _BLOWUP_RATIO * inc2)


def _sup_quotients(f: FunctionModel, u: np.ndarray, base: np.ndarray, cfg: AsymCfg,
                   X: SetModel | None = None) -> Estimate:
    t = t_grid(cfg)
    fx = f.values(base)
    M = np.full(t.size, -math.inf)
    arg = np.zeros(t.size, dtype=int)
    chunk = max(1, 200_000 // max(1, base.shape[0]))
    for s in range(0, t.size, chunk):
        ts = t[s:s + chunk]
        pts = base[None, :, :] + ts[:, None, None] * u[None, None, :]
        with np.errstate(over="ignore", invalid="ignore"):
            q = (f.values(pts) - fx[None, :]) / ts[:, None]
        if X is not None:
            q = np.where(X.member(pts), q, PLUS_INF)
        q = np.where(np.isnan(q), -math.inf, q)
        M[s:s + chunk] = q.max(axis=1)
        arg[s:s + chunk] = q.argmax(axis=1)
    k = int(np.argmax(M))
    raw = float(M[k])
    est = Estimate(raw, "sampled", "lower", lo=raw, hi=PLUS_INF, raw=raw,
                   driver={"x": base[arg[k]].tolist(), "t": float(t[k])})
    diverged = raw > cfg.cap
    if not diverged and np.isfinite(M).all():
        diverged = _blows_up(M, t, cfg.t_min, 10.0) or _blows_up(M, t, cfg.t_max, 0.1)
    if diverged:
        est.value, est.hi = PLUS_INF, PLUS_INF
        est.divergence_flag = True
        est.last_finite = raw if math.isfinite(raw) else None
    return est


# --------------------------------------------------------------------------
# public operations


def asym_fn(f: FunctionModel, d, cfg: AsymCfg | None = None) -> Estimate:
    """Asymptotic function f^inf(d).

    Closed forms: affine ``c'd``; quadratic by the sign of ``d'Qd`` (and
    ``c'd`` on the kernel of a PSD ``Q``); p-norms ``|d|_p``; the bounded or
    sublinear catalog entries give 0; ``plus_sqrt`` gives ``|d|_1``.

    The sampled path computes, for shrinking levels j, the minimum of
    ``f(t d')/t`` over ``t >= T_j`` and ``|d' - d| <= rho_j |d|`` from one
    nested pool of samples, so the level minima are nondecreasing.
    """
    cfg = cfg or AsymCfg()
    d = _vec(d, f.dim, "d")
    if f.closed_form_asymptotics and not cfg.force_sampled:
        return _closed(_asym_closed_value(f, d))
    return _asym_sampled(f, d, cfg)


def q_asym_fn(f: FunctionModel, u, cfg: AsymCfg | None = None,
              X: SetModel | None = None) -> Estimate:
    """q-asymptotic function: sup over base points and steps of difference quotients.

    With ``X`` given the base points are restricted to ``X`` and quotients
    whose end point leaves ``X`` count as ``+inf`` (the indicator of ``X``
    added to ``f``); that path is always sampled.
    """
    cfg = cfg or AsymCfg()
    u = _vec(u, f.dim, "u")
    if X is None and f.closed_form_asymptotics and not cfg.force_sampled:
        return _closed(_q_closed_value(f, u))
    return _sup_quotients(f, u, x_samples(f, cfg, X), cfg, X)


def sublevel_asym_fn(f: FunctionModel, lam: float, u, cfg: AsymCfg | None = None) -> Estimate:
    """Sublevel asymptotic function at height ``lam``.

    Raises :class:`EmptySublevelSet` when ``S_lam(f)`` is (probed) empty.
    """
    cfg = cfg or AsymCfg()
    u = _vec(u, f.dim, "u")
    known = _known_infimum(f)
    if known is not None and lam < known[0]:
        raise EmptySublevelSet(f"lambda={lam} is below inf f = {known[0]}")
    if f.closed_form_asymptotics and not cfg.force_sampled:
        v = _sublevel_closed_value(f, lam, u)
        if v is not None:
            return _closed(v)
    base = x_samples(f, cfg)
    keep = f.values(base) <= lam
    base = base[keep]
    if known is not None and known[1] is not None and known[0] <= lam:
        base = np.vstack([known[1], base]) if len(base) == 0 else base
    if len(base) == 0:
        raise EmptySublevelSet(f"no sampled point has f <= {lam}")
    return _sup_quotients(f, u, base, cfg)


def _ext_gap(a: float, b: float):
    """``(gap, markers_match)`` for two extended reals."""
    if math.isinf(a) or math.isinf(b):
        return (0.0, True) if a == b else (math.inf, False)
    return abs(a - b), True


def tilt_identity_check(f: FunctionModel, u, d, cfg: AsymCfg | None = None) -> dict:
    """Compare ``(f_u)^inf(d)`` with ``f^inf(d) - <u,d>`` (plain and q variants)."""
    cfg = cfg or AsymCfg()
    u = _vec(u, f.dim, "u")
    d = _vec(d, f.dim, "d")
    ft = Tilt(f, u)
    out = {}
    for name, fn in (("plain", asym_fn), ("q", q_asym_fn)):
        left = fn(ft, d, cfg)
        right = fn(f, d, cfg)
        rhs = ext_sub(right.value, float(u @ d))
        gap, markers = _ext_gap(left.value, rhs)
        sampled = left.method == "sampled" or right.method == "sampled"
        if sampled and left.bound == "lower":
            # both sides are maxima of the same quotients shifted by <u,d>
            raw_gap, _ = _ext_gap(left.raw, ext_sub(right.raw, float(u @ d)))
            # quotients at t_min cancel values of size ~ box * |u|
            scale = cfg.box_halfwidth * math.sqrt(f.dim) * (1.0 + float(np.linalg.norm(u)))
            tol = 1e-9 * max(1.0, abs(left.raw) if math.isfinite(left.raw) else 1.0)
            tol += 8 * np.finfo(float).eps * scale / cfg.t_min
            ok = markers and (raw_gap <= tol or gap <= tol)
        elif sampled:
            tol = max(left.width, right.width)
            ok = markers and gap <= tol
        else:
            tol = 1e-9
            ok = markers and gap <= tol
        out[name] = {"lhs": left.value, "rhs": rhs, "gap": gap, "tol": tol, "pass": bool(ok),
                     "method": "sampled" if sampled else "closed"}
    out["pass"] = out["plain"]["pass"] and out["q"]["pass"]
    return out
