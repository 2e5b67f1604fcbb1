"""Function and set catalogs, problem documents.

Extended reals are plain Python floats: ``PLUS_INF``/``MINUS_INF`` are the
IEEE infinities, which already give the total order. Use :func:`ext_add`
instead of ``+`` wherever both operands may be infinite, because
``inf + -inf`` must be an error rather than a NaN.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._lp import nonneg_lstsq
from .errors import (
    DimensionMismatch,
    EmptySet,
    InfeasibleSet,
    MaxIterations,
    NonSmoothPoint,
    NotConvexSet,
    ParseError,
    ValidationError,
)

PLUS_INF = math.inf
MINUS_INF = -math.inf

KINK_TOL = 1e-9
PSD_FLOOR = -1e-10


def ext_add(a: float, b: float) -> float:
    if (a == PLUS_INF and b == MINUS_INF) or (a == MINUS_INF and b == PLUS_INF):
        raise ValueError("PLUS_INF + MINUS_INF is undefined")
    return a + b


def ext_sub(a: float, b: float) -> float:
    return ext_add(a, -b)


def ext_to_json(v: float):
    if v == PLUS_INF:
        return "inf"
    if v == MINUS_INF:
        return "-inf"
    return float(v)


def ext_from_json(v) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf"):
            return PLUS_INF
        if s == "-inf":
            return MINUS_INF
        raise ValueError(f"not a number: {v!r}")
    if isinstance(v, bool):
        raise ValueError("booleans are not numbers")
    return float(v)


def _vec(x, n: int | None = None, name: str = "x") -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector, got shape {arr.shape}")
    if n is not None and arr.size != n:
        raise DimensionMismatch(f"{name} has dimension {arr.size}, expected {n}")
    return arr


def _batch(X, n: int) -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != n:
        if n == 1 and arr.ndim <= 1:
            return arr.reshape(-1, 1) if arr.ndim == 1 else arr.reshape(1)
        raise DimensionMismatch(f"expected trailing dimension {n}, got shape {arr.shape}")
    return arr


# --------------------------------------------------------------------------
# functions


class FunctionModel:
    """Base class of the objective catalog.

    Subclasses implement :meth:`values` on arrays of shape ``(..., n)`` and
    :meth:`_gradient` for a single point.
    """

    kind: str = ""
    dim: int
    convex: bool = False
    quasiconvex: bool = False
    smooth_away_from_kinks: bool = True
    closed_form_asymptotics: bool = True

    def values(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def kink_distance(self, x: np.ndarray) -> float:
        return math.inf

    def _gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> float:
        return eval_f(self, x)

    def as_quadratic(self):
        """Return ``(Q, c, beta)`` when the model is a quadratic/affine in disguise."""
        return None

    @property
    def flags(self) -> dict:
        return {
            "convex": self.convex,
            "quasiconvex": self.quasiconvex,
            "smooth_away_from_kinks": self.smooth_away_from_kinks,
            "closed_form_asymptotics": self.closed_form_asymptotics,
        }


@dataclass(frozen=True, eq=False)
class Affine(FunctionModel):
    c: np.ndarray
    beta: float = 0.0
    kind = "affine"
    convex = True
    quasiconvex = True

    def __post_init__(self):
        object.__setattr__(self, "c", _vec(self.c, name="c"))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dim(self):
        return self.c.size

    def values(self, X):
        return _batch(X, self.dim) @ self.c + self.beta

    def _gradient(self, x):
        return self.c.copy()

    def as_quadratic(self):
        n = self.dim
        return np.zeros((n, n)), self.c.copy(), self.beta


def is_psd(Q: np.ndarray) -> bool:
    if Q.size == 0:
        return True
    return bool(np.linalg.eigvalsh(Q).min() >= PSD_FLOOR)


@dataclass(frozen=True, eq=False)
class Quadratic(FunctionModel):
    """``f(x) = 0.5 x'Qx + c'x + beta``; ``Q`` is symmetrized on construction."""

    Q: np.ndarray
    c: Optional[np.ndarray] = None
    beta: float = 0.0
    kind = "quadratic"

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValidationError(f"Q must be square, got shape {Q.shape}")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12):
            warnings.warn("Q is not symmetric; replacing it with (Q + Q^T)/2", stacklevel=3)
        Q = 0.5 * (Q + Q.T)
        n = Q.shape[0]
        c = np.zeros(n) if self.c is None else _vec(self.c, n, "c")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "beta", float(self.beta))
        psd = is_psd(Q)
        object.__setattr__(self, "convex", psd)
        object.__setattr__(self, "quasiconvex", psd)

    @property
    def dim(self):
        return self.Q.shape[0]

    def values(self, X):
        X = _batch(X, self.dim)
        return 0.5 * np.einsum("...i,ij,...j->...", X, self.Q, X) + X @ self.c + self.beta

    def _gradient(self, x):
        return self.Q @ x + self.c

    def as_quadratic(self):
        return self.Q.copy(), self.c.copy(), self.beta


@dataclass(frozen=True, eq=False)
class PNorm(FunctionModel):
    p: float
    n: int
    kind = "pnorm"
    convex = True
    quasiconvex = True

    def __post_init__(self):
        if not (self.p >= 1) or math.isinf(self.p):
            raise ValidationError(f"pnorm needs finite p >= 1, got {self.p}")
        if self.n < 1:
            raise ValidationError("dimension must be >= 1")

    @property
    def dim(self):
        return self.n

    def values(self, X):
        return np.linalg.norm(_batch(X, self.n), ord=self.p, axis=-1)

    def kink_distance(self, x):
        if self.p == 1:
            return float(np.abs(x).min())
        return float(np.linalg.norm(x))

    def _gradient(self, x):
        if self.p == 1:
            return np.sign(x)
        nrm = np.linalg.norm(x, ord=self.p)
        return np.sign(x) * np.abs(x) ** (self.p - 1) * nrm ** (1 - self.p)


@dataclass(frozen=True, eq=False)
class SqrtAbs(FunctionModel):
    """``sum_i sqrt(|x_i|)``."""

    n: int = 1
    kind = "sqrt_abs"

    @property
    def dim(self):
        return self.n

    @property
    def quasiconvex(self):
        return self.n == 1

    def values(self, X):
        return np.sqrt(np.abs(_batch(X, self.n))).sum(axis=-1)

    def kink_distance(self, x):
        return float(np.abs(x).min())

    def _gradient(self, x):
        return np.sign(x) / (2.0 * np.sqrt(np.abs(x)))


@dataclass(frozen=True, eq=False)
class RationalSquash(FunctionModel):
    """``|x|^2 / (1 + |x|^2)``: bounded, quasiconvex, not coercive."""

    n: int = 1
    kind = "rational_squash"
    quasiconvex = True

    @property
    def dim(self):
        return self.n

    def values(self, X):
        r2 = (_batch(X, self.n) ** 2).sum(axis=-1)
        return r2 / (1.0 + r2)

    def _gradient(self, x):
        r2 = float(x @ x)
        return 2.0 * x / (1.0 + r2) ** 2


@dataclass(frozen=True, eq=False)
class CapAbs(FunctionModel):
    """``min(sum_i |x_i|, 1)``: quasiconvex but not convex."""

    n: int = 1
    kind = "cap_abs"
    quasiconvex = True

    @property
    def dim(self):
        return self.n

    def values(self, X):
        return np.minimum(np.abs(_batch(X, self.n)).sum(axis=-1), 1.0)

    def kink_distance(self, x):
        return float(min(np.abs(x).min(), abs(np.abs(x).sum() - 1.0)))

    def _gradient(self, x):
        if np.abs(x).sum() > 1.0:
            return np.zeros_like(x)
        return np.sign(x)


@dataclass(frozen=True, eq=False)
class PlusSqrt(FunctionModel):
    """``sum_i |x_i| + sum_i sqrt(|x_i|)``; alpha-robustly quasiconvex for n=1, alpha <= 1."""

    n: int = 1
    kind = "plus_sqrt"

    @property
    def dim(self):
        return self.n

    @property
    def quasiconvex(self):
        return self.n == 1

    def values(self, X):
        a = np.abs(_batch(X, self.n))
        return (a + np.sqrt(a)).sum(axis=-1)

    def kink_distance(self, x):
        return float(np.abs(x).min())

    def _gradient(self, x):
        return np.sign(x) * (1.0 + 0.5 / np.sqrt(np.abs(x)))


@dataclass(frozen=True, eq=False)
class Tilt(FunctionModel):
    """``f_u(x) = base(x) - <u, x>``."""

    base: FunctionModel
    u: np.ndarray
    kind = "tilt"

    def __post_init__(self):
        object.__setattr__(self, "u", _vec(self.u, self.base.dim, "u"))

    @property
    def dim(self):
        return self.base.dim

    @property
    def convex(self):
        return self.base.convex

    @property
    def quasiconvex(self):
        return self.base.convex

    @property
    def smooth_away_from_kinks(self):
        return self.base.smooth_away_from_kinks

    @property
    def closed_form_asymptotics(self):
        return self.base.closed_form_asymptotics

    def values(self, X):
        X = _batch(X, self.dim)
        return self.base.values(X) - X @ self.u

    def kink_distance(self, x):
        return self.base.kink_distance(x)

    def _gradient(self, x):
        return self.base._gradient(x) - self.u

    def as_quadratic(self):
        q = self.base.as_quadratic()
        if q is None:
            return None
        Q, c, beta = q
        return Q, c - self.u, beta


@dataclass(frozen=True, eq=False)
class Blackbox(FunctionModel):
    """User-supplied oracle.

    ``fn`` maps a point to a float (``inf`` outside an effective domain, if
    ``has_domain`` is set). With ``vectorized=True`` it is called once on an
    ``(k, n)`` array. The oracle must be reentrant.
    """

    fn: Callable
    n: int
    grad_fn: Optional[Callable] = None
    convex: bool = False
    quasiconvex: bool = False
    vectorized: bool = False
    has_domain: bool = False
    kind = "blackbox"
    closed_form_asymptotics = False

    @property
    def dim(self):
        return self.n

    def values(self, X):
        X = _batch(X, self.n)
        if self.vectorized:
            out = np.asarray(self.fn(X.reshape(-1, self.n)), dtype=float)
        else:
            out = np.array([float(self.fn(x)) for x in X.reshape(-1, self.n)])
        if not self.has_domain and np.any(out == PLUS_INF):
            raise ValidationError("blackbox returned +inf without declaring an effective domain")
        return out.reshape(X.shape[:-1])

    def _gradient(self, x):
        if self.grad_fn is None:
            raise NonSmoothPoint("blackbox has no gradient oracle")
        return _vec(self.grad_fn(x), self.n, "gradient")


def eval_f(f: FunctionModel, x) -> float:
    x = _vec(x, f.dim)
    return float(f.values(x[None, :])[0])


def grad(f: FunctionModel, x) -> np.ndarray:
    """Analytic gradient; raises :class:`NonSmoothPoint` within 1e-9 of a kink."""
    x = _vec(x, f.dim)
    if f.kink_distance(x) < KINK_TOL:
        raise NonSmoothPoint(f"{f.kind} is not differentiable at {x.tolist()}")
    return np.asarray(f._gradient(x), dtype=float)


def grad_batch(f: FunctionModel, X) -> np.ndarray:
    """Gradients at the rows of ``X`` (no kink check); vectorized for the smooth catalog."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(f, Tilt):
        return grad_batch(f.base, X) - f.u
    q = f.as_quadratic()
    if q is not None:
        return X @ q[0] + q[1]
    if isinstance(f, RationalSquash):
        r2 = (X**2).sum(axis=1, keepdims=True)
        return 2.0 * X / (1.0 + r2) ** 2
    if isinstance(f, PNorm) and f.p > 1:
        nrm = np.linalg.norm(X, ord=f.p, axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.sign(X) * np.abs(X) ** (f.p - 1) * nrm ** (1 - f.p)
        return np.nan_to_num(g)
    return np.array([np.asarray(f._gradient(x), dtype=float) for x in X])


def tilt(f: FunctionModel, u) -> Tilt:
    return Tilt(f, u)


# --------------------------------------------------------------------------
# sets


class SetModel:
    kind: str = ""
    dim: int
    convex: bool = True

    def member(self, X, tol: float = 1e-9) -> np.ndarray:
        raise NotImplementedError

    def project(self, x, tol: float = 1e-10) -> np.ndarray:
        raise NotImplementedError

    def as_polyhedron(self):
        """``(A, b)`` with ``X = {x : Ax <= b}``, or None."""
        return None

    @property
    def bounded(self) -> bool:
        raise NotImplementedError

    def anchor(self) -> np.ndarray:
        """Some point of the set."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class WholeSpace(SetModel):
    n: int
    kind = "whole_space"

    @property
    def dim(self):
        return self.n

    def member(self, X, tol=1e-9):
        X = _batch(X, self.n)
        return np.ones(X.shape[:-1], dtype=bool)

    def project(self, x, tol=1e-10):
        return np.array(x, dtype=float)

    def as_polyhedron(self):
        return np.zeros((0, self.n)), np.zeros(0)

    @property
    def bounded(self):
        return False

    def anchor(self):
        return np.zeros(self.n)


@dataclass(frozen=True, eq=False)
class Box(SetModel):
    lo: np.ndarray
    hi: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo = _vec(self.lo, name="lo")
        hi = _vec(self.hi, lo.size, "hi")
        if np.any(lo > hi):
            raise ValidationError("box needs lo <= hi componentwise")
        if np.any(lo == PLUS_INF) or np.any(hi == MINUS_INF):
            raise ValidationError("box bounds point the wrong way")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.size

    def member(self, X, tol=1e-9):
        X = _batch(X, self.dim)
        return np.all((X >= self.lo - tol) & (X <= self.hi + tol), axis=-1)

    def project(self, x, tol=1e-10):
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def as_polyhedron(self):
        n = self.dim
        rows, rhs = [], []
        for i in range(n):
            if np.isfinite(self.lo[i]):
                r = np.zeros(n)
                r[i] = -1.0
                rows.append(r)
                rhs.append(-self.lo[i])
            if np.isfinite(self.hi[i]):
                r = np.zeros(n)
                r[i] = 1.0
                rows.append(r)
                rhs.append(self.hi[i])
        return np.array(rows).reshape(-1, n), np.array(rhs, dtype=float)

    @property
    def bounded(self):
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    def anchor(self):
        return self.project(np.zeros(self.dim))


@dataclass(frozen=True, eq=False)
class Ball(SetModel):
    center: np.ndarray
    radius: float
    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, name="center"))
        if not (self.radius >= 0) or math.isinf(self.radius):
            raise ValidationError("ball radius must be finite and >= 0")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.size

    def member(self, X, tol=1e-9):
        X = _batch(X, self.dim)
        return np.linalg.norm(X - self.center, axis=-1) <= self.radius + tol

    def project(self, x, tol=1e-10):
        x = np.asarray(x, dtype=float)
        d = x - self.center
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        scale = np.where(r > self.radius, self.radius / np.where(r > 0, r, 1.0), 1.0)
        return self.center + d * scale

    @property
    def bounded(self):
        return True

    def anchor(self):
        return self.center.copy()


@dataclass(frozen=True, eq=False)
class Polyhedron(SetModel):
    """``{x : Ax <= b}``."""

    A: np.ndarray
    b: np.ndarray
    kind = "polyhedron"

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2:
            raise ValidationError(f"A must be a matrix, got shape {A.shape}")
        b = _vec(self.b, A.shape[0], "b") if A.shape[0] else np.zeros(0)
        if A.shape[0] and np.any(np.all(A == 0, axis=1)):
            raise ValidationError("polyhedron has an all-zero row in A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.A.shape[1]

    def member(self, X, tol=1e-9):
        X = _batch(X, self.dim)
        if self.A.shape[0] == 0:
            return np.ones(X.shape[:-1], dtype=bool)
        return np.all(X @ self.A.T <= self.b + tol, axis=-1)

    def project(self, x, tol=1e-10):
        return project_polyhedron(self.A, self.b, x, tol=tol)

    def as_polyhedron(self):
        return self.A.copy(), self.b.copy()

    @property
    def bounded(self):
        from ._lp import cone_nonzero

        return cone_nonzero(self.A) is None

    def anchor(self):
        from ._lp import feasible_point

        x = feasible_point(self.A, self.b)
        if x is None:
            raise EmptySet("polyhedron is empty")
        return x


@dataclass(frozen=True, eq=False)
class Union(SetModel):
    members: tuple
    kind = "union"
    convex = False

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValidationError("union needs at least one member")
        dims = {m.dim for m in members}
        if len(dims) != 1:
            raise ValidationError(f"union members disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "members", members)

    @property
    def dim(self):
        return self.members[0].dim

    def member(self, X, tol=1e-9):
        out = self.members[0].member(X, tol)
        for m in self.members[1:]:
            out = out | m.member(X, tol)
        return out

    def project(self, x, tol=1e-10):
        raise NotConvexSet("projection onto a union is not supported")

    @property
    def bounded(self):
        return all(m.bounded for m in self.members)

    def anchor(self):
        return self.members[0].anchor()


@dataclass(frozen=True, eq=False)
class MembershipSet(SetModel):
    """Set known only through a membership oracle and one known point."""

    oracle: Callable
    n: int
    anchor_point: np.ndarray
    convex: bool = False
    kind = "membership"

    @property
    def dim(self):
        return self.n

    def member(self, X, tol=1e-9):
        X = _batch(X, self.n)
        flat = X.reshape(-1, self.n)
        return np.array([bool(self.oracle(x)) for x in flat]).reshape(X.shape[:-1])

    def project(self, x, tol=1e-10):
        raise NotConvexSet("membership-oracle sets cannot be projected onto")

    @property
    def bounded(self):
        raise NotImplementedError("boundedness of an oracle set is unknown")

    def anchor(self):
        return _vec(self.anchor_point, self.n)


def member(X: SetModel, x, tol: float = 1e-9) -> bool:
    return bool(X.member(_vec(x, X.dim)[None, :], tol)[0])


def project(X: SetModel, x, tol: float = 1e-10) -> np.ndarray:
    if not X.convex:
        raise NotConvexSet(f"cannot project onto a {X.kind} set")
    return X.project(_vec(x, X.dim), tol)


def _dykstra(A, b, P, tol, max_sweeps):
    m = A.shape[0]
    norms2 = (A**2).sum(axis=1)
    incr = np.zeros((m,) + P.shape)
    for sweep in range(1, max_sweeps + 1):
        prev = P.copy()
        for i in range(m):
            y = P + incr[i]
            viol = np.maximum(y @ A[i] - b[i], 0.0)
            P = y - (viol / norms2[i])[:, None] * A[i]
            incr[i] = y - P
        if np.max(np.abs(P - prev)) < tol:
            return P, sweep
    return P, None


def dykstra(A, b, x, tol: float = 1e-10, max_sweeps: int = 10_000) -> np.ndarray:
    """Euclidean projection onto ``{Ax <= b}`` by cyclic halfspace corrections.

    Works on a single point or a ``(k, n)`` batch. One halfspace is handled
    in closed form.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    P = np.atleast_2d(x).copy()
    m = A.shape[0]
    if m == 0:
        return P[0] if single else P
    if m == 1:
        viol = np.maximum(P @ A[0] - b[0], 0.0)
        P = P - (viol / (A[0] @ A[0]))[:, None] * A[0]
        return P[0] if single else P
    if np.all(P @ A.T <= b + tol):
        return P[0] if single else P
    P, sweeps = _dykstra(A, b, P, tol, max_sweeps)
    if sweeps is None:
        raise MaxIterations(f"polyhedral projection did not settle in {max_sweeps} sweeps")
    return P[0] if single else P


def _ldp_shift(A, h):
    # min |y| s.t. -A y >= h, solved on the unit scale (the problem is homogeneous in h)
    n = A.shape[1]
    scale = float(np.max(np.abs(h)))
    E = np.vstack([-A.T, h / scale])
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    u, _ = nonneg_lstsq(E, rhs)
    r = E @ u - rhs
    if abs(r[n]) < 1e-14:
        raise InfeasibleSet("polyhedron is empty")
    return -scale * r[:n] / r[n]


def ldp_project(A, b, x) -> np.ndarray:
    """Exact projection of one point onto ``{Ax <= b}`` by least-distance programming.

    The shift ``y = p - x`` solves ``min |y|`` s.t. ``-A y >= Ax - b``, which
    reduces to one nonnegative least-squares problem (Lawson and Hanson). A
    second pass mops up round-off when ``x`` is far from the set.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    p = np.asarray(x, dtype=float).copy()
    for _ in range(3):
        h = A @ p - b
        if np.all(h <= 1e-12 * (1 + np.abs(b))):
            break
        p = p + _ldp_shift(A, h)
    return p


def _snap_to_face(A, b, Z, P, tol, detect=1e-8):
    """Exact projection of ``Z`` onto the face that ``P`` identifies as active.

    Returns the snapped points and a mask of rows whose snapped point is
    feasible with nonnegative multipliers, i.e. certifiably the projection.
    """
    act = P @ A.T >= b - detect * (1 + np.abs(b))
    out = P.copy()
    ok = np.zeros(len(P), dtype=bool)
    row_norm = np.linalg.norm(A, axis=1)
    for pat in np.unique(act, axis=0):
        rows = np.flatnonzero(np.all(act == pat, axis=1))
        z = Z[rows]
        if not pat.any():
            Q, lam_ok = z, np.ones(len(rows), dtype=bool)
        else:
            As = A[pat]
            lam = np.linalg.lstsq(As @ As.T, (z @ As.T - b[pat]).T, rcond=None)[0]
            Q = z - lam.T @ As
            lam_ok = np.all(lam >= -tol * (1 + np.linalg.norm(z, axis=1)), axis=0)
        slack = tol * (1 + np.abs(b) + row_norm * np.linalg.norm(Q, axis=1)[:, None])
        ok[rows] = lam_ok & np.all(Q @ A.T <= b + slack, axis=1)
        out[rows] = Q
    return out, ok


def project_polyhedron(A, b, x, tol: float = 1e-10, sweeps: int = 200) -> np.ndarray:
    """Batch projection onto ``{Ax <= b}``.

    Vectorised Dykstra identifies the active face, the point is snapped onto
    that face exactly, and any result that then fails the optimality
    conditions is redone by least-distance programming (Dykstra can stall
    near nearly parallel facets).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    P = np.atleast_2d(x).copy()
    if A.shape[0] <= 1:
        return dykstra(A, b, x, tol)
    moved = np.flatnonzero(np.any(P @ A.T > b + tol, axis=1))
    if len(moved):
        Z = P[moved]
        Q, _ = _dykstra(A, b, Z.copy(), tol, sweeps)
        Q, ok = _snap_to_face(A, b, Z, Q, tol)
        for i in np.flatnonzero(~ok):
            Q[i] = ldp_project(A, b, Z[i])
        P[moved] = Q
    return P[0] if single else P


# --------------------------------------------------------------------------
# problems


@dataclass(frozen=True)
class Options:
    seed: int = 42
    t_min: float = 1e-6
    t_max: float = 1e8
    samples: int = 4096

    def __post_init__(self):
        if not (0 < self.t_min < self.t_max):
            raise ValidationError("options need 0 < t_min < t_max")
        if self.samples < 1:
            raise ValidationError("options.samples must be positive")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    dimension: int
    f: FunctionModel
    X: SetModel
    options: Options = field(default_factory=Options)
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValidationError("dimension must be >= 1")
        if self.f.dim != self.dimension or self.X.dim != self.dimension:
            raise ValidationError(
                f"dimension mismatch: problem {self.dimension}, function {self.f.dim}, set {self.X.dim}"
            )

    def with_function(self, f: FunctionModel) -> "ProblemSpec":
        return ProblemSpec(self.dimension, f, self.X, self.options, dict(self.flags))


_FUNCTION_FIELDS = {
    "affine": {"kind", "c", "beta"},
    "quadratic": {"kind", "Q", "c", "beta"},
    "pnorm": {"kind", "p"},
    "sqrt_abs": {"kind"},
    "rational_squash": {"kind"},
    "cap_abs": {"kind"},
    "plus_sqrt": {"kind"},
    "tilt": {"kind", "base", "u"},
}
_SET_FIELDS = {
    "whole_space": {"kind"},
    "box": {"kind", "lo", "hi"},
    "ball": {"kind", "center", "radius"},
    "polyhedron": {"kind", "A", "b"},
    "union": {"kind", "members"},
}
_TOP_FIELDS = {"dimension", "function", "set", "flags", "options"}


def _num(v, fld):
    try:
        return ext_from_json(v)
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc), field=fld) from None


def _numvec(v, fld, n=None):
    if not isinstance(v, list):
        raise ParseError("expected a list of numbers", field=fld)
    out = np.array([_num(e, fld) for e in v], dtype=float)
    if n is not None and out.size != n:
        raise ValidationError(f"{fld}: expected length {n}, got {out.size}")
    return out


def _nummat(v, fld):
    if not isinstance(v, list) or not all(isinstance(r, list) for r in v):
        raise ParseError("expected a list of rows", field=fld)
    rows = [[_num(e, fld) for e in r] for r in v]
    if len({len(r) for r in rows}) > 1:
        raise ParseError("ragged matrix", field=fld)
    return np.array(rows, dtype=float)


def _require(d, key, fld):
    if key not in d:
        raise ParseError(f"missing required key {key!r}", field=fld)
    return d[key]


def _check_keys(d, allowed, fld):
    if not isinstance(d, dict):
        raise ParseError("expected an object", field=fld)
    extra = set(d) - allowed
    if extra:
        raise ParseError(f"unknown keys {sorted(extra)}", field=fld)


def _parse_function(d, n, fld="function") -> FunctionModel:
    if not isinstance(d, dict):
        raise ParseError("expected an object", field=fld)
    kind = _require(d, "kind", fld)
    if kind not in _FUNCTION_FIELDS:
        raise ParseError(f"unknown function kind {kind!r}", field=f"{fld}.kind")
    _check_keys(d, _FUNCTION_FIELDS[kind], fld)
    beta = _num(d.get("beta", 0.0), f"{fld}.beta")
    if kind == "affine":
        return Affine(_numvec(_require(d, "c", fld), f"{fld}.c", n), beta)
    if kind == "quadratic":
        Q = _nummat(_require(d, "Q", fld), f"{fld}.Q")
        if Q.shape != (n, n):
            raise ValidationError(f"{fld}.Q must be {n}x{n}, got {Q.shape}")
        c = _numvec(d["c"], f"{fld}.c", n) if "c" in d else None
        return Quadratic(Q, c, beta)
    if kind == "pnorm":
        return PNorm(_num(_require(d, "p", fld), f"{fld}.p"), n)
    if kind == "tilt":
        base = _parse_function(_require(d, "base", fld), n, f"{fld}.base")
        return Tilt(base, _numvec(_require(d, "u", fld), f"{fld}.u", n))
    return {"sqrt_abs": SqrtAbs, "rational_squash": RationalSquash,
            "cap_abs": CapAbs, "plus_sqrt": PlusSqrt}[kind](n)


def _parse_set(d, n, fld="set") -> SetModel:
    if not isinstance(d, dict):
        raise ParseError("expected an object", field=fld)
    kind = _require(d, "kind", fld)
    if kind not in _SET_FIELDS:
        raise ParseError(f"unknown set kind {kind!r}", field=f"{fld}.kind")
    _check_keys(d, _SET_FIELDS[kind], fld)
    if kind == "whole_space":
        return WholeSpace(n)
    if kind == "box":
        return Box(_numvec(_require(d, "lo", fld), f"{fld}.lo", n),
                   _numvec(_require(d, "hi", fld), f"{fld}.hi", n))
    if kind == "ball":
        return Ball(_numvec(_require(d, "center", fld), f"{fld}.center", n),
                    _num(_require(d, "radius", fld), f"{fld}.radius"))
    if kind == "polyhedron":
        A = _nummat(_require(d, "A", fld), f"{fld}.A")
        if A.size == 0:
            A = A.reshape(0, n)
        if A.shape[1] != n:
            raise ValidationError(f"{fld}.A must have {n} columns, got {A.shape[1]}")
        return Polyhedron(A, _numvec(_require(d, "b", fld), f"{fld}.b", A.shape[0]))
    members = _require(d, "members", fld)
    if not isinstance(members, list):
        raise ParseError("expected a list", field=f"{fld}.members")
    return Union(tuple(_parse_set(m, n, f"{fld}.members[{i}]") for i, m in enumerate(members)))


def check_nonempty(X: SetModel) -> None:
    if isinstance(X, Union):
        errors = []
        for m in X.members:
            try:
                check_nonempty(m)
                return
            except EmptySet as exc:
                errors.append(str(exc))
        raise EmptySet("every union member is empty")
    X.anchor()


def problem_from_dict(doc: dict) -> ProblemSpec:
    _check_keys(doc, _TOP_FIELDS, "<root>")
    n = _require(doc, "dimension", "<root>")
    if isinstance(n, bool) or not isinstance(n, int):
        raise ParseError("dimension must be an integer", field="dimension")
    if n < 1:
        raise ValidationError("dimension must be >= 1")
    f = _parse_function(_require(doc, "function", "<root>"), n)
    X = _parse_set(_require(doc, "set", "<root>"), n)
    flags = doc.get("flags", {})
    _check_keys(flags, {"convex", "quasiconvex"}, "flags")
    for k, v in flags.items():
        if not isinstance(v, bool):
            raise ParseError("flags must be booleans", field=f"flags.{k}")
        if v and not getattr(f, k):
            raise ValidationError(f"flag {k}=true contradicts the {f.kind} catalog entry")
    opts = doc.get("options", {})
    _check_keys(opts, {"seed", "t_min", "t_max", "samples"}, "options")
    for k in ("seed", "samples"):
        if k in opts and (isinstance(opts[k], bool) or not isinstance(opts[k], int)):
            raise ParseError("expected an integer", field=f"options.{k}")
    options = Options(
        seed=opts.get("seed", 42),
        t_min=_num(opts.get("t_min", 1e-6), "options.t_min"),
        t_max=_num(opts.get("t_max", 1e8), "options.t_max"),
        samples=opts.get("samples", 4096),
    )
    try:
        check_nonempty(X)
    except EmptySet as exc:
        raise ValidationError(f"feasible set is empty: {exc}") from None
    return ProblemSpec(n, f, X, options, dict(flags))


def parse_problem(text: str) -> ProblemSpec:
    """Parse and validate a JSON problem document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    return problem_from_dict(doc)


def load_problem(path) -> ProblemSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read())


def _jvec(v):
    return [ext_to_json(float(e)) for e in np.asarray(v).ravel()]


def _jmat(M):
    return [_jvec(r) for r in np.asarray(M)]


def function_to_dict(f: FunctionModel) -> dict:
    if isinstance(f, Affine):
        return {"kind": "affine", "c": _jvec(f.c), "beta": f.beta}
    if isinstance(f, Quadratic):
        return {"kind": "quadratic", "Q": _jmat(f.Q), "c": _jvec(f.c), "beta": f.beta}
    if isinstance(f, PNorm):
        return {"kind": "pnorm", "p": f.p}
    if isinstance(f, Tilt):
        return {"kind": "tilt", "base": function_to_dict(f.base), "u": _jvec(f.u)}
    if isinstance(f, (SqrtAbs, RationalSquash, CapAbs, PlusSqrt)):
        return {"kind": f.kind}
    raise ValidationError(f"{f.kind} functions cannot be serialized")


def set_to_dict(X: SetModel) -> dict:
    if isinstance(X, WholeSpace):
        return {"kind": "whole_space"}
    if isinstance(X, Box):
        return {"kind": "box", "lo": _jvec(X.lo), "hi": _jvec(X.hi)}
    if isinstance(X, Ball):
        return {"kind": "ball", "center": _jvec(X.center), "radius": X.radius}
    if isinstance(X, Polyhedron):
        return {"kind": "polyhedron", "A": _jmat(X.A), "b": _jvec(X.b)}
    if isinstance(X, Union):
        return {"kind": "union", "members": [set_to_dict(m) for m in X.members]}
    raise ValidationError(f"{X.kind} sets cannot be serialized")


def problem_to_dict(p: ProblemSpec) -> dict:
    o = p.options
    doc = {
        "dimension": p.dimension,
        "function": function_to_dict(p.f),
        "set": set_to_dict(p.X),
        "options": {"seed": o.seed, "t_min": o.t_min, "t_max": o.t_max, "samples": o.samples},
    }
    if p.flags:
        doc["flags"] = dict(p.flags)
    return doc


def serialize_problem(p: ProblemSpec) -> str:
    return json.dumps(problem_to_dict(p), indent=2, sort_keys=True)


def catalog_function(kind: str, n: int = 1, **kw) -> FunctionModel:
    """Convenience constructor used by fixtures and the CLI."""
    simple = {"sqrt_abs": SqrtAbs, "rational_squash": RationalSquash,
              "cap_abs": CapAbs, "plus_sqrt": PlusSqrt}
    if kind in simple:
        return simple[kind](n)
    if kind == "pnorm":
        return PNorm(kw.get("p", 2.0), n)
    if kind == "affine":
        return Affine(kw["c"], kw.get("beta", 0.0))
    if kind == "quadratic":
        return Quadratic(kw["Q"], kw.get("c"), kw.get("beta", 0.0))
    raise ValidationError(f"unknown catalog kind {kind!r}")


def as_point_array(points: Sequence) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    return arr.reshape(len(arr), -1) if arr.size else arr.reshape(0, 0)
