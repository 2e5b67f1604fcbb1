"""Asymptotic (recession) cones of feasible sets."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _lp
from ._random import stream, unit_ball, unit_sphere
from .errors import DegenerateCone, EmptySet, MaxIterations, SamplingStalled
from .models import (
    Ball,
    Box,
    MembershipSet,
    Polyhedron,
    SetModel,
    Union,
    WholeSpace,
    _jmat,
    _vec,
    dykstra,
)

PROBE_RADII = (1e2, 1e3, 1e4)
RESOLUTION = 0.02


@dataclass(frozen=True, eq=False)
class ConeRep:
    """A closed cone.

    kind is one of ``zero``, ``whole``, ``polyhedral`` (``{u : Au <= 0}``,
    rows stored normalized), ``ray_union`` (``pieces``) or ``sampled``
    (unit ``directions`` with an angular ``resolution``).
    """

    kind: str
    dim: int
    A: np.ndarray = None
    pieces: tuple = ()
    directions: np.ndarray = None
    resolution: float = RESOLUTION
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "polyhedral":
            A = np.asarray(self.A, dtype=float).reshape(-1, self.dim)
            norms = np.linalg.norm(A, axis=1, keepdims=True)
            object.__setattr__(self, "A", A / norms)
        if self.kind == "sampled":
            D = np.asarray(self.directions, dtype=float).reshape(-1, self.dim)
            if D.size and np.max(np.abs(np.linalg.norm(D, axis=1) - 1.0)) > 1e-12:
                D = D / np.linalg.norm(D, axis=1, keepdims=True)
            object.__setattr__(self, "directions", D)
        if self.kind == "ray_union":
            if {p.dim for p in self.pieces} - {self.dim}:
                raise ValueError("ray_union pieces must share the dimension")

    @property
    def is_zero(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "ray_union":
            return all(p.is_zero for p in self.pieces)
        if self.kind == "sampled":
            return len(self.directions) == 0
        return False

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "dim": self.dim}
        if self.kind == "polyhedral":
            d["A"] = _jmat(self.A)
        elif self.kind == "ray_union":
            d["pieces"] = [p.to_dict() for p in self.pieces]
        elif self.kind == "sampled":
            d["directions"] = _jmat(self.directions)
            d["resolution"] = self.resolution
        return d


def zero_cone(n):
    return ConeRep("zero", n)


def whole_cone(n):
    return ConeRep("whole", n)


def _from_rows(A, n):
    A = np.asarray(A, dtype=float).reshape(-1, n)
    if A.shape[0] == 0:
        return whole_cone(n)
    if _lp.cone_nonzero(A) is None:
        return zero_cone(n)
    return ConeRep("polyhedral", n, A=A)


def asymptotic_cone(X: SetModel, radii=PROBE_RADII, resolution=RESOLUTION,
                    probes: int = 2000, seed: int = 0) -> ConeRep:
    """Asymptotic cone of ``X``.

    Structured kinds are handled exactly: a polyhedron ``{Ax <= b}`` maps to
    ``{Au <= 0}``, bounded boxes and balls to ``{0}``, a box keeps the rows
    of its finite bounds, a union maps to the union of member cones.
    Membership-oracle sets fall back to ray probing at the given radii.
    """
    n = X.dim
    if isinstance(X, WholeSpace):
        return whole_cone(n)
    if isinstance(X, Ball):
        return zero_cone(n)
    if isinstance(X, Box):
        if X.bounded:
            return zero_cone(n)
        A, _ = X.as_polyhedron()
        return _from_rows(A, n) if len(A) else whole_cone(n)
    if isinstance(X, Polyhedron):
        if _lp.feasible_point(X.A, X.b) is None:
            raise EmptySet("polyhedron is empty")
        return _from_rows(X.A, n)
    if isinstance(X, Union):
        pieces = []
        for m in X.members:
            try:
                pieces.append(asymptotic_cone(m, radii, resolution, probes, seed))
            except EmptySet:
                continue
        if not pieces:
            raise EmptySet("union has no nonempty member")
        if any(p.kind == "whole" for p in pieces):
            return whole_cone(n)
        live = tuple(p for p in pieces if not p.is_zero)
        if not live:
            return zero_cone(n)
        return ConeRep("ray_union", n, pieces=live)
    if isinstance(X, MembershipSet):
        return _probe_cone(X, radii, resolution, probes, seed)
    raise TypeError(f"unsupported set kind {X.kind!r}")


def _probe_cone(X: MembershipSet, radii, resolution, probes, seed):
    n = X.dim
    x0 = X.anchor()
    if not X.member(x0[None, :])[0]:
        raise EmptySet("anchor point is not a member of the set")
    rng = stream(seed, "probe")
    D = unit_sphere(rng, probes, n)
    keep = np.ones(len(D), dtype=bool)
    if X.convex:
        for lam in radii:
            keep &= X.member(x0 + lam * D)
    else:
        # definition-based: at every radius some member lies within the
        # angular resolution of the scaled direction
        Z = unit_ball(rng, 8, n)
        for R in radii:
            hit = np.zeros(len(D), dtype=bool)
            for z in np.vstack([np.zeros(n), Z]):
                hit |= X.member(R * (D + resolution * z))
            keep &= hit
    D = D[keep]
    if len(D) == 0:
        return zero_cone(n)
    return ConeRep("sampled", n, directions=D, resolution=resolution,
                   meta={"radii": list(radii), "probes": probes})


def cone_contains(C: ConeRep, u, tol: float = 1e-9) -> bool:
    u = _vec(u, C.dim, "u")
    nu = float(np.linalg.norm(u))
    if C.kind == "whole":
        return True
    if C.kind == "zero":
        return nu <= tol
    if C.kind == "polyhedral":
        return bool(np.all(C.A @ u <= tol * nu))
    if C.kind == "ray_union":
        return any(cone_contains(p, u, tol) for p in C.pieces)
    if C.kind == "sampled":
        if nu <= tol:
            return True
        if len(C.directions) == 0:
            return False
        ang = np.linalg.norm(C.directions - u / nu, axis=1)
        return bool(ang.min() <= C.resolution)
    raise ValueError(f"unknown cone kind {C.kind!r}")


class _Budget:
    def __init__(self):
        self.proposals = 0
        self.accepted = 0

    def check(self):
        if self.proposals >= 1_000_000 and self.accepted < 1e-3 * self.proposals:
            raise SamplingStalled(
                f"cone sampling accepted {self.accepted} of {self.proposals} proposals"
            )


def _draw_polyhedral(A, rng, budget, n):
    while True:
        budget.proposals += 1
        budget.check()
        z = unit_sphere(rng, 1, n)[0]
        try:
            p = dykstra(A, np.zeros(len(A)), z, tol=1e-13, max_sweeps=10_000)
        except MaxIterations:
            p = z
        nrm = np.linalg.norm(p)
        if nrm > 1e-6:
            d = p / nrm
            if np.all(A @ d <= 1e-9):
                budget.accepted += 1
                return d
        # rejection fallback on the raw proposal
        if np.all(A @ z <= 1e-9):
            budget.accepted += 1
            return z


def _draw(C, rng, budget):
    n = C.dim
    if C.kind == "whole":
        budget.proposals += 1
        budget.accepted += 1
        return unit_sphere(rng, 1, n)[0]
    if C.kind == "polyhedral":
        return _draw_polyhedral(C.A, rng, budget, n)
    if C.kind == "ray_union":
        live = [p for p in C.pieces if not p.is_zero]
        return _draw(live[int(rng.integers(len(live)))], rng, budget)
    if C.kind == "sampled":
        budget.proposals += 1
        budget.accepted += 1
        return C.directions[int(rng.integers(len(C.directions)))].copy()
    raise DegenerateCone(f"cannot sample a {C.kind} cone")


def sample_cone_unit(C: ConeRep, k: int, seed: int = 0) -> np.ndarray:
    """``k`` unit directions of ``C``; direction ``i`` depends only on ``(seed, i)``."""
    if C.is_zero:
        raise DegenerateCone("the cone is {0}")
    budget = _Budget()
    out = np.empty((k, C.dim))
    for i in range(k):
        out[i] = _draw(C, stream(seed, "cone", i), budget)
    return out
