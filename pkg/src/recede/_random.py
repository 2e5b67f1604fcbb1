"""Counter-based random streams.

Every stream is keyed by ``(seed, *keys)`` so results never depend on the
order in which independent pieces of work are evaluated.
"""
from __future__ import annotations

import zlib

import numpy as np
from scipy.stats import qmc

_MASK = (1 << 63) - 1


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode())
    return int(k) & _MASK


def stream(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng([_key(seed), *(_key(k) for k in keys)])


def unit_sphere(rng: np.random.Generator, k: int, n: int) -> np.ndarray:
    z = rng.standard_normal((k, n))
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return z / norms


def unit_ball(rng: np.random.Generator, k: int, n: int) -> np.ndarray:
    """Uniform samples from the closed unit ball."""
    dirs = unit_sphere(rng, k, n)
    r = rng.random(k) ** (1.0 / n)
    return dirs * r[:, None]


def latin_hypercube(rng: np.random.Generator, k: int, lo, hi) -> np.ndarray:
    sampler = qmc.LatinHypercube(d=np.size(lo), rng=rng)
    return qmc.scale(sampler.random(k), lo, hi)
