"""Fragment diffusion kernel.

A fragment spreading out of a node is treated like matter diffusing through
a one-dimensional porous medium whose coordinate is network latency. The
Green's-function solution involves erfc, replaced here by a two-term
exponential approximation so that every evaluation is a couple of ``exp``
calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EPS_DENOMINATOR = 1e-6
D_MAX = 1e6
PROBABILITY_FLOOR = 1e-300

_FOUR_PI = 4.0 * math.pi


class InertFragmentError(ValueError):
    """Raised when a fragment has no swarm (nobody holds or wants it)."""


@dataclass(frozen=True)
class FragmentSwarmStats:
    fragment: int
    users_total: int
    seeders: int
    mean_share_ratio: float

    def __post_init__(self):
        if self.users_total < 0 or self.seeders < 0:
            raise ValueError("counts must be non-negative")
        if self.seeders > self.users_total:
            raise ValueError("seeders cannot exceed users_total")
        if self.mean_share_ratio < 0:
            raise ValueError("mean_share_ratio must be non-negative")


def erfc_approx(x):
    """Two-term exponential approximation of erfc for ``x >= 0``.

    ``erfc(x) ~ exp(-x**2)/6 + exp(-4*x**2/3)/2``. Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("erfc_approx is only defined here for x >= 0")
    sq = arr * arr
    out = np.exp(-sq) / 6.0 + np.exp(-4.0 * sq / 3.0) / 2.0
    return float(out) if out.ndim == 0 else out


def permeability(stats: FragmentSwarmStats) -> float:
    """Swarm permeability ``T / (S + (T - S) * rho)``, capped at ``D_MAX``.

    Large when seeders and share ratio are scarce, i.e. the fragment is
    under pressure to spread.
    """
    if stats.users_total == 0:
        raise InertFragmentError(f"fragment {stats.fragment} has no swarm")
    t, s, rho = stats.users_total, stats.seeders, stats.mean_share_ratio
    denom = s + (t - s) * rho
    if denom < EPS_DENOMINATOR:
        return D_MAX
    return min(t / denom, D_MAX)


def permeability_prefactor(D, t):
    """Normalised prefactor ``1 / sqrt(4 pi D t)``."""
    D = np.asarray(D, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(D <= 0) or np.any(t <= 0):
        raise ValueError("D and t must be positive")
    out = 1.0 / np.sqrt(_FOUR_PI * D * t)
    return float(out) if out.ndim == 0 else out


def diffusion_probability(p, delta):
    """Probability-like score that a fragment reaches a peer ``delta`` away.

    ``p * erfc_approx(p * delta)``, clamped into ``[PROBABILITY_FLOOR, 1]``.
    """
    p = np.asarray(p, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if np.any(p <= 0) or np.any(delta <= 0):
        raise ValueError("p and delta must be positive")
    raw = p * erfc_approx(p * delta)
    out = np.clip(raw, PROBABILITY_FLOOR, 1.0)
    return float(out) if out.ndim == 0 else out
