"""Synthetic swarm series: seasonal cycle plus trend plus noise."""

from __future__ import annotations

import numpy as np


def seasonal_series(
    length: int,
    period: int = 24,
    amplitude: float = 1.0,
    level: float = 0.0,
    trend: float = 0.0,
    noise: float = 0.1,
    phase: float = 0.0,
    seed: int | None = 0,
) -> np.ndarray:
    """``level + trend*t + amplitude*sin(2 pi t / period + phase)`` plus noise.

    ``noise`` is the Gaussian standard deviation relative to ``amplitude``.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=float)
    clean = level + trend * t + amplitude * np.sin(2 * np.pi * t / period + phase)
    return clean + rng.normal(0.0, noise * amplitude, length)


def linear_decay(length: int, start: float, stop: float, flat: int = 0) -> np.ndarray:
    """Constant at ``start`` for ``flat`` samples, then a straight line to ``stop``."""
    ramp = np.linspace(start, stop, length - flat)
    return np.concatenate([np.full(flat, float(start)), ramp])
