"""Undecimated CDF(2,2) wavelet transform via lifting.

Level ``i`` works at dilation ``s = 2**(i-1)`` on the previous
approximation ``a``::

    d[n]  = a[n] - (a[n-s] + a[n+s]) / 2        # predict
    a'[n] = a[n] + (d[n-s] + d[n+s]) / 4        # update

Nothing is decimated, so every level keeps one coefficient per input
sample. The predict step leaves ``a`` in place, so undoing the update step
alone recovers the previous approximation exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PREDICT = 0.5
UPDATE = 0.25
BOUNDARIES = {"symmetric": "symmetric", "periodic": "wrap"}


class SeriesTooShortError(ValueError):
    pass


@dataclass(frozen=True)
class WaveletDecomposition:
    details: tuple[np.ndarray, ...]  # d_1 ... d_M
    approximation: np.ndarray  # a_M
    boundary: str = "symmetric"

    @property
    def levels(self) -> int:
        return len(self.details)

    def __len__(self):
        return self.approximation.size


@dataclass
class SwarmSeries:
    samples: np.ndarray
    kind: str = "availability"
    sample_interval: float = 3600.0  # seconds
    start_step: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.kind not in ("requests", "availability"):
            raise ValueError(f"unknown series kind {self.kind!r}")


def _neighbours(x: np.ndarray, s: int, boundary: str) -> tuple[np.ndarray, np.ndarray]:
    padded = np.pad(x, s, mode=BOUNDARIES[boundary])
    return padded[: x.size], padded[2 * s :]


def _check_length(n: int, levels: int) -> None:
    if levels < 1:
        raise ValueError("levels must be >= 1")
    need = 2**levels
    if n < need:
        raise SeriesTooShortError(
            f"a {levels}-level decomposition needs at least {need} samples, got {n}"
        )


def wavelet_decompose(x, levels: int, boundary: str = "symmetric") -> WaveletDecomposition:
    if isinstance(x, SwarmSeries):
        x = x.samples
    a = np.asarray(x, dtype=float)
    if a.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if boundary not in BOUNDARIES:
        raise ValueError(f"unknown boundary mode {boundary!r}")
    _check_length(a.size, levels)
    details = []
    for i in range(levels):
        s = 2**i
        left, right = _neighbours(a, s, boundary)
        d = a - PREDICT * (left + right)
        left, right = _neighbours(d, s, boundary)
        a = a + UPDATE * (left + right)
        details.append(d)
    return WaveletDecomposition(tuple(details), a, boundary)


def wavelet_reconstruct(decomp: WaveletDecomposition) -> np.ndarray:
    a = np.asarray(decomp.approximation, dtype=float)
    for i in reversed(range(decomp.levels)):
        d = np.asarray(decomp.details[i], dtype=float)
        if d.shape != a.shape:
            raise ValueError(f"level {i + 1} length {d.size} does not match {a.size}")
        s = 2**i
        left, right = _neighbours(d, s, decomp.boundary)
        a = a - UPDATE * (left + right)
    return a


def build_input_matrix(decomp: WaveletDecomposition) -> np.ndarray:
    """Rows ``[d_1(t), ..., d_M(t), a_M(t)]``, one per time step."""
    return np.column_stack([*decomp.details, decomp.approximation])


def causal_input_matrix(
    x, levels: int, window: int | None = None, boundary: str = "symmetric"
) -> np.ndarray:
    """Input rows that only look at the past.

    Row ``t`` is the last row of the decomposition of ``x[t-window+1 : t+1]``,
    so a forecaster trained on these rows never sees samples after ``t``.
    Rows before a full window is available are computed on the shorter
    prefix; the first ``2**levels - 1`` rows are NaN (too little history).
    """
    x = np.asarray(x, dtype=float)
    if window is None:
        window = 4 * 2**levels
    _check_length(window, levels)
    _check_length(x.size, levels)
    rows = np.full((x.size, levels + 1), np.nan)
    first = 2**levels - 1
    for t in range(first, x.size):
        seg = x[max(0, t - window + 1) : t + 1]
        rows[t] = build_input_matrix(wavelet_decompose(seg, levels, boundary))[-1]
    return rows
