"""Wavelet-recurrent forecasting of swarm series.

Input rows come from :func:`causal_input_matrix`, so each forecast made at
step ``t`` only uses samples up to ``t``. By default the network learns the
change ``x(t + r) - x(t)`` rather than the level; a trend then extrapolates
past the range seen in training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..diffusion import FragmentSwarmStats, InertFragmentError, permeability
from .rnn import RecurrentPredictor, TrainingReport
from .wavelet import causal_input_matrix

TARGET_MODES = ("increment", "level")
BLEND_MODES = ("replace", "mean")
STAT_NAMES = ("users_total", "seeders", "mean_share_ratio")


@dataclass
class _Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, data: np.ndarray) -> "_Scaler":
        mean = np.nanmean(data, axis=0)
        std = np.nanstd(data, axis=0)
        std = np.where(std > 1e-12, std, 1.0)
        return cls(mean, std)

    def apply(self, data):
        return (data - self.mean) / self.std

    def invert(self, data):
        return data * self.std + self.mean

    def to_dict(self):
        return {"mean": np.atleast_1d(self.mean).tolist(), "std": np.atleast_1d(self.std).tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"]), np.asarray(d["std"]))


def _targets(x: np.ndarray, horizon: int, mode: str) -> np.ndarray:
    """Aligned targets: row ``t`` maps to ``x(t + horizon)`` (or its change)."""
    out = np.full(x.shape, np.nan)
    if horizon < len(x):
        out[: len(x) - horizon] = x[horizon:]
        if mode == "increment":
            out[: len(x) - horizon] -= x[: len(x) - horizon]
    return out


class SeriesForecaster:
    """Forecast one series ``horizon`` steps ahead."""

    def __init__(
        self,
        levels: int = 4,
        hidden: int = 16,
        horizon: int = 6,
        window: int | None = None,
        target_mode: str = "increment",
        seed: int = 0,
    ):
        if target_mode not in TARGET_MODES:
            raise ValueError(f"unknown target mode {target_mode!r}")
        self.levels = levels
        self.horizon = horizon
        self.window = window or 4 * 2**levels
        self.target_mode = target_mode
        self.net = RecurrentPredictor(levels + 1, hidden, 1, horizon, seed)
        self.in_scale: _Scaler | None = None
        self.out_scale: _Scaler | None = None

    def rows(self, x) -> np.ndarray:
        return causal_input_matrix(x, self.levels, self.window)

    def fit(self, x, epochs=500, learning_rate=1e-2, seed=None) -> TrainingReport:
        x = np.asarray(x, dtype=float)
        if len(x) < self.horizon + 2**self.levels:
            raise ValueError("series too short for the configured levels and horizon")
        rows = self.rows(x)
        y = _targets(x, self.horizon, self.target_mode)
        self.in_scale = _Scaler.fit(rows)
        self.out_scale = _Scaler.fit(y[:, None])
        return self.net.train(
            self.in_scale.apply(rows),
            self.out_scale.apply(y[:, None]),
            epochs=epochs,
            learning_rate=learning_rate,
            seed=seed,
        )

    def predict_all(self, x) -> np.ndarray:
        """``out[t]`` is the forecast of ``x(t + horizon)`` made at ``t``."""
        if self.in_scale is None:
            raise RuntimeError("forecaster has not been fitted")
        x = np.asarray(x, dtype=float)
        raw = self.net.predict_sequence(self.in_scale.apply(self.rows(x)))
        pred = self.out_scale.invert(raw[:, None])[:, 0]
        return pred + x if self.target_mode == "increment" else pred


def persistence_forecast(x) -> np.ndarray:
    return np.asarray(x, dtype=float).copy()


def forecast_mse(x, forecast, horizon: int, start: int = 0) -> float:
    """MSE of ``forecast[t]`` against ``x[t + horizon]`` for ``t >= start``."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(forecast, dtype=float)[start : len(x) - horizon]
    truth = x[start + horizon :]
    ok = ~np.isnan(f)
    return float(np.mean((f[ok] - truth[ok]) ** 2))


@dataclass
class FragmentHistory:
    """Per-step swarm statistics of one fragment."""

    users_total: list[float] = field(default_factory=list)
    seeders: list[float] = field(default_factory=list)
    mean_share_ratio: list[float] = field(default_factory=list)

    def append(self, stats: FragmentSwarmStats) -> None:
        self.users_total.append(float(stats.users_total))
        self.seeders.append(float(stats.seeders))
        self.mean_share_ratio.append(float(stats.mean_share_ratio))

    def __len__(self):
        return len(self.seeders)

    def matrix(self) -> np.ndarray:
        return np.column_stack([self.users_total, self.seeders, self.mean_share_ratio])


def clamp_stats(fragment: int, users, seeders, ratio) -> FragmentSwarmStats:
    users = max(float(users), 0.0)
    seeders = min(max(float(seeders), 0.0), users)
    return FragmentSwarmStats(fragment, users, seeders, max(float(ratio), 0.0))


class SwarmForecaster:
    """One network per torrent forecasting (T_k, S_k, rho_k) for every fragment.

    The input rows are the causal wavelet rows of the fragment's seeder count
    (normalised by the node count); three output heads give the forecast
    changes of users, seeders and share ratio. All fragments are training
    streams for the same network.
    """

    def __init__(
        self,
        node_count: int,
        levels: int = 4,
        hidden: int = 16,
        horizon: int = 6,
        window: int | None = None,
        seed: int = 0,
    ):
        self.node_count = max(node_count, 1)
        self.levels = levels
        self.horizon = horizon
        self.window = window or 4 * 2**levels
        self.net = RecurrentPredictor(levels + 1, hidden, 3, horizon, seed)
        self.in_scale: _Scaler | None = None
        self.out_scale: _Scaler | None = None
        self.frozen = np.zeros(3, dtype=bool)
        self.frozen_change = np.zeros(3)

    def min_history(self) -> int:
        return 2**self.levels + self.horizon + 1

    def _norm(self, hist: np.ndarray) -> np.ndarray:
        return hist / np.array([self.node_count, self.node_count, 1.0])

    def _rows(self, hist: np.ndarray) -> np.ndarray:
        return causal_input_matrix(self._norm(hist)[:, 1], self.levels, self.window)

    def fit(self, histories, epochs=500, learning_rate=1e-2, seed=None) -> TrainingReport:
        inputs, targets = [], []
        for hist in histories:
            m = hist.matrix() if isinstance(hist, FragmentHistory) else np.asarray(hist, float)
            if len(m) < self.min_history():
                continue
            norm = self._norm(m)
            inputs.append(self._rows(m))
            targets.append(
                np.column_stack([_targets(norm[:, c], self.horizon, "increment") for c in range(3)])
            )
        if not inputs:
            raise ValueError(f"every history is shorter than {self.min_history()} samples")
        self.in_scale = _Scaler.fit(np.vstack(inputs))
        stacked = np.vstack(targets)
        self.out_scale = _Scaler.fit(stacked)
        self.out_scale.mean = np.zeros(3)  # keep "no change" at a zero output
        # a head that never saw its target move has nothing to extrapolate
        self.frozen = np.nanstd(stacked, axis=0) < 1e-12
        self.frozen_change = np.where(self.frozen, np.nanmean(stacked, axis=0), 0.0)
        return self.net.train(
            [self.in_scale.apply(r) for r in inputs],
            [self.out_scale.apply(t) for t in targets],
            epochs=epochs,
            learning_rate=learning_rate,
            seed=seed,
        )

    @property
    def fitted(self) -> bool:
        return self.in_scale is not None

    def forecast(self, fragment: int, history) -> FragmentSwarmStats | None:
        """Clamped stats expected ``horizon`` steps after the last sample."""
        if not self.fitted:
            raise RuntimeError("forecaster has not been fitted")
        m = history.matrix() if isinstance(history, FragmentHistory) else np.asarray(history, float)
        if len(m) < 2**self.levels:
            return None
        raw = self.net.predict_sequence(self.in_scale.apply(self._rows(m)))[-1]
        change = np.where(self.frozen, self.frozen_change, self.out_scale.invert(raw))
        change = change * np.array([self.node_count, self.node_count, 1.0])
        users, seeders, ratio = m[-1] + change
        return clamp_stats(fragment, users, seeders, ratio)


def blend(current: FragmentSwarmStats, predicted: FragmentSwarmStats, mode: str = "replace"):
    if mode not in BLEND_MODES:
        raise ValueError(f"unknown blend mode {mode!r}")
    if mode == "replace":
        return predicted
    return clamp_stats(
        current.fragment,
        (current.users_total + predicted.users_total) / 2,
        (current.seeders + predicted.seeders) / 2,
        (current.mean_share_ratio + predicted.mean_share_ratio) / 2,
    )


def altered_permeability(predicted: FragmentSwarmStats) -> float:
    """Permeability evaluated on forecast swarm statistics."""
    return permeability(predicted)


__all__ = [
    "SeriesForecaster",
    "SwarmForecaster",
    "FragmentHistory",
    "altered_permeability",
    "blend",
    "clamp_stats",
    "forecast_mse",
    "persistence_forecast",
    "InertFragmentError",
]
