"""Latency space over the node population.

Each node keeps its own view of how far every other node is (one-way
latency, seconds) together with the step at which each value was taken.
Views are immutable; recording a measurement returns a new view.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np


class UnknownNodeError(KeyError):
    """A node id outside the scenario's population was referenced."""


@dataclass(frozen=True)
class LatencyView:
    owner: int
    delta: np.ndarray  # seconds, NaN where never measured
    measured_at: np.ndarray  # step of last measurement, -1 where never measured

    def __post_init__(self):
        delta = np.array(self.delta, dtype=float)
        measured = np.array(self.measured_at, dtype=np.int64)
        if delta.shape != measured.shape or delta.ndim != 1:
            raise ValueError("delta and measured_at must be 1-d arrays of equal length")
        if not 0 <= self.owner < delta.size:
            raise UnknownNodeError(self.owner)
        delta[self.owner] = 0.0
        if measured[self.owner] < 0:
            measured[self.owner] = 0
        others = np.delete(delta, self.owner)
        if np.any(others[~np.isnan(others)] <= 0):
            raise ValueError("latencies to other nodes must be positive")
        delta.flags.writeable = False
        measured.flags.writeable = False
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "measured_at", measured)

    @classmethod
    def empty(cls, owner: int, node_count: int) -> "LatencyView":
        return cls(owner, np.full(node_count, np.nan), np.full(node_count, -1))

    @classmethod
    def from_mapping(
        cls,
        owner: int,
        latencies: Mapping[int, tuple[float, int] | float],
        node_count: int | None = None,
    ) -> "LatencyView":
        """Build a view from ``{node: delta}`` or ``{node: (delta, measured_at)}``."""
        if node_count is None:
            node_count = max([owner, *latencies]) + 1
        view = cls.empty(owner, node_count)
        delta = view.delta.copy()
        measured = view.measured_at.copy()
        for node, value in latencies.items():
            if not 0 <= node < node_count:
                raise UnknownNodeError(node)
            d, at = value if isinstance(value, tuple) else (value, 0)
            delta[node] = d
            measured[node] = at
        return cls(owner, delta, measured)

    @property
    def node_count(self) -> int:
        return self.delta.size

    def known(self) -> np.ndarray:
        """Ids present in the view (owner included)."""
        return np.flatnonzero(~np.isnan(self.delta))

    def record(self, target: int, delta: float, step: int) -> "LatencyView":
        if not 0 <= target < self.node_count:
            raise UnknownNodeError(target)
        if step < self.measured_at[target]:
            raise ValueError("measurement step precedes the stored one")
        d = self.delta.copy()
        m = self.measured_at.copy()
        d[target] = delta
        m[target] = step
        return LatencyView(self.owner, d, m)

    def min_latency(self) -> float:
        others = np.delete(self.delta, self.owner)
        others = others[~np.isnan(others)]
        if others.size == 0:
            raise ValueError(f"node {self.owner} has no measured peers")
        return float(others.min())


@dataclass(frozen=True)
class OrderedPeerList:
    owner: int
    sequence: tuple[int, ...]

    def __iter__(self):
        return iter(self.sequence)

    def __len__(self):
        return len(self.sequence)

    def restricted(self, keep) -> "OrderedPeerList":
        """Sub-list with the owner plus the peers in ``keep``, order preserved."""
        keep = set(keep)
        return OrderedPeerList(
            self.owner,
            tuple(n for n in self.sequence if n == self.owner or n in keep),
        )


class LatencyModel:
    """Ground-truth latency table with optional seeded multiplicative jitter.

    ``table`` is in seconds, indexed ``[source, target]``; it need not be
    symmetric.
    """

    def __init__(self, table, jitter: float = 0.0, seed: int | None = 0):
        table = np.asarray(table, dtype=float)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise ValueError("latency table must be square")
        if not 0.0 <= jitter < 1.0:
            raise ValueError("jitter must lie in [0, 1)")
        self.table = table
        self.jitter = jitter
        self.rng = np.random.default_rng(seed)

    @property
    def node_count(self) -> int:
        return self.table.shape[0]

    def _check(self, node: int) -> None:
        if not 0 <= node < self.node_count:
            raise UnknownNodeError(node)

    def measure(self, source: int, target: int) -> float:
        self._check(source)
        self._check(target)
        if source == target:
            return 0.0
        base = float(self.table[source, target])
        if self.jitter:
            base *= self.rng.uniform(1.0 - self.jitter, 1.0 + self.jitter)
        return base

    def measure_all(self, view: LatencyView, step: int, targets=None) -> LatencyView:
        """Re-measure ``targets`` (default: every node) from the view's owner."""
        if targets is None:
            targets = range(self.node_count)
        d = view.delta.copy()
        m = view.measured_at.copy()
        for target in targets:
            d[target] = self.measure(view.owner, target)
            m[target] = step
        return LatencyView(view.owner, d, m)


def measure_latency(
    model: LatencyModel, view: LatencyView, target: int, step: int
) -> tuple[float, LatencyView]:
    """Measure the latency from ``view.owner`` to ``target``.

    Returns the value together with the updated view.
    """
    delta = model.measure(view.owner, target)
    return delta, view.record(target, delta, step)


def ordered_peers(view: LatencyView) -> OrderedPeerList:
    known = view.known()
    # ascending delta, ties on ascending id; owner has delta 0 and sorts first
    order = known[np.lexsort((known, view.delta[known]))]
    seq = [view.owner] + [int(n) for n in order if n != view.owner]
    return OrderedPeerList(view.owner, tuple(seq))


def staleness(view: LatencyView, target: int, step: int) -> int:
    if not 0 <= target < view.node_count or np.isnan(view.delta[target]):
        raise UnknownNodeError(target)
    return int(step - view.measured_at[target])
