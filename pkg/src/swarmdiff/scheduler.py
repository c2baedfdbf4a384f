"""Per-node fragment scheduling.

Every node keeps a priority matrix over (peer, fragment) of diffusion
probabilities. Entries that need no computation (self, peers not queued for
the fragment, already-served pairs, fragments the node does not hold) are
pinned to 1 and flagged inactive. The node sends the active pair with the
highest urgency, ``exp(-c * age * delta) / P``, where ``age`` is the number
of steps since ``delta`` was measured.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .diffusion import (
    FragmentSwarmStats,
    InertFragmentError,
    diffusion_probability,
    permeability,
    permeability_prefactor,
)
from .metric_space import LatencyView, OrderedPeerList, ordered_peers

REACH_TIME_MODES = ("served", "literal")


class NoInterestedPeersError(ValueError):
    pass


@dataclass(frozen=True)
class PriorityMatrix:
    owner: int
    entries: np.ndarray  # (nodes, fragments), probabilities in (0, 1]
    active: np.ndarray  # (nodes, fragments), True where an entry was computed

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        active = np.array(self.active, dtype=bool)
        if entries.shape != active.shape or entries.ndim != 2:
            raise ValueError("entries and active must be matching 2-d arrays")
        entries.flags.writeable = False
        active.flags.writeable = False
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "active", active)

    @classmethod
    def ones(cls, owner: int, node_count: int, fragment_count: int) -> "PriorityMatrix":
        shape = (node_count, fragment_count)
        return cls(owner, np.ones(shape), np.zeros(shape, dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def scaled(self, factor: float) -> "PriorityMatrix":
        """Multiply every active entry by ``factor`` (no clamping)."""
        if factor <= 0:
            raise ValueError("factor must be positive")
        entries = np.where(self.active, self.entries * factor, self.entries)
        return PriorityMatrix(self.owner, entries, self.active)

    def mark_done(self, peer: int, fragment: int) -> "PriorityMatrix":
        entries = self.entries.copy()
        active = self.active.copy()
        entries[peer, fragment] = 1.0
        active[peer, fragment] = False
        return PriorityMatrix(self.owner, entries, active)


@dataclass(frozen=True)
class Selection:
    peer: int
    fragment: int
    chi: float


def reach_time(
    view: LatencyView,
    ordered: OrderedPeerList,
    served_count: int,
    *,
    mode: str = "served",
    elapsed: int = 0,
) -> float:
    """Time (seconds) for a fragment to reach the peers served so far.

    ``ordered`` is the owner's latency-ordered list restricted to the peers
    interested in the fragment, owner first. In ``served`` mode the sum runs
    over the owner plus the first ``served_count`` peers; in ``literal`` mode
    it runs over the first ``elapsed + 1`` entries. A zero sum falls back to
    the smallest latency in the view so the result stays positive.
    """
    if mode not in REACH_TIME_MODES:
        raise ValueError(f"unknown reach-time mode {mode!r}")
    if len(ordered) <= 1:
        raise NoInterestedPeersError("fragment has no interested peers")
    if served_count < 0 or served_count > len(ordered) - 1:
        raise ValueError("served_count exceeds the number of interested peers")
    terms = served_count + 1 if mode == "served" else min(elapsed + 1, len(ordered))
    total = 0.0
    for node in ordered.sequence[:terms]:
        total += float(view.delta[node])
    if total <= 0.0:
        return view.min_latency()
    return total


def rebuild_matrix(
    owner: int,
    swarm: Mapping[int, FragmentSwarmStats],
    view: LatencyView,
    queues: Sequence[Iterable[int]],
    served: Iterable[tuple[int, int]] = (),
    held: Iterable[int] | None = None,
    served_counts: Sequence[int] | None = None,
    *,
    step: int = 0,
    mode: str = "served",
) -> PriorityMatrix:
    """Recompute the owner's priority matrix.

    ``queues[k]`` holds the peers requesting fragment ``k``; ``held`` the
    fragments the owner can send (default: all); ``served`` the (peer,
    fragment) pairs already delivered; ``served_counts[k]`` how many peers
    the owner has served ``k`` to since its last latency refresh.
    """
    n, K = view.node_count, len(queues)
    entries = np.ones((n, K))
    active = np.zeros((n, K), dtype=bool)
    held = set(range(K)) if held is None else set(held)
    served = set(served)
    if served_counts is None:
        served_counts = [0] * K
    if not held:
        return PriorityMatrix(owner, entries, active)

    order = ordered_peers(view)
    elapsed = int(step - view.measured_at.max())
    for k in range(K):
        if k not in held or k not in swarm:
            continue
        peers = [
            j
            for j in set(queues[k])
            if j != owner and (j, k) not in served and not np.isnan(view.delta[j])
        ]
        if not peers:
            continue
        try:
            D = permeability(swarm[k])
        except InertFragmentError:
            continue
        interested = order.restricted(set(peers) | {j for j, kk in served if kk == k})
        count = min(served_counts[k], len(interested) - 1)
        t = reach_time(view, interested, count, mode=mode, elapsed=max(elapsed, 0))
        p = permeability_prefactor(D, t)
        idx = np.array(sorted(peers))
        entries[idx, k] = diffusion_probability(p, view.delta[idx])
        active[idx, k] = True
    return PriorityMatrix(owner, entries, active)


def urgency(P, delta, step_age, c: float):
    """``exp(-c * step_age * delta) / P``; broadcasts over arrays."""
    P = np.asarray(P, dtype=float)
    if np.any(P <= 0):
        raise ValueError("P must be positive")
    out = np.exp(-c * np.asarray(step_age, dtype=float) * np.asarray(delta, dtype=float)) / P
    return float(out) if out.ndim == 0 else out


def urgency_matrix(matrix: PriorityMatrix, view: LatencyView, step: int, c: float) -> np.ndarray:
    """Urgency of every cell; inactive cells are 0 (nothing to send there)."""
    age = step - view.measured_at
    delta = np.nan_to_num(view.delta, nan=0.0)
    chi = urgency(matrix.entries, delta[:, None], age[:, None], c)
    return np.where(matrix.active, chi, 0.0)


def select_most_urgent(
    matrix: PriorityMatrix, view: LatencyView, step: int, c: float
) -> Selection | None:
    """Most urgent active (peer, fragment).

    Ties go to the larger latency, then the smaller fragment, then the
    smaller peer id.
    """
    peers, frags = np.nonzero(matrix.active)
    if peers.size == 0:
        return None
    chi = urgency_matrix(matrix, view, step, c)[peers, frags]
    delta = view.delta[peers]
    # lexsort: last key is primary
    best = np.lexsort((peers, frags, -delta, -chi))[0]
    return Selection(int(peers[best]), int(frags[best]), float(chi[best]))


def select_many(
    matrix: PriorityMatrix, view: LatencyView, step: int, c: float, limit: int
) -> list[Selection]:
    """Up to ``limit`` successive selections, each removing its cell."""
    picks = []
    for _ in range(limit):
        sel = select_most_urgent(matrix, view, step, c)
        if sel is None:
            break
        picks.append(sel)
        matrix = matrix.mark_done(sel.peer, sel.fragment)
    return picks


def request_ranking(swarm: Mapping[int, FragmentSwarmStats], held: Iterable[int]) -> list[int]:
    """Missing fragments with a live swarm, highest permeability first."""
    held = set(held)
    scored = [
        (-permeability(stats), k)
        for k, stats in swarm.items()
        if k not in held and stats.users_total >= 1
    ]
    return [k for _, k in sorted(scored)]


def select_fragment_to_request(
    node: int, swarm: Mapping[int, FragmentSwarmStats], held: Iterable[int]
) -> int | None:
    ranking = request_ranking(swarm, held)
    return ranking[0] if ranking else None
