"""Discrete-time swarm simulation.

One call to :meth:`Simulation.step` runs, in order:

1. churn events scheduled for this step (in-flight transfers touching a
   departed node are aborted);
2. latency refresh every ``refresh_every`` steps;
3. forecast refresh every ``forecast_every`` steps when forecasting is on;
4. scheduling: every online node rebuilds its priority matrix from the same
   pre-step snapshot and launches transfers until it has
   ``max_parallel_sends`` uploads in flight (1 = send the next fragment only
   once the previous one has arrived);
5. in-flight transfers advance; finished ones hand over the fragment;
6. swarm statistics are recomputed;
7. the metrics log is appended.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..diffusion import FragmentSwarmStats
from ..forecast.forecaster import FragmentHistory, SwarmForecaster, blend
from ..metric_space import LatencyModel, LatencyView
from ..scheduler import (
    Selection,
    rebuild_matrix,
    request_ranking,
    select_many,
    urgency_matrix,
)
from .metrics import MetricsLog, Snapshot, TransferEvent
from .scenario import Scenario

log = logging.getLogger(__name__)

ShareRatioPolicy = Callable[[np.ndarray, np.ndarray, np.ndarray, int], float]


def held_over_wanted(ownership: np.ndarray, wants: np.ndarray, online: np.ndarray, k: int) -> float:
    """Mean, over online leeches of fragment ``k``, of held / (held + wanted)."""
    leeches = online & wants[:, k] & ~ownership[:, k]
    if not leeches.any():
        return 0.0
    held = ownership[leeches].sum(axis=1)
    wanted = (wants[leeches] & ~ownership[leeches]).sum(axis=1)
    return float(np.mean(held / (held + wanted)))


def swarm_stats(
    ownership: np.ndarray,
    wants: np.ndarray,
    online: np.ndarray,
    policy: ShareRatioPolicy = held_over_wanted,
) -> list[FragmentSwarmStats]:
    stats = []
    for k in range(ownership.shape[1]):
        holders = online & ownership[:, k]
        users = holders | (online & wants[:, k])
        stats.append(
            FragmentSwarmStats(k, int(users.sum()), int(holders.sum()), policy(ownership, wants, online, k))
        )
    return stats


@dataclass
class NodeDecision:
    node: int
    picks: list[Selection]
    chi: np.ndarray | None = None


class Simulation:
    def __init__(
        self,
        scenario: Scenario,
        share_ratio: ShareRatioPolicy = held_over_wanted,
        node_order: Sequence[int] | None = None,
    ):
        self.scenario = scenario
        self.params = p = scenario.parameters
        self.share_ratio = share_ratio
        n, K = scenario.node_count, scenario.fragment_count
        self.n, self.K = n, K
        self.node_order = list(node_order) if node_order is not None else list(range(n))
        if sorted(self.node_order) != list(range(n)):
            raise ValueError("node_order must be a permutation of the node ids")

        self.truth = scenario.latency_seconds()
        self.latency = LatencyModel(self.truth, jitter=p.jitter, seed=p.seed)
        self.ownership = scenario.ownership_matrix().copy()
        self.wants = scenario.wants_matrix().copy()
        self.online = np.ones(n, dtype=bool)
        self.views = [LatencyView.empty(i, n) for i in range(n)]
        self.last_refresh = np.full(n, -1)
        self.served: list[set[tuple[int, int]]] = [set() for _ in range(n)]
        self.served_counts = np.zeros((n, K), dtype=int)
        self.in_flight: list[TransferEvent] = []
        self.tau = 0

        self.churn: dict[int, list] = {}
        for e in scenario.churn:
            self.churn.setdefault(e.step, []).append(e)

        self.altered: dict[int, FragmentSwarmStats] = {}
        self.forecaster: SwarmForecaster | None = None
        self._training: Future | None = None
        self._pool: ThreadPoolExecutor | None = None
        self.histories = [FragmentHistory() for _ in range(K)]
        if scenario.history:
            for k, h in enumerate(scenario.history):
                if h is not None:
                    for t, s, r in zip(h.users_total, h.seeders, h.mean_share_ratio):
                        self.histories[k].users_total.append(t)
                        self.histories[k].seeders.append(s)
                        self.histories[k].mean_share_ratio.append(r)

        self.stats = self._compute_stats()
        self.log = MetricsLog(n, K, p.observer)
        self._snapshot()

    # -- bookkeeping -----------------------------------------------------

    def _compute_stats(self) -> list[FragmentSwarmStats]:
        return swarm_stats(self.ownership, self.wants, self.online, self.share_ratio)

    def _snapshot(self) -> None:
        obs = self.params.observer
        held = np.flatnonzero(self.ownership[obs]).tolist()
        live = {s.fragment: s for s in self.stats if s.users_total >= 1}
        self.log.snapshots.append(
            Snapshot(
                step=self.tau,
                seeders=[s.seeders for s in self.stats],
                users_total=[s.users_total for s in self.stats],
                share_ratio=[s.mean_share_ratio for s in self.stats],
                online=self.online.tolist(),
                observer_requests=request_ranking(live, held) if self.online[obs] else [],
            )
        )
        for k, s in enumerate(self.stats):
            self.histories[k].append(s)

    def duration(self, source: int, destination: int) -> int:
        steps = self.truth[source, destination] / self.params.step_length_s
        return max(1, math.ceil(steps - 1e-9))

    # -- phases ----------------------------------------------------------

    def _apply_churn(self) -> None:
        for e in self.churn.get(self.tau, ()):
            self.online[e.node] = e.status == "online"
        still = []
        for t in self.in_flight:
            if self.online[t.source] and self.online[t.destination]:
                still.append(t)
            else:
                t.aborted = True
                t.step_finished = self.tau
        self.in_flight = still

    def _refresh_latencies(self) -> None:
        if self.tau % self.params.refresh_every:
            return
        targets = np.flatnonzero(self.online)
        for i in range(self.n):
            if not self.online[i]:
                continue
            self.views[i] = self.latency.measure_all(self.views[i], self.tau, targets)
            self.last_refresh[i] = self.tau
            self.served_counts[i] = 0

    def _train_forecaster(self, histories: list[np.ndarray]) -> SwarmForecaster:
        p = self.params
        f = SwarmForecaster(self.n, p.levels, p.hidden, p.horizon, seed=p.seed)
        f.fit(histories, epochs=p.epochs, learning_rate=p.learning_rate)
        return f

    def _refresh_forecast(self) -> None:
        p = self.params
        if not p.forecast_enabled or self.tau % p.forecast_every:
            return
        min_len = 2**p.levels + p.horizon + 1
        if self.forecaster is None:
            if p.forecast_async:
                if self._training is None and max(map(len, self.histories)) >= min_len:
                    self._pool = ThreadPoolExecutor(max_workers=1)
                    self._training = self._pool.submit(
                        self._train_forecaster, [h.matrix() for h in self.histories]
                    )
                if self._training is None or not self._training.done():
                    return
                self.forecaster = self._training.result()
                self._pool.shutdown()
            elif max(map(len, self.histories)) >= min_len:
                self.forecaster = self._train_forecaster([h.matrix() for h in self.histories])
            else:
                return
        altered = {}
        for k, current in enumerate(self.stats):
            predicted = self.forecaster.forecast(k, self.histories[k])
            if predicted is None or predicted.users_total < 1 or current.users_total < 1:
                continue
            altered[k] = blend(current, predicted, p.forecast_blend)
        # single assignment: readers never see a half-built forecast
        self.altered = altered
        log.debug("step %d forecast %s", self.tau, altered)

    def _queues(self) -> list[set[int]]:
        busy = {(t.destination, t.fragment) for t in self.in_flight}
        queues = []
        for k in range(self.K):
            want = np.flatnonzero(self.online & self.wants[:, k] & ~self.ownership[:, k])
            queues.append({int(j) for j in want if (j, k) not in busy})
        return queues

    def _decide(self, node: int, swarm, queues, uploading) -> NodeDecision:
        p = self.params
        view = self.views[node]
        observe = node == p.observer
        if not self.online[node] or self.last_refresh[node] < 0:
            return NodeDecision(node, [], np.zeros((self.n, self.K)) if observe else None)
        matrix = rebuild_matrix(
            node,
            swarm,
            view,
            queues,
            served=self.served[node],
            held=np.flatnonzero(self.ownership[node]).tolist(),
            served_counts=self.served_counts[node],
            step=self.tau,
            mode=p.reach_time_mode,
        )
        slots = p.max_parallel_sends - uploading.get(node, 0)
        picks = select_many(matrix, view, self.tau, p.c, slots) if slots > 0 else []
        chi = urgency_matrix(matrix, view, self.tau, p.c) if observe else None
        return NodeDecision(node, picks, chi)

    def _schedule(self) -> None:
        p = self.params
        swarm = {s.fragment: self.altered.get(s.fragment, s) for s in self.stats if s.users_total >= 1}
        queues = self._queues()
        uploading: dict[int, int] = {}
        for t in self.in_flight:
            uploading[t.source] = uploading.get(t.source, 0) + 1
        if p.parallel_scheduling and self.n > 1:
            with ThreadPoolExecutor(max_workers=p.workers) as pool:
                decisions = list(
                    pool.map(lambda i: self._decide(i, swarm, queues, uploading), self.node_order)
                )
        else:
            decisions = [self._decide(i, swarm, queues, uploading) for i in self.node_order]
        decisions.sort(key=lambda d: d.node)
        for d in decisions:
            if d.chi is not None:
                self.log.chi.append(d.chi.tolist())
            for sel in d.picks:
                t = TransferEvent(
                    self.tau, d.node, sel.peer, sel.fragment, self.duration(d.node, sel.peer), chi=sel.chi
                )
                self.in_flight.append(t)
                self.log.transfers.append(t)

    def _advance(self) -> None:
        still = []
        for t in self.in_flight:
            t.elapsed += 1
            if t.elapsed < t.duration_steps:
                still.append(t)
                continue
            t.completed = True
            t.step_finished = self.tau
            self.ownership[t.destination, t.fragment] = True
            self.wants[t.destination, t.fragment] = False
            if (t.destination, t.fragment) not in self.served[t.source]:
                self.served[t.source].add((t.destination, t.fragment))
                self.served_counts[t.source, t.fragment] += 1
        self.in_flight = still

    # -- driver ----------------------------------------------------------

    def step(self) -> None:
        self._apply_churn()
        self.stats = self._compute_stats()
        self._refresh_latencies()
        self._refresh_forecast()
        self._schedule()
        self._advance()
        self.tau += 1
        self.stats = self._compute_stats()
        self._snapshot()

    def run(self, steps: int | None = None) -> MetricsLog:
        steps = self.params.steps if steps is None else steps
        for _ in range(steps):
            self.step()
        return self.log


def run(scenario: Scenario, steps: int | None = None, **kwargs) -> MetricsLog:
    return Simulation(scenario, **kwargs).run(steps)
