"""Figure-ready tables derived from scenarios and logs."""

from __future__ import annotations

import numpy as np

from ..metric_space import LatencyModel, LatencyView
from ..scheduler import rebuild_matrix, urgency
from .engine import swarm_stats
from .scenario import Scenario


def decay_trace(scenario: Scenario, fragment: int, max_tau: int = 60):
    """Urgency of sending ``fragment`` from the observer to each requester.

    The priority entries are fixed at their step-0 values and the latency
    measurements are allowed to age for ``tau = 0 .. max_tau`` steps. Returns
    ``(peers, table)`` where ``table[tau, i]`` is the urgency for
    ``peers[i]`` divided by the largest value in the table.
    """
    p = scenario.parameters
    K = scenario.fragment_count
    if not 0 <= fragment < K:
        raise ValueError(f"fragment {fragment} outside 0..{K - 1}")
    obs = p.observer
    own = scenario.ownership_matrix()
    wants = scenario.wants_matrix()
    online = np.ones(scenario.node_count, dtype=bool)
    stats = {s.fragment: s for s in swarm_stats(own, wants, online) if s.users_total >= 1}
    model = LatencyModel(scenario.latency_seconds(), jitter=p.jitter, seed=p.seed)
    view = model.measure_all(LatencyView.empty(obs, scenario.node_count), 0)
    queues = [set() for _ in range(K)]
    queues[fragment] = {int(j) for j in np.flatnonzero(wants[:, fragment]) if j != obs}
    if not queues[fragment]:
        raise ValueError(f"no peer requests fragment {fragment}")
    # the observer is treated as a sender of the fragment even if it lacks it
    matrix = rebuild_matrix(obs, stats, view, queues, held=[fragment], mode=p.reach_time_mode)
    peers = sorted(queues[fragment])
    P = matrix.entries[peers, fragment]
    delta = view.delta[peers]
    taus = np.arange(max_tau + 1)
    table = urgency(P[None, :], delta[None, :], taus[:, None], p.c)
    return peers, table / table.max()
