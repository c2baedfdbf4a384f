"""Scenario generators.

``fig2``: 11 nodes, 5 fragments. Fragment index 1 is held by nobody,
fragment index 4 by exactly two nodes; the rest is randomised under the
seed with fixed holder counts. The observer (node 0) holds fragments 0, 2
and 3, lacks 1 and 4, and its farthest peer (node 10) lacks fragment 3.

``decay``: a fragment whose seeders have been falling steadily (history
plus churn continuing the fall) competes with two fragments that are
rarer right now but stable.
"""

from __future__ import annotations

import numpy as np

from .scenario import Scenario, validate_scenario

PRESETS = ("fig2", "decay", "random")


def random_latencies(n: int, rng, low_ms=20.0, high_ms=250.0) -> np.ndarray:
    lat = np.round(rng.uniform(low_ms, high_ms, (n, n)), 1)
    np.fill_diagonal(lat, 0.0)
    return lat


def _pick(rng, pool, count) -> list[int]:
    pool = sorted(pool)
    return sorted(int(x) for x in rng.choice(pool, size=count, replace=False)) if count else []


def random_scenario(
    node_count: int = 11,
    fragment_count: int = 5,
    rarity: list[float] | None = None,
    seed: int = 0,
    steps: int = 5,
) -> Scenario:
    """Random ownership where ``rarity[k]`` is the fraction of nodes holding ``k``."""
    rng = np.random.default_rng(seed)
    if rarity is None:
        rarity = [0.5] * fragment_count
    if len(rarity) != fragment_count:
        raise ValueError(f"rarity needs {fragment_count} entries")
    if any(not 0 <= r <= 1 for r in rarity):
        raise ValueError("rarity fractions must lie in [0, 1]")
    own = np.zeros((node_count, fragment_count), dtype=int)
    for k, frac in enumerate(rarity):
        own[_pick(rng, range(node_count), int(round(frac * node_count))), k] = 1
    lat = random_latencies(node_count, rng) if node_count > 1 else np.zeros((1, 1))
    return validate_scenario(
        {
            "name": "random",
            "node_count": node_count,
            "fragment_count": fragment_count,
            "latency_ms": lat.tolist(),
            "ownership": own.tolist(),
            "parameters": {"seed": seed, "steps": steps},
        }
    )


def fig2_scenario(seed: int = 0, steps: int = 5) -> Scenario:
    n, K = 11, 5
    observer, farthest = 0, 10
    rng = np.random.default_rng(seed)
    lat = random_latencies(n, rng)
    lat[observer, 1:] = np.sort(lat[observer, 1:])
    # no two peers at the same distance from the observer
    lat[observer, 1:] += np.arange(1, n) * 0.01

    holders = {0: 7, 1: 0, 2: 5, 3: 3, 4: 2}
    own = np.zeros((n, K), dtype=int)
    others = set(range(1, n))
    for k, count in holders.items():
        if k in (0, 2, 3):
            own[observer, k] = 1
            pool = others - {farthest} if k == 3 else others
            own[_pick(rng, pool, count - 1), k] = 1
        else:
            own[_pick(rng, others, count), k] = 1
    return validate_scenario(
        {
            "name": "fig2",
            "node_count": n,
            "fragment_count": K,
            "latency_ms": np.round(lat, 2).tolist(),
            "ownership": own.tolist(),
            "parameters": {"seed": seed, "steps": steps, "observer": observer},
        }
    )


def decay_scenario(seed: int = 0, steps: int = 12, history_length: int = 48) -> Scenario:
    """Fragment 0 is losing seeders; fragments 1 and 2 are rarer but steady.

    Nodes 0-3 hold fragments {0, 1}, nodes 4-7 hold {0, 2}; the other 16
    nodes hold nothing and want everything. Over the history fragment 0 fell
    from 20 seeders towards the current 8 (the initial state is the next
    point on the line); during the run one of its holders leaves every other
    step.
    """
    n, K = 24, 3
    rng = np.random.default_rng(seed)
    lat = random_latencies(n, rng, 60.0, 250.0)
    own = np.zeros((n, K), dtype=int)
    own[0:8, 0] = 1
    own[0:4, 1] = 1
    own[4:8, 2] = 1

    flat = history_length // 4
    ramp = history_length - flat
    s0 = np.concatenate([np.full(flat, 20.0), np.linspace(20.0, 8.0, ramp + 1)[:-1]])
    users = np.full(history_length, float(n))
    # share ratios as the simulator would report them for this ownership
    rho_other = (4 * 2 / 3) / 20
    history = [
        {"users_total": users.tolist(), "seeders": s0.tolist(), "mean_share_ratio": [0.0] * history_length},
        {"users_total": users.tolist(), "seeders": [4.0] * history_length, "mean_share_ratio": [rho_other] * history_length},
        {"users_total": users.tolist(), "seeders": [4.0] * history_length, "mean_share_ratio": [rho_other] * history_length},
    ]
    leaving = [7, 3, 6, 2, 5, 1]
    churn = [{"step": 2 * (i + 1), "node": node, "status": "offline"} for i, node in enumerate(leaving)]
    return validate_scenario(
        {
            "name": "decay",
            "node_count": n,
            "fragment_count": K,
            "latency_ms": lat.tolist(),
            "ownership": own.tolist(),
            "churn": churn,
            "history": history,
            "parameters": {"seed": seed, "steps": steps, "forecast_enabled": True, "F": 4, "r": 8},
        }
    )


def preset(name: str, seed: int = 0, **kwargs) -> Scenario:
    if name == "fig2":
        return fig2_scenario(seed, **kwargs)
    if name == "decay":
        return decay_scenario(seed, **kwargs)
    if name == "random":
        return random_scenario(seed=seed, **kwargs)
    raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
