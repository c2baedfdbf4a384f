"""Append-only record of a simulation run."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..diffusion import FragmentSwarmStats


@dataclass
class TransferEvent:
    step_started: int
    source: int
    destination: int
    fragment: int
    duration_steps: int
    elapsed: int = 0
    completed: bool = False
    aborted: bool = False
    step_finished: int | None = None
    chi: float = 0.0


@dataclass
class Snapshot:
    step: int  # state at the start of this step (after ``step`` steps executed)
    seeders: list[int]
    users_total: list[int]
    share_ratio: list[float]
    online: list[bool]
    observer_requests: list[int]


@dataclass
class MetricsLog:
    node_count: int
    fragment_count: int
    observer: int
    snapshots: list[Snapshot] = field(default_factory=list)
    chi: list[list[list[float]]] = field(default_factory=list)  # per executed step
    transfers: list[TransferEvent] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.snapshots) - 1

    def to_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "fragment_count": self.fragment_count,
            "observer": self.observer,
            "snapshots": [asdict(s) for s in self.snapshots],
            "chi": self.chi,
            "transfers": [asdict(t) for t in self.transfers],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def completed_transfers(self) -> list[TransferEvent]:
        return [t for t in self.transfers if t.completed]

    def first_transfer_step(self, fragment: int) -> int | None:
        steps = [t.step_started for t in self.transfers if t.fragment == fragment]
        return min(steps) if steps else None

    def chi_normalized(self, step: int) -> np.ndarray:
        """Observer urgencies at ``step`` divided by that matrix's maximum."""
        chi = np.asarray(self.chi[step], dtype=float)
        peak = chi.max(initial=0.0)
        return chi / peak if peak > 0 else chi


def availability(log: MetricsLog, fragment: int, step: int) -> FragmentSwarmStats:
    """Swarm counts of ``fragment`` at the start of ``step`` (0 = initial state)."""
    if not 0 <= step < len(log.snapshots):
        raise IndexError(f"step {step} outside log range 0..{len(log.snapshots) - 1}")
    if not 0 <= fragment < log.fragment_count:
        raise IndexError(f"fragment {fragment} outside 0..{log.fragment_count - 1}")
    s = log.snapshots[step]
    return FragmentSwarmStats(
        fragment, s.users_total[fragment], s.seeders[fragment], s.share_ratio[fragment]
    )
