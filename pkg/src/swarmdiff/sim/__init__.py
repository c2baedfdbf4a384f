from .engine import Simulation, held_over_wanted, run, swarm_stats
from .metrics import MetricsLog, Snapshot, TransferEvent, availability
from .presets import decay_scenario, fig2_scenario, preset, random_scenario
from .scenario import (
    Parameters,
    Scenario,
    ScenarioError,
    apply_overrides,
    load_scenario,
    save_scenario,
    validate_scenario,
)
