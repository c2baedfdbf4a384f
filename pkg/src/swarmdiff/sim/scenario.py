"""Scenario files: schema, loading, overrides.

Scenarios are YAML (JSON is accepted too) with an explicit
``schema_version``. Latencies are in milliseconds and converted to seconds
by :meth:`Scenario.latency_seconds`.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Scenario failed validation; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str], source: str | None = None):
        self.violations = violations
        head = f"invalid scenario {source}" if source else "invalid scenario"
        super().__init__(head + ":\n  " + "\n  ".join(violations))


class Parameters(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True, validate_assignment=True)

    c: float = Field(0.5, gt=0, description="urgency decay constant, per step-second")
    refresh_every: int = Field(5, ge=1, alias="R")
    forecast_every: int = Field(12, ge=1, alias="F")
    levels: int = Field(4, ge=1, le=10, alias="M")
    hidden: int = Field(16, ge=1, alias="H")
    horizon: int = Field(6, ge=1, alias="r")
    epochs: int = Field(500, ge=1)
    learning_rate: float = Field(1e-2, gt=0)
    max_parallel_sends: int = Field(1, ge=1)
    jitter: float = Field(0.0, ge=0, lt=1)
    seed: int = 0
    steps: int = Field(5, ge=0)
    reach_time_mode: Literal["served", "literal"] = "served"
    forecast_blend: Literal["replace", "mean"] = "replace"
    forecast_enabled: bool = False
    forecast_async: bool = False
    parallel_scheduling: bool = False
    workers: int = Field(4, ge=1)
    step_length_s: float = Field(0.1, gt=0)
    observer: int = Field(0, ge=0)


class ChurnEvent(BaseModel):
    model_config = ConfigDict(extra="forbid")

    step: int = Field(ge=0)
    node: int = Field(ge=0)
    status: Literal["online", "offline"]


class History(BaseModel):
    """Past per-step swarm statistics of one fragment (oldest first)."""

    model_config = ConfigDict(extra="forbid")

    users_total: list[float]
    seeders: list[float]
    mean_share_ratio: list[float]

    @model_validator(mode="after")
    def _same_length(self):
        n = {len(self.users_total), len(self.seeders), len(self.mean_share_ratio)}
        if len(n) != 1:
            raise ValueError("history series must have equal length")
        return self


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = ""
    node_count: int = Field(ge=1)
    fragment_count: int = Field(ge=1)
    latency_ms: list[list[float]]
    ownership: list[list[int]]
    request_queues: Optional[list[list[int]]] = None
    churn: list[ChurnEvent] = []
    history: Optional[list[Optional[History]]] = None
    parameters: Parameters = Parameters()

    @model_validator(mode="after")
    def _consistent(self):
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def violations(self) -> list[str]:
        n, K = self.node_count, self.fragment_count
        out = []
        lat = self.latency_ms
        if len(lat) != n or any(len(row) != n for row in lat):
            out.append(f"latency_ms must be {n}x{n}")
        else:
            for i in range(n):
                for j in range(n):
                    v = lat[i][j]
                    if i == j and v != 0:
                        out.append(f"latency_ms[{i}][{i}] must be 0")
                    elif i != j and not v > 0:
                        out.append(f"latency_ms[{i}][{j}] must be positive")
        own = self.ownership
        if len(own) != n or any(len(row) != K for row in own):
            out.append(f"ownership must be {n}x{K}")
        elif any(v not in (0, 1) for row in own for v in row):
            out.append("ownership cells must be 0 or 1")
        if self.request_queues is not None:
            if len(self.request_queues) != K:
                out.append(f"request_queues must list {K} fragments")
            for k, queue in enumerate(self.request_queues):
                bad = [j for j in queue if not 0 <= j < n]
                if bad:
                    out.append(f"request_queues[{k}] has unknown nodes {bad}")
        for e in self.churn:
            if e.node >= n:
                out.append(f"churn event at step {e.step} names unknown node {e.node}")
        if self.history is not None and len(self.history) != K:
            out.append(f"history must have {K} entries (null allowed)")
        if self.parameters.observer >= n:
            out.append(f"observer {self.parameters.observer} is not a node")
        return out

    def latency_seconds(self) -> np.ndarray:
        return np.asarray(self.latency_ms, dtype=float) / 1000.0

    def ownership_matrix(self) -> np.ndarray:
        return np.asarray(self.ownership, dtype=bool).reshape(self.node_count, self.fragment_count)

    def wants_matrix(self) -> np.ndarray:
        own = self.ownership_matrix()
        if self.request_queues is None:
            return ~own
        wants = np.zeros_like(own)
        for k, queue in enumerate(self.request_queues):
            wants[list(queue), k] = True
        return wants & ~own

    def to_yaml(self) -> str:
        data = self.model_dump(mode="json", by_alias=False, exclude_none=True)
        return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, width=120)


def _format_errors(err: ValidationError) -> list[str]:
    out = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"])
        msg = e["msg"].removeprefix("Value error, ")
        if loc:
            out.append(f"{loc}: {msg}")
        else:
            out.extend(msg.split("; "))
    return out


def validate_scenario(data: dict, source: str | None = None) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError(["scenario must be a mapping"], source)
    try:
        return Scenario.model_validate(data)
    except ValidationError as err:
        raise ScenarioError(_format_errors(err), source) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError([f"scenario file not found: {path}"], str(path))
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as err:
        raise ScenarioError([f"cannot parse {path}: {err}"], str(path)) from None
    return validate_scenario(data, str(path))


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(scenario.to_yaml())


_TOP_LEVEL = {"name", "node_count", "fragment_count"}


def apply_overrides(scenario: Scenario, overrides: dict[str, Any]) -> Scenario:
    """Return a copy with ``key=value`` overrides applied and re-validated.

    Keys name a parameter (by field name or short alias such as ``R``) or a
    top-level field. String values are parsed as YAML scalars first.
    """
    if not overrides:
        return scenario
    data = scenario.model_dump(mode="json", by_alias=False)
    aliases = {f.alias: name for name, f in Parameters.model_fields.items() if f.alias}
    problems = []
    for key, value in overrides.items():
        if isinstance(value, str):
            value = yaml.safe_load(value)
        name = aliases.get(key, key)
        if name in Parameters.model_fields:
            data["parameters"][name] = value
        elif name in _TOP_LEVEL:
            data[name] = value
        else:
            problems.append(f"unknown override key {key!r}")
    if problems:
        raise ScenarioError(problems)
    return validate_scenario(data)


def parse_set_options(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ScenarioError([f"--set expects KEY=VALUE, got {item!r}"])
        out[key.strip()] = value.strip()
    return out
