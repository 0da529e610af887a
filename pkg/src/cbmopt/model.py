"""System instances and the two-stage maintenance cost model.

Component states are 1-based (1 = new, m = failed). Components are addressed
by 0-based position in ``SystemInstance.components``; partitions are bitmasks
over those positions (bit i set means component i is maintained). Python ints
are unbounded, so masks work unchanged for any n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .degradation import (
    GammaProcessParams,
    build_transition_matrix,
    check_transition_matrix,
    make_state_grid,
)


class InfeasiblePartition(ValueError):
    """A failed component was left out of the maintenance set."""


@dataclass(frozen=True)
class ComponentSpec:
    id: int
    pm_cost: float
    cm_cost: float
    transition: np.ndarray = field(repr=False)
    state: int = 1
    degradation: GammaProcessParams | None = None

    def __post_init__(self):
        Q = np.array(self.transition, dtype=float)
        Q.setflags(write=False)
        object.__setattr__(self, "transition", Q)

    @property
    def m(self) -> int:
        return self.transition.shape[0]

    def fail_prob(self, state: int | None = None) -> float:
        """Q(g, m): probability of being failed at the next inspection from state g."""
        g = self.state if state is None else state
        return float(self.transition[g - 1, -1])

    @property
    def q_current(self) -> float:
        return self.fail_prob(self.state)

    @property
    def q_new(self) -> float:
        return self.fail_prob(1)

    @property
    def failed(self) -> bool:
        return self.state == self.m


@dataclass(frozen=True)
class SystemInstance:
    components: tuple[ComponentSpec, ...]
    setup_cost: float
    m: int
    horizon: int = 2
    inspection_interval: float = 1.0
    failure_threshold: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    @property
    def states(self) -> tuple[int, ...]:
        return tuple(c.state for c in self.components)

    @property
    def failed_mask(self) -> int:
        mask = 0
        for i, c in enumerate(self.components):
            if c.state == self.m:
                mask |= 1 << i
        return mask

    def with_states(self, states: Sequence[int]) -> "SystemInstance":
        if len(states) != self.n:
            raise ValueError("need one state per component")
        comps = tuple(replace(c, state=int(g)) for c, g in zip(self.components, states))
        return replace(self, components=comps)

    def with_horizon(self, horizon: int) -> "SystemInstance":
        return replace(self, horizon=horizon)

    def scaled_costs(self, factor: float) -> "SystemInstance":
        comps = tuple(replace(c, pm_cost=c.pm_cost * factor, cm_cost=c.cm_cost * factor)
                      for c in self.components)
        return replace(self, components=comps, setup_cost=self.setup_cost * factor)

    def arrays(self):
        """(q_current, q_new, pm, cm) as float arrays, the only data the two-stage model needs."""
        qg = np.array([c.q_current for c in self.components])
        q1 = np.array([c.q_new for c in self.components])
        pm = np.array([c.pm_cost for c in self.components])
        cm = np.array([c.cm_cost for c in self.components])
        return qg, q1, pm, cm


@dataclass(frozen=True)
class Partition:
    """First-stage decision: ``maintain`` is the bitmask of N1, everything else is N0."""

    n: int
    maintain: int

    def __post_init__(self):
        if self.maintain < 0 or self.maintain >> self.n:
            raise ValueError("maintenance mask has bits outside the component range")

    @classmethod
    def from_sets(cls, n: int, maintained: Iterable[int]) -> "Partition":
        return cls(n, mask_of(maintained))

    @property
    def n1(self) -> frozenset[int]:
        return frozenset(indices_of(self.maintain))

    @property
    def n0(self) -> frozenset[int]:
        return frozenset(indices_of(((1 << self.n) - 1) & ~self.maintain))

    @property
    def do_nothing(self) -> int:
        return ((1 << self.n) - 1) & ~self.maintain

    def x(self) -> tuple[int, ...]:
        return tuple((self.maintain >> i) & 1 for i in range(self.n))

    def is_feasible(self, instance: SystemInstance) -> bool:
        f = instance.failed_mask
        return self.maintain & f == f

    def __str__(self):
        return f"N0={sorted(i + 1 for i in self.n0)} N1={sorted(i + 1 for i in self.n1)}"


def mask_of(indices: Iterable[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << i
    return mask


def indices_of(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


@dataclass(frozen=True)
class StageDecision:
    x: tuple[int, ...]
    y: tuple[int, ...]
    z: int

    @classmethod
    def from_mask(cls, n: int, maintain: int, states: Sequence[int], m: int) -> "StageDecision":
        x = tuple((maintain >> i) & 1 for i in range(n))
        y = tuple(int(g == m) for g in states)
        if any(yi > xi for xi, yi in zip(x, y)):
            raise InfeasiblePartition("every failed component must be maintained")
        return cls(x, y, int(any(x)))

    @property
    def mask(self) -> int:
        return mask_of(i for i, xi in enumerate(self.x) if xi)

    def actions(self) -> list[str]:
        return ["cm" if yi else ("pm" if xi else "none") for xi, yi in zip(self.x, self.y)]

    def cost(self, instance: SystemInstance) -> float:
        total = instance.setup_cost * self.z
        for c, xi, yi in zip(instance.components, self.x, self.y):
            total += c.pm_cost * xi + (c.cm_cost - c.pm_cost) * yi
        return total


@dataclass
class StageRecord:
    stage: int
    states: tuple[int, ...]
    decision: StageDecision
    cost: float


@dataclass
class MaintenancePlan:
    stages: list[StageRecord] = field(default_factory=list)

    @property
    def total_cost(self) -> float:
        return float(sum(s.cost for s in self.stages))

    def rows(self) -> list[dict]:
        out = []
        for s in self.stages:
            for i, (g, a) in enumerate(zip(s.states, s.decision.actions())):
                out.append({"stage": s.stage, "component": i + 1, "state": g, "action": a,
                            "setup_flag": s.decision.z, "stage_cost": s.cost})
        return out

    def to_dict(self) -> dict:
        return {
            "total_cost": self.total_cost,
            "stages": [{"stage": s.stage, "states": list(s.states), "x": list(s.decision.x),
                        "y": list(s.decision.y), "z": s.decision.z,
                        "actions": s.decision.actions(), "stage_cost": s.cost}
                       for s in self.stages],
        }


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" or "warning"
    message: str
    component: int | None = None

    def __str__(self):
        where = f"component {self.component}: " if self.component is not None else ""
        return f"{self.severity}: {where}{self.message}"


def validate_instance(instance: SystemInstance) -> list[Finding]:
    """Invariant violations (errors) and atypical-regime warnings; empty when clean."""
    out: list[Finding] = []
    if instance.n < 1:
        out.append(Finding("error", "instance has no components"))
    if not isinstance(instance.m, int) or instance.m < 2:
        out.append(Finding("error", f"state count m must be >= 2, got {instance.m!r}"))
        return out
    if instance.horizon < 2:
        out.append(Finding("error", f"horizon must be >= 2, got {instance.horizon}"))
    if not (instance.setup_cost >= 0 and math.isfinite(instance.setup_cost)):
        out.append(Finding("error", "setup cost must be nonnegative"))
    if not (instance.inspection_interval > 0):
        out.append(Finding("error", "inspection interval must be positive"))
    for c in instance.components:
        if c.m != instance.m:
            out.append(Finding("error", f"transition matrix is {c.m}x{c.m}, instance m is {instance.m}", c.id))
            continue
        if not (1 <= c.state <= instance.m):
            out.append(Finding("error", f"state out of range: {c.state} not in 1..{instance.m}", c.id))
        if not (c.pm_cost >= 0 and c.cm_cost >= 0):
            out.append(Finding("error", "maintenance costs must be nonnegative", c.id))
        for p in check_transition_matrix(c.transition):
            out.append(Finding("error", p, c.id))
        if c.cm_cost < c.pm_cost:
            out.append(Finding("warning", f"CM cost {c.cm_cost} below PM cost {c.pm_cost}", c.id))
        if c.q_new > 0.5:
            out.append(Finding("warning", f"Q(1,m)={c.q_new:.3g} > 0.5: a new component is more likely than not to fail", c.id))
    ids = [c.id for c in instance.components]
    if len(set(ids)) != len(ids):
        out.append(Finding("error", "duplicate component ids"))
    return out


def has_errors(findings: Iterable[Finding]) -> bool:
    return any(f.severity == "error" for f in findings)


def second_stage_policy(states: Sequence[int], m: int) -> StageDecision:
    """Optimal last-stage action: repair exactly the failed components."""
    y = tuple(g // m for g in states)
    return StageDecision(y, y, min(1, sum(y)))


def _require_feasible(instance: SystemInstance, partition: Partition) -> None:
    if partition.n != instance.n:
        raise ValueError("partition size does not match the instance")
    if not partition.is_feasible(instance):
        raise InfeasiblePartition(f"failed components {sorted(i + 1 for i in indices_of(instance.failed_mask & ~partition.maintain))} are not maintained")


def expected_second_stage_cost(instance: SystemInstance, partition: Partition) -> float:
    """Expected cost of the second stage, where only failures get repaired."""
    _require_feasible(instance, partition)
    total = 0.0
    survive = 1.0
    for i, c in enumerate(instance.components):
        q = c.q_new if (partition.maintain >> i) & 1 else c.q_current
        total += q * c.cm_cost
        survive *= 1.0 - q
    return total + (1.0 - survive) * instance.setup_cost


def first_stage_cost(instance: SystemInstance, partition: Partition) -> float:
    _require_feasible(instance, partition)
    total = 0.0
    for i, c in enumerate(instance.components):
        if (partition.maintain >> i) & 1:
            total += c.pm_cost
        if c.failed:
            total += c.cm_cost - c.pm_cost
    if partition.maintain:
        total += instance.setup_cost
    return total


def two_stage_total_cost(instance: SystemInstance, partition: Partition) -> float:
    return first_stage_cost(instance, partition) + expected_second_stage_cost(instance, partition)


def node_transition_prob(instance: SystemInstance, states: Sequence[int],
                         decision: StageDecision, next_states: Sequence[int]) -> float:
    p = 1.0
    for c, g, xi, h in zip(instance.components, states, decision.x, next_states):
        p *= c.transition[0 if xi else g - 1, h - 1]
    return float(p)


def all_state_vectors(n: int, m: int):
    return product(range(1, m + 1), repeat=n)


# ---------------------------------------------------------------- file format

def component_from_dict(d: dict, m: int, grid=None, interval: float = 1.0) -> ComponentSpec:
    gamma = GammaProcessParams.from_dict(d["gamma"]) if "gamma" in d else None
    if "Q" in d:
        Q = np.asarray(d["Q"], dtype=float)
    elif gamma is not None:
        if grid is None:
            raise ValueError("gamma parameters need a failure_threshold to build Q")
        Q = build_transition_matrix(gamma, grid, interval)
    else:
        raise ValueError(f"component {d.get('id')} has neither 'Q' nor 'gamma'")
    return ComponentSpec(id=int(d["id"]), pm_cost=float(d["pm_cost"]), cm_cost=float(d["cm_cost"]),
                         transition=Q, state=int(d.get("state", 1)), degradation=gamma)


def instance_from_dict(d: dict) -> SystemInstance:
    m = int(d["m"])
    interval = float(d.get("inspection_interval", 1.0))
    L = d.get("failure_threshold")
    grid = make_state_grid(float(L), m) if L is not None else None
    comps = tuple(component_from_dict(c, m, grid, interval) for c in d["components"])
    return SystemInstance(components=comps, setup_cost=float(d["setup_cost"]), m=m,
                          horizon=int(d.get("horizon", 2)), inspection_interval=interval,
                          failure_threshold=None if L is None else float(L))


def instance_to_dict(instance: SystemInstance, include_q: bool = False) -> dict:
    comps = []
    for c in instance.components:
        d = {"id": c.id, "pm_cost": c.pm_cost, "cm_cost": c.cm_cost, "state": c.state}
        if c.degradation is not None:
            d["gamma"] = c.degradation.to_dict()
        if include_q or c.degradation is None or instance.failure_threshold is None:
            d["Q"] = c.transition.tolist()
        comps.append(d)
    out = {"setup_cost": instance.setup_cost, "m": instance.m, "horizon": instance.horizon,
           "inspection_interval": instance.inspection_interval, "components": comps}
    if instance.failure_threshold is not None:
        out["failure_threshold"] = instance.failure_threshold
    return out
