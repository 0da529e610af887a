"""Multi-stage model: exact backward induction and the rolling-horizon approximation.

Random streams: replication r of a simulation seeded with ``seed`` draws from
``PCG64(SeedSequence(seed, spawn_key=(r,)))``, i.e. the r-th child of
``SeedSequence(seed).spawn(...)``. Results are therefore bit-reproducible and
independent of how many replications are run or in which order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from ..model import (
    MaintenancePlan,
    StageDecision,
    StageRecord,
    SystemInstance,
    second_stage_policy,
)
from .two_stage import Algo2Config, GuardExceeded, algorithm2

EXACT_MAX_N = 4
EXACT_MAX_M = 12
EXACT_MAX_T = 6


def _decision_order(n: int) -> list[int]:
    """Maintenance masks ordered by size, then lexicographically by member indices."""
    masks = range(1 << n)
    return sorted(masks, key=lambda s: (bin(s).count("1"), [i for i in range(n) if s >> i & 1]))


@dataclass
class ExactSolution:
    value: float
    values: list[np.ndarray] = field(repr=False)   # values[t-1][g1-1, ..., gn-1]
    policy: list[np.ndarray] = field(repr=False)   # maintenance mask per stage and state vector

    def decision(self, t: int, states: Sequence[int]) -> StageDecision:
        idx = tuple(g - 1 for g in states)
        m = self.values[0].shape[0]
        mask = int(self.policy[t - 1][idx])
        return StageDecision.from_mask(len(states), mask, states, m)

    def value_at(self, t: int, states: Sequence[int]) -> float:
        return float(self.values[t - 1][tuple(g - 1 for g in states)])


def _expectation(V: np.ndarray, matrices: list[np.ndarray], mask: int) -> np.ndarray:
    """E[V(next) | current state vector] for every state vector at once under one decision.

    The joint transition is a tensor product of per-component rows, so the
    expectation contracts V one axis at a time: by Q_i for idle components and
    by the reset row Q_i[0] for maintained ones.
    """
    W = V
    for i, Q in enumerate(matrices):
        W = np.moveaxis(W, i, -1)
        if mask >> i & 1:
            W = np.repeat((W @ Q[0])[..., None], Q.shape[0], axis=-1)
        else:
            W = W @ Q.T
        W = np.moveaxis(W, -1, i)
    return W


def exact_multistage(instance: SystemInstance) -> ExactSolution:
    """Backward induction over all joint state vectors; returns V_1 at the current states."""
    n, m, T = instance.n, instance.m, instance.horizon
    if n > EXACT_MAX_N or m > EXACT_MAX_M or T > EXACT_MAX_T:
        raise GuardExceeded(f"exact multi-stage solve limited to n<={EXACT_MAX_N}, m<={EXACT_MAX_M}, "
                            f"T<={EXACT_MAX_T}; got n={n}, m={m}, T={T}")
    if T < 2:
        raise ValueError("horizon must be at least 2")
    matrices = [c.transition for c in instance.components]
    pm = np.array([c.pm_cost for c in instance.components])
    cm = np.array([c.cm_cost for c in instance.components])
    cs = instance.setup_cost

    shape = (m,) * n
    grids = np.indices(shape)  # grids[i] = 0-based state of component i
    failed = [grids[i] == m - 1 for i in range(n)]
    failed_cost = sum(np.where(failed[i], cm[i] - pm[i], 0.0) for i in range(n))

    # Last stage: repair exactly the failed components.
    any_failed = np.logical_or.reduce(failed) if n else np.zeros(shape, bool)
    V = failed_cost + np.where(any_failed, cs + sum(np.where(failed[i], pm[i], 0.0) for i in range(n)), 0.0)
    last_policy = sum(np.where(failed[i], 1 << i, 0) for i in range(n)).astype(np.int64)
    values = [V]
    policy = [last_policy]

    order = _decision_order(n)
    for _ in range(T - 1, 0, -1):
        best = np.full(shape, np.inf)
        arg = np.zeros(shape, dtype=np.int64)
        for mask in order:
            stage = sum(pm[i] for i in range(n) if mask >> i & 1) + (cs if mask else 0.0) + failed_cost
            total = stage + _expectation(V, matrices, mask)
            feasible = np.ones(shape, bool)
            for i in range(n):
                if not mask >> i & 1:
                    feasible &= ~failed[i]
            better = feasible & (total < best)
            best = np.where(better, total, best)
            arg = np.where(better, mask, arg)
        V = best
        values.insert(0, V)
        policy.insert(0, arg)
    start = tuple(g - 1 for g in instance.states)
    return ExactSolution(float(values[0][start]), values, policy)


def rolling_horizon_step(instance: SystemInstance, states: Sequence[int],
                         config: Algo2Config = Algo2Config()) -> StageDecision:
    """First-stage decision of the two-stage problem rooted at ``states``."""
    sub = instance.with_states(states)
    part, _ = algorithm2(sub, config)
    return StageDecision.from_mask(instance.n, part.maintain, states, instance.m)


@dataclass
class SimulationSummary:
    mean: float
    std: float
    costs: np.ndarray = field(repr=False)
    plan: MaintenancePlan = field(repr=False)

    @property
    def std_error(self) -> float:
        return self.std / np.sqrt(len(self.costs))


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replication,))))


def simulate_rolling_horizon(instance: SystemInstance, replications: int = 1000, seed: int = 0,
                             config: Algo2Config = Algo2Config()) -> SimulationSummary:
    """Monte Carlo cost of the rolling-horizon policy over stages 1..T."""
    if replications < 1:
        raise ValueError("replications must be >= 1")
    n, m, T = instance.n, instance.m, instance.horizon
    cdfs = [np.cumsum(c.transition, axis=1) for c in instance.components]
    cache: dict[tuple[int, ...], StageDecision] = {}

    def decide(states):
        d = cache.get(states)
        if d is None:
            d = cache[states] = rolling_horizon_step(instance, states, config)
        return d

    costs = np.empty(replications)
    first_plan = MaintenancePlan()
    for r in range(replications):
        rng = replication_rng(seed, r)
        states = instance.states
        plan = MaintenancePlan() if r == 0 else None
        total = 0.0
        for t in range(1, T + 1):
            d = decide(states) if t < T else second_stage_policy(states, m)
            c = d.cost(instance)
            total += c
            if plan is not None:
                plan.stages.append(StageRecord(t, states, d, c))
            if t < T:
                u = rng.random(n)
                nxt = []
                for i in range(n):
                    row = cdfs[i][0 if d.x[i] else states[i] - 1]
                    nxt.append(min(int(np.searchsorted(row, u[i], side="right")), m - 1) + 1)
                states = tuple(nxt)
        costs[r] = total
        if plan is not None:
            first_plan = plan
    std = float(costs.std(ddof=1)) if replications > 1 else 0.0
    return SimulationSummary(float(costs.mean()), std, costs, first_plan)


def scenario_count(instance: SystemInstance) -> int:
    return instance.m ** (instance.n * (instance.horizon - 1))


def enumerate_children(instance: SystemInstance, states: Sequence[int], decision: StageDecision):
    """(next_states, probability) for every child node with positive probability."""
    rows = []
    for c, g, xi in zip(instance.components, states, decision.x):
        row = c.transition[0 if xi else g - 1]
        rows.append([(h + 1, p) for h, p in enumerate(row) if p > 0])
    for combo in product(*rows):
        p = 1.0
        for _, pi in combo:
            p *= pi
        yield tuple(h for h, _ in combo), p
