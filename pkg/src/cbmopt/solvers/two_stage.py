"""Exact and heuristic solvers for the two-stage maintenance grouping problem."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ..model import Partition, SystemInstance, indices_of, mask_of, two_stage_total_cost
from ..structural import StructuralError, decomposed_total_cost, move_ratio, rho

BRUTE_FORCE_MAX_N = 20


class GuardExceeded(ValueError):
    """The instance is too large for an enumeration-based routine."""


class SolveTimeout(RuntimeError):
    pass


@dataclass
class Algo1Trace:
    initial_failed: int = 0
    moves: list[tuple[int, str, int]] = field(default_factory=list)
    batches: list[tuple[int, int, int]] = field(default_factory=list)  # (j, into N1, into N0)
    j_max: int = 0
    sets_examined: int = 0
    forced_ties: int = 0
    clashes: int = 0

    def moved_sets(self) -> list[tuple[list[int], str, int]]:
        return [(indices_of(mask), dest, j) for mask, dest, j in self.moves]


@dataclass(frozen=True)
class Algo2Config:
    J: int = 3
    M: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("J must be at least 1")
        if self.M < 2:
            raise ValueError("M must be at least 2 so both extreme partitions are sampled")


def partition_costs(instance: SystemInstance, masks: np.ndarray) -> np.ndarray:
    """Vectorized two-stage cost of many maintenance masks (n <= 62, feasibility not checked)."""
    masks = np.asarray(masks, dtype=np.int64)
    return bit_costs(instance, ((masks[:, None] >> np.arange(instance.n)) & 1).astype(bool))


def bit_costs(instance: SystemInstance, bits: np.ndarray) -> np.ndarray:
    """Two-stage cost of each row of a boolean (k, n) maintenance matrix."""
    qg, q1, pm, cm = instance.arrays()
    fixed = float(sum(c.cm_cost - c.pm_cost for c in instance.components if c.failed))
    q = np.where(bits, q1, qg)
    return (bits @ pm + fixed + instance.setup_cost * bits.any(axis=1)
            + q @ cm + instance.setup_cost * (1.0 - np.prod(1.0 - q, axis=1)))


def brute_force_two_stage(instance: SystemInstance, max_n: int = BRUTE_FORCE_MAX_N) -> tuple[Partition, float]:
    """Enumerate every feasible partition; ties go to the smallest maintenance mask."""
    n = instance.n
    if n > max_n:
        raise GuardExceeded(f"brute force enumerates 2^n partitions; n={n} exceeds {max_n}")
    failed = instance.failed_mask
    free = indices_of(instance.full_mask & ~failed)
    best_cost, best_mask = math.inf, 0
    chunk = 1 << 15
    total = 1 << len(free)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        masks = np.full(codes.shape, failed, dtype=np.int64)
        for k, i in enumerate(free):
            masks |= ((codes >> k) & 1) << i
        costs = partition_costs(instance, masks)
        lo = costs.min()
        if lo < best_cost:
            best_cost = float(lo)
            best_mask = int(masks[costs == lo].min())
        elif lo == best_cost:
            best_mask = min(best_mask, int(masks[costs == lo].min()))
    part = Partition(n, best_mask)
    check = decomposed_total_cost(instance, part)
    if not math.isclose(check, best_cost, rel_tol=1e-9, abs_tol=1e-9):
        raise RuntimeError(f"cost decomposition disagrees at the optimum: {check} vs {best_cost}")
    return part, best_cost


def _product_stats(factors: list[float]) -> tuple[int, float]:
    zeros, prod = 0, 1.0
    for f in factors:
        if f == 0.0:
            zeros += 1
        else:
            prod *= f
    return zeros, prod


def _search(instance: SystemInstance, max_card: int | None = None, deadline: float | None = None):
    """Algorithm 1 as printed, optionally stopping once the cardinality exceeds ``max_card``.

    Returns (N0*, N1*, N_u, trace) as masks. Every subset of a given cardinality
    is judged against the partitions as they stood when that cardinality pass
    began; qualifying sets are then committed together.
    """
    cs = instance.setup_cost
    if not cs > 0:
        raise StructuralError("Algorithm 1 needs a positive setup cost")
    comps = instance.components
    om_g = [1.0 - c.q_current for c in comps]
    om_1 = [1.0 - c.q_new for c in comps]
    rh = [rho(c, cs) for c in comps]

    n1 = instance.failed_mask
    n0 = 0
    nu = instance.full_mask & ~n1
    trace = Algo1Trace(initial_failed=n1)
    j = 1
    while nu:
        if max_card is not None and j > max_card:
            break
        members = indices_of(nu)
        u = len(members)
        trace.j_max = max(trace.j_max, j)
        # Δr is taken at (N0* ∪ N_u, N1*), Δs at (N0*, N1* ∪ N_u).
        zr, pr = _product_stats([om_g[i] for i in indices_of(n0 | nu)] + [om_1[i] for i in indices_of(n1)])
        zs, ps = _product_stats([om_g[i] for i in indices_of(n0)] + [om_1[i] for i in indices_of(n1 | nu)])
        n1_empty = 1.0 if n1 == 0 else 0.0
        to_n1 = to_n0 = 0
        sets_n1: list[int] = []
        sets_n0: list[int] = []
        for count, combo in enumerate(combinations(members, j)):
            if deadline is not None and count & 1023 == 0 and time.perf_counter() > deadline:
                raise SolveTimeout("Algorithm 1 exceeded its time limit")
            a = b = 1.0
            rs = 0.0
            zg = z1 = 0
            nzg = nz1 = 1.0
            for i in combo:
                fa, fb = om_1[i], om_g[i]
                a *= fa
                b *= fb
                rs += rh[i]
                if fb == 0.0:
                    zg += 1
                else:
                    nzg *= fb
                if fa == 0.0:
                    z1 += 1
                else:
                    nz1 *= fa
            rest_r = 0.0 if zr - zg > 0 else pr / nzg
            mask = mask_of(combo)
            if move_ratio(rs + n1_empty, rest_r, a, b) < 1.0:
                to_n1 |= mask
                sets_n1.append(mask)
                continue
            rest_s = 0.0 if zs - z1 > 0 else ps / nz1
            retained_empty = 1.0 if (n1 == 0 and j == u) else 0.0
            if move_ratio(rs + retained_empty, rest_s, a, b) >= 1.0:
                to_n0 |= mask
                sets_n0.append(mask)
        trace.sets_examined += math.comb(u, j)

        # A component claimed by both batches (possible only for j >= 2) stays undetermined.
        clash = to_n1 & to_n0
        trace.clashes += bin(clash).count("1")
        to_n1 &= ~clash
        to_n0 &= ~clash
        if not (to_n1 | to_n0) and j >= u:
            # N = N_u always satisfies one criterion exactly; only round-off lands here.
            to_n0 = nu
            sets_n0.append(nu)
            trace.forced_ties += 1
        if to_n1 | to_n0:
            trace.moves.extend((s, "N1", j) for s in sets_n1 if s & ~clash)
            trace.moves.extend((s, "N0", j) for s in sets_n0 if s & ~clash)
            trace.batches.append((j, to_n1, to_n0))
            n1 |= to_n1
            n0 |= to_n0
            nu &= ~(to_n1 | to_n0)
            j = 1
        else:
            j += 1
    return n0, n1, nu, trace


def algorithm1(instance: SystemInstance, time_limit: float | None = None) -> tuple[Partition, float, Algo1Trace]:
    """Optimal two-stage partition by the cardinality-ascending improvement search."""
    deadline = None if time_limit is None else time.perf_counter() + time_limit
    _, n1, _, trace = _search(instance, deadline=deadline)
    part = Partition(instance.n, n1)
    return part, two_stage_total_cost(instance, part), trace


def algorithm2(instance: SystemInstance, config: Algo2Config = Algo2Config()) -> tuple[Partition, float]:
    """Algorithm 1 capped at cardinality J, then the best of M random completions.

    The two extreme completions (nothing / everything undetermined maintained)
    are always among the M candidates. Each other candidate maintains every
    undetermined component independently with probability 1/2.
    """
    _, n1, nu, _ = _search(instance, max_card=config.J)
    if not nu:
        part = Partition(instance.n, n1)
        return part, two_stage_total_cost(instance, part)
    members = np.array(indices_of(nu))
    rng = np.random.Generator(np.random.PCG64(config.seed))
    draws = rng.random((config.M - 2, members.size)) < 0.5
    bits = np.zeros((config.M, instance.n), dtype=bool)
    bits[:, indices_of(n1)] = True
    bits[1, members] = True
    bits[2:, members] = draws
    costs = bit_costs(instance, bits)
    k = int(np.argmin(costs))
    part = Partition(instance.n, mask_of(np.flatnonzero(bits[k]).tolist()))
    return part, two_stage_total_cost(instance, part)


def solve_two_stage(instance: SystemInstance, config: Algo2Config | None = None) -> tuple[Partition, float]:
    """Algorithm 1 when ``config`` is None, else Algorithm 2."""
    if config is None:
        part, cost, _ = algorithm1(instance)
        return part, cost
    return algorithm2(instance, config)
