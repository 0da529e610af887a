"""Random configurations shared by the structural and acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass, replace

from cbmopt.bench import BenchConfig, sample_instance
from cbmopt.model import Partition, SystemInstance, indices_of, mask_of
from cbmopt.structural import rho

TIE = 1e-9


def classify_ratio(delta: float) -> int:
    """-1 below one, +1 above one, 0 within the tie band."""
    if delta < 1 - TIE:
        return -1
    if delta > 1 + TIE:
        return 1
    return 0


def classify_change(new: float, old: float) -> int:
    d = new - old
    tol = TIE * max(1.0, abs(old))
    return -1 if d < -tol else (1 if d > tol else 0)


def random_subset(rng, pool: list[int], nonempty=True) -> list[int]:
    if not pool:
        return []
    pick = [i for i in pool if rng.random() < 0.5]
    if nonempty and not pick:
        pick = [pool[int(rng.integers(len(pool)))]]
    return pick


@dataclass
class MoveCase:
    instance: SystemInstance
    base: Partition
    N: int
    direction: str  # "in" (N0 -> N1) or "out" (N1 -> N0)

    def moved(self) -> Partition:
        if self.direction == "in":
            return Partition(self.base.n, self.base.maintain | self.N)
        return Partition(self.base.n, self.base.maintain & ~self.N)


def random_move(rng, seed_index: int, max_n: int = 8) -> MoveCase:
    """Baseline instance, feasible partition and a nonempty movable set (no failed members)."""
    while True:
        n = int(rng.integers(1, max_n + 1))
        inst = sample_instance(BenchConfig(seed=4242), seed_index, n)
        seed_index += 100_003
        free = indices_of(inst.full_mask & ~inst.failed_mask)
        if not free:
            continue
        maintain = inst.failed_mask | mask_of(random_subset(rng, free, nonempty=False))
        base = Partition(n, maintain)
        direction = "in" if rng.random() < 0.5 else "out"
        pool = [i for i in free if ((maintain >> i & 1) == (direction == "out"))]
        if not pool:
            continue
        return MoveCase(inst, base, mask_of(random_subset(rng, pool)), direction)


def make_indifferent(case: MoveCase, min_denominator: float = 1e-6) -> MoveCase | None:
    """Re-solve the PM cost of one member of N so the move is exactly cost-neutral.

    Uses the closed form: the move is neutral when the setup-normalized PM
    excess of N plus the setup indicator equals the survival of the other
    components times the drop in joint failure probability of N. Cases whose
    denominator is below ``min_denominator`` are skipped because a 1e-9 band
    on the ratio is then finer than the round-off of the costs themselves.
    """
    inst, base, N = case.instance, case.base, case.N
    members = indices_of(N)
    a = survival_product(inst, 0, N)
    b = survival_product(inst, N, 0)
    if case.direction == "in":
        rest = survival_product(inst, base.do_nothing & ~N, base.maintain)
        indicator = 1.0 if base.maintain == 0 else 0.0
    else:
        rest = survival_product(inst, base.do_nothing, base.maintain & ~N)
        indicator = 1.0 if base.maintain & ~N == 0 else 0.0
    denom = rest * (a - b)
    if denom < min_denominator:
        return None
    k = members[0]
    target = denom - indicator - rho_sum(inst, N & ~(1 << k))
    c = inst.components[k]
    new_pm = inst.setup_cost * target + (c.q_current - c.q_new) * c.cm_cost
    if new_pm < 0:
        return None
    comps = list(inst.components)
    comps[k] = replace(c, pm_cost=new_pm)
    return replace(case, instance=replace(inst, components=tuple(comps)))


def ordering_config(rng, seed_index: int, max_n: int = 8):
    """(instance, N0, N1, Nu, N) masks with N a nonempty subset of a nonempty Nu of working components."""
    while True:
        n = int(rng.integers(1, max_n + 1))
        inst = sample_instance(BenchConfig(seed=777), seed_index, n)
        seed_index += 100_003
        free = indices_of(inst.full_mask & ~inst.failed_mask)
        if not free:
            continue
        nu = random_subset(rng, free)
        rest = [i for i in free if i not in nu]
        n1 = inst.failed_mask | mask_of(i for i in rest if rng.random() < 0.5)
        n0 = inst.full_mask & ~n1 & ~mask_of(nu)
        N = mask_of(random_subset(rng, nu))
        return inst, n0, n1, mask_of(nu), N


def rho_sum(inst: SystemInstance, N: int) -> float:
    return sum(rho(inst.components[i], inst.setup_cost) for i in indices_of(N))


def survival_product(inst: SystemInstance, idle: int, maintained: int) -> float:
    p = 1.0
    for i in indices_of(idle):
        p *= 1.0 - inst.components[i].transition[inst.components[i].state - 1, -1]
    for i in indices_of(maintained):
        p *= 1.0 - inst.components[i].transition[0, -1]
    return p
