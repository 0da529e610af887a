"""Improvement criteria for two-stage partitions.

Moving a nonempty set N of components between the do-nothing set N0 and the
maintenance set N1 changes the two-stage cost by

    C' - C = c_s * (sum(rho_k) + [setup newly incurred] - p(N0, N1) * r_N)     (N0 -> N1)
    C - C' = c_s * (sum(rho_k) + [setup no longer incurred] - p(N0, N1) * s_N) (N1 -> N0)

so the move pays off exactly when the ratio ``delta_r < 1`` (resp. ``delta_s > 1``).
The products p * r_N and p * s_N are evaluated in the cancellation-free form
``p(rest) * (prod(1 - Q(1,m)) - prod(1 - Q(g,m)))`` over the moved set, which
stays finite when some Q(g, m) equals 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ComponentSpec, Partition, SystemInstance, indices_of


class StructuralError(ValueError):
    """The improvement calculus is undefined for this input (e.g. zero setup cost)."""


@dataclass(frozen=True)
class StandaloneDecision:
    x_tilde_star: int
    threshold_state: int


@dataclass(frozen=True)
class MoveEvaluation:
    delta: float
    rho_sum: float
    ratio_term: float
    survival: float


def standalone_ratio(component: ComponentSpec, setup_cost: float) -> float:
    denom = component.cm_cost + setup_cost
    if not denom > 0:
        raise StructuralError("c_cm + c_s must be positive for the standalone rule")
    return (component.pm_cost + setup_cost) / denom


def standalone_pm_optimal(component: ComponentSpec, setup_cost: float, state: int) -> bool:
    if state == component.m:
        return True
    return component.fail_prob(state) > standalone_ratio(component, setup_cost) + component.q_new


def standalone_decision(component: ComponentSpec, setup_cost: float) -> StandaloneDecision:
    """Optimal action for the component maintained on its own, and its PM threshold state.

    The threshold is found by scanning working states 2..m-1, so rows that are
    not monotone in the failure probability are handled as given.
    """
    m = component.m
    threshold = m
    for g in range(2, m):
        if standalone_pm_optimal(component, setup_cost, g):
            threshold = g
            break
    return StandaloneDecision(int(standalone_pm_optimal(component, setup_cost, component.state)), threshold)


def standalone_costs(component: ComponentSpec, setup_cost: float) -> tuple[float, float]:
    """Two-stage cost of a component maintained alone: (maintain now, do nothing now)."""
    tc1 = component.pm_cost + setup_cost + component.q_new * (component.cm_cost + setup_cost)
    tc0 = component.q_current * (component.cm_cost + setup_cost)
    return tc1, tc0


def decomposed_total_cost(instance: SystemInstance, partition: Partition) -> float:
    """Two-stage cost rebuilt from per-component standalone costs.

    Independent of ``two_stage_total_cost``; the solvers use it as a cross-check.
    """
    cs = instance.setup_cost
    total = 0.0
    shared = 0.0
    survive = 1.0
    n1 = 0
    for i, c in enumerate(instance.components):
        tc1, tc0 = standalone_costs(c, cs)
        if (partition.maintain >> i) & 1:
            total += tc1
            shared += c.q_new
            survive *= 1.0 - c.q_new
            n1 += 1
        else:
            total += tc0
            shared += c.q_current
            survive *= 1.0 - c.q_current
        if c.failed:
            total += c.cm_cost - c.pm_cost
    return total - max(n1 - 1, 0) * cs - cs * shared + cs * (1.0 - survive)


def _require_setup(setup_cost: float) -> None:
    if not setup_cost > 0:
        raise StructuralError("setup cost must be positive for rho and the delta ratios")


def rho(component: ComponentSpec, setup_cost: float) -> float:
    """Setup-normalized PM cost net of the CM cost it avoids; negative means PM pays for itself."""
    _require_setup(setup_cost)
    return (component.pm_cost - (component.q_current - component.q_new) * component.cm_cost) / setup_cost


def survival_prob(instance: SystemInstance, partition: Partition) -> float:
    """Probability that no component is failed at the second stage."""
    return _survival(instance, partition.maintain, partition.do_nothing)


def _survival(instance: SystemInstance, maintain: int, idle: int) -> float:
    p = 1.0
    for i in indices_of(idle):
        p *= 1.0 - instance.components[i].q_current
    for i in indices_of(maintain):
        p *= 1.0 - instance.components[i].q_new
    return p


def _products(instance: SystemInstance, N: int) -> tuple[float, float]:
    a = b = 1.0
    for i in indices_of(N):
        c = instance.components[i]
        a *= 1.0 - c.q_new
        b *= 1.0 - c.q_current
    return a, b


def r_value(instance: SystemInstance, N: int) -> float:
    a, b = _products(instance, _nonempty(N))
    if b == 0:
        return math.inf
    return a / b - 1.0


def s_value(instance: SystemInstance, N: int) -> float:
    a, b = _products(instance, _nonempty(N))
    if a == 0:
        raise StructuralError("s_N is undefined when a member has Q(1,m) = 1")
    return 1.0 - b / a


def _nonempty(N: int) -> int:
    if N <= 0:
        raise StructuralError("the moved set N must be nonempty")
    return N


def move_ratio(numerator: float, rest: float, a: float, b: float) -> float:
    """numerator / (rest * (a - b)), extended to nonpositive denominators.

    The move pays off iff numerator < denominator (into N1), resp. > (into N0).
    When the denominator is not positive (no risk reduction from the move, or
    zero survival elsewhere) the ratio is replaced by -inf / +inf according to
    the sign of numerator - denominator, and by exactly 1 when they are equal,
    so comparisons with 1 still decide the move correctly.
    """
    denom = rest * (a - b)
    if denom > 0:
        return numerator / denom
    diff = numerator - denom
    if diff == 0:
        return 1.0
    return math.inf if diff > 0 else -math.inf


def evaluate_move_in(instance: SystemInstance, partition: Partition, N: int) -> MoveEvaluation:
    """Ratio for moving N from N0 into N1 (improves iff delta < 1)."""
    _require_setup(instance.setup_cost)
    _nonempty(N)
    if N & partition.maintain:
        raise StructuralError("N must be a subset of the do-nothing set N0")
    rho_sum = sum(rho(instance.components[i], instance.setup_cost) for i in indices_of(N))
    numerator = rho_sum + (1.0 if partition.maintain == 0 else 0.0)
    a, b = _products(instance, N)
    rest = _survival(instance, partition.maintain, partition.do_nothing & ~N)
    return MoveEvaluation(move_ratio(numerator, rest, a, b), rho_sum, r_value(instance, N),
                          survival_prob(instance, partition))


def evaluate_move_out(instance: SystemInstance, partition: Partition, N: int) -> MoveEvaluation:
    """Ratio for moving N from N1 into N0 (improves iff delta > 1).

    The extra setup term applies when nothing remains maintained after the move.
    """
    _require_setup(instance.setup_cost)
    _nonempty(N)
    if N & ~partition.maintain:
        raise StructuralError("N must be a subset of the maintenance set N1")
    rho_sum = sum(rho(instance.components[i], instance.setup_cost) for i in indices_of(N))
    numerator = rho_sum + (1.0 if partition.maintain & ~N == 0 else 0.0)
    a, b = _products(instance, N)
    rest = _survival(instance, partition.maintain & ~N, partition.do_nothing)
    s = 1.0 - b / a if a > 0 else math.nan
    return MoveEvaluation(move_ratio(numerator, rest, a, b), rho_sum, s,
                          survival_prob(instance, partition))


def delta_r(instance: SystemInstance, partition: Partition, N: int) -> float:
    return evaluate_move_in(instance, partition, N).delta


def delta_s(instance: SystemInstance, partition: Partition, N: int) -> float:
    return evaluate_move_out(instance, partition, N).delta


def prop1_shortcut(instance: SystemInstance) -> Partition | None:
    """All-maintain partition when every component would be maintained on its own, else None."""
    for c in instance.components:
        if not standalone_pm_optimal(c, instance.setup_cost, c.state):
            return None
    return Partition(instance.n, instance.full_mask)
