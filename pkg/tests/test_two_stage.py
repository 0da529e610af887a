import math
from dataclasses import replace

import numpy as np
import pytest

from cbmopt.model import ComponentSpec, Partition, SystemInstance, indices_of, two_stage_total_cost
from cbmopt.solvers.two_stage import (
    Algo2Config,
    GuardExceeded,
    SolveTimeout,
    algorithm1,
    algorithm2,
    bit_costs,
    brute_force_two_stage,
    partition_costs,
    solve_two_stage,
)
from cbmopt.structural import StructuralError, delta_r, delta_s


def _exhaustive(inst):
    """Plain loop over all feasible masks, independent of the vectorized brute force."""
    best = math.inf
    f = inst.failed_mask
    for mask in range(1 << inst.n):
        if mask & f == f:
            best = min(best, two_stage_total_cost(inst, Partition(inst.n, mask)))
    return best


def test_algorithm1_matches_enumeration(make_instance):
    for k in range(400):
        inst = make_instance(21, k, 1 + k % 9)
        part, cost, _ = algorithm1(inst)
        assert part.is_feasible(inst)
        assert cost == pytest.approx(_exhaustive(inst), rel=1e-9)


def test_brute_force_matches_loop(make_instance):
    for k in range(50):
        inst = make_instance(22, k, 1 + k % 8)
        part, cost = brute_force_two_stage(inst)
        assert cost == pytest.approx(_exhaustive(inst), rel=1e-12)
        assert cost == pytest.approx(two_stage_total_cost(inst, part), rel=1e-12)


def test_vectorized_costs_match_scalar(make_instance):
    inst = make_instance(23, 0, 6)
    masks = np.arange(64)
    fast = partition_costs(inst, masks)
    bits = ((masks[:, None] >> np.arange(6)) & 1).astype(bool)
    assert np.allclose(bit_costs(inst, bits), fast, rtol=0, atol=0)
    f = inst.failed_mask
    for mask in range(64):
        if mask & f == f:
            assert fast[mask] == pytest.approx(two_stage_total_cost(inst, Partition(6, mask)), rel=1e-13)


def test_brute_force_guard(make_instance):
    with pytest.raises(GuardExceeded):
        brute_force_two_stage(make_instance(1, 0, 21))
    with pytest.raises(GuardExceeded):
        brute_force_two_stage(make_instance(1, 0, 5), max_n=4)


def test_all_failed_and_all_new():
    Q = np.array([[0.8, 0.15, 0.05], [0.0, 0.7, 0.3], [0.0, 0.0, 1.0]])
    comps = tuple(ComponentSpec(i, 1.0, 10.0, Q, 3) for i in range(1, 4))
    inst = SystemInstance(comps, 5.0, 3)
    part, cost, trace = algorithm1(inst)
    assert part.maintain == 0b111 and trace.j_max == 0
    fresh = inst.with_states([1, 1, 1])
    part, _, _ = algorithm1(fresh)
    assert part.maintain == 0  # PM on a new component buys nothing


def test_single_component_threshold():
    Q = np.array([[0.9, 0.1, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]])
    inst = SystemInstance((ComponentSpec(1, 2.0, 10.0, Q, 2),), 4.0, 3)
    # do nothing: 0.5 * 14 = 7; maintain: 2 + 4 = 6
    part, cost, _ = algorithm1(inst)
    assert part.maintain == 1 and cost == pytest.approx(6.0)


def test_zero_setup_cost_rejected(make_instance):
    inst = replace(make_instance(2, 0, 3), setup_cost=0.0)
    with pytest.raises(StructuralError):
        algorithm1(inst)
    part, cost = brute_force_two_stage(inst)  # brute force does not need the ratios
    assert cost == pytest.approx(_exhaustive(inst))


def test_timeout(make_instance):
    with pytest.raises(SolveTimeout):
        algorithm1(make_instance(3, 0, 40), time_limit=-1.0)


def test_trace_moves_satisfy_their_criterion(make_instance):
    """Replay the trace: every committed set met its ratio test against the pass-start partition."""
    for k in range(300):
        inst = make_instance(24, k, 2 + k % 9)
        _, _, trace = algorithm1(inst)
        n1, n0 = trace.initial_failed, 0
        nu = inst.full_mask & ~n1
        moves = trace.moves
        for j, to_n1, to_n0 in trace.batches:
            batch = [mv for mv in moves if mv[2] == j and mv[0] & (to_n1 | to_n0) and mv[0] & nu == mv[0]]
            for mask, dest, _ in batch:
                if trace.forced_ties:
                    continue
                if dest == "N1":
                    assert delta_r(inst, Partition(inst.n, n1), mask) < 1
                else:
                    dr = delta_r(inst, Partition(inst.n, n1), mask)
                    assert dr >= 1 and delta_s(inst, Partition(inst.n, n1 | nu), mask) >= 1
            n1 |= to_n1
            n0 |= to_n0
            nu &= ~(to_n1 | to_n0)
        assert nu == 0 and n0 | n1 == inst.full_mask and n0 & n1 == 0


def test_optimal_cost_monotone_in_pm(make_instance, rng):
    for k in range(60):
        inst = make_instance(25, k, 6)
        i = int(rng.integers(6))
        comps = list(inst.components)
        comps[i] = replace(comps[i], pm_cost=comps[i].pm_cost * 1.5)
        _, c0, _ = algorithm1(inst)
        _, c1, _ = algorithm1(replace(inst, components=tuple(comps)))
        assert c1 >= c0 - 1e-12


def test_cost_scaling_keeps_partition(make_instance):
    for k in range(40):
        inst = make_instance(26, k, 7)
        p0, c0, _ = algorithm1(inst)
        p1, c1, _ = algorithm1(inst.scaled_costs(100.0))
        assert c1 == pytest.approx(100 * c0, rel=1e-12)
        assert two_stage_total_cost(inst, p1) == pytest.approx(c0, rel=1e-12)


def test_algorithm2_bounds_and_determinism(make_instance):
    for k in range(60):
        inst = make_instance(27, k, 5 + k % 20)
        _, c1, _ = algorithm1(inst)
        for J in (1, 2, 3):
            p2, c2 = algorithm2(inst, Algo2Config(J, 100, k))
            assert p2.is_feasible(inst)
            assert c2 >= c1 - 1e-9 * c1
            assert algorithm2(inst, Algo2Config(J, 100, k)) == (p2, c2)


def test_algorithm2_with_large_j_is_exact(make_instance):
    for k in range(40):
        inst = make_instance(28, k, 2 + k % 8)
        _, c1, _ = algorithm1(inst)
        _, c2 = algorithm2(inst, Algo2Config(J=inst.n, M=2, seed=0))
        assert c2 == pytest.approx(c1, rel=1e-12)


def test_algorithm2_large_n(make_instance):
    inst = make_instance(29, 0, 200)
    part, cost = algorithm2(inst, Algo2Config(1, 100, 0))
    assert part.is_feasible(inst)
    assert cost == pytest.approx(two_stage_total_cost(inst, part), rel=1e-12)
    _, c1, _ = algorithm1(inst)
    assert cost >= c1 - 1e-9 * c1


def test_algorithm2_extremes_always_sampled():
    # every component sits just below its standalone threshold, so the undetermined set
    # survives cardinality 1 and the all-maintain completion has to be found by sampling
    Q = np.array([[0.95, 0.04, 0.01], [0.0, 0.6, 0.4], [0.0, 0.0, 1.0]])
    comps = tuple(ComponentSpec(i, 3.0, 10.0, Q, 2) for i in range(1, 7))
    inst = SystemInstance(comps, 8.0, 3)
    _, c1, _ = algorithm1(inst)
    part, c2 = algorithm2(inst, Algo2Config(J=1, M=2, seed=5))
    assert c2 == pytest.approx(c1)


def test_config_validation():
    with pytest.raises(ValueError):
        Algo2Config(J=0)
    with pytest.raises(ValueError):
        Algo2Config(M=1)


def test_solve_two_stage_dispatch(make_instance):
    inst = make_instance(30, 1, 6)
    assert solve_two_stage(inst)[1] == algorithm1(inst)[1]
    assert solve_two_stage(inst, Algo2Config(6, 10, 0))[1] == pytest.approx(algorithm1(inst)[1])


def test_sets_examined_counts(make_instance):
    inst = make_instance(31, 2, 9)
    _, _, trace = algorithm1(inst)
    assert trace.sets_examined >= len(indices_of(inst.full_mask & ~inst.failed_mask))
