from itertools import product

import numpy as np
import pytest

from cbmopt.milp import (
    evaluate_linearized_batch,
    evaluate_linearized_objective,
    linearize,
    write_lp,
)
from cbmopt.model import Partition, expected_second_stage_cost, two_stage_total_cost
from cbmopt.solvers.two_stage import GuardExceeded
from oracles import parse_lp


def _healthy(make_instance, seed, index, n):
    inst = make_instance(seed, index, n)
    return inst.with_states([min(g, inst.m - 1) for g in inst.states])


def test_counts(make_instance):
    for n in range(1, 8):
        model = linearize(make_instance(60, n, n))
        assert model.n_u == 2 ** n - n - 1
        assert len(model.var_names) == 2 * n + 1 + model.n_u
        for j_k in {name[2:] for name in model.var_names if name.startswith("u_")}:
            j = int(j_k.split("_")[0])
            assert sum(r.startswith(f"uub_{j_k}_") for r in model.row_names) == j
            assert sum(r == f"ulb_{j_k}" for r in model.row_names) == 1


def test_single_component(make_instance):
    inst = make_instance(61, 0, 1)
    model = linearize(inst)
    assert model.n_u == 0
    lp = parse_lp(write_lp(model))
    assert sorted(lp["binary"]) == ["x_1", "y_1", "z"]
    y = [int(inst.components[0].failed)]
    for x in ([0], [1]):
        if y[0] > x[0]:
            continue
        v = evaluate_linearized_objective(model, x, y, max(x))
        assert v == pytest.approx(two_stage_total_cost(inst, Partition(1, x[0])), rel=1e-12)


def test_extreme_assignments(make_instance):
    inst = _healthy(make_instance, 62, 1, 5)
    model = linearize(inst)
    qg, q1, pm, cm = inst.arrays()
    cs = inst.setup_cost
    v0 = evaluate_linearized_objective(model, [0] * 5, [0] * 5, 0)
    assert v0 == pytest.approx(qg @ cm + (1 - np.prod(1 - qg)) * cs, rel=1e-12)
    v1 = evaluate_linearized_objective(model, [1] * 5, [0] * 5, 1)
    assert v1 == pytest.approx(pm.sum() + cs + q1 @ cm + (1 - np.prod(1 - q1)) * cs, rel=1e-12)


def _feasible_assignments(inst):
    n = inst.n
    failed = [int(c.failed) for c in inst.components]
    for x in product((0, 1), repeat=n):
        if any(f > xi for f, xi in zip(failed, x)):
            continue
        ys = [failed[i:i + 1] if failed[i] else ((0, 1) if x[i] else (0,)) for i in range(n)]
        for y in product(*ys):
            for z in ((1,) if any(x) else (0, 1)):
                yield x, y, z


def test_exact_over_full_feasible_region(make_instance):
    """Every feasible (x, y, z), not only the cost-minimal y and z, against the native objective."""
    for k in range(40):
        inst = make_instance(63, k, 1 + k % 6)
        model = linearize(inst)
        X, Y, Z = zip(*_feasible_assignments(inst))
        values = evaluate_linearized_batch(model, X, Y, Z)
        _, _, pm, cm = inst.arrays()
        for v, x, y, z in zip(values, X, Y, Z):
            native = (np.dot(pm, x) + np.dot(cm - pm, y) + inst.setup_cost * z
                      + expected_second_stage_cost(inst, Partition.from_sets(inst.n, [i for i in range(inst.n) if x[i]])))
            assert v == pytest.approx(native, rel=1e-9)


def test_infeasible_assignment_rejected(make_instance):
    inst = make_instance(64, 0, 3)
    model = linearize(inst)
    with pytest.raises(ValueError):
        evaluate_linearized_objective(model, [1, 0, 0], [0, 0, 0], 0)  # x without setup
    with pytest.raises(ValueError):
        evaluate_linearized_objective(model, [0, 0, 0], [1, 0, 0], 0)  # repair without maintenance
    failed = inst.with_states([inst.m, 1, 1])
    with pytest.raises(ValueError):
        evaluate_linearized_objective(linearize(failed), [1, 0, 0], [0, 0, 0], 1)
    with pytest.raises(ValueError):
        evaluate_linearized_objective(model, [2, 0, 0], [0, 0, 0], 1)


def _u_is_forced(rows, x, u_name):
    """Binary values of u that satisfy every row mentioning it, given x (y, z irrelevant here)."""
    ok = []
    for u in (0, 1):
        good = True
        for coefs, sense, rhs in rows:
            if u_name not in coefs:
                continue
            lhs = sum(v * (u if name == u_name else x[int(name[2:]) - 1]) for name, v in coefs.items())
            good &= lhs <= rhs + 1e-12 if sense == "<=" else lhs >= rhs - 1e-12
        if good:
            ok.append(u)
    return ok


def test_u_logic_exhaustive(make_instance):
    for n in range(2, 7):
        model = linearize(make_instance(65, n, n))
        lp = parse_lp(write_lp(model))
        rows = list(lp["rows"].values())
        u_names = [v for v in model.var_names if v.startswith("u_")]
        for x in product((0, 1), repeat=n):
            for name, mask in zip(u_names, model.subsets):
                want = int(all(x[i] for i in range(n) if mask >> i & 1))
                assert _u_is_forced(rows, x, name) == [want]


def test_lp_round_trip(make_instance):
    for n in (1, 2, 4, 7):
        model = linearize(make_instance(66, n, n))
        lp = parse_lp(write_lp(model))
        obj = np.array([lp["objective"].get(v, 0.0) for v in model.var_names])
        assert np.array_equal(obj, model.objective)
        assert lp["constant"] == model.constant
        assert list(lp["rows"]) == model.row_names
        dense = model.A.toarray()
        for r, name in enumerate(model.row_names):
            coefs, sense, rhs = lp["rows"][name]
            assert np.array_equal([coefs.get(v, 0.0) for v in model.var_names], dense[r])
            assert sense == model.senses[r] and rhs == model.rhs[r]
        assert lp["binary"] == model.var_names
        assert all(lp["bounds"][v] == (0.0, 1.0) for v in model.var_names)


def test_lp_deterministic_and_wrapped(make_instance):
    inst = make_instance(67, 0, 9)
    a, b = write_lp(linearize(inst)), write_lp(linearize(inst))
    assert a == b
    assert max(len(line) for line in a.splitlines()) <= 255
    assert a.startswith("\\") and a.rstrip().endswith("End")


def test_u_naming_follows_bitmask_order(make_instance):
    model = linearize(make_instance(68, 0, 4))
    pairs = [(name, mask) for name, mask in zip([v for v in model.var_names if v.startswith("u_")], model.subsets)]
    assert pairs[:6] == [("u_2_1", 0b0011), ("u_2_2", 0b0101), ("u_2_3", 0b0110),
                         ("u_2_4", 0b1001), ("u_2_5", 0b1010), ("u_2_6", 0b1100)]
    assert pairs[-1] == ("u_4_1", 0b1111)


def test_guard(make_instance):
    with pytest.raises(GuardExceeded):
        linearize(make_instance(69, 0, 16))
