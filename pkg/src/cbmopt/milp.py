"""Linearized two-stage model as a mixed-integer program, exported in LP format.

The only nonlinear term of the two-stage objective is the probability that the
second stage sees no failure,

    prod_i (1 - Q_i(g_i, m) + a_i x_i) = prod_i (b_i + a_i x_i),
    a_i = Q_i(g_i, m) - Q_i(1, m),  b_i = 1 - Q_i(g_i, m).

Expanding it gives one monomial prod_{i in S} x_i per subset S. Monomials of
degree 0 and 1 become the objective constant and collected x coefficients;
each subset with |S| >= 2 gets a binary u_j_k standing for the product
(j = |S|, k = 1-based rank of S among the j-subsets in increasing bitmask order),
linked by u <= x_i (i in S) and u >= sum_{i in S} x_i - (j - 1).

Variable names: x_i, y_i (i = 1..n), z, u_j_k.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import sparse

from .model import SystemInstance
from .solvers.two_stage import GuardExceeded

LINEARIZE_MAX_N = 15
_LINE_WIDTH = 250


@dataclass
class MilpModel:
    n: int
    var_names: list[str]
    objective: np.ndarray          # coefficient per variable, in var_names order
    constant: float
    A: sparse.csr_matrix = field(repr=False)
    senses: list[str] = field(repr=False)     # "<=", ">=" per row
    rhs: np.ndarray = field(repr=False)
    row_names: list[str] = field(repr=False)
    subsets: list[int] = field(repr=False)     # member bitmask of each u variable, in variable order
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)

    @property
    def n_u(self) -> int:
        return len(self.subsets)

    def index(self, name: str) -> int:
        return self.var_names.index(name)


def _u_subsets(n: int) -> list[tuple[int, int, int]]:
    """(j, k, mask) for every subset of size >= 2; k ranks masks of equal size in increasing order."""
    out = []
    for j in range(2, n + 1):
        masks = sorted(sum(1 << i for i in c) for c in combinations(range(n), j))
        out.extend((j, k, mask) for k, mask in enumerate(masks, start=1))
    return out


def linearize(instance: SystemInstance) -> MilpModel:
    n = instance.n
    if n > LINEARIZE_MAX_N:
        raise GuardExceeded(f"linearization needs 2^n auxiliary variables; n={n} exceeds {LINEARIZE_MAX_N}")
    if n < 1:
        raise ValueError("instance has no components")
    cs = instance.setup_cost
    if cs < 0:
        raise ValueError("setup cost must be nonnegative")
    qg, q1, pm, cm = instance.arrays()
    a = qg - q1
    b = 1.0 - qg

    usets = _u_subsets(n)
    names = [f"x_{i + 1}" for i in range(n)] + [f"y_{i + 1}" for i in range(n)] + ["z"]
    names += [f"u_{j}_{k}" for j, k, _ in usets]
    nv = len(names)
    X, Y, Z, U0 = 0, n, 2 * n, 2 * n + 1

    # Monomial weights prod_{S} a * prod_{not S} b, taken directly so zero factors stay exact.
    def weight(mask: int) -> float:
        w = 1.0
        for i in range(n):
            w *= a[i] if mask >> i & 1 else b[i]
        return w

    c = np.zeros(nv)
    c[X:X + n] = pm - a * cm - cs * np.array([weight(1 << i) for i in range(n)])
    c[Y:Y + n] = cm - pm
    c[Z] = cs
    for t, (_, _, mask) in enumerate(usets):
        c[U0 + t] = -cs * weight(mask)
    constant = float(np.dot(qg, cm) + cs * (1.0 - weight(0)))

    rows, cols, vals = [], [], []
    senses, rhs, row_names = [], [], []

    def add_row(name, terms, sense, value):
        r = len(row_names)
        for col, v in terms:
            rows.append(r)
            cols.append(col)
            vals.append(v)
        senses.append(sense)
        rhs.append(value)
        row_names.append(name)

    states = instance.states
    m = instance.m
    for i in range(n):
        add_row(f"setup_{i + 1}", [(X + i, 1.0), (Z, -1.0)], "<=", 0.0)
    for i in range(n):
        # g (1 - y) <= m - 1 rearranged; forces y = 1 exactly when the component is failed
        add_row(f"fail_{i + 1}", [(Y + i, float(states[i]))], ">=", float(states[i] - m + 1))
    for i in range(n):
        add_row(f"repair_{i + 1}", [(Y + i, 1.0), (X + i, -1.0)], "<=", 0.0)
    for t, (j, k, mask) in enumerate(usets):
        members = [i for i in range(n) if mask >> i & 1]
        for i in members:
            add_row(f"uub_{j}_{k}_{i + 1}", [(U0 + t, 1.0), (X + i, -1.0)], "<=", 0.0)
        add_row(f"ulb_{j}_{k}", [(U0 + t, 1.0)] + [(X + i, -1.0) for i in members], ">=", float(1 - j))

    A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(row_names), nv))
    return MilpModel(n, names, c, constant, A, senses, np.array(rhs), row_names,
                     [mask for _, _, mask in usets], a, b)


def _num(v: float) -> str:
    return repr(float(v))


def _linear_terms(coefs) -> list[str]:
    out = []
    for name, v in coefs:
        if v == 0:
            continue
        sign = "-" if v < 0 else "+"
        mag = abs(v)
        out.append(f"{sign} {name}" if mag == 1 else f"{sign} {_num(mag)} {name}")
    return out


def _wrap(head: str, terms: list[str]) -> list[str]:
    lines, cur = [], head
    for t in terms:
        if len(cur) + 1 + len(t) > _LINE_WIDTH and cur.strip():
            lines.append(cur)
            cur = "   "
        cur = f"{cur} {t}"
    lines.append(cur)
    return lines


def write_lp(model: MilpModel) -> str:
    """CPLEX-LP text; the objective constant is written as a bare numeric term."""
    out = [f"\\ two-stage maintenance grouping, n = {model.n}, {model.n_u} product variables",
           "Minimize"]
    terms = _linear_terms(zip(model.var_names, model.objective))
    if model.constant != 0 or not terms:
        terms.append(("- " if model.constant < 0 else "+ ") + _num(abs(model.constant)))
    out.extend(_wrap(" obj:", terms))
    out.append("Subject To")
    A = model.A.tocsr()
    for r, name in enumerate(model.row_names):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        row_terms = _linear_terms((model.var_names[c], v) for c, v in zip(A.indices[lo:hi], A.data[lo:hi]))
        row_terms.append(f"{model.senses[r]} {_num(model.rhs[r])}")
        out.extend(_wrap(f" {name}:", row_terms))
    out.append("Bounds")
    out.extend(f" 0 <= {v} <= 1" for v in model.var_names)
    out.append("Binary")
    out.extend(_wrap("", list(model.var_names)))
    out.append("End")
    return "\n".join(out) + "\n"


def _assignment_matrix(model: MilpModel, X, Y, Z) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=int))
    Y = np.atleast_2d(np.asarray(Y, dtype=int))
    Z = np.atleast_1d(np.asarray(Z, dtype=int)).reshape(-1, 1)
    k = X.shape[0]
    if X.shape != (k, model.n) or Y.shape != (k, model.n) or Z.shape[0] != k:
        raise ValueError("assignment shapes do not match the model")
    if not all(np.isin(v, (0, 1)).all() for v in (X, Y, Z)):
        raise ValueError("assignment values must be binary")
    S = np.array([[mask >> i & 1 for i in range(model.n)] for mask in model.subsets], dtype=int).reshape(-1, model.n)
    U = (X @ S.T == S.sum(axis=1)).astype(int)
    return np.hstack([X, Y, Z, U]).astype(float)


def evaluate_linearized_batch(model: MilpModel, X, Y, Z, tol: float = 1e-9) -> np.ndarray:
    """Objective for each row of (X, Y, Z) with u set to the products of x; raises if any row is infeasible."""
    V = _assignment_matrix(model, X, Y, Z)
    lhs = (model.A @ V.T).T
    le = np.array([s == "<=" for s in model.senses])
    viol = np.where(le, lhs - model.rhs, model.rhs - lhs)
    bad = (viol > tol).any(axis=1)
    if bad.any():
        r = int(np.argmax(bad))
        row = int(np.argmax(viol[r]))
        raise ValueError(f"assignment {r} violates constraint {model.row_names[row]}")
    return V @ model.objective + model.constant


def evaluate_linearized_objective(model: MilpModel, x, y, z) -> float:
    return float(evaluate_linearized_batch(model, [x], [y], [z])[0])
