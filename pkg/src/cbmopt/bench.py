"""Random instances in the baseline regime and the experiment harnesses built on them.

Instance ``index`` of a config seeded with ``seed`` is generated from
``PCG64(SeedSequence(seed, spawn_key=(index,)))``, so any single instance can be
regenerated without producing the ones before it.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .degradation import GammaProcessParams, build_transition_matrix, make_state_grid
from .model import ComponentSpec, SystemInstance
from .solvers.multistage import exact_multistage, simulate_rolling_horizon
from .solvers.two_stage import (
    BRUTE_FORCE_MAX_N,
    Algo2Config,
    GuardExceeded,
    SolveTimeout,
    algorithm1,
    algorithm2,
    brute_force_two_stage,
)


@dataclass
class BenchConfig:
    n_values: list[int] = field(default_factory=lambda: [10, 11, 12])
    instances_per_n: int = 100
    alpha_range: tuple[float, float] = (1.0, 5.0)
    rate_range: tuple[float, float] = (0.2, 1.0)
    pm_range: tuple[float, float] = (1.0, 5.0)
    cm_range: tuple[float, float] = (10.0, 30.0)
    setup_cost: float = 20.0
    failure_threshold: float = 20.0
    m: int = 11
    inspection_interval: float = 1.0
    seed: int = 0
    J_values: list[int] = field(default_factory=list)
    M: int = 100
    time_limit: float | None = None
    brute_force_max_n: int = 12
    horizons: list[int] = field(default_factory=lambda: [3, 4, 5])
    replications: int = 1000

    def __post_init__(self):
        for name in ("alpha_range", "rate_range", "pm_range", "cm_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must have lower < upper, got {(lo, hi)}")
            setattr(self, name, (float(lo), float(hi)))
        if self.instances_per_n < 1:
            raise ValueError("instances_per_n must be positive")
        if any(n < 1 for n in self.n_values):
            raise ValueError("n_values must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown bench config keys: {sorted(unknown)}")
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


def instance_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_instance(config: BenchConfig, index: int, n: int | None = None, horizon: int = 2) -> SystemInstance:
    """Baseline-regime instance; initial states are uniform over 1..m (failure included)."""
    n = config.n_values[0] if n is None else n
    rng = instance_rng(config.seed, index)
    grid = make_state_grid(config.failure_threshold, config.m)
    comps = []
    for i in range(n):
        params = GammaProcessParams(alpha=rng.uniform(*config.alpha_range), rate=rng.uniform(*config.rate_range))
        pm = rng.uniform(*config.pm_range)
        cm = rng.uniform(*config.cm_range)
        state = int(rng.integers(1, config.m + 1))
        Q = build_transition_matrix(params, grid, config.inspection_interval)
        comps.append(ComponentSpec(id=i + 1, pm_cost=pm, cm_cost=cm, transition=Q, state=state, degradation=params))
    return SystemInstance(tuple(comps), config.setup_cost, config.m, horizon,
                          config.inspection_interval, config.failure_threshold)


def instance_index(n: int, k: int) -> int:
    """Stable instance index for the k-th instance of size n."""
    return n * 1_000_003 + k


def relative_error(cost: float, reference: float) -> float:
    return abs(cost - reference) / max(abs(reference), 1e-300)


@dataclass
class BenchReport:
    """``rows`` are deterministic per-instance results; ``timings`` hold clock readings."""

    kind: str
    rows: list[dict] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    def rows_csv(self) -> str:
        return _to_csv(self.rows)

    def timings_csv(self) -> str:
        return _to_csv(self.timings)

    def summary_csv(self) -> str:
        return _to_csv(self.summary)

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "summary": self.summary, "rows": self.rows,
                           "timings": self.timings, "violations": self.violations}, indent=2)


def _to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    fields = list(rows[0])
    for r in rows[1:]:
        fields.extend(k for k in r if k not in fields)
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k, "")) for k in fields})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _timed(fn, *args, **kwargs):
    w0, c0 = time.perf_counter(), time.process_time()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - w0, time.process_time() - c0


def run_two_stage_bench(config: BenchConfig) -> BenchReport:
    """Algorithm 1 per instance, with brute force (small n) and Algorithm 2 sweeps over J."""
    report = BenchReport("two-stage")
    for n in config.n_values:
        for k in range(config.instances_per_n):
            inst = sample_instance(config, instance_index(n, k), n)
            row = {"n": n, "instance": k}
            timing = {"n": n, "instance": k}
            try:
                (part, cost, trace), wall, cpu = _timed(algorithm1, inst, time_limit=config.time_limit)
                row.update(alg1_cost=cost, alg1_N1=" ".join(str(i + 1) for i in sorted(part.n1)),
                           j_m=trace.j_max, sets_examined=trace.sets_examined, status="ok")
                timing.update(alg1_wall=wall, alg1_cpu=cpu)
            except SolveTimeout:
                row.update(alg1_cost="", alg1_N1="", j_m="", sets_examined="", status="timeout")
                timing.update(alg1_wall=config.time_limit, alg1_cpu="")
                cost = None
            reference = cost
            if n <= min(config.brute_force_max_n, BRUTE_FORCE_MAX_N):
                (bpart, bcost), wall, cpu = _timed(brute_force_two_stage, inst)
                row["brute_cost"] = bcost
                timing.update(brute_wall=wall, brute_cpu=cpu)
                if cost is not None:
                    err = relative_error(cost, bcost)
                    row["alg1_err"] = err
                    if err > 1e-9:
                        report.violations.append(f"n={n} instance={k}: Algorithm 1 cost {cost} vs brute force {bcost}")
                if reference is None:
                    reference = bcost
            for J in config.J_values:
                (p2, c2), wall, cpu = _timed(algorithm2, inst, Algo2Config(J, config.M, config.seed + k))
                row[f"alg2_J{J}_cost"] = c2
                timing[f"alg2_J{J}_wall"] = wall
                timing[f"alg2_J{J}_cpu"] = cpu
                if reference is not None:
                    err = (c2 - reference) / abs(reference) if reference else 0.0
                    row[f"alg2_J{J}_err"] = max(err, 0.0)
                    if err < -1e-9:
                        report.violations.append(f"n={n} instance={k}: Algorithm 2 (J={J}) beat the optimum")
            report.rows.append(row)
            report.timings.append(timing)
    report.summary = _summarize_two_stage(report, config)
    return report


def _stats(values):
    vals = [v for v in values if v != "" and v is not None]
    if not vals:
        return None, None
    return float(np.mean(vals)), float(np.max(vals))


def _summarize_two_stage(report: BenchReport, config: BenchConfig) -> list[dict]:
    out = []
    for n in config.n_values:
        rows = [r for r in report.rows if r["n"] == n]
        times = [t for t in report.timings if t["n"] == n]
        s = {"n": n, "instances": len(rows), "timeouts": sum(r["status"] == "timeout" for r in rows)}
        s["alg1_avg_time"], s["alg1_max_time"] = _stats(t.get("alg1_wall") for t in times)
        s["avg_j_m"], s["max_j_m"] = _stats(r["j_m"] for r in rows)
        if any("alg1_err" in r for r in rows):
            s["alg1_mean_err"], s["alg1_max_err"] = _stats(r.get("alg1_err") for r in rows)
            s["brute_avg_time"], s["brute_max_time"] = _stats(t.get("brute_wall") for t in times)
        for J in config.J_values:
            s[f"alg2_J{J}_avg_time"], s[f"alg2_J{J}_max_time"] = _stats(t.get(f"alg2_J{J}_wall") for t in times)
            s[f"alg2_J{J}_mean_err"], s[f"alg2_J{J}_max_err"] = _stats(r.get(f"alg2_J{J}_err") for r in rows)
        out.append(s)
    return out


def run_multistage_bench(config: BenchConfig) -> BenchReport:
    """Exact multi-stage value vs the rolling-horizon Monte Carlo mean per (n, T) cell."""
    report = BenchReport("multi-stage")
    algo2 = Algo2Config(J=max(config.J_values or [3]), M=config.M, seed=config.seed)
    for n in config.n_values:
        for T in config.horizons:
            if n > 3 or T > 5:
                raise GuardExceeded(f"multi-stage bench is limited to n<=3, T<=5; got n={n}, T={T}")
            for k in range(config.instances_per_n):
                inst = sample_instance(config, instance_index(n, k), n, horizon=T)
                exact, wall_e, _ = _timed(exact_multistage, inst)
                sim, wall_s, _ = _timed(simulate_rolling_horizon, inst, config.replications, config.seed + k, algo2)
                gap = 100.0 * (sim.mean - exact.value) / exact.value if exact.value > 0 else 0.0
                row = {"n": n, "T": T, "instance": k, "exact_cost": exact.value, "rolling_mean": sim.mean,
                       "rolling_std": sim.std, "std_error": sim.std_error, "gap_pct": gap}
                if sim.mean < exact.value - 3 * sim.std_error - 1e-9:
                    report.violations.append(f"n={n} T={T} instance={k}: rolling mean {sim.mean} below exact {exact.value} by more than 3 SE")
                report.rows.append(row)
                report.timings.append({"n": n, "T": T, "instance": k, "exact_wall": wall_e, "rolling_wall": wall_s})
    for n in config.n_values:
        for T in config.horizons:
            cell = [r for r in report.rows if r["n"] == n and r["T"] == T]
            report.summary.append({
                "n": n, "T": T, "instances": len(cell),
                "exact_cost": float(np.mean([r["exact_cost"] for r in cell])),
                "rolling_mean": float(np.mean([r["rolling_mean"] for r in cell])),
                "gap_pct": float(np.mean([r["gap_pct"] for r in cell])),
            })
    return report
