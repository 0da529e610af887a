"""Command-line interface: ``cbmopt <subcommand> ...``.

Exit codes: 0 success, 1 invalid input or benchmark invariant violation,
2 size guard exceeded, 3 I/O error. The default seed comes from the
CBMOPT_SEED environment variable (0 when unset).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .bench import BenchConfig, BenchReport, run_multistage_bench, run_two_stage_bench
from .milp import linearize, write_lp
from .model import (
    MaintenancePlan,
    SystemInstance,
    has_errors,
    instance_from_dict,
    second_stage_policy,
    validate_instance,
)
from .solvers.multistage import exact_multistage, simulate_rolling_horizon
from .solvers.two_stage import Algo2Config, GuardExceeded, algorithm1, algorithm2
from .structural import StructuralError, standalone_decision

SEED_ENV = "CBMOPT_SEED"
EXIT_OK, EXIT_INVALID, EXIT_GUARD, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int, kind: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV} must be an integer, got {raw!r}", EXIT_INVALID, "invalid_input")


def _read_json(path: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror or e}", EXIT_IO, "io_error")
    except json.JSONDecodeError as e:
        raise CliError(f"{path} is not valid JSON: {e}", EXIT_IO, "io_error")


def _load_instance(path: str, check: bool = True) -> SystemInstance:
    data = _read_json(path)
    try:
        inst = instance_from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise CliError(f"malformed instance: {e}", EXIT_INVALID, "invalid_input")
    if check:
        findings = validate_instance(inst)
        if has_errors(findings):
            msg = "; ".join(str(f) for f in findings if f.severity == "error")
            raise CliError(f"invalid instance: {msg}", EXIT_INVALID, "invalid_input")
    return inst


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    try:
        Path(output).write_text(text)
    except OSError as e:
        raise CliError(f"cannot write {output}: {e.strerror or e}", EXIT_IO, "io_error")


def _csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _algo2_config(args) -> Algo2Config | None:
    if args.J is None and args.M is None:
        return None
    return Algo2Config(J=args.J or 3, M=args.M or 100, seed=args.seed)


# ---------------------------------------------------------------- subcommands

def cmd_solve2(args) -> int:
    inst = _load_instance(args.input)
    config = _algo2_config(args)
    trace = None
    if config is None:
        part, cost, trace = algorithm1(inst)
        method = "algorithm1"
    else:
        part, cost = algorithm2(inst, config)
        method = "algorithm2"
    ids = [c.id for c in inst.components]
    result = {
        "method": method,
        "cost": cost,
        "N1": [ids[i] for i in sorted(part.n1)],
        "N0": [ids[i] for i in sorted(part.n0)],
        "x": list(part.x()),
    }
    if args.trace and trace is not None:
        result["trace"] = {
            "j_max": trace.j_max,
            "sets_examined": trace.sets_examined,
            "forced_ties": trace.forced_ties,
            "moves": [{"set": [ids[i] for i in s], "to": dest, "cardinality": j}
                      for s, dest, j in trace.moved_sets()],
        }
    if args.format == "json":
        text = json.dumps(result, indent=2) + "\n"
    elif args.format == "csv":
        text = _csv([{"component": ids[i], "state": c.state, "maintain": part.x()[i]}
                     for i, c in enumerate(inst.components)])
    else:
        text = (f"method: {method}\ncost:   {cost:.10g}\nN1:     {result['N1']}\nN0:     {result['N0']}\n")
        if "trace" in result:
            t = result["trace"]
            text += f"j_max: {t['j_max']}  sets examined: {t['sets_examined']}\n"
            for mv in t["moves"]:
                text += f"  |N|={mv['cardinality']}: {mv['set']} -> {mv['to']}\n"
    _emit(text, args.output)
    return EXIT_OK


def cmd_solvem(args) -> int:
    inst = _load_instance(args.input)
    sol = exact_multistage(inst)
    d = sol.decision(1, inst.states)
    ids = [c.id for c in inst.components]
    result = {"value": sol.value, "horizon": inst.horizon, "states": list(inst.states),
              "first_stage": {"actions": dict(zip(map(str, ids), d.actions())), "setup": d.z}}
    if args.format == "json":
        text = json.dumps(result, indent=2) + "\n"
    elif args.format == "csv":
        text = _csv([{"component": i, "state": g, "action": a}
                     for i, g, a in zip(ids, inst.states, d.actions())])
    else:
        text = f"expected cost over {inst.horizon} stages: {sol.value:.10g}\n"
        text += "".join(f"  component {i} (state {g}): {a}\n" for i, g, a in zip(ids, inst.states, d.actions()))
    _emit(text, args.output)
    return EXIT_OK


def _plan_table(plan: MaintenancePlan) -> str:
    lines = []
    for s in plan.stages:
        acts = " ".join(f"{g}:{a}" for g, a in zip(s.states, s.decision.actions()))
        lines.append(f"  t={s.stage:<3d} {acts}   cost {s.cost:.6g}")
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    inst = _load_instance(args.input)
    config = _algo2_config(args) or Algo2Config(seed=args.seed)
    sim = simulate_rolling_horizon(inst, args.replications, args.seed, config)
    if args.format == "json":
        text = json.dumps({"mean": sim.mean, "std": sim.std, "std_error": sim.std_error,
                           "replications": args.replications, "seed": args.seed,
                           "sample_plan": sim.plan.to_dict()}, indent=2) + "\n"
    elif args.format == "csv":
        text = _csv(sim.plan.rows())
    else:
        text = (f"replications: {args.replications}\nmean cost:    {sim.mean:.10g}\n"
                f"std dev:      {sim.std:.10g}\nstd error:    {sim.std_error:.10g}\nsample plan:\n")
        text += _plan_table(sim.plan)
    _emit(text, args.output)
    return EXIT_OK


def _bench_config(args) -> BenchConfig:
    data = _read_json(args.input) if args.input else {}
    if args.seed_given:
        data["seed"] = args.seed
    try:
        return BenchConfig.from_dict(data)
    except (TypeError, ValueError) as e:
        raise CliError(f"invalid bench config: {e}", EXIT_INVALID, "invalid_input")


def _write_report(report: BenchReport, args) -> int:
    if args.output:
        out = Path(args.output)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "rows.csv").write_text(report.rows_csv())
            (out / "timings.csv").write_text(report.timings_csv())
            (out / "summary.csv").write_text(report.summary_csv())
            (out / "report.json").write_text(report.to_json() + "\n")
        except OSError as e:
            raise CliError(f"cannot write report to {out}: {e.strerror or e}", EXIT_IO, "io_error")
    if args.format == "json":
        sys.stdout.write(report.to_json() + "\n")
    elif args.format == "csv":
        sys.stdout.write(report.rows_csv())
    else:
        sys.stdout.write(_summary_table(report.summary))
    for v in report.violations:
        print(f"violation: {v}", file=sys.stderr)
    return EXIT_INVALID if report.violations else EXIT_OK


def _summary_table(summary: list[dict]) -> str:
    if not summary:
        return ""
    keys = list(summary[0])
    for s in summary[1:]:
        keys.extend(k for k in s if k not in keys)

    def fmt(v):
        if v is None:
            return "-"
        if isinstance(v, float):
            return f"{v:.4g}"
        return str(v)

    cells = [[fmt(s.get(k)) for k in keys] for s in summary]
    widths = [max(len(k), *(len(r[i]) for r in cells)) for i, k in enumerate(keys)]
    lines = ["  ".join(k.rjust(w) for k, w in zip(keys, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


def cmd_bench2(args) -> int:
    return _write_report(run_two_stage_bench(_bench_config(args)), args)


def cmd_benchm(args) -> int:
    return _write_report(run_multistage_bench(_bench_config(args)), args)


def cmd_export_milp(args) -> int:
    inst = _load_instance(args.input)
    _emit(write_lp(linearize(inst)), args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    inst = _load_instance(args.input, check=False)
    findings = validate_instance(inst)
    if args.format == "json":
        text = json.dumps([{"severity": f.severity, "component": f.component, "message": f.message}
                           for f in findings], indent=2) + "\n"
    else:
        text = "".join(f"{f}\n" for f in findings) or "ok\n"
    _emit(text, args.output)
    return EXIT_INVALID if has_errors(findings) else EXIT_OK


def load_case(name: str, cm_cost: float | None = None) -> SystemInstance:
    with resources.files("cbmopt").joinpath(f"data/{name}.json").open() as f:
        data = json.load(f)
    if cm_cost is not None:
        for c in data["components"]:
            c["cm_cost"] = float(cm_cost)
    return instance_from_dict(data)


def run_case(name: str, cm_cost: float | None = None, seed: int = 0, config: Algo2Config | None = None):
    """One rolling-horizon sample path from simulated initial working states.

    Returns (instance with initial states, standalone thresholds, plan, standalone actions per stage).
    """
    inst = load_case(name, cm_cost)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    start = tuple(int(g) for g in rng.integers(1, inst.m, size=inst.n))
    inst = inst.with_states(start)
    thresholds = [standalone_decision(c, inst.setup_cost).threshold_state for c in inst.components]
    sim = simulate_rolling_horizon(inst, 1, seed, config or Algo2Config(seed=seed))
    standalone = []
    for s in sim.plan.stages:
        if s.stage == inst.horizon:
            standalone.append(second_stage_policy(s.states, inst.m).actions())
            continue
        standalone.append(["cm" if g == inst.m else ("pm" if g >= th else "none")
                           for g, th in zip(s.states, thresholds)])
    return inst, thresholds, sim.plan, standalone


_ACTION_LABEL = {"none": "no action", "pm": "PM", "cm": "CM"}


def _case_table(inst, thresholds, plan, standalone) -> str:
    ids = [c.id for c in inst.components]
    distinct = sorted(set(thresholds))
    xi = str(distinct[0]) if len(distinct) == 1 else ",".join(map(str, thresholds))

    def cell(g, a, alone):
        mark = "*" if a != alone else " "
        return f"{g:>2} {_ACTION_LABEL[a]:<9}{mark}"

    lines = [f"standalone PM threshold (xi*): {xi}"]
    if inst.n <= inst.horizon:
        lines.append("t\\i " + "".join(f"{i:<14}" for i in ids) + "xi*")
        for s, alone in zip(plan.stages, standalone):
            row = "".join(cell(g, a, al) + " " for g, a, al in zip(s.states, s.decision.actions(), alone))
            lines.append(f"{s.stage:<4}" + row + (xi if s.stage == 1 else ""))
    else:
        lines.append("i\\t " + "".join(f"{s.stage:<14}" for s in plan.stages))
        for k, i in enumerate(ids):
            row = "".join(cell(s.states[k], s.decision.actions()[k], alone[k]) + " "
                          for s, alone in zip(plan.stages, standalone))
            lines.append(f"{i:<4}" + row)
    lines.append(f"total cost of this path: {plan.total_cost:.10g}")
    lines.append("* decision differs from the standalone threshold rule (no economic dependence)")
    return "\n".join(lines) + "\n"


def cmd_case(args) -> int:
    if args.cm is not None and args.cm <= 0:
        raise CliError("--cm must be positive", EXIT_INVALID, "invalid_input")
    inst, thresholds, plan, standalone = run_case(args.name, args.cm, args.seed, _algo2_config(args))
    if args.format == "json":
        text = json.dumps({"case": args.name, "setup_cost": inst.setup_cost,
                           "cm_cost": inst.components[0].cm_cost, "seed": args.seed,
                           "xi_star": thresholds, "plan": plan.to_dict(),
                           "standalone_actions": standalone}, indent=2) + "\n"
    elif args.format == "csv":
        rows = plan.rows()
        for r in rows:
            r["xi_star"] = thresholds[r["component"] - 1]
            r["standalone_action"] = standalone[r["stage"] - 1][r["component"] - 1]
        text = _csv(rows)
    else:
        text = _case_table(inst, thresholds, plan, standalone)
    _emit(text, args.output)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cbmopt", description="Condition-based maintenance planning with a shared setup cost.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="write the result here instead of stdout")
    common.add_argument("--seed", type=int, default=None, help=f"random seed (default: ${SEED_ENV} or 0)")
    common.add_argument("--format", choices=("json", "csv", "table"), default="table")
    common.add_argument("--error-json", action="store_true", help="report errors as JSON on stderr")
    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--J", type=int, default=None, help="Algorithm 2 cardinality cap")
    solver.add_argument("--M", type=int, default=None, help="Algorithm 2 candidate count")

    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve2", parents=[common, solver], help="optimal two-stage partition")
    s.add_argument("--input", "-i", required=True)
    s.add_argument("--trace", action="store_true", help="include the search trace")
    s.set_defaults(func=cmd_solve2)

    s = sub.add_parser("solvem", parents=[common], help="exact multi-stage value (small instances)")
    s.add_argument("--input", "-i", required=True)
    s.set_defaults(func=cmd_solvem)

    s = sub.add_parser("simulate", parents=[common, solver], help="Monte Carlo cost of the rolling-horizon policy")
    s.add_argument("--input", "-i", required=True)
    s.add_argument("--replications", type=int, default=1000)
    s.set_defaults(func=cmd_simulate)

    for name, fn, what in (("bench2", cmd_bench2, "two-stage benchmark"),
                           ("benchm", cmd_benchm, "multi-stage benchmark")):
        s = sub.add_parser(name, parents=[common], help=what)
        s.add_argument("--input", "-i", help="bench config JSON (defaults apply when omitted)")
        s.set_defaults(func=fn)

    s = sub.add_parser("export-milp", parents=[common], help="write the linearized two-stage model in LP format")
    s.add_argument("--input", "-i", required=True)
    s.set_defaults(func=cmd_export_milp)

    s = sub.add_parser("validate", parents=[common], help="check an instance file")
    s.add_argument("--input", "-i", required=True)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("case", parents=[common, solver], help="run a bundled case study")
    s.add_argument("name", choices=("wind", "pipeline"))
    s.add_argument("--cm", type=float, default=None, help="override the CM cost")
    s.set_defaults(func=cmd_case)
    return p


def _report_error(args, err: CliError) -> int:
    if getattr(args, "error_json", False):
        print(json.dumps({"error": err.kind, "message": str(err), "exit_code": err.code}), file=sys.stderr)
    else:
        print(f"cbmopt: error: {err}", file=sys.stderr)
    return err.code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.seed_given = args.seed is not None
        if args.seed is None:
            args.seed = _default_seed()
        if getattr(args, "replications", 1) < 1:
            raise CliError("--replications must be >= 1", EXIT_INVALID, "invalid_input")
        try:
            return args.func(args)
        except GuardExceeded as e:
            raise CliError(str(e), EXIT_GUARD, "guard_exceeded")
        except (StructuralError, ValueError) as e:
            raise CliError(str(e), EXIT_INVALID, "invalid_input")
        except OSError as e:
            raise CliError(str(e), EXIT_IO, "io_error")
    except CliError as e:
        return _report_error(args, e)


if __name__ == "__main__":
    sys.exit(main())
