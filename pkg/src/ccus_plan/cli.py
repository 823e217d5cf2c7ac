"""Command-line front end.

Exit codes: 0 success, 1 usage or validation error, 2 solver failure, 3 oracle disagreement.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import engine
from .engine import Box, PlanningError, PlanningSolution, PreconditionError, ScenarioGrid
from .instance import PlanningInstance, instance_from_dict, instance_to_dict, resolve_instance
from .milp import AdapterUnavailable, SolverFailure, SolverOptions, export_lp
from .oracle import BudgetExceeded, verify_solution
from .sweep import emit_reports, run_sweep

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_DISAGREE = 0, 1, 2, 3
MODES = {"no-ccus": engine.NO_CCUS, "det": engine.DETERMINISTIC, "stoch": engine.STOCHASTIC, "robust": engine.ROBUST}
SOLUTION_FORMAT = "ccus-plan-solution/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------- argument parsing helpers


def parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"bad range {text!r}; expected LO:HI") from None
    if lo > hi:
        raise UsageError(f"bad range {text!r}: LO > HI")
    return lo, hi


def parse_box(text: str) -> Box:
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"bad box {text!r}; expected TAXLO:TAXHI,PRICELO:PRICEHI")
    return Box(parse_range(parts[0]), parse_range(parts[1]))


def parse_grid(text: str) -> tuple[int, int]:
    try:
        n, m = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"bad grid {text!r}; expected NxM") from None
    if n < 1 or m < 1:
        raise UsageError("grid dimensions must be positive")
    return n, m


def parse_axis(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:step`` (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [start + k * step for k in range(n)]
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad axis {text!r}; expected a,b,c or START:STOP:STEP") from None


def _options(args) -> SolverOptions:
    return SolverOptions(gap_tol=args.gap, time_limit=getattr(args, "time_limit", None))


def _instance(args) -> PlanningInstance:
    inst = resolve_instance(args.instance)
    if args.day_weight is not None:
        inst = inst.with_economics(day_weight=args.day_weight)
    return inst


def _model_params(args) -> dict[str, Any]:
    mode = MODES[args.mode]
    params: dict[str, Any] = {"mode": mode}
    if mode in (engine.NO_CCUS, engine.DETERMINISTIC):
        params["tax"] = args.tax
        if mode == engine.DETERMINISTIC:
            params["price"] = args.price
    box = parse_box(args.box) if args.box else Box(engine.TAX_RANGE, engine.PRICE_RANGE)
    if mode == engine.STOCHASTIC:
        n, m = parse_grid(args.grid)
        g = ScenarioGrid.even(n, m, box.tax_range, box.price_range)
        params.update(tax_points=list(g.tax_points), price_points=list(g.price_points),
                      probabilities=[list(r) for r in g.probabilities])
    if mode == engine.ROBUST:
        params.update(tax_range=list(box.tax_range), price_range=list(box.price_range), method=args.robust_method)
    return params


def _grid_of(params) -> ScenarioGrid:
    return ScenarioGrid(tuple(params["tax_points"]), tuple(params["price_points"]),
                        tuple(tuple(r) for r in params["probabilities"]))


def run_mode(inst: PlanningInstance, params: dict[str, Any], options: SolverOptions) -> PlanningSolution:
    mode = params["mode"]
    if mode == engine.NO_CCUS:
        return engine.solve_no_ccus(inst, params["tax"], options)
    if mode == engine.DETERMINISTIC:
        return engine.solve_deterministic(inst, params["tax"], params["price"], options)
    if mode == engine.STOCHASTIC:
        return engine.solve_stochastic(inst, _grid_of(params), options)
    box = Box(tuple(params["tax_range"]), tuple(params["price_range"]))
    return engine.solve_robust(inst, box, params.get("method", "corner"), options)


def build_mode_model(inst: PlanningInstance, params: dict[str, Any]):
    """The MILP a mode solves; robust models use the vertex epigraph form, which holds for any first stage."""
    mode = params["mode"]
    if mode == engine.NO_CCUS:
        return engine.build_no_ccus_model(inst, params["tax"]).model
    if mode == engine.DETERMINISTIC:
        return engine.build_deterministic_model(inst, params["tax"], params["price"]).model
    if mode == engine.STOCHASTIC:
        return engine.build_stochastic_model(inst, _grid_of(params)).model
    if mode == engine.ROBUST:
        return engine.build_robust_model(inst, Box(tuple(params["tax_range"]), tuple(params["price_range"]))).model
    raise ValueError(f"unknown mode {mode!r}")


def solution_document(sol: PlanningSolution, params: dict[str, Any]) -> dict[str, Any]:
    return {
        "format": SOLUTION_FORMAT,
        "params": params,
        "objective": sol.objective,
        "first_stage": sol.first_stage,
        "cost_breakdown": sol.cost_breakdown.as_dict(),
        "carbon_volumes": sol.carbon_volumes,
        "worst_corner": list(sol.worst_corner) if sol.worst_corner else None,
        "solver": sol.solver,
        "weights": sol.weights,
        "schedules": sol.schedules,
        "instance": instance_to_dict(sol.instance),
    }


# ---------------------------------------------------------------- subcommands


def cmd_solve(args) -> int:
    inst = _instance(args)
    params = _model_params(args)
    sol = run_mode(inst, params, _options(args))
    out = Path(args.out)
    paths = emit_reports(sol, out)
    doc = json.dumps(solution_document(sol, params), indent=1, sort_keys=True)
    (out / "solution.json").write_text(doc + "\n", encoding="utf-8")
    b = sol.cost_breakdown
    print(f"mode={sol.mode} status={sol.solver['status']} objective={sol.objective!r} total={b.total!r}")
    print(f"y={sol.first_stage['y']} s={sol.first_stage['s']}")
    if sol.worst_corner is not None:
        print(f"worst corner: tax={sol.worst_corner[0]:g} price={sol.worst_corner[1]:g}")
    for p in [*paths, out / "solution.json"]:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    inst = _instance(args)
    grid = run_sweep(inst, parse_axis(args.tax_axis), parse_axis(args.price_axis), mode=MODES[args.mode],
                     jobs=args.jobs, options=_options(args))
    paths = emit_reports(grid, args.out)
    failed = sum(not c.ok for c in grid.cells)
    print(f"{len(grid.cells)} cells, {failed} without a solution")
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        doc = json.loads(Path(args.solution).read_text(encoding="utf-8"))
        if doc.get("format") != SOLUTION_FORMAT:
            raise UsageError(f"{args.solution}: not a solution file")
        inst = instance_from_dict(doc["instance"])
        params = doc["params"]
        objective = float(doc["objective"])
        breakdown_total = float(doc["cost_breakdown"]["total"])
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"{args.solution}: malformed solution file ({exc})") from None
    model = build_mode_model(inst, params)
    report = verify_solution(model, objective, integer_budget_limit=args.budget)
    consistent = abs(breakdown_total - objective) <= max(1e-6, 1e-6 * abs(objective))
    print(f"oracle objective={report.best_objective!r} claimed={objective!r} "
          f"abs_delta={report.abs_delta!r} assignments={report.enumerated} feasible={report.feasible}")
    if not consistent:
        print(f"breakdown total {breakdown_total!r} does not match objective")
    ok = bool(report.agreement) and consistent
    print("AGREE" if ok else "DISAGREE")
    return EXIT_OK if ok else EXIT_DISAGREE


def cmd_export_lp(args) -> int:
    inst = _instance(args)
    text = export_lp(build_mode_model(inst, _model_params(args)))
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", default="toy3-ccus", help="builtin name (toy3, toy3-ccus, mesh6) or JSON path")
    p.add_argument("--mode", choices=sorted(MODES), default="det")
    p.add_argument("--tax", type=float, default=50.0, help="carbon tax $/ton (no-ccus, det)")
    p.add_argument("--price", type=float, default=40.0, help="carbon price $/ton (det)")
    p.add_argument("--grid", default="5x5", help="stochastic grid NxM, evenly spaced over the box")
    p.add_argument("--box", default=None, help="TAXLO:TAXHI,PRICELO:PRICEHI (default 1:120,1:80)")
    p.add_argument("--robust-method", choices=("corner", "vertex_epigraph"), default="corner")
    p.add_argument("--day-weight", type=float, default=None, help="override days/year scaling of operation cost")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ccus-plan", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one planning mode and write reports")
    _add_model_flags(p)
    p.add_argument("--gap", type=float, default=1e-6)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="tax x price sensitivity sweep")
    p.add_argument("--instance", default="toy3-ccus")
    p.add_argument("--mode", choices=("det", "no-ccus"), default="det")
    p.add_argument("--tax-axis", default="0:120:10")
    p.add_argument("--price-axis", default="0:80:10")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--gap", type=float, default=1e-4)
    p.add_argument("--day-weight", type=float, default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check a solution.json against the enumeration oracle")
    p.add_argument("solution")
    p.add_argument("--budget", type=int, default=4096)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-lp", help="write the model of a mode in LP format")
    _add_model_flags(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_export_lp)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (PlanningError, SolverFailure, AdapterUnavailable) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except BudgetExceeded as exc:
        print(f"cannot verify: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, KeyError, OSError, PreconditionError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
