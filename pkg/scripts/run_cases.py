"""Solve the four planning cases on one instance and write the comparison reports.

    python scripts/run_cases.py --instance toy3-ccus --out out/cases
"""
from __future__ import annotations

import argparse

from ccus_plan.engine import Box, ScenarioGrid, solve_deterministic, solve_no_ccus, solve_robust, solve_stochastic
from ccus_plan.instance import resolve_instance
from ccus_plan.sweep import emit_reports


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instance", default="toy3-ccus")
    ap.add_argument("--tax", type=float, default=50.0)
    ap.add_argument("--price", type=float, default=40.0)
    ap.add_argument("--grid", type=int, default=5, help="points per axis of the stochastic grid")
    ap.add_argument("--out", default="out/cases")
    args = ap.parse_args()

    inst = resolve_instance(args.instance)
    cases = {
        "no-ccus": solve_no_ccus(inst, args.tax),
        "deterministic": solve_deterministic(inst, args.tax, args.price),
        "stochastic": solve_stochastic(inst, ScenarioGrid.even(args.grid, args.grid)),
        "robust": solve_robust(inst, Box((1.0, 120.0), (1.0, 80.0))),
    }
    for name, sol in cases.items():
        b = sol.cost_breakdown
        print(f"{name:14s} total={b.total:.6f} M$  invest={b.investment:.6f}  y={sol.first_stage['y']}")
    print(f"robust worst corner: {cases['robust'].worst_corner}")
    for p in emit_reports(cases, args.out):
        print(f"wrote {p}")


if __name__ == "__main__":
    main()
