"""Tax x price sensitivity sweep (13 x 9 grid by default) with a monotonicity check.

    python scripts/run_sensitivity.py --instance toy3-ccus --jobs 4 --out out/sweep
"""
from __future__ import annotations

import argparse

import numpy as np

from ccus_plan.instance import resolve_instance
from ccus_plan.sweep import emit_reports, run_sweep


def monotonicity_violations(grid, tol: float) -> int:
    cost = np.array(grid.matrix("total_cost"), dtype=float)
    slack = tol * np.maximum(1.0, np.abs(cost))
    up_tax = np.diff(cost, axis=0) < -2 * slack[1:, :]
    up_price = np.diff(cost, axis=1) > 2 * slack[:, 1:]
    return int(up_tax.sum() + up_price.sum())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instance", default="toy3-ccus")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="out/sweep")
    args = ap.parse_args()

    taxes = np.linspace(0, 120, 13)
    prices = np.linspace(0, 80, 9)
    grid = run_sweep(resolve_instance(args.instance), taxes, prices, jobs=args.jobs)
    print("y_sum (rows: tax, columns: price)")
    print("        " + " ".join(f"{p:5.0f}" for p in prices))
    for t, row in zip(taxes, grid.matrix("y_sum")):
        print(f"{t:6.0f}  " + " ".join(f"{v if v is not None else '-':>5}" for v in row))
    print(f"monotonicity violations: {monotonicity_violations(grid, 1e-4)}")
    for p in emit_reports(grid, args.out):
        print(f"wrote {p}")


if __name__ == "__main__":
    main()
