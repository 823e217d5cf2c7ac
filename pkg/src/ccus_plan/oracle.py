"""Brute-force reference optimum for tiny MILPs.

Integer domains are first narrowed by activity-based bound propagation, then
every integer assignment is enumerated in lexicographic order of variable
handles and the remaining LP is solved through :func:`ccus_plan.milp.solve`
with the integers pinned.  No pruning, no sampling.
"""
from __future__ import annotations

import dataclasses
import itertools
import math
import time
from dataclasses import dataclass
from typing import Any

import numpy as np

from .milp import INFEASIBLE, OPTIMAL, MilpModel, SolverFailure, SolverOptions, solve

DEFAULT_BUDGET = 4096


class BudgetExceeded(RuntimeError):
    def __init__(self, count: int, limit: int):
        super().__init__(f"{count} integer assignments exceed the oracle budget of {limit}")
        self.count = count
        self.limit = limit


class InfeasibleBounds(ValueError):
    pass


@dataclass(frozen=True)
class OracleReport:
    best_objective: float | None
    best_assignment: dict[str, int]
    enumerated: int
    feasible: int
    wall_time: float
    agreement: bool | None = None
    abs_delta: float | None = None
    rel_delta: float | None = None
    compared_objective: float | None = None

    @property
    def optimal(self) -> bool:
        return self.best_objective is not None


def _row_tighten(idx, coef, lo_row, hi_row, lb, ub, is_int) -> bool:
    """One propagation step on a single row; returns True when any bound moved."""
    # Minimum / maximum activity contributions of each term.
    cmin = np.where(coef > 0, coef * lb[idx], coef * ub[idx])
    cmax = np.where(coef > 0, coef * ub[idx], coef * lb[idx])
    inf_min = ~np.isfinite(cmin)
    inf_max = ~np.isfinite(cmax)
    n_inf_min, n_inf_max = int(inf_min.sum()), int(inf_max.sum())
    sum_min = float(cmin[~inf_min].sum())
    sum_max = float(cmax[~inf_max].sum())
    changed = False
    for k, j in enumerate(idx):
        a = coef[k]
        # residual activity bounds of the other terms
        if n_inf_min - int(inf_min[k]) == 0:
            rest_min = sum_min - (0.0 if inf_min[k] else cmin[k])
        else:
            rest_min = -math.inf
        if n_inf_max - int(inf_max[k]) == 0:
            rest_max = sum_max - (0.0 if inf_max[k] else cmax[k])
        else:
            rest_max = math.inf
        # lo_row <= a x + rest <= hi_row
        new_lo, new_hi = -math.inf, math.inf
        if a > 0:
            if math.isfinite(hi_row) and math.isfinite(rest_min):
                new_hi = (hi_row - rest_min) / a
            if math.isfinite(lo_row) and math.isfinite(rest_max):
                new_lo = (lo_row - rest_max) / a
        else:
            if math.isfinite(hi_row) and math.isfinite(rest_min):
                new_lo = (hi_row - rest_min) / a
            if math.isfinite(lo_row) and math.isfinite(rest_max):
                new_hi = (lo_row - rest_max) / a
        if is_int[j]:
            new_lo = math.ceil(new_lo - 1e-6) if math.isfinite(new_lo) else new_lo
            new_hi = math.floor(new_hi + 1e-6) if math.isfinite(new_hi) else new_hi
        if math.isfinite(new_lo) and new_lo > lb[j] + 1e-7 * max(1.0, abs(new_lo)):
            lb[j] = new_lo
            changed = True
        if math.isfinite(new_hi) and new_hi < ub[j] - 1e-7 * max(1.0, abs(new_hi)):
            ub[j] = new_hi
            changed = True
        if lb[j] > ub[j] + 1e-6 * max(1.0, abs(lb[j])):
            raise InfeasibleBounds(f"bounds of variable {j} cross after propagation: [{lb[j]}, {ub[j]}]")
    return changed


def tighten_bounds(model: MilpModel, max_passes: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Feasibility-based bound tightening; returns implied (lb, ub) without touching the model.

    Continuous bounds are only relaxed-safe outputs of interval arithmetic; integer
    bounds are rounded inward with a small tolerance, so every feasible point of the
    model remains inside the returned box.
    """
    m = model.compile()
    lb, ub = m.lb.astype(float).copy(), m.ub.astype(float).copy()
    is_int = m.integrality.astype(bool)
    A = m.A.tocsr()
    rows = [(A.indices[A.indptr[i]:A.indptr[i + 1]], A.data[A.indptr[i]:A.indptr[i + 1]]) for i in range(A.shape[0])]
    for _ in range(max_passes):
        any_change = False
        for i, (idx, coef) in enumerate(rows):
            if len(idx) and _row_tighten(idx, coef, m.row_lo[i], m.row_hi[i], lb, ub, is_int):
                any_change = True
        if not any_change:
            break
    np.minimum(lb, ub, out=lb, where=lb > ub)  # clamp sub-tolerance crossings
    return lb, ub


def integer_domains(model: MilpModel, tighten: bool = True) -> list[tuple[int, range]]:
    """(handle, value range) for every integer variable, in handle order."""
    lb, ub = tighten_bounds(model) if tighten else (model.compile().lb, model.compile().ub)
    out = []
    for h in model.integer_handles:
        lo, hi = lb[h], ub[h]
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"integer variable {model.variables[h].name!r} has an unbounded domain")
        out.append((h, range(int(round(lo)), int(round(hi)) + 1)))
    return out


def count_assignments(domains) -> int:
    return math.prod(len(r) for _, r in domains)


def enumerate_optimum(
    model: MilpModel,
    integer_budget_limit: int = DEFAULT_BUDGET,
    options: SolverOptions | None = None,
    tighten: bool = True,
) -> OracleReport:
    opts = options or SolverOptions(polish=False)
    start = time.perf_counter()
    try:
        domains = integer_domains(model, tighten=tighten)
    except InfeasibleBounds:
        return OracleReport(None, {}, 0, 0, time.perf_counter() - start)
    count = count_assignments(domains)
    if count > integer_budget_limit:
        raise BudgetExceeded(count, integer_budget_limit)
    handles = [h for h, _ in domains]
    best, best_vals = None, None
    enumerated = feasible = 0
    for combo in itertools.product(*(r for _, r in domains)):
        enumerated += 1
        res = solve(model, opts, fixed=dict(zip(handles, combo)), relax=True)
        if res.status == OPTIMAL:
            feasible += 1
            if best is None or res.objective_value < best:
                best, best_vals = res.objective_value, combo
        elif res.status != INFEASIBLE:
            raise SolverFailure(f"LP for assignment {combo} ended with status {res.status}: {res.message}")
    assignment = {model.variables[h].name: int(v) for h, v in zip(handles, best_vals)} if best_vals else {}
    return OracleReport(best, assignment, enumerated, feasible, time.perf_counter() - start)


def _objective_of(solution: Any) -> float:
    if isinstance(solution, (int, float)):
        return float(solution)
    return float(solution.objective)


def compare(report: OracleReport, objective: float | None) -> OracleReport:
    if report.best_objective is None or objective is None:
        # both sides infeasible agree; deltas need two optima
        return dataclasses.replace(report, agreement=report.best_objective is None and objective is None,
                                   compared_objective=objective)
    delta = abs(report.best_objective - objective)
    rel = delta / max(1.0, abs(report.best_objective))
    ok = delta <= max(1e-6, 1e-6 * abs(report.best_objective))
    return dataclasses.replace(report, agreement=ok, abs_delta=delta, rel_delta=rel, compared_objective=objective)


def verify_solution(
    model: MilpModel,
    solution: Any,
    integer_budget_limit: int = DEFAULT_BUDGET,
    options: SolverOptions | None = None,
) -> OracleReport:
    """Oracle optimum of ``model`` compared with a solution (or a bare objective value)."""
    report = enumerate_optimum(model, integer_budget_limit, options)
    return compare(report, _objective_of(solution))
