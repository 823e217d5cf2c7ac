"""Tax x price sensitivity sweeps and CSV reports."""
from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .engine import DETERMINISTIC, NO_CCUS, PlanningError, PlanningSolution, solve_deterministic, solve_no_ccus
from .instance import PlanningInstance
from .milp import SWEEP_OPTIONS, SolverOptions

log = logging.getLogger(__name__)

CARBON_KEYS = ("emission", "capture", "storage", "utilization")
SWEEP_METRICS = ("status", "invest_total", "total_cost", "y_sum", *CARBON_KEYS, "gap", "wall_time")

BREAKDOWN_ROWS = (
    ("investment", "invest_ccus"),
    ("investment", "invest_siting"),
    ("investment", "investment_total"),
    ("operation", "ope_gs"),
    ("operation", "ope_gen"),
    ("operation", "ope_ptg"),
    ("operation", "capture"),
    ("operation", "storage"),
    ("operation", "penalty"),
    ("revenue", "revenue"),
    ("operation", "operation_total"),
    ("total", "total"),
    ("carbon_volume_ton", "emission"),
    ("carbon_volume_ton", "capture"),
    ("carbon_volume_ton", "storage"),
    ("carbon_volume_ton", "utilization"),
)


def fmt(x) -> str:
    """Full-precision, locale-free number formatting."""
    if isinstance(x, bool) or x is None:
        return "" if x is None else str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


# ---------------------------------------------------------------- sweep


@dataclass(frozen=True)
class CellResult:
    tax: float
    price: float
    status: str
    invest_total: float | None = None
    total_cost: float | None = None
    y_sum: int | None = None
    emission: float | None = None
    capture: float | None = None
    storage: float | None = None
    utilization: float | None = None
    gap: float | None = None
    wall_time: float | None = None

    @property
    def ok(self) -> bool:
        return self.total_cost is not None


@dataclass(frozen=True)
class SweepGrid:
    tax_axis: tuple[float, ...]
    price_axis: tuple[float, ...]
    cells: tuple[CellResult, ...]  # row-major: tax outer, price inner
    mode: str = DETERMINISTIC

    def __post_init__(self):
        if len(self.cells) != len(self.tax_axis) * len(self.price_axis):
            raise ValueError("sweep grid is not rectangular")

    def cell(self, i: int, j: int) -> CellResult:
        return self.cells[i * len(self.price_axis) + j]

    def matrix(self, metric: str) -> list[list]:
        return [[getattr(self.cell(i, j), metric) for j in range(len(self.price_axis))] for i in range(len(self.tax_axis))]


def check_axis(name: str, axis: Sequence[float]) -> tuple[float, ...]:
    axis = tuple(float(a) for a in axis)
    if not axis:
        raise ValueError(f"{name} is empty")
    if any(b <= a for a, b in zip(axis, axis[1:])):
        raise ValueError(f"{name} must be strictly increasing")
    return axis


def _solve_cell(args) -> CellResult:
    inst, mode, tax, price, options = args
    try:
        if mode == NO_CCUS:
            sol = solve_no_ccus(inst, tax, options)
        else:
            sol = solve_deterministic(inst, tax, price, options)
    except PlanningError as exc:
        return CellResult(tax, price, exc.status)
    except Exception as exc:  # isolate the cell, keep the sweep alive
        log.warning("sweep cell (%s, %s) failed: %s", tax, price, exc)
        return CellResult(tax, price, f"error: {type(exc).__name__}")
    vols = sol.carbon_volumes
    return CellResult(
        tax, price, sol.solver["status"],
        invest_total=sol.cost_breakdown.investment,
        total_cost=sol.cost_breakdown.total,
        y_sum=sol.y_sum,
        gap=sol.solver["gap"],
        wall_time=sol.solver["wall_time"],
        **{k: vols[k] for k in CARBON_KEYS},
    )


def run_sweep(
    instance: PlanningInstance,
    tax_axis: Sequence[float],
    price_axis: Sequence[float],
    mode: str = DETERMINISTIC,
    jobs: int = 1,
    options: SolverOptions = SWEEP_OPTIONS,
) -> SweepGrid:
    if mode not in (DETERMINISTIC, NO_CCUS):
        raise ValueError(f"sweeps support modes {DETERMINISTIC!r} and {NO_CCUS!r}, not {mode!r}")
    taxes, prices = check_axis("tax axis", tax_axis), check_axis("price axis", price_axis)
    tasks = [(instance, mode, t, p, options) for t in taxes for p in prices]
    if jobs <= 1:
        cells = [_solve_cell(a) for a in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, os.cpu_count() or 1)) as pool:
            cells = list(pool.map(_solve_cell, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    return SweepGrid(taxes, prices, tuple(cells), mode)


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class DailyCarbonProfile:
    case: str
    emission: tuple[float, ...]
    capture: tuple[float, ...]
    storage: tuple[float, ...]
    utilization: tuple[float, ...]

    @classmethod
    def from_solution(cls, case: str, sol: PlanningSolution) -> "DailyCarbonProfile":
        prof = sol.carbon_profile()
        return cls(case, *(tuple(prof[k]) for k in CARBON_KEYS))

    @property
    def hours(self) -> range:
        return range(1, len(self.emission) + 1)


def _write(path: Path, rows: list[list]) -> Path:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def breakdown_rows(cases: Mapping[str, PlanningSolution]) -> list[list]:
    rows = [["category", "index", *cases]]
    for cat, key in BREAKDOWN_ROWS:
        row = [cat, key]
        for sol in cases.values():
            b = sol.cost_breakdown
            if key == "investment_total":
                val = b.investment
            elif key == "operation_total":
                val = b.operation
            elif cat == "carbon_volume_ton":
                val = sol.carbon_volumes[key]
            else:
                val = b.total if key == "total" else getattr(b, key)
            row.append(fmt(float(val)))
        rows.append(row)
    return rows


def profile_rows(cases: Mapping[str, PlanningSolution]) -> list[list]:
    rows = [["hour", "case", *CARBON_KEYS]]
    for case, sol in cases.items():
        p = DailyCarbonProfile.from_solution(case, sol)
        for k, t in enumerate(p.hours):
            rows.append([t, case, *(fmt(float(getattr(p, key)[k])) for key in CARBON_KEYS)])
    return rows


def sweep_rows(grid: SweepGrid) -> list[list]:
    rows = [["tax", "price", "metric", "value"]]
    for i, tax in enumerate(grid.tax_axis):
        for j, price in enumerate(grid.price_axis):
            c = grid.cell(i, j)
            for metric in SWEEP_METRICS:
                rows.append([fmt(tax), fmt(price), metric, fmt(getattr(c, metric))])
    return rows


def emit_reports(result: PlanningSolution | Mapping[str, PlanningSolution] | SweepGrid, out_dir: str | Path) -> list[Path]:
    """Write breakdown.csv + carbon_profile.csv for solutions, sweep.csv for a sweep."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(result, SweepGrid):
        return [_write(out / "sweep.csv", sweep_rows(result))]
    cases = {result.mode: result} if isinstance(result, PlanningSolution) else dict(result)
    return [_write(out / "breakdown.csv", breakdown_rows(cases)), _write(out / "carbon_profile.csv", profile_rows(cases))]
