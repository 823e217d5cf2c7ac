"""Assembly and solution of the four planning problems.

* no-CCUS operation (gas + electric blocks and emissions, penalty at the given tax)
* deterministic planning at one (tax, price) point
* two-stage stochastic planning, extensive form over a probability-weighted grid
* two-stage robust planning over a box, by the worst corner or by a vertex epigraph

All of them share one builder: a set of operating copies (one per scenario)
hanging off a single first stage of PtG module counts ``y`` and siting binaries ``s``.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .formulation import (
    CCPP_SYMBOLS,
    INVEST_GROUPS,
    OPERATION_GROUPS,
    CostTerms,
    FirstStage,
    VariableMap,
    build_cost_terms,
    build_operation,
    declare_first_stage,
)
from .instance import PlanningInstance
from .milp import OPTIMAL, MilpModel, SolverOptions, SolveResult, solve

log = logging.getLogger(__name__)

NO_CCUS, DETERMINISTIC, STOCHASTIC, ROBUST = "no-ccus", "deterministic", "stochastic", "robust"
TAX_RANGE = (1.0, 120.0)
PRICE_RANGE = (1.0, 80.0)


class PlanningError(RuntimeError):
    """The solver returned no usable point; ``status`` carries the solver status."""

    def __init__(self, status: str, message: str = ""):
        super().__init__(f"planning problem not solved: {status} {message}".strip())
        self.status = status


class InfeasibleRecourse(PlanningError):
    pass


class PreconditionError(ValueError):
    pass


# ---------------------------------------------------------------- uncertainty


@dataclass(frozen=True)
class ScenarioGrid:
    tax_points: tuple[float, ...]
    price_points: tuple[float, ...]
    probabilities: tuple[tuple[float, ...], ...]  # [tax index][price index]
    spacing: str = "explicit"

    def __post_init__(self):
        if not self.tax_points or not self.price_points:
            raise ValueError("scenario grid needs at least one tax and one price point")
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (len(self.tax_points), len(self.price_points)):
            raise ValueError(f"probabilities shape {p.shape} does not match grid")
        if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be >= 0 and sum to 1")

    @classmethod
    def even(cls, n_tax: int = 5, n_price: int = 5, tax_range=TAX_RANGE, price_range=PRICE_RANGE) -> "ScenarioGrid":
        """Equal-probability grid of evenly spaced points including both endpoints."""
        taxes = tuple(float(x) for x in np.linspace(*tax_range, n_tax))
        prices = tuple(float(x) for x in np.linspace(*price_range, n_price))
        w = 1.0 / (n_tax * n_price)
        probs = tuple(tuple(w for _ in prices) for _ in taxes)
        return cls(taxes, prices, probs, spacing=f"even {n_tax}x{n_price} incl. endpoints over {tuple(tax_range)} x {tuple(price_range)}")

    @classmethod
    def single(cls, tax: float, price: float) -> "ScenarioGrid":
        return cls((float(tax),), (float(price),), ((1.0,),), spacing="single point")

    def scenarios(self) -> list[tuple[str, float, float, float]]:
        out = []
        for a, tax in enumerate(self.tax_points):
            for b, price in enumerate(self.price_points):
                out.append((f"s{a + 1}_{b + 1}", tax, price, float(self.probabilities[a][b])))
        return out

    @property
    def mean(self) -> tuple[float, float]:
        p = np.asarray(self.probabilities)
        return float(p.sum(axis=1) @ self.tax_points), float(p.sum(axis=0) @ self.price_points)


@dataclass(frozen=True)
class Box:
    tax_range: tuple[float, float]
    price_range: tuple[float, float]

    def __post_init__(self):
        for name, (lo, hi) in (("tax_range", self.tax_range), ("price_range", self.price_range)):
            if lo > hi:
                raise ValueError(f"{name}: lo > hi")

    def vertices(self) -> list[tuple[float, float]]:
        return sorted(set(itertools.product(self.tax_range, self.price_range)))


UncertaintySpec = ScenarioGrid | Box


# ---------------------------------------------------------------- results


@dataclass(frozen=True)
class CostBreakdown:
    invest_ccus: float = 0.0
    invest_siting: float = 0.0
    ope_gs: float = 0.0
    ope_gen: float = 0.0
    ope_ptg: float = 0.0
    capture: float = 0.0
    storage: float = 0.0
    penalty: float = 0.0
    revenue: float = 0.0

    @property
    def investment(self) -> float:
        return self.invest_ccus + self.invest_siting

    @property
    def operation(self) -> float:
        """Second-stage cost: operation, carbon handling and penalty net of revenue."""
        return self.ope_gs + self.ope_gen + self.ope_ptg + self.capture + self.storage + self.penalty - self.revenue

    @property
    def total(self) -> float:
        return self.investment + self.operation

    @classmethod
    def from_groups(cls, groups: Mapping[str, float]) -> "CostBreakdown":
        kw = {g: float(v) for g, v in groups.items() if g in OPERATION_GROUPS}
        kw["invest_ccus"] = float(groups.get("invest_ptg", 0.0))
        kw["invest_siting"] = float(groups.get("invest_siting", 0.0))
        return cls(**kw)

    def as_dict(self) -> dict[str, float]:
        d = dataclasses.asdict(self)
        d["total"] = self.total
        return d


Schedule = dict[str, dict[str, list[float]]]


@dataclass(frozen=True)
class PlanningSolution:
    mode: str
    instance: PlanningInstance
    params: dict[str, Any]
    first_stage: dict[str, dict[str, int]]
    schedules: dict[str, Schedule]
    weights: dict[str, float]
    cost_breakdown: CostBreakdown
    scenario_costs: dict[str, CostBreakdown]
    objective: float
    solver: dict[str, Any]
    worst_corner: tuple[float, float] | None = None

    @property
    def y_sum(self) -> int:
        return int(sum(self.first_stage.get("y", {}).values()))

    @property
    def carbon_volumes(self) -> dict[str, float]:
        """Yearly tons (day weight applied), probability-weighted over the returned schedules."""
        omega = self.instance.economics.day_weight
        prof = self.carbon_profile()
        return {k: omega * float(sum(v)) for k, v in prof.items()}

    def carbon_profile(self) -> dict[str, list[float]]:
        """Hourly ton/h of released emission, capture, storage and utilization."""
        T = self.instance.horizon
        out = {k: [0.0] * T for k in ("emission", "capture", "storage", "utilization")}
        for label, sched in self.schedules.items():
            w = self.weights[label]
            for t in range(T):
                emi = sum(series[t] for series in sched.get("Q_emi", {}).values())
                cc = sum(series[t] for series in sched.get("Q_cc", {}).values())
                out["emission"][t] += w * (emi - cc)
                out["capture"][t] += w * cc
                out["storage"][t] += w * sum(series[t] for series in sched.get("Q_cs", {}).values())
                out["utilization"][t] += w * sum(series[t] for series in sched.get("Q_cu", {}).values())
        return out


# ---------------------------------------------------------------- model assembly


@dataclass
class BuiltModel:
    model: MilpModel
    mode: str
    with_ccus: bool
    scenarios: list[tuple[str, float, float, float]]  # label, tax, price, probability
    maps: dict[str, VariableMap] = field(default_factory=dict)
    costs: dict[str, CostTerms] = field(default_factory=dict)
    first_stage: FirstStage | None = None
    epigraph: int | None = None

    def invest_terms(self) -> list[tuple[float, int]]:
        if self.first_stage is None:
            return []
        return next(iter(self.costs.values())).terms(INVEST_GROUPS)


def _build(
    inst: PlanningInstance,
    scenarios: Sequence[tuple[str, float, float, float]],
    *,
    mode: str,
    with_ccus: bool,
    combine: str = "expected",
    y_cap: Mapping[str, int] | None = None,
) -> BuiltModel:
    if with_ccus:
        if inst.ptg_technology is None or not inst.siting_candidates:
            raise PreconditionError("with-CCUS planning needs a ptg_technology and at least one siting candidate")
    model = MilpModel(f"{inst.name}:{mode}")
    fs = declare_first_stage(model, inst, dict(y_cap) if y_cap else None) if with_ccus else None
    bm = BuiltModel(model, mode, with_ccus, list(scenarios), first_stage=fs)
    multi = len(scenarios) > 1
    for k, (label, tax, price, _) in enumerate(scenarios):
        tag = f"|{label}" if multi else ""
        vm = build_operation(model, inst, with_ccus=with_ccus, first_stage=fs, tag=tag, first_copy=(k == 0))
        bm.maps[label] = vm
        bm.costs[label] = build_cost_terms(model, inst, vm, tax, price)
    objective = bm.invest_terms()
    if combine == "expected":
        for label, _, _, prob in scenarios:
            objective += bm.costs[label].terms(OPERATION_GROUPS, weight=prob)
    elif combine == "max":
        eta = model.add_variable("recourse_epigraph", lower=-np.inf, upper=np.inf)
        bm.epigraph = eta
        for label, _, _, _ in scenarios:
            model.add_constraint(f"epigraph[{label}]", bm.costs[label].terms(OPERATION_GROUPS) + [(-1.0, eta)], "<=", 0.0)
        objective.append((1.0, eta))
    else:
        raise ValueError(combine)
    model.set_objective(objective)
    return bm


def build_no_ccus_model(inst: PlanningInstance, tax: float) -> BuiltModel:
    return _build(inst, [("base", float(tax), 0.0, 1.0)], mode=NO_CCUS, with_ccus=False)


def build_deterministic_model(inst: PlanningInstance, tax: float, price: float, y_cap=None) -> BuiltModel:
    return _build(inst, [("base", float(tax), float(price), 1.0)], mode=DETERMINISTIC, with_ccus=True, y_cap=y_cap)


def build_stochastic_model(inst: PlanningInstance, grid: ScenarioGrid, y_cap=None) -> BuiltModel:
    return _build(inst, grid.scenarios(), mode=STOCHASTIC, with_ccus=True, y_cap=y_cap)


def build_robust_model(inst: PlanningInstance, box: Box, y_cap=None) -> BuiltModel:
    verts = [(f"v{k + 1}", tax, price, 0.0) for k, (tax, price) in enumerate(box.vertices())]
    return _build(inst, verts, mode=ROBUST, with_ccus=True, combine="max", y_cap=y_cap)


# ---------------------------------------------------------------- extraction


def _hour_position(sym: str) -> int:
    return 1 if sym in ("delta", "phi") else -1


def extract_schedule(inst: PlanningInstance, vm: VariableMap, values: np.ndarray) -> Schedule:
    sched: Schedule = {}
    T = inst.horizon
    for sym, table in vm.table.items():
        pos = _hour_position(sym)
        out: dict[str, list[float]] = {}
        for idx, h in table.items():
            t = idx[pos]
            key = "|".join(str(x) for k, x in enumerate(idx) if k != (pos % len(idx)))
            out.setdefault(key, [0.0] * T)[t - 1] = float(values[h])
        sched[sym] = {k: out[k] for k in sorted(out)}
    return sched


def _first_stage_values(fs: FirstStage | None, values: np.ndarray) -> dict[str, dict[str, int]]:
    if fs is None:
        return {"y": {}, "s": {}}
    return {
        "y": {j: int(round(values[h])) for j, h in sorted(fs.y.items())},
        "s": {f"{m}|{j}": int(round(values[h])) for (m, j), h in sorted(fs.s.items())},
    }


def _check(res: SolveResult) -> None:
    if not res.has_values:
        raise PlanningError(res.status, res.message)


def _solution(
    bm: BuiltModel,
    inst: PlanningInstance,
    res: SolveResult,
    params: dict[str, Any],
    options: SolverOptions,
    *,
    weights: Mapping[str, float],
    breakdown_groups: dict[str, float] | None = None,
    worst_corner=None,
) -> PlanningSolution:
    x = res.values
    per_scenario = {label: bm.costs[label].evaluate(x) for label in bm.maps}
    if breakdown_groups is None:
        breakdown_groups = {g: 0.0 for g in INVEST_GROUPS + OPERATION_GROUPS}
        first = next(iter(per_scenario.values()))
        for g in INVEST_GROUPS:
            breakdown_groups[g] = first[g]
        for label, w in weights.items():
            for g in OPERATION_GROUPS:
                breakdown_groups[g] += w * per_scenario[label][g]
    schedules = {label: extract_schedule(inst, bm.maps[label], x) for label in weights}
    return PlanningSolution(
        mode=bm.mode,
        instance=inst,
        params=params,
        first_stage=_first_stage_values(bm.first_stage, x),
        schedules=schedules,
        weights=dict(weights),
        cost_breakdown=CostBreakdown.from_groups(breakdown_groups),
        scenario_costs={label: CostBreakdown.from_groups(g) for label, g in per_scenario.items()},
        objective=float(res.objective_value),
        solver={"status": res.status, "gap": res.gap, "wall_time": res.wall_time, "backend": options.resolved_backend(),
                "variables": len(bm.model.variables), "constraints": len(bm.model.constraints)},
        worst_corner=worst_corner,
    )


# ---------------------------------------------------------------- the four modes


def solve_no_ccus(inst: PlanningInstance, tax: float, options: SolverOptions | None = None) -> PlanningSolution:
    opts = options or SolverOptions()
    bm = build_no_ccus_model(inst, tax)
    res = solve(bm.model, opts)
    _check(res)
    return _solution(bm, inst, res, {"tax": float(tax)}, opts, weights={"base": 1.0})


def solve_deterministic(
    inst: PlanningInstance, tax: float, price: float, options: SolverOptions | None = None, y_cap=None
) -> PlanningSolution:
    opts = options or SolverOptions()
    bm = build_deterministic_model(inst, tax, price, y_cap)
    res = solve(bm.model, opts)
    _check(res)
    return _solution(bm, inst, res, {"tax": float(tax), "price": float(price)}, opts, weights={"base": 1.0})


def solve_stochastic(
    inst: PlanningInstance, grid: ScenarioGrid, options: SolverOptions | None = None, y_cap=None
) -> PlanningSolution:
    opts = options or SolverOptions()
    bm = build_stochastic_model(inst, grid, y_cap)
    res = solve(bm.model, opts)
    _check(res)
    params = {"tax_points": list(grid.tax_points), "price_points": list(grid.price_points),
              "probabilities": [list(r) for r in grid.probabilities], "spacing": grid.spacing}
    weights = {label: prob for label, _, _, prob in grid.scenarios()}
    return _solution(bm, inst, res, params, opts, weights=weights)


def _capture_cap_present(model: MilpModel, inst: PlanningInstance) -> bool:
    names = {c.name.split("|")[0] for c in model.constraints if c.name.startswith("capture_cap[")}
    return all(f"capture_cap[{g.id},t{t}]" in names for g in inst.ccpp_plants for t in inst.hours)


def solve_robust(
    inst: PlanningInstance,
    box: Box,
    method: str = "corner",
    options: SolverOptions | None = None,
    y_cap=None,
) -> PlanningSolution:
    """Min-max plan over the box.

    ``corner``: second-stage cost is nondecreasing in tax (the capture cap keeps
    the taxed quantity nonnegative) and nonincreasing in price (stored CO2 is
    nonnegative), so the inner maximum sits at (tax_hi, price_lo) whatever the
    first stage.  ``vertex_epigraph`` makes no such assumption: one recourse
    copy per box vertex and an epigraph variable above each copy's cost.
    The reported corner is recomputed by re-optimising the recourse at every
    vertex with the chosen first stage.
    """
    opts = options or SolverOptions()
    params = {"tax_range": list(box.tax_range), "price_range": list(box.price_range), "method": method}
    if method == "corner":
        tax, price = box.tax_range[1], box.price_range[0]
        bm = build_deterministic_model(inst, tax, price, y_cap)
        if not _capture_cap_present(bm.model, inst):
            raise PreconditionError("corner method requires the capture cap Q_cc <= Q_emi in every plant-hour")
        bm.mode = ROBUST
        res = solve(bm.model, opts)
        _check(res)
        sol = _solution(bm, inst, res, params, opts, weights={"base": 1.0})
    elif method == "vertex_epigraph":
        bm = build_robust_model(inst, box, y_cap)
        res = solve(bm.model, opts)
        _check(res)
        per = {label: bm.costs[label].evaluate(res.values) for label in bm.maps}
        worst = max(per, key=lambda lab: sum(per[lab][g] * (-1 if g == "revenue" else 1) for g in OPERATION_GROUPS))
        sol = _solution(bm, inst, res, params, opts, weights={worst: 1.0}, breakdown_groups=dict(per[worst]))
    else:
        raise ValueError(f"unknown robust method {method!r}")

    vertex_costs = {}
    for tax, price in box.vertices():
        vertex_costs[(tax, price)] = evaluate_fixed_first_stage(
            inst, sol.first_stage["y"], _s_pairs(sol.first_stage["s"]), tax, price, opts, y_cap=y_cap
        ).operation
    worst_val = max(vertex_costs.values())
    tol = 1e-9 * max(1.0, abs(worst_val))
    ties = [v for v, c in vertex_costs.items() if c >= worst_val - tol]
    corner = max(ties, key=lambda v: (v[0], -v[1]))
    solver = dict(sol.solver)
    solver["vertex_costs"] = {f"{t}:{p}": c for (t, p), c in sorted(vertex_costs.items())}
    return dataclasses.replace(sol, worst_corner=corner, solver=solver)


def _s_pairs(s: Mapping[str, int]) -> dict[tuple[str, str], int]:
    return {tuple(k.split("|")): int(v) for k, v in s.items()}


def evaluate_fixed_first_stage(
    inst: PlanningInstance,
    y: Mapping[str, int],
    s: Mapping[tuple[str, str], int],
    tax: float,
    price: float,
    options: SolverOptions | None = None,
    y_cap=None,
) -> CostBreakdown:
    """Optimal recourse for a fixed first stage; the breakdown includes its investment groups."""
    opts = options or SolverOptions()
    bm = build_deterministic_model(inst, tax, price, y_cap)
    fs = bm.first_stage
    for j, h in fs.y.items():
        val = int(y.get(j, 0))
        if not 0 <= val <= fs.y_cap[j]:
            raise PreconditionError(f"y[{j}]={val} outside [0, {fs.y_cap[j]}]")
        bm.model.set_bounds(h, val, val)
    for pair, val in s.items():
        if pair not in fs.s:
            raise PreconditionError(f"s{pair} is not a declared siting candidate")
        if int(val) not in (0, 1):
            raise PreconditionError(f"s{pair} must be 0 or 1")
    for pair, h in fs.s.items():
        val = int(s.get(pair, 0))
        if val and int(y.get(pair[1], 0)) == 0:
            raise PreconditionError(f"siting {pair} selected while y[{pair[1]}] = 0")
        bm.model.set_bounds(h, val, val)
    res = solve(bm.model, opts)
    if not res.has_values:
        raise InfeasibleRecourse(res.status, "for the fixed first stage")
    return CostBreakdown.from_groups(bm.costs["base"].evaluate(res.values))


def value_of_stochastic_solution(
    inst: PlanningInstance, grid: ScenarioGrid, options: SolverOptions | None = None, stochastic: PlanningSolution | None = None
) -> dict[str, float]:
    """EEV - RP: expected cost of the mean-scenario plan minus the stochastic optimum."""
    opts = options or SolverOptions()
    rp = stochastic or solve_stochastic(inst, grid, opts)
    tax, price = grid.mean
    ev = solve_deterministic(inst, tax, price, opts)
    y, s = ev.first_stage["y"], _s_pairs(ev.first_stage["s"])
    eev = 0.0
    for _, t, p, prob in grid.scenarios():
        eev += prob * evaluate_fixed_first_stage(inst, y, s, t, p, opts).operation
    eev += ev.cost_breakdown.investment
    return {"rp": rp.objective, "eev": eev, "vss": eev - rp.objective, "ev_tax": tax, "ev_price": price}
