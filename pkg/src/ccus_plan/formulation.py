"""MILP builders for the gas network, electric network, CCPP/PtG coupling and siting blocks.

Sign conventions: a pipeline's flow leaves its start node and a line's flow
leaves its from-bus, so nodal balances read ``injection - outflow = load``.
Simple boxes (pressure-squared bounds, source output limits, line limits,
angle limits, ``0 <= delta <= 1``) are carried as variable bounds; everything
else is an explicit row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instance import GasPipeline, PlanningInstance, annualization_coefficient, incidence
from .milp import BINARY, CONTINUOUS, EQ, GE, INTEGER, LE, MilpModel

INVEST_GROUPS = ("invest_ptg", "invest_siting")
OPERATION_GROUPS = ("ope_gs", "ope_gen", "ope_ptg", "capture", "storage", "penalty", "revenue")
COST_GROUPS = INVEST_GROUPS + OPERATION_GROUPS
COST_UNIT = 1e-6  # instance data in $, objective and breakdowns in M$

# symbols indexed by (entity, hour)
GAS_SYMBOLS = ("P_gs", "f_gas", "I")
ELECTRIC_SYMBOLS = ("theta", "f_ele", "P_gen", "u", "v", "w", "Q_emi")
CCPP_SYMBOLS = ("P_ccpp", "P_ptg", "P_cc", "Q_cc", "Q_cs", "Q_cu", "V_ch4")


@dataclass(frozen=True)
class PwlBreakpoints:
    points: tuple[float, ...]

    @property
    def images(self) -> tuple[float, ...]:
        return tuple(x * abs(x) for x in self.points)

    @property
    def segments(self) -> int:
        return len(self.points) - 1

    @property
    def max_width(self) -> float:
        return max(b - a for a, b in zip(self.points, self.points[1:]))

    def reconstruct(self, delta) -> tuple[float, float]:
        """Flow and linearised image for fill fractions ``delta`` (one per segment)."""
        pts = np.asarray(self.points)
        img = np.asarray(self.images)
        d = np.asarray(delta, dtype=float)
        return float(pts[0] + d @ np.diff(pts)), float(img[0] + d @ np.diff(img))


def compute_breakpoints(pipeline: GasPipeline, seg: int) -> PwlBreakpoints:
    """Equal-width breakpoints over the flow range, with 0 forced in for signed ranges."""
    lo, hi = float(pipeline.flow_min), float(pipeline.flow_max)
    pts = list(np.linspace(lo, hi, seg + 1))
    pts[0], pts[-1] = lo, hi
    tol = 1e-12 * max(1.0, hi - lo)
    if lo < -tol and hi > tol:
        near = min(range(1, len(pts) - 1), key=lambda k: abs(pts[k]), default=None)
        if near is not None and abs(pts[near]) <= tol:
            pts[near] = 0.0
        else:
            pts.append(0.0)
            pts.sort()
    return PwlBreakpoints(tuple(float(p) for p in pts))


@dataclass
class FirstStage:
    y: dict[str, int] = field(default_factory=dict)  # plant -> handle
    s: dict[tuple[str, str], int] = field(default_factory=dict)  # (gas node, plant) -> handle
    y_cap: dict[str, int] = field(default_factory=dict)


@dataclass
class VariableMap:
    """(symbol, index tuple) -> variable handle, for one operating scenario."""

    with_ccus: bool
    tag: str = ""
    table: dict[str, dict[tuple, int]] = field(default_factory=dict)
    breakpoints: dict[str, PwlBreakpoints] = field(default_factory=dict)
    first_stage: FirstStage | None = None

    def __getitem__(self, key: tuple[str, tuple]) -> int:
        sym, idx = key
        return self.table[sym][idx]

    def add(self, sym: str, idx: tuple, handle: int) -> None:
        self.table.setdefault(sym, {})[idx] = handle

    def get(self, sym: str) -> dict[tuple, int]:
        return self.table.get(sym, {})

    def handles(self) -> list[int]:
        return [h for sub in self.table.values() for h in sub.values()]


def _name(sym: str, idx: tuple, tag: str) -> str:
    return f"{sym}[{','.join(map(str, idx))}]{tag}"


def default_y_cap(inst: PlanningInstance, plant: str) -> int:
    """Largest sensible module count: host plant capacity over module size."""
    tech = inst.ptg_technology
    return int(math.floor(inst.generator(plant).output_max / tech.module_size + 1e-9))


def declare_first_stage(model: MilpModel, inst: PlanningInstance, y_cap: dict[str, int] | None = None) -> FirstStage:
    fs = FirstStage()
    for g in inst.ccpp_plants:
        cap = (y_cap or {}).get(g.id, default_y_cap(inst, g.id))
        fs.y_cap[g.id] = cap
        fs.y[g.id] = model.add_variable(f"y[{g.id}]", INTEGER, 0, cap)
    for c in inst.siting_candidates:
        fs.s[(c.gas_node, c.plant)] = model.add_variable(f"s[{c.gas_node},{c.plant}]", BINARY, 0, 1)
    return fs


def declare_variables(
    model: MilpModel,
    inst: PlanningInstance,
    *,
    with_ccus: bool,
    first_stage: FirstStage | None = None,
    tag: str = "",
) -> VariableMap:
    """Register every operation variable of one scenario and return the lookup map."""
    if with_ccus and first_stage is None:
        raise ValueError("a with-CCUS operation copy needs first-stage variables")
    vm = VariableMap(with_ccus=with_ccus, tag=tag, first_stage=first_stage if with_ccus else None)

    def add(sym: str, idx: tuple, kind: str = CONTINUOUS, lo: float = 0.0, hi: float = math.inf) -> None:
        vm.add(sym, idx, model.add_variable(_name(sym, idx, tag), kind, lo, hi))

    hours = inst.hours
    for s in inst.gas_sources:
        for t in hours:
            add("P_gs", (s.id, t), lo=s.output_min, hi=s.output_max)
    for p in inst.gas_pipelines:
        bp = compute_breakpoints(p, inst.pwl_segments)
        vm.breakpoints[p.id] = bp
        K = bp.segments
        for t in hours:
            add("f_gas", (p.id, t), lo=p.flow_min, hi=p.flow_max)
            for k in range(1, K + 1):
                add("delta", (p.id, t, k), lo=0.0, hi=1.0)
            for k in range(1, K):
                add("phi", (p.id, t, k), BINARY, 0, 1)
    for n in inst.gas_nodes:
        for t in hours:
            add("I", (n.id, t), lo=n.pressure_min**2, hi=n.pressure_max**2)
    for b in inst.buses:
        for t in hours:
            if b.is_reference:
                add("theta", (b.id, t), lo=0.0, hi=0.0)
            else:
                add("theta", (b.id, t), lo=-math.pi, hi=math.pi)
    for l in inst.lines:
        for t in hours:
            add("f_ele", (l.id, t), lo=-l.capacity, hi=l.capacity)
    for g in inst.generators:
        for t in hours:
            add("P_gen", (g.id, t), lo=0.0, hi=g.output_max)
            add("u", (g.id, t), BINARY, 0, 1)
            add("v", (g.id, t), BINARY, 0, 1)
            add("w", (g.id, t), BINARY, 0, 1)
            add("Q_emi", (g.id, t))
    if with_ccus:
        for g in inst.ccpp_plants:
            for t in hours:
                for sym in CCPP_SYMBOLS:
                    add(sym, (g.id, t))
        for c in inst.siting_candidates:
            for t in hours:
                add("V_node", (c.gas_node, c.plant, t))
    return vm


# ---------------------------------------------------------------- gas network


def build_gas_block(model: MilpModel, inst: PlanningInstance, vm: VariableMap) -> list[int]:
    """Incremental PWL Weymouth rows, source ramps and (without CCUS) the nodal gas balance."""
    ids = []
    tag = vm.tag
    pipes = {p.id: p for p in inst.gas_pipelines}
    for pid, bp in vm.breakpoints.items():
        p = pipes[pid]
        K = bp.segments
        pts, img = bp.points, bp.images
        w2 = p.weymouth_coeff**2
        for t in inst.hours:
            for k in range(1, K):
                phi = vm["phi", (pid, t, k)]
                ids.append(model.add_constraint(
                    f"fill_lo[{pid},t{t},{k}]{tag}", [(1.0, phi), (-1.0, vm["delta", (pid, t, k)])], LE, 0.0))
                ids.append(model.add_constraint(
                    f"fill_hi[{pid},t{t},{k}]{tag}", [(1.0, vm["delta", (pid, t, k + 1)]), (-1.0, phi)], LE, 0.0))
            deltas = [vm["delta", (pid, t, k)] for k in range(1, K + 1)]
            ids.append(model.add_constraint(
                f"pwl_flow[{pid},t{t}]{tag}",
                [(1.0, vm["f_gas", (pid, t)])] + [(-(pts[k] - pts[k - 1]), d) for k, d in zip(range(1, K + 1), deltas)],
                EQ, pts[0]))
            ids.append(model.add_constraint(
                f"weymouth[{pid},t{t}]{tag}",
                [(w2, vm["I", (p.from_node, t)]), (-w2, vm["I", (p.to_node, t)])]
                + [(-(img[k] - img[k - 1]), d) for k, d in zip(range(1, K + 1), deltas)],
                EQ, img[0]))
    for s in inst.gas_sources:
        for t in list(inst.hours)[1:]:
            terms = [(1.0, vm["P_gs", (s.id, t)]), (-1.0, vm["P_gs", (s.id, t - 1)])]
            ids.append(model.add_constraint(f"gs_ramp_up[{s.id},t{t}]{tag}", terms, LE, s.ramp_max))
            ids.append(model.add_constraint(f"gs_ramp_dn[{s.id},t{t}]{tag}", terms, GE, -s.ramp_max))
    if not vm.with_ccus:
        ids.extend(_gas_balance(model, inst, vm, with_methane=False))
    return ids


def _gas_balance(model: MilpModel, inst: PlanningInstance, vm: VariableMap, *, with_methane: bool) -> list[int]:
    inc = incidence(inst)
    ids = []
    for n in inst.gas_nodes:
        for t in inst.hours:
            terms = [(a, vm["P_gs", (sid, t)]) for (node, sid), a in inc.source.items() if node == n.id]
            terms += [(-b, vm["f_gas", (pid, t)]) for (node, pid), b in inc.pipeline.items() if node == n.id]
            if with_methane:
                terms += [(1.0, h) for (m, j, tt), h in vm.get("V_node").items() if m == n.id and tt == t]
            ids.append(model.add_constraint(f"gas_balance[{n.id},t{t}]{vm.tag}", terms, EQ, n.load[t - 1]))
    return ids


# ---------------------------------------------------------------- electric network


def build_electric_block(model: MilpModel, inst: PlanningInstance, vm: VariableMap) -> list[int]:
    """DC flow, generator limits/ramps, unit commitment and (without CCUS) the bus balance."""
    ids = []
    tag = vm.tag
    T = inst.horizon
    for l in inst.lines:
        for t in inst.hours:
            ids.append(model.add_constraint(
                f"dc_flow[{l.id},t{t}]{tag}",
                [(1.0, vm["f_ele", (l.id, t)]), (-1.0 / l.reactance, vm["theta", (l.from_bus, t)]),
                 (1.0 / l.reactance, vm["theta", (l.to_bus, t)])],
                EQ, 0.0))
    for g in inst.generators:
        j = g.id
        P = {t: vm["P_gen", (j, t)] for t in inst.hours}
        u = {t: vm["u", (j, t)] for t in inst.hours}
        v = {t: vm["v", (j, t)] for t in inst.hours}
        w = {t: vm["w", (j, t)] for t in inst.hours}
        for t in inst.hours:
            ids.append(model.add_constraint(f"gen_max[{j},t{t}]{tag}", [(1.0, P[t]), (-g.output_max, u[t])], LE, 0.0))
            ids.append(model.add_constraint(f"gen_min[{j},t{t}]{tag}", [(1.0, P[t]), (-g.output_min, u[t])], GE, 0.0))
        for t in range(2, T + 1):
            terms = [(1.0, P[t]), (-1.0, P[t - 1])]
            ids.append(model.add_constraint(f"gen_ramp_up[{j},t{t}]{tag}", terms, LE, g.ramp_max))
            ids.append(model.add_constraint(f"gen_ramp_dn[{j},t{t}]{tag}", terms, GE, -g.ramp_max))
        for t in range(g.min_up, T + 1):
            ids.append(model.add_constraint(
                f"min_up[{j},t{t}]{tag}", [(1.0, v[k]) for k in range(t - g.min_up + 1, t + 1)] + [(-1.0, u[t])], LE, 0.0))
        for t in range(g.min_down, T + 1):
            ids.append(model.add_constraint(
                f"min_down[{j},t{t}]{tag}", [(1.0, w[k]) for k in range(t - g.min_down + 1, t + 1)] + [(1.0, u[t])], LE, 1.0))
        # t = 1 uses the cold-start state u_0 = 0
        ids.append(model.add_constraint(f"uc_logic[{j},t1]{tag}", [(1.0, u[1]), (-1.0, v[1]), (1.0, w[1])], EQ, 0.0))
        for t in range(2, T + 1):
            ids.append(model.add_constraint(
                f"uc_logic[{j},t{t}]{tag}", [(1.0, u[t]), (-1.0, u[t - 1]), (-1.0, v[t]), (1.0, w[t])], EQ, 0.0))
        for t in inst.hours:
            ids.append(model.add_constraint(f"uc_excl[{j},t{t}]{tag}", [(1.0, v[t]), (1.0, w[t])], LE, 1.0))
    if not vm.with_ccus:
        ids.extend(_electric_balance(model, inst, vm, grid_symbol=None))
    return ids


def _electric_balance(model: MilpModel, inst: PlanningInstance, vm: VariableMap, *, grid_symbol: str | None) -> list[int]:
    inc = incidence(inst)
    ccpp = {g.id for g in inst.ccpp_plants} if grid_symbol else set()
    ids = []
    for b in inst.buses:
        for t in inst.hours:
            terms = []
            for (bus, j), c in inc.generator.items():
                if bus == b.id:
                    sym = grid_symbol if j in ccpp else "P_gen"
                    terms.append((c, vm[sym, (j, t)]))
            terms += [(-d, vm["f_ele", (lid, t)]) for (bus, lid), d in inc.line.items() if bus == b.id]
            ids.append(model.add_constraint(f"ele_balance[{b.id},t{t}]{vm.tag}", terms, EQ, b.load[t - 1]))
    return ids


def build_emission_block(model: MilpModel, inst: PlanningInstance, vm: VariableMap) -> list[int]:
    """Gross emission of every generator: Q_emi = emi * P_gen."""
    ids = []
    for g in inst.generators:
        for t in inst.hours:
            ids.append(model.add_constraint(
                f"emission[{g.id},t{t}]{vm.tag}",
                [(1.0, vm["Q_emi", (g.id, t)]), (-g.emission_factor, vm["P_gen", (g.id, t)])], EQ, 0.0))
    return ids


# ---------------------------------------------------------------- CCPP / PtG coupling


def build_coupling_block(model: MilpModel, inst: PlanningInstance, vm: VariableMap) -> list[int]:
    tech = inst.ptg_technology
    if tech is None or not inst.ccpp_plants:
        raise ValueError("coupling block needs a PtG technology and at least one CCPP-eligible plant")
    eco = inst.economics
    eta, alpha = tech.conversion_efficiency, tech.co2_per_mwh
    ids = []
    tag = vm.tag
    y = vm.first_stage.y
    for g in inst.ccpp_plants:
        j = g.id
        for t in inst.hours:
            h = {sym: vm[sym, (j, t)] for sym in CCPP_SYMBOLS}
            P = vm["P_gen", (j, t)]
            ids.append(model.add_constraint(
                f"power_split[{j},t{t}]{tag}", [(1.0, P), (-1.0, h["P_ccpp"]), (-1.0, h["P_ptg"]), (-1.0, h["P_cc"])], EQ, 0.0))
            ids.append(model.add_constraint(
                f"capture_energy[{j},t{t}]{tag}", [(1.0, h["Q_cc"]), (-1.0 / eco.capture_energy, h["P_cc"])], EQ, 0.0))
            ids.append(model.add_constraint(
                f"carbon_split[{j},t{t}]{tag}", [(1.0, h["Q_cc"]), (-1.0, h["Q_cs"]), (-1.0, h["Q_cu"])], EQ, 0.0))
            ids.append(model.add_constraint(
                f"ptg_co2[{j},t{t}]{tag}", [(1.0, h["Q_cu"]), (-alpha * eta, h["P_ptg"])], EQ, 0.0))
            ids.append(model.add_constraint(
                f"ptg_methane[{j},t{t}]{tag}", [(1.0, h["V_ch4"]), (-tech.methane_per_mwh, h["P_ptg"])], EQ, 0.0))
            ids.append(model.add_constraint(
                f"ptg_max[{j},t{t}]{tag}", [(1.0, h["P_ptg"]), (-tech.per_module_output_max, y[j])], LE, 0.0))
            ids.append(model.add_constraint(
                f"ptg_min[{j},t{t}]{tag}", [(1.0, h["P_ptg"]), (-tech.per_module_output_min, y[j])], GE, 0.0))
            ids.append(model.add_constraint(
                f"capture_cap[{j},t{t}]{tag}", [(1.0, h["Q_cc"]), (-1.0, vm["Q_emi", (j, t)])], LE, 0.0))
    return ids


# ---------------------------------------------------------------- siting


def build_siting_block(model: MilpModel, inst: PlanningInstance, vm: VariableMap, *, first_copy: bool = True) -> list[int]:
    """Big-M siting logic plus the methane-augmented gas balance and CCPP-net electric balance.

    The investment-logic row on ``sum_m s <= M1 * y`` involves first-stage
    variables only, so with several operating copies it is emitted once.
    """
    tech = inst.ptg_technology
    fs = vm.first_stage
    tag = vm.tag
    ids = []
    m1 = len(inst.gas_nodes)
    if first_copy:
        for g in inst.ccpp_plants:
            s_terms = [(1.0, h) for (m, j), h in fs.s.items() if j == g.id]
            if s_terms:
                ids.append(model.add_constraint(f"siting_logic[{g.id}]", s_terms + [(-float(m1), fs.y[g.id])], LE, 0.0))
    for (m, j), s_h in fs.s.items():
        m2 = tech.methane_per_mwh * tech.per_module_output_max * fs.y_cap[j]
        for t in inst.hours:
            ids.append(model.add_constraint(
                f"siting_flow[{m},{j},t{t}]{tag}", [(1.0, vm["V_node", (m, j, t)]), (-m2, s_h)], LE, 0.0))
    for g in inst.ccpp_plants:
        for t in inst.hours:
            terms = [(1.0, vm["V_ch4", (g.id, t)])]
            terms += [(-1.0, h) for (m, j, tt), h in vm.get("V_node").items() if j == g.id and tt == t]
            ids.append(model.add_constraint(f"methane_dispatch[{g.id},t{t}]{tag}", terms, EQ, 0.0))
    ids.extend(_gas_balance(model, inst, vm, with_methane=True))
    ids.extend(_electric_balance(model, inst, vm, grid_symbol="P_ccpp"))
    return ids


def build_operation(
    model: MilpModel,
    inst: PlanningInstance,
    *,
    with_ccus: bool,
    first_stage: FirstStage | None = None,
    tag: str = "",
    first_copy: bool = True,
) -> VariableMap:
    """Declare one scenario's operation variables and emit every block for it."""
    vm = declare_variables(model, inst, with_ccus=with_ccus, first_stage=first_stage, tag=tag)
    build_gas_block(model, inst, vm)
    build_electric_block(model, inst, vm)
    build_emission_block(model, inst, vm)
    if with_ccus:
        build_coupling_block(model, inst, vm)
        build_siting_block(model, inst, vm, first_copy=first_copy)
    return vm


# ---------------------------------------------------------------- costs


@dataclass
class CostTerms:
    groups: dict[str, list[tuple[float, int]]]

    def terms(self, names=COST_GROUPS, weight: float = 1.0) -> list[tuple[float, int]]:
        """Objective terms for the chosen groups; revenue is income and enters negated."""
        out = []
        for g in names:
            sign = -1.0 if g == "revenue" else 1.0
            out.extend((sign * weight * c, h) for c, h in self.groups.get(g, []))
        return out

    def evaluate(self, values) -> dict[str, float]:
        """Group values (revenue reported positive) at a solution vector."""
        return {g: float(sum(c * values[h] for c, h in self.groups.get(g, []))) for g in COST_GROUPS}


def build_cost_terms(model: MilpModel, inst: PlanningInstance, vm: VariableMap, tax: float, price: float) -> CostTerms:
    """Linear cost groups in M$; operation groups are scaled by the day weight to a yearly figure."""
    eco = inst.economics
    omega = eco.day_weight
    groups: dict[str, list[tuple[float, int]]] = {g: [] for g in COST_GROUPS}
    fs = vm.first_stage
    if fs is not None:
        tech = inst.ptg_technology
        k_ptg = annualization_coefficient(eco.discount_rate, tech.lifetime)
        for j, h in fs.y.items():
            groups["invest_ptg"].append((k_ptg * tech.unit_invest_cost * tech.module_size, h))
        for c in inst.siting_candidates:
            k_site = annualization_coefficient(eco.discount_rate, c.lifetime)
            groups["invest_siting"].append((k_site * c.invest_cost, fs.s[(c.gas_node, c.plant)]))
    for s in inst.gas_sources:
        groups["ope_gs"] += [(omega * s.unit_cost, vm["P_gs", (s.id, t)]) for t in inst.hours]
    for g in inst.generators:
        groups["ope_gen"] += [(omega * g.unit_cost, vm["P_gen", (g.id, t)]) for t in inst.hours]
        groups["penalty"] += [(omega * tax, vm["Q_emi", (g.id, t)]) for t in inst.hours]
    if vm.with_ccus:
        tech = inst.ptg_technology
        for g in inst.ccpp_plants:
            for t in inst.hours:
                groups["ope_ptg"].append((omega * tech.unit_op_cost, vm["P_ptg", (g.id, t)]))
                groups["capture"].append((omega * eco.capture_cost, vm["Q_cc", (g.id, t)]))
                groups["storage"].append((omega * eco.storage_cost, vm["Q_cs", (g.id, t)]))
                groups["penalty"].append((-omega * tax, vm["Q_cc", (g.id, t)]))
                groups["revenue"].append((omega * price, vm["Q_cs", (g.id, t)]))
    return CostTerms({g: [(COST_UNIT * c, h) for c, h in terms] for g, terms in groups.items()})
