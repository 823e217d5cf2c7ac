"""Problem-instance data model, JSON file format and builtin desk-scale instances.

Instances are frozen dataclasses.  Time series are tuples of length ``horizon``;
position ``k`` holds hour ``t = k + 1``.  Incidence maps are derived from the
topology references on demand and never stored.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

BUILTIN_NAMES = ("toy3", "toy3-ccus", "mesh6")

TOP_LEVEL_KEYS = (
    "meta",
    "gas_nodes",
    "gas_pipelines",
    "gas_sources",
    "buses",
    "lines",
    "generators",
    "ptg_technology",
    "siting_candidates",
    "economics",
    "horizon",
    "pwl_segments",
)


class InstanceError(ValueError):
    """Raised when an instance fails validation; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class InstanceParseError(ValueError):
    """Raised when an instance file is not valid JSON or not shaped like an instance."""


@dataclass(frozen=True)
class GasNode:
    id: str
    pressure_min: float  # bar
    pressure_max: float  # bar
    load: tuple[float, ...]  # Mm3/h


@dataclass(frozen=True)
class GasPipeline:
    id: str
    from_node: str
    to_node: str
    weymouth_coeff: float  # Mm3/(h*bar)
    flow_min: float  # Mm3/h, signed
    flow_max: float


@dataclass(frozen=True)
class GasSource:
    id: str
    node: str
    output_min: float  # Mm3/h
    output_max: float
    ramp_max: float  # Mm3/h per hour
    unit_cost: float  # $/Mm3


@dataclass(frozen=True)
class ElectricBus:
    id: str
    load: tuple[float, ...]  # MW
    is_reference: bool = False


@dataclass(frozen=True)
class TransmissionLine:
    id: str
    from_bus: str
    to_bus: str
    reactance: float  # flow[MW] = angle difference[rad] / reactance
    capacity: float  # MW


@dataclass(frozen=True)
class Generator:
    id: str
    bus: str
    output_min: float  # MW
    output_max: float
    ramp_max: float  # MW/h
    min_up: int  # h
    min_down: int
    unit_cost: float  # $/MWh
    emission_factor: float  # ton CO2/MWh
    ccpp_eligible: bool = False


@dataclass(frozen=True)
class PtgTechnology:
    module_size: float = 1.0  # MW
    per_module_output_min: float = 0.2  # MW
    per_module_output_max: float = 1.0
    conversion_efficiency: float = 0.6
    co2_per_mwh: float = 0.2  # ton/MWh
    methane_calorific: float = 36.0  # MJ/m3
    unit_invest_cost: float = 3.0e6  # $/MW
    unit_op_cost: float = 1.0  # $/MWh
    lifetime: int = 20  # years

    @property
    def methane_per_mwh(self) -> float:
        """Mm3 of methane produced per MWh of PtG input power."""
        return self.conversion_efficiency * 3600.0 / self.methane_calorific * 1e-6


@dataclass(frozen=True)
class SitingCandidate:
    gas_node: str
    plant: str
    invest_cost: float  # $
    lifetime: int = 30


@dataclass(frozen=True)
class EconomicParams:
    discount_rate: float = 0.08
    capture_cost: float = 30.0  # $/ton
    storage_cost: float = 10.0  # $/ton
    carbon_tax: float = 50.0  # $/ton
    carbon_price: float = 40.0  # $/ton
    capture_energy: float = 0.269  # MWh/ton
    day_weight: float = 365.0  # days/year


@dataclass(frozen=True)
class PlanningInstance:
    meta: dict[str, Any]
    gas_nodes: tuple[GasNode, ...]
    gas_pipelines: tuple[GasPipeline, ...]
    gas_sources: tuple[GasSource, ...]
    buses: tuple[ElectricBus, ...]
    lines: tuple[TransmissionLine, ...]
    generators: tuple[Generator, ...]
    ptg_technology: PtgTechnology | None
    siting_candidates: tuple[SitingCandidate, ...]
    economics: EconomicParams
    horizon: int
    pwl_segments: int

    def __hash__(self) -> int:
        return hash((self.meta.get("name"), self.horizon, len(self.gas_nodes), len(self.buses)))

    @property
    def name(self) -> str:
        return str(self.meta.get("name", "unnamed"))

    @property
    def hours(self) -> range:
        return range(1, self.horizon + 1)

    @property
    def ccpp_plants(self) -> tuple[Generator, ...]:
        return tuple(g for g in self.generators if g.ccpp_eligible)

    def generator(self, gen_id: str) -> Generator:
        for g in self.generators:
            if g.id == gen_id:
                return g
        raise KeyError(gen_id)

    def with_economics(self, **changes: Any) -> "PlanningInstance":
        return dataclasses.replace(self, economics=dataclasses.replace(self.economics, **changes))


_RECORD_TYPES = {
    "gas_nodes": GasNode,
    "gas_pipelines": GasPipeline,
    "gas_sources": GasSource,
    "buses": ElectricBus,
    "lines": TransmissionLine,
    "generators": Generator,
    "siting_candidates": SitingCandidate,
}


# ---------------------------------------------------------------- (de)serialization


def _build_record(cls: type, raw: Any, path: str) -> Any:
    if not isinstance(raw, dict):
        raise InstanceParseError(f"{path}: expected an object, got {type(raw).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(names))
    if unknown:
        raise InstanceParseError(f"{path}: unknown key(s) {unknown}")
    kwargs = {}
    for name, f in names.items():
        if name not in raw:
            if f.default is dataclasses.MISSING:
                raise InstanceParseError(f"{path}.{name}: missing required field")
            continue
        value = raw[name]
        if name == "load":
            if not isinstance(value, list):
                raise InstanceParseError(f"{path}.load: expected a list")
            value = tuple(float(v) for v in value)
        kwargs[name] = value
    return cls(**kwargs)


def instance_from_dict(raw: Any) -> PlanningInstance:
    """Build (and validate) an instance from a parsed JSON document."""
    if not isinstance(raw, dict):
        raise InstanceParseError("instance document must be a JSON object")
    unknown = sorted(set(raw) - set(TOP_LEVEL_KEYS))
    if unknown:
        raise InstanceParseError(f"unknown top-level key(s) {unknown}")
    missing = [k for k in TOP_LEVEL_KEYS if k not in raw and k != "ptg_technology"]
    if missing:
        raise InstanceParseError(f"missing top-level key(s) {missing}")
    parts: dict[str, Any] = {}
    for key, cls in _RECORD_TYPES.items():
        items = raw[key]
        if not isinstance(items, list):
            raise InstanceParseError(f"{key}: expected a list")
        parts[key] = tuple(_build_record(cls, item, f"{key}[{i}]") for i, item in enumerate(items))
    ptg = raw.get("ptg_technology")
    parts["ptg_technology"] = None if ptg is None else _build_record(PtgTechnology, ptg, "ptg_technology")
    parts["economics"] = _build_record(EconomicParams, raw["economics"], "economics")
    meta = raw["meta"]
    if not isinstance(meta, dict):
        raise InstanceParseError("meta: expected an object")
    inst = PlanningInstance(
        meta=dict(meta),
        horizon=raw["horizon"],
        pwl_segments=raw["pwl_segments"],
        **parts,
    )
    validate(inst)
    return inst


def instance_to_dict(inst: PlanningInstance) -> dict[str, Any]:
    out: dict[str, Any] = {"meta": dict(inst.meta)}
    for key in _RECORD_TYPES:
        records = []
        for rec in getattr(inst, key):
            d = dataclasses.asdict(rec)
            if "load" in d:
                d["load"] = list(d["load"])
            records.append(d)
        out[key] = records
    out["ptg_technology"] = None if inst.ptg_technology is None else dataclasses.asdict(inst.ptg_technology)
    out["economics"] = dataclasses.asdict(inst.economics)
    out["horizon"] = inst.horizon
    out["pwl_segments"] = inst.pwl_segments
    return {k: out[k] for k in TOP_LEVEL_KEYS}


def dumps_instance(inst: PlanningInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2)


def load_instance(path: str | Path) -> PlanningInstance:
    """Read and validate an instance file (strict JSON schema, unknown keys rejected)."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"{path}: malformed JSON ({exc})") from exc
    try:
        return instance_from_dict(raw)
    except TypeError as exc:
        raise InstanceParseError(f"{path}: {exc}") from exc


def builtin_instance(name: str) -> PlanningInstance:
    if name not in BUILTIN_NAMES:
        raise KeyError(f"unknown builtin instance {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    res = resources.files("ccus_plan").joinpath("data", f"{name}.json")
    with resources.as_file(res) as p:
        return load_instance(p)


def resolve_instance(name_or_path: str) -> PlanningInstance:
    """Builtin name or path to an instance file."""
    if name_or_path in BUILTIN_NAMES:
        return builtin_instance(name_or_path)
    return load_instance(name_or_path)


# ---------------------------------------------------------------- validation


def _num(value: Any, path: str, *, integer: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise InstanceError(path, "must be finite")
    if integer and int(value) != value:
        raise InstanceError(path, "must be an integer")
    return float(value)


def _series(values: tuple[float, ...], horizon: int, path: str) -> None:
    if len(values) != horizon:
        raise InstanceError(path, f"length {len(values)} != horizon {horizon}")
    for k, v in enumerate(values):
        if _num(v, f"{path}[{k}]") < 0:
            raise InstanceError(f"{path}[{k}]", "load must be >= 0")


def _unique(ids: list[str], path: str) -> set[str]:
    seen: set[str] = set()
    for i, x in enumerate(ids):
        if not isinstance(x, str) or not x:
            raise InstanceError(f"{path}[{i}].id", "identifier must be a non-empty string")
        if x in seen:
            raise InstanceError(f"{path}[{i}].id", f"duplicate id {x!r}")
        seen.add(x)
    return seen


def validate(inst: PlanningInstance) -> None:
    """Check every invariant of the data model; raises InstanceError on the first violation."""
    T = inst.horizon
    if isinstance(T, bool) or not isinstance(T, int) or T < 1:
        raise InstanceError("horizon", "must be an integer >= 1")
    seg = inst.pwl_segments
    if isinstance(seg, bool) or not isinstance(seg, int) or seg < 1:
        raise InstanceError("pwl_segments", "must be an integer >= 1")

    gas_ids = _unique([n.id for n in inst.gas_nodes], "gas_nodes")
    if not gas_ids:
        raise InstanceError("gas_nodes", "at least one gas node required")
    for i, n in enumerate(inst.gas_nodes):
        p = f"gas_nodes[{i}]"
        lo = _num(n.pressure_min, f"{p}.pressure_min")
        hi = _num(n.pressure_max, f"{p}.pressure_max")
        if lo < 0:
            raise InstanceError(f"{p}.pressure_min", "must be >= 0")
        if lo > hi:
            raise InstanceError(f"{p}.pressure_min", "pressure_min > pressure_max")
        _series(n.load, T, f"{p}.load")

    _unique([q.id for q in inst.gas_pipelines], "gas_pipelines")
    for i, q in enumerate(inst.gas_pipelines):
        p = f"gas_pipelines[{i}]"
        for end in ("from_node", "to_node"):
            if getattr(q, end) not in gas_ids:
                raise InstanceError(f"{p}.{end}", f"pipeline {q.id!r} references unknown gas node {getattr(q, end)!r}")
        if q.from_node == q.to_node:
            raise InstanceError(f"{p}.to_node", "from_node == to_node")
        if _num(q.weymouth_coeff, f"{p}.weymouth_coeff") <= 0:
            raise InstanceError(f"{p}.weymouth_coeff", "must be > 0")
        fmin = _num(q.flow_min, f"{p}.flow_min")
        fmax = _num(q.flow_max, f"{p}.flow_max")
        if not fmin < fmax:
            raise InstanceError(f"{p}.flow_min", "flow_min must be < flow_max")
        if fmin < 0 and not fmax > 0:
            raise InstanceError(f"{p}.flow_max", "bidirectional pipeline needs flow_min < 0 < flow_max")

    _unique([s.id for s in inst.gas_sources], "gas_sources")
    for i, s in enumerate(inst.gas_sources):
        p = f"gas_sources[{i}]"
        if s.node not in gas_ids:
            raise InstanceError(f"{p}.node", f"source {s.id!r} references unknown gas node {s.node!r}")
        lo = _num(s.output_min, f"{p}.output_min")
        hi = _num(s.output_max, f"{p}.output_max")
        if lo < 0 or lo > hi:
            raise InstanceError(f"{p}.output_min", "need 0 <= output_min <= output_max")
        if _num(s.ramp_max, f"{p}.ramp_max") < 0:
            raise InstanceError(f"{p}.ramp_max", "must be >= 0")
        if _num(s.unit_cost, f"{p}.unit_cost") < 0:
            raise InstanceError(f"{p}.unit_cost", "must be >= 0")

    bus_ids = _unique([b.id for b in inst.buses], "buses")
    refs = [b.id for b in inst.buses if b.is_reference]
    if len(refs) != 1:
        raise InstanceError("buses", f"exactly one reference bus required, found {len(refs)}")
    for i, b in enumerate(inst.buses):
        _series(b.load, T, f"buses[{i}].load")

    _unique([l.id for l in inst.lines], "lines")
    for i, l in enumerate(inst.lines):
        p = f"lines[{i}]"
        for end in ("from_bus", "to_bus"):
            if getattr(l, end) not in bus_ids:
                raise InstanceError(f"{p}.{end}", f"line {l.id!r} references unknown bus {getattr(l, end)!r}")
        if l.from_bus == l.to_bus:
            raise InstanceError(f"{p}.to_bus", "from_bus == to_bus")
        if _num(l.reactance, f"{p}.reactance") <= 0:
            raise InstanceError(f"{p}.reactance", "must be > 0")
        if _num(l.capacity, f"{p}.capacity") <= 0:
            raise InstanceError(f"{p}.capacity", "must be > 0")

    gen_ids = _unique([g.id for g in inst.generators], "generators")
    for i, g in enumerate(inst.generators):
        p = f"generators[{i}]"
        if g.bus not in bus_ids:
            raise InstanceError(f"{p}.bus", f"generator {g.id!r} references unknown bus {g.bus!r}")
        lo = _num(g.output_min, f"{p}.output_min")
        hi = _num(g.output_max, f"{p}.output_max")
        if lo < 0 or lo > hi:
            raise InstanceError(f"{p}.output_min", "need 0 <= output_min <= output_max")
        if _num(g.ramp_max, f"{p}.ramp_max") < 0:
            raise InstanceError(f"{p}.ramp_max", "must be >= 0")
        for attr in ("min_up", "min_down"):
            if _num(getattr(g, attr), f"{p}.{attr}", integer=True) < 1:
                raise InstanceError(f"{p}.{attr}", "must be >= 1")
        if _num(g.unit_cost, f"{p}.unit_cost") < 0:
            raise InstanceError(f"{p}.unit_cost", "must be >= 0")
        if _num(g.emission_factor, f"{p}.emission_factor") < 0:
            raise InstanceError(f"{p}.emission_factor", "must be >= 0")
        if not isinstance(g.ccpp_eligible, bool):
            raise InstanceError(f"{p}.ccpp_eligible", "must be a boolean")

    tech = inst.ptg_technology
    if tech is not None:
        p = "ptg_technology"
        if _num(tech.module_size, f"{p}.module_size") <= 0:
            raise InstanceError(f"{p}.module_size", "must be > 0")
        lo = _num(tech.per_module_output_min, f"{p}.per_module_output_min")
        hi = _num(tech.per_module_output_max, f"{p}.per_module_output_max")
        if lo < 0 or lo > hi:
            raise InstanceError(f"{p}.per_module_output_min", "need 0 <= min <= max")
        eta = _num(tech.conversion_efficiency, f"{p}.conversion_efficiency")
        if not 0 < eta <= 1:
            raise InstanceError(f"{p}.conversion_efficiency", "must lie in (0, 1]")
        for attr in ("co2_per_mwh", "unit_invest_cost", "unit_op_cost"):
            if _num(getattr(tech, attr), f"{p}.{attr}") < 0:
                raise InstanceError(f"{p}.{attr}", "must be >= 0")
        if _num(tech.methane_calorific, f"{p}.methane_calorific") <= 0:
            raise InstanceError(f"{p}.methane_calorific", "must be > 0")
        if _num(tech.lifetime, f"{p}.lifetime", integer=True) < 1:
            raise InstanceError(f"{p}.lifetime", "must be >= 1")

    eligible = {g.id for g in inst.generators if g.ccpp_eligible}
    pairs: set[tuple[str, str]] = set()
    for i, c in enumerate(inst.siting_candidates):
        p = f"siting_candidates[{i}]"
        if c.gas_node not in gas_ids:
            raise InstanceError(f"{p}.gas_node", f"unknown gas node {c.gas_node!r}")
        if c.plant not in gen_ids:
            raise InstanceError(f"{p}.plant", f"unknown generator {c.plant!r}")
        if c.plant not in eligible:
            raise InstanceError(f"{p}.plant", f"generator {c.plant!r} is not ccpp_eligible")
        if (c.gas_node, c.plant) in pairs:
            raise InstanceError(p, f"duplicate candidate ({c.gas_node}, {c.plant})")
        pairs.add((c.gas_node, c.plant))
        if _num(c.invest_cost, f"{p}.invest_cost") < 0:
            raise InstanceError(f"{p}.invest_cost", "must be >= 0")
        if _num(c.lifetime, f"{p}.lifetime", integer=True) < 1:
            raise InstanceError(f"{p}.lifetime", "must be >= 1")

    e = inst.economics
    if _num(e.discount_rate, "economics.discount_rate") <= 0:
        raise InstanceError("economics.discount_rate", "must be > 0")
    if _num(e.capture_energy, "economics.capture_energy") <= 0:
        raise InstanceError("economics.capture_energy", "must be > 0")
    for attr in ("capture_cost", "storage_cost", "carbon_tax", "carbon_price"):
        if _num(getattr(e, attr), f"economics.{attr}") < 0:
            raise InstanceError(f"economics.{attr}", "must be >= 0")
    if _num(e.day_weight, "economics.day_weight") <= 0:
        raise InstanceError("economics.day_weight", "must be > 0")


# ---------------------------------------------------------------- derived quantities


def annualization_coefficient(dr: float, lifetime: float) -> float:
    """Capital recovery factor dr(1+dr)^L / ((1+dr)^L - 1); 1/L in the zero-rate limit."""
    if dr == 0:
        return 1.0 / lifetime
    growth = (1.0 + dr) ** lifetime
    return dr * growth / (growth - 1.0)


@dataclass(frozen=True)
class Incidence:
    """Sparse incidence maps keyed by (row entity, column entity); absent entries are zero."""

    source: dict[tuple[str, str], int] = field(default_factory=dict)  # A: (gas node, source)
    pipeline: dict[tuple[str, str], int] = field(default_factory=dict)  # B: (gas node, pipeline)
    generator: dict[tuple[str, str], int] = field(default_factory=dict)  # C: (bus, generator)
    line: dict[tuple[str, str], int] = field(default_factory=dict)  # D: (bus, line)


def incidence(inst: PlanningInstance) -> Incidence:
    A = {(s.node, s.id): 1 for s in inst.gas_sources}
    B: dict[tuple[str, str], int] = {}
    for q in inst.gas_pipelines:
        B[(q.from_node, q.id)] = 1
        B[(q.to_node, q.id)] = -1
    C = {(g.bus, g.id): 1 for g in inst.generators}
    D: dict[tuple[str, str], int] = {}
    for l in inst.lines:
        D[(l.from_bus, l.id)] = 1
        D[(l.to_bus, l.id)] = -1
    return Incidence(A, B, C, D)
