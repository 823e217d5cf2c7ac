"""Regenerate the builtin instance files under src/ccus_plan/data/.

    python scripts/make_builtin_instances.py

toy3 is sized so that both generators are forced on in every hour (each
generator bus's load exceeds what its lines can import) and its pipelines are
unidirectional with one PWL segment; the only free integers of toy3-ccus are
then the PtG module count and the two siting binaries, which keeps it within
reach of the enumeration oracle.
"""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from ccus_plan.instance import (
    EconomicParams,
    ElectricBus,
    GasNode,
    GasPipeline,
    GasSource,
    Generator,
    PlanningInstance,
    PtgTechnology,
    SitingCandidate,
    TransmissionLine,
    instance_to_dict,
    validate,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "ccus_plan" / "data"

# hourly load shape in [0, 1]; valley 1:00-6:00 and 22:00-24:00, evening peak at 19:00
PROFILE = (0.15, 0.10, 0.05, 0.00, 0.05, 0.15, 0.35, 0.55, 0.70, 0.80, 0.85, 0.80,
           0.70, 0.65, 0.70, 0.75, 0.85, 0.95, 1.00, 0.95, 0.80, 0.60, 0.40, 0.25)


def shape(lo: float, hi: float) -> tuple[float, ...]:
    return tuple(round(lo + (hi - lo) * f, 6) for f in PROFILE)


def toy3() -> PlanningInstance:
    return PlanningInstance(
        meta={"name": "toy3", "version": 1, "description": "3-node gas / 3-bus electric desk instance"},
        gas_nodes=(
            GasNode("g1", 50.0, 70.0, shape(0.0, 0.0)),
            GasNode("g2", 30.0, 70.0, shape(0.15, 0.25)),
            GasNode("g3", 30.0, 70.0, shape(0.10, 0.20)),
        ),
        gas_pipelines=(
            GasPipeline("p12", "g1", "g2", 0.01, 0.0, 0.6),
            GasPipeline("p23", "g2", "g3", 0.01, 0.0, 0.4),
        ),
        gas_sources=(GasSource("src1", "g1", 0.0, 0.7, 0.2, 150000.0),),
        buses=(
            ElectricBus("b1", shape(65.0, 90.0), True),
            ElectricBus("b2", shape(62.0, 85.0)),
            ElectricBus("b3", shape(15.0, 50.0)),
        ),
        lines=(
            TransmissionLine("l12", "b1", "b2", 0.02, 30.0),
            TransmissionLine("l23", "b2", "b3", 0.02, 30.0),
            TransmissionLine("l13", "b1", "b3", 0.02, 30.0),
        ),
        generators=(
            Generator("gen1", "b1", 40.0, 120.0, 40.0, 3, 3, 25.0, 1.005, True),
            Generator("gen2", "b2", 30.0, 150.0, 50.0, 4, 4, 20.0, 1.005, False),
        ),
        ptg_technology=None,
        siting_candidates=(),
        economics=EconomicParams(),
        horizon=24,
        pwl_segments=1,
    )


def toy3_ccus() -> PlanningInstance:
    base = toy3()
    return dataclasses.replace(
        base,
        meta={"name": "toy3-ccus", "version": 1, "description": "toy3 with a PtG technology and two siting candidates"},
        ptg_technology=PtgTechnology(),
        siting_candidates=(
            SitingCandidate("g2", "gen1", 2.0e6, 30),
            SitingCandidate("g3", "gen1", 3.0e6, 30),
        ),
    )


def mesh6() -> PlanningInstance:
    return PlanningInstance(
        meta={"name": "mesh6", "version": 1, "description": "6-node meshed gas / 6-bus electric instance with cycling peaker"},
        gas_nodes=(
            GasNode("n1", 40.0, 70.0, shape(0.00, 0.00)),
            GasNode("n2", 30.0, 70.0, shape(0.08, 0.16)),
            GasNode("n3", 30.0, 70.0, shape(0.10, 0.18)),
            GasNode("n4", 40.0, 70.0, shape(0.02, 0.04)),
            GasNode("n5", 30.0, 70.0, shape(0.06, 0.12)),
            GasNode("n6", 30.0, 70.0, shape(0.05, 0.10)),
        ),
        gas_pipelines=(
            GasPipeline("q12", "n1", "n2", 0.012, -0.4, 0.4),
            GasPipeline("q23", "n2", "n3", 0.012, -0.4, 0.4),
            GasPipeline("q34", "n3", "n4", 0.012, -0.4, 0.4),
            GasPipeline("q45", "n4", "n5", 0.012, -0.4, 0.4),
            GasPipeline("q56", "n5", "n6", 0.012, -0.4, 0.4),
            GasPipeline("q61", "n6", "n1", 0.012, -0.4, 0.4),
            GasPipeline("q14", "n1", "n4", 0.008, -0.3, 0.3),
        ),
        gas_sources=(
            GasSource("srcA", "n1", 0.0, 0.5, 0.15, 150000.0),
            GasSource("srcB", "n4", 0.0, 0.3, 0.10, 180000.0),
        ),
        buses=(
            ElectricBus("b1", shape(30.0, 55.0), True),
            ElectricBus("b2", shape(25.0, 50.0)),
            ElectricBus("b3", shape(20.0, 45.0)),
            ElectricBus("b4", shape(30.0, 60.0)),
            ElectricBus("b5", shape(15.0, 35.0)),
            ElectricBus("b6", shape(20.0, 45.0)),
        ),
        lines=(
            TransmissionLine("l12", "b1", "b2", 0.02, 60.0),
            TransmissionLine("l23", "b2", "b3", 0.02, 60.0),
            TransmissionLine("l34", "b3", "b4", 0.02, 60.0),
            TransmissionLine("l45", "b4", "b5", 0.02, 60.0),
            TransmissionLine("l56", "b5", "b6", 0.02, 60.0),
            TransmissionLine("l61", "b6", "b1", 0.02, 60.0),
            TransmissionLine("l14", "b1", "b4", 0.03, 50.0),
            TransmissionLine("l25", "b2", "b5", 0.03, 50.0),
        ),
        generators=(
            Generator("G1", "b1", 50.0, 150.0, 60.0, 4, 4, 24.0, 1.005, True),
            Generator("G2", "b3", 40.0, 120.0, 50.0, 4, 4, 26.0, 1.005, True),
            Generator("G3", "b5", 30.0, 100.0, 40.0, 3, 3, 18.0, 1.005, False),
            Generator("G4", "b6", 10.0, 60.0, 60.0, 2, 2, 60.0, 1.005, False),
        ),
        ptg_technology=PtgTechnology(),
        siting_candidates=(
            SitingCandidate("n2", "G1", 2.5e6, 30),
            SitingCandidate("n3", "G1", 3.5e6, 30),
            SitingCandidate("n3", "G2", 2.0e6, 30),
        ),
        economics=EconomicParams(),
        horizon=24,
        pwl_segments=2,
    )


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    for name, factory in (("toy3", toy3), ("toy3-ccus", toy3_ccus), ("mesh6", mesh6)):
        inst = factory()
        validate(inst)
        (DATA / f"{name}.json").write_text(json.dumps(instance_to_dict(inst), indent=2) + "\n", encoding="utf-8")
        print(f"wrote {DATA / f'{name}.json'}")


if __name__ == "__main__":
    main()
