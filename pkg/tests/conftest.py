from __future__ import annotations

import dataclasses

import pytest
from hypothesis import HealthCheck, settings

from ccus_plan.instance import PtgTechnology, builtin_instance

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def toy3():
    return builtin_instance("toy3")


@pytest.fixture(scope="session")
def toy3_ccus():
    return builtin_instance("toy3-ccus")


def investing_variant(inst):
    """toy3-ccus with expensive gas and cheap PtG modules, so methane production pays off."""
    src = inst.gas_sources[0]
    return dataclasses.replace(
        inst,
        meta={**inst.meta, "name": "toy3-ccus-invest"},
        gas_sources=(dataclasses.replace(src, unit_cost=1.5e6),),
        ptg_technology=PtgTechnology(unit_invest_cost=2.0e5),
    )


@pytest.fixture(scope="session")
def toy3_invest(toy3_ccus):
    return investing_variant(toy3_ccus)
