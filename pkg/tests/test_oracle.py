import itertools
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccus_plan.engine import Box, build_deterministic_model, build_robust_model, solve_deterministic, solve_robust
from ccus_plan.milp import BINARY, INTEGER, MilpModel, solve
from ccus_plan.oracle import (
    BudgetExceeded,
    InfeasibleBounds,
    compare,
    count_assignments,
    enumerate_optimum,
    integer_domains,
    tighten_bounds,
    verify_solution,
)


def test_continuous_model_is_one_lp():
    m = MilpModel()
    x, y = m.add_variable("x", upper=5), m.add_variable("y", upper=5)
    m.add_constraint("c", [(1.0, x), (1.0, y)], ">=", 3)
    m.set_objective([(2.0, x), (1.0, y)])
    report = enumerate_optimum(m)
    assert report.enumerated == 1 and report.best_assignment == {}
    assert report.best_objective == pytest.approx(3.0)


def test_budget_exceeded_before_solving():
    m = MilpModel()
    hs = [m.add_variable(f"b{i}", BINARY) for i in range(13)]
    m.set_objective([(1.0, h) for h in hs])
    start = time.perf_counter()
    with pytest.raises(BudgetExceeded) as info:
        enumerate_optimum(m, integer_budget_limit=4096)
    assert info.value.count == 2**13 and info.value.limit == 4096
    assert time.perf_counter() - start < 1.0


def test_infeasible_bounds_reported_as_infeasible():
    m = MilpModel()
    x = m.add_variable("x", INTEGER, upper=3)
    m.add_constraint("c", [(1.0, x)], ">=", 5)
    with pytest.raises(InfeasibleBounds):
        tighten_bounds(m)
    report = enumerate_optimum(m)
    assert not report.optimal
    assert compare(report, None).agreement is True
    assert compare(report, 1.0).agreement is False


@pytest.fixture(scope="module")
def det_model(toy3_ccus):
    return build_deterministic_model(toy3_ccus, 50, 40).model


@pytest.fixture(scope="module")
def det_report(det_model):
    return enumerate_optimum(det_model)


def test_tightened_domain_is_small(det_model):
    domains = integer_domains(det_model)
    assert count_assignments(domains) <= 4096
    # without propagation the commitment binaries alone blow the budget
    assert count_assignments(integer_domains(det_model, tighten=False)) > 4096


def test_oracle_agrees_with_solver(toy3_ccus, det_report):
    sol = solve_deterministic(toy3_ccus, 50, 40)
    report = compare(det_report, sol.objective)
    assert report.agreement
    assert report.best_assignment["y[gen1]"] == sol.first_stage["y"]["gen1"]


def test_perturbed_objective_disagrees(toy3_ccus, det_report):
    sol = solve_deterministic(toy3_ccus, 50, 40)
    assert compare(det_report, sol.objective + 1.0).agreement is False
    assert compare(det_report, sol.objective - 1.0).agreement is False


def test_lower_bound_certificate(det_model, det_report):
    # every feasible assignment costs at least the oracle optimum
    best = det_report.best_objective
    handles = [h for h, _ in integer_domains(det_model)]
    fixed = {det_model.handle(n): v for n, v in det_report.best_assignment.items()}
    assert solve(det_model, fixed=fixed, relax=True).objective_value == pytest.approx(best, abs=1e-9)
    for h in handles[:3]:
        other = dict(fixed)
        other[h] = fixed[h] + 1
        res = solve(det_model, fixed=other, relax=True)
        if res.has_values:
            assert res.objective_value >= best - 1e-9


def test_deterministic_across_runs(det_model, det_report):
    again = enumerate_optimum(det_model)
    assert again.best_objective == det_report.best_objective
    assert again.best_assignment == det_report.best_assignment
    assert again.enumerated == det_report.enumerated


def test_verify_robust_corner_against_epigraph(toy3_ccus):
    box = Box((1.0, 120.0), (1.0, 80.0))
    corner = solve_robust(toy3_ccus, box, "corner")
    report = verify_solution(build_robust_model(toy3_ccus, box).model, corner)
    assert report.agreement, report


@st.composite
def boxed_programs(draw):
    n = draw(st.integers(1, 3))
    ub = [draw(st.integers(0, 4)) for _ in range(n)]
    coef = st.integers(-4, 4)
    rows = [([draw(coef) for _ in range(n)], draw(st.sampled_from(["<=", ">=", "="])), draw(st.integers(-3, 8)))
            for _ in range(draw(st.integers(1, 3)))]
    c = [draw(coef) for _ in range(n)]
    return ub, rows, c


def _feasible_points(ub, rows):
    for x in itertools.product(*(range(u + 1) for u in ub)):
        ok = True
        for a, sense, rhs in rows:
            lhs = sum(ai * xi for ai, xi in zip(a, x))
            ok &= {"<=": lhs <= rhs, ">=": lhs >= rhs, "=": lhs == rhs}[sense]
        if ok:
            yield x


@settings(max_examples=80)
@given(boxed_programs())
def test_propagation_never_cuts_feasible_points(prog):
    ub, rows, c = prog
    m = MilpModel()
    hs = [m.add_variable(f"x{i}", INTEGER, 0, u) for i, u in enumerate(ub)]
    for k, (a, sense, rhs) in enumerate(rows):
        m.add_constraint(f"r{k}", [(float(ai), h) for ai, h in zip(a, hs)], sense, rhs)
    m.set_objective([(float(ci), h) for ci, h in zip(c, hs)])
    points = list(_feasible_points(ub, rows))
    try:
        lb, tub = tighten_bounds(m)
    except InfeasibleBounds:
        assert not points
        return
    for x in points:
        assert all(lb[h] - 1e-9 <= xi <= tub[h] + 1e-9 for h, xi in zip(hs, x))
    report = enumerate_optimum(m)
    if points:
        assert report.best_objective == pytest.approx(min(sum(ci * xi for ci, xi in zip(c, x)) for x in points))
    else:
        assert not report.optimal
