"""Acceptance criteria.  Each test records one PASS/FAIL line, echoed in the terminal summary."""
from __future__ import annotations

import dataclasses
import math
import time

import numpy as np

from ccus_plan.engine import (
    Box,
    ScenarioGrid,
    build_deterministic_model,
    solve_deterministic,
    solve_no_ccus,
    solve_robust,
    solve_stochastic,
    value_of_stochastic_solution,
)
from ccus_plan.formulation import compute_breakpoints
from ccus_plan.instance import annualization_coefficient, builtin_instance
from ccus_plan.milp import SWEEP_OPTIONS
from ccus_plan.oracle import count_assignments, enumerate_optimum, integer_domains
from ccus_plan.sweep import run_sweep

from conftest import investing_variant, record_acceptance
from uc_check import uc_violations


def verdict(name: str, ok: bool, detail: str) -> None:
    record_acceptance(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, detail


def rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def test_oracle_equivalence(toy3_ccus):
    start = time.perf_counter()
    model = build_deterministic_model(toy3_ccus, 50, 40).model
    n = count_assignments(integer_domains(model))
    report = enumerate_optimum(model, integer_budget_limit=4096)
    sol = solve_deterministic(toy3_ccus, 50, 40)
    elapsed = time.perf_counter() - start
    r = rel(sol.objective, report.best_objective)
    ok = n <= 4096 and r <= 1e-6 and elapsed < 60
    verdict("oracle equivalence", ok,
            f"{n} assignments, oracle {report.best_objective!r} vs solver {sol.objective!r}, rel {r:.2e}, {elapsed:.1f}s")


def test_robust_worst_corner(toy3_ccus):
    start = time.perf_counter()
    box = Box((1.0, 120.0), (1.0, 80.0))
    corner = solve_robust(toy3_ccus, box, "corner")
    epi = solve_robust(toy3_ccus, box, "vertex_epigraph")
    elapsed = time.perf_counter() - start
    r = rel(corner.objective, epi.objective)
    ok = corner.worst_corner == (120.0, 1.0) and epi.worst_corner == (120.0, 1.0) and r <= 1e-6 and elapsed < 120
    verdict("robust worst corner", ok,
            f"corner={corner.worst_corner} epigraph={epi.worst_corner}, rel {r:.2e}, {elapsed:.1f}s")


def test_no_investment_region(toy3_ccus):
    start = time.perf_counter()
    grid = ScenarioGrid.even(5, 5)
    sweep = run_sweep(toy3_ccus, grid.tax_points, grid.price_points)
    elapsed = time.perf_counter() - start
    region = [c for c in sweep.cells if c.price > c.tax]
    bad = [(c.tax, c.price, c.y_sum) for c in region if c.y_sum != 0]
    unsolved = [c for c in sweep.cells if not c.ok]
    ok = region and not bad and not unsolved and elapsed < 300
    verdict("no-investment region", bool(ok),
            f"{len(region)} cells with price > tax, {len(bad)} investing, {len(unsolved)} unsolved, {elapsed:.1f}s")


def test_monotonicity_suite(toy3_ccus):
    taxes = [10.0 * k for k in range(13)]
    prices = [10.0 * k for k in range(9)]
    sweep = run_sweep(toy3_ccus, taxes, prices, jobs=2)
    total = np.array(sweep.matrix("total_cost"), dtype=float)
    tol = 2 * SWEEP_OPTIONS.gap_tol * np.abs(total)
    tax_viol = int(np.sum(total[:-1, :] > total[1:, :] + tol[1:, :]))
    price_viol = int(np.sum(total[:, 1:] > total[:, :-1] + tol[:, :-1]))
    ok = total.shape == (13, 9) and np.isfinite(total).all() and tax_viol == 0 and price_viol == 0
    verdict("monotonicity suite", bool(ok),
            f"{total.size} cells, {tax_viol} tax violations, {price_viol} price violations")


def test_stochastic_bounds(toy3_ccus):
    det = solve_deterministic(toy3_ccus, 50, 40)
    single = solve_stochastic(toy3_ccus, ScenarioGrid.single(50, 40))
    r = rel(single.objective, det.objective)
    grid = ScenarioGrid.even(5, 5)
    vss = value_of_stochastic_solution(toy3_ccus, grid)
    gap_abs = 1e-6 * abs(vss["rp"])
    ok = r <= 1e-6 and vss["vss"] >= -gap_abs and len(grid.scenarios()) == 25
    verdict("stochastic bounds", ok, f"degenerate rel {r:.2e}, VSS {vss['vss']!r} (gap {gap_abs:.1e})")


def _carbon_violations(sol) -> tuple[int, int]:
    inst = sol.instance
    bad = checked = 0
    for sched in sol.schedules.values():
        for g in inst.ccpp_plants:
            for t in range(inst.horizon):
                p = sched["P_gen"][g.id][t]
                emi = sched["Q_emi"][g.id][t]
                cc, cs, cu = (sched[k][g.id][t] for k in ("Q_cc", "Q_cs", "Q_cu"))
                checked += 1
                if (abs(cc - cs - cu) > 1e-6 or cc < -1e-6 or cc > emi + 1e-6
                        or abs(emi - 1.005 * p) > 1e-6 or g.emission_factor != 1.005):
                    bad += 1
    return bad, checked


def test_carbon_conservation(toy3_ccus):
    invest = investing_variant(toy3_ccus)
    box = Box((1.0, 120.0), (1.0, 80.0))
    solutions = [
        solve_deterministic(toy3_ccus, 50, 40),
        solve_deterministic(invest, 50, 40),
        solve_deterministic(invest, 0, 0),
        solve_stochastic(invest, ScenarioGrid.even(3, 3)),
        solve_robust(toy3_ccus, box, "vertex_epigraph"),
        solve_robust(invest, box, "corner"),
    ]
    bad = checked = 0
    for sol in solutions:
        b, c = _carbon_violations(sol)
        bad, checked = bad + b, checked + c
    utilised = sum(sol.carbon_volumes["utilization"] > 0 for sol in solutions)
    ok = bad == 0 and checked > 0 and utilised > 0
    verdict("carbon conservation", ok, f"{checked} plant-hours over {len(solutions)} solutions, {bad} violations")


def test_pwl_error_certificate():
    rng = np.random.default_rng(20240601)
    pipelines = [(p, seg) for name in ("toy3", "mesh6") for p in builtin_instance(name).gas_pipelines
                 for seg in (1, 2, 3, 4, 8)]
    violations = 0
    for pipe, seg in pipelines:
        bp = compute_breakpoints(pipe, seg)
        n = bp.segments
        bound = bp.max_width ** 2 / 4
        for _ in range(1000):
            k = int(rng.integers(n))
            delta = np.zeros(n)
            delta[:k] = 1.0
            delta[k] = rng.uniform()
            phi = (np.arange(n - 1) < k).astype(float)
            # filling rows: phi_i <= delta_i, delta_{i+1} <= phi_i
            assert np.all(phi <= delta[:-1] + 1e-12) and np.all(delta[1:] <= phi + 1e-12)
            f, image = bp.reconstruct(delta)
            if abs(image - f * abs(f)) > bound * (1 + 1e-9) + 1e-12:
                violations += 1
    verdict("PWL error certificate", violations == 0,
            f"{len(pipelines)} pipeline/segment pairs x 1000 points, {violations} violations")


def _free_commitment_variant(base, rng):
    """toy3 with loose lines and scaled-down loads so both units can cycle."""
    scale = rng.uniform(0.2, 0.9)
    buses = tuple(dataclasses.replace(b, load=tuple(x * scale for x in b.load)) for b in base.buses)
    lines = tuple(dataclasses.replace(ln, capacity=400.0) for ln in base.lines)
    gens = tuple(
        dataclasses.replace(g, unit_cost=float(rng.uniform(10, 40)), output_min=float(rng.uniform(5, 40)),
                            min_up=int(rng.integers(1, 6)), min_down=int(rng.integers(1, 6)),
                            ramp_max=float(rng.uniform(40, 150)))
        for g in base.generators
    )
    return dataclasses.replace(base, buses=buses, lines=lines, generators=gens)


def test_uc_validity(toy3):
    rng = np.random.default_rng(7)
    schedules = []
    while len(schedules) < 100:
        inst = _free_commitment_variant(toy3, rng)
        sol = solve_no_ccus(inst, float(rng.uniform(0, 120)))
        sched = sol.schedules["base"]
        for g in inst.generators:
            schedules.append((g, sched["u"][g.id], sched["v"][g.id], sched["w"][g.id]))
    schedules = schedules[:100]
    failures = [uc_violations(u, v, w, g.min_up, g.min_down) for g, u, v, w in schedules]
    n_bad = sum(bool(f) for f in failures)
    cycling = sum(0 < sum(round(x) for x in u) < len(u) for _, u, _, _ in schedules)
    ok = n_bad == 0 and cycling > 0
    verdict("UC validity", ok, f"100 schedules, {cycling} with commitment changes, {n_bad} failing run-length checks")


def test_annualization():
    dr, years = 0.08, 20
    closed = dr * (1 + dr) ** years / ((1 + dr) ** years - 1)
    got = annualization_coefficient(dr, years)
    ok = abs(got - 0.101852) <= 1e-6 and math.isclose(got, closed, rel_tol=1e-12)
    verdict("annualization", ok, f"kappa(0.08, 20) = {got!r}, closed form {closed!r}")


def test_superset_dominance(toy3_ccus):
    rng = np.random.default_rng(11)
    invest = investing_variant(toy3_ccus)
    worst = -math.inf
    failures = 0
    for k in range(10):
        tax, price = float(rng.uniform(0, 120)), float(rng.uniform(0, 80))
        inst = toy3_ccus if k % 2 == 0 else invest
        with_ccus = solve_deterministic(inst, tax, price).objective
        without = solve_no_ccus(inst, tax).objective
        excess = with_ccus - without
        worst = max(worst, excess)
        if excess > 1e-6 * abs(without):
            failures += 1
    verdict("superset dominance", failures == 0, f"10 (tax, price) pairs, max(with - without) = {worst!r}")

