import csv
import json

import pytest

from ccus_plan import sweep as sweep_mod
from ccus_plan.cli import main, parse_axis
from ccus_plan.engine import NO_CCUS, PlanningError, solve_deterministic, solve_no_ccus
from ccus_plan.instance import dumps_instance
from ccus_plan.sweep import CARBON_KEYS, SWEEP_METRICS, DailyCarbonProfile, check_axis, emit_reports, run_sweep


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------- sweep


@pytest.fixture(scope="module")
def small_sweep(toy3_invest):
    return run_sweep(toy3_invest, [1.0, 120.0], [1.0, 80.0])


def test_sweep_csv_shape(small_sweep, tmp_path):
    (path,) = emit_reports(small_sweep, tmp_path)
    rows = _read(path)
    assert rows[0] == ["tax", "price", "metric", "value"]
    assert len(rows) - 1 == 4 * len(SWEEP_METRICS)
    assert {r[2] for r in rows[1:]} == set(SWEEP_METRICS)
    assert small_sweep.matrix("status") == [["optimal", "optimal"], ["optimal", "optimal"]]


def test_sweep_cells_match_single_solves(small_sweep, toy3_invest):
    cell = small_sweep.cell(0, 1)
    assert (cell.tax, cell.price) == (1.0, 80.0)
    sol = solve_deterministic(toy3_invest, 1.0, 80.0)
    assert cell.total_cost == pytest.approx(sol.objective, rel=1e-4)
    assert cell.y_sum == sol.y_sum


def test_parallel_sweep_is_identical(toy3_ccus, tmp_path):
    taxes, prices = [0.0, 60.0, 120.0], [0.0, 80.0]
    a = run_sweep(toy3_ccus, taxes, prices, jobs=1)
    b = run_sweep(toy3_ccus, taxes, prices, jobs=2)
    strip = [m for m in SWEEP_METRICS if m != "wall_time"]
    for ca, cb in zip(a.cells, b.cells):
        assert [getattr(ca, m) for m in strip] == [getattr(cb, m) for m in strip]


def test_sweep_no_ccus_mode(toy3):
    grid = run_sweep(toy3, [0.0, 50.0], [0.0], mode=NO_CCUS)
    assert grid.cell(0, 0).capture == 0.0 and grid.cell(1, 0).y_sum == 0
    assert grid.cell(1, 0).total_cost == pytest.approx(solve_no_ccus(toy3, 50.0).objective, rel=1e-4)
    with pytest.raises(ValueError):
        run_sweep(toy3, [0.0], [0.0], mode="robust")


def test_sweep_isolates_failing_cells(toy3_ccus, monkeypatch, tmp_path):
    real = sweep_mod.solve_deterministic

    def flaky(inst, tax, price, options=None):
        if tax == 60.0:
            raise PlanningError("infeasible", "forced")
        if price == 80.0:
            raise RuntimeError("boom")
        return real(inst, tax, price, options)

    monkeypatch.setattr(sweep_mod, "solve_deterministic", flaky)
    grid = run_sweep(toy3_ccus, [0.0, 60.0], [0.0, 80.0])
    assert grid.matrix("status") == [["optimal", "error: RuntimeError"], ["infeasible", "infeasible"]]
    assert grid.cell(1, 0).total_cost is None and not grid.cell(1, 0).ok
    rows = _read(emit_reports(grid, tmp_path)[0])
    assert ["60.0", "0.0", "total_cost", ""] in rows


@pytest.mark.parametrize("axis", [[], [1.0, 1.0], [5.0, 2.0]])
def test_axis_validation(axis):
    with pytest.raises(ValueError):
        check_axis("tax axis", axis)


def test_parse_axis():
    assert parse_axis("0:120:10") == [10.0 * k for k in range(13)]
    assert parse_axis("1,5.5") == [1.0, 5.5]
    assert len(parse_axis("0:80:10")) == 9


# ---------------------------------------------------------------- reports


@pytest.fixture(scope="module")
def cases(toy3_invest):
    return {
        "no-ccus": solve_no_ccus(toy3_invest, 50),
        "deterministic": solve_deterministic(toy3_invest, 50, 40),
    }


def test_reports_are_byte_identical(cases, tmp_path):
    first = [p.read_bytes() for p in emit_reports(cases, tmp_path / "a")]
    second = [p.read_bytes() for p in emit_reports(cases, tmp_path / "b")]
    assert first == second


def test_breakdown_report(cases, tmp_path):
    breakdown, _ = emit_reports(cases, tmp_path)
    rows = _read(breakdown)
    header, body = rows[0], rows[1:]
    assert header == ["category", "index", "no-ccus", "deterministic"]
    table = {(r[0], r[1]): r[2:] for r in body}
    for item in ("invest_ccus", "invest_siting"):
        assert float(table["investment", item][0]) == 0.0
    for item in ("capture", "storage", "ope_ptg"):
        assert float(table["operation", item][0]) == 0.0
    assert float(table["revenue", "revenue"][0]) == 0.0
    det = cases["deterministic"]
    assert float(table["total", "total"][1]) == det.cost_breakdown.total
    assert float(table["carbon_volume_ton", "capture"][1]) == det.carbon_volumes["capture"]


def test_carbon_profile_report(cases, tmp_path):
    _, profile = emit_reports(cases, tmp_path)
    rows = _read(profile)
    assert rows[0] == ["hour", "case", *CARBON_KEYS]
    det_rows = [r for r in rows[1:] if r[1] == "deterministic"]
    assert len(det_rows) == 24
    cols = {name: k for k, name in enumerate(rows[0])}
    for r in det_rows:
        cap, sto, uti = (float(r[cols[k]]) for k in ("capture", "storage", "utilization"))
        assert cap == pytest.approx(sto + uti, abs=1e-6)


def test_daily_profile_matches_volumes(cases):
    det = cases["deterministic"]
    prof = DailyCarbonProfile.from_solution("det", det)
    assert list(prof.hours) == list(range(1, 25))
    omega = det.instance.economics.day_weight
    for key in CARBON_KEYS:
        assert omega * sum(getattr(prof, key)) == pytest.approx(det.carbon_volumes[key], rel=1e-9, abs=1e-9)


# ---------------------------------------------------------------- CLI


def test_cli_solve_and_verify(tmp_path, capsys):
    out = tmp_path / "det"
    assert main(["solve", "--mode", "det", "--tax", "50", "--price", "40", "--out", str(out)]) == 0
    doc = json.loads((out / "solution.json").read_text())
    assert doc["format"] == "ccus-plan-solution/1"
    assert {"breakdown.csv", "carbon_profile.csv", "solution.json"} <= {p.name for p in out.iterdir()}
    capsys.readouterr()
    assert main(["verify", str(out / "solution.json")]) == 0
    assert "AGREE" in capsys.readouterr().out


def test_cli_verify_detects_tampering(tmp_path, capsys):
    out = tmp_path / "noccus"
    assert main(["solve", "--instance", "toy3", "--mode", "no-ccus", "--out", str(out)]) == 0
    path = out / "solution.json"
    doc = json.loads(path.read_text())
    doc["objective"] += 1.0
    doc["cost_breakdown"]["total"] += 1.0
    path.write_text(json.dumps(doc))
    assert main(["verify", str(path)]) == 3
    assert "DISAGREE" in capsys.readouterr().out


def test_cli_verify_detects_inconsistent_breakdown(tmp_path):
    out = tmp_path / "noccus"
    main(["solve", "--instance", "toy3", "--mode", "no-ccus", "--out", str(out)])
    path = out / "solution.json"
    doc = json.loads(path.read_text())
    doc["cost_breakdown"]["total"] += 1.0
    path.write_text(json.dumps(doc))
    assert main(["verify", str(path)]) == 3


def test_cli_robust_prints_worst_corner(tmp_path, capsys):
    assert main(["solve", "--mode", "robust", "--out", str(tmp_path)]) == 0
    assert "worst corner: tax=120 price=1" in capsys.readouterr().out


def test_cli_sweep(tmp_path, capsys):
    assert main(["sweep", "--tax-axis", "0,120", "--price-axis", "0:80:80", "--out", str(tmp_path)]) == 0
    rows = _read(tmp_path / "sweep.csv")
    assert len(rows) - 1 == 4 * len(SWEEP_METRICS)
    assert "4 cells, 0 without a solution" in capsys.readouterr().out


def test_cli_export_lp(tmp_path, capsys):
    assert main(["export-lp", "--mode", "det"]) == 0
    text = capsys.readouterr().out
    assert "Minimize" in text.splitlines() and text.rstrip().endswith("End")
    assert "y_gen1" in text
    target = tmp_path / "m.lp"
    assert main(["export-lp", "--mode", "no-ccus", "--instance", "toy3", "--out", str(target)]) == 0
    assert "y_gen1" not in target.read_text()


def test_cli_reads_instance_files(tmp_path, toy3, capsys):
    path = tmp_path / "inst.json"
    path.write_text(dumps_instance(toy3))
    assert main(["solve", "--instance", str(path), "--mode", "no-ccus", "--out", str(tmp_path / "o")]) == 0


@pytest.mark.parametrize("argv", [
    ["solve", "--bogus"],
    ["frobnicate"],
    ["solve", "--instance", "toy99"],
    ["solve", "--mode", "robust", "--box", "1:120"],
    ["solve", "--mode", "stoch", "--grid", "0x3"],
    ["sweep", "--tax-axis", "10,5"],
    ["sweep", "--tax-axis", "0:10:-1"],
    ["verify", "/nonexistent/solution.json"],
    ["solve", "--mode", "det", "--instance", "toy3"],
])
def test_cli_invalid_input_exits_1(argv, tmp_path, capsys):
    assert main([*argv, *(["--out", str(tmp_path)] if argv[0] in ("solve", "sweep") else [])]) == 1


def test_cli_solver_failure_exits_2(tmp_path, toy3):
    raw = json.loads(dumps_instance(toy3))
    for b in raw["buses"]:
        b["load"] = [3 * x for x in b["load"]]
    path = tmp_path / "heavy.json"
    path.write_text(json.dumps(raw))
    assert main(["solve", "--instance", str(path), "--mode", "no-ccus", "--out", str(tmp_path)]) == 2


def test_cli_verify_budget_exceeded(tmp_path):
    out = tmp_path / "s"
    main(["solve", "--mode", "stoch", "--grid", "2x2", "--out", str(out)])
    assert main(["verify", str(out / "solution.json"), "--budget", "2"]) == 1

