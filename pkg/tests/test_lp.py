import pytest

from oosplan.lp import BINARY, INTEGER, Model, parse_lp, \
    read_solution


def knapsack() -> Model:
    m = Model("knapsack")
    values = [10.0, 13.0, 7.0, 8.0]
    weights = [3.0, 4.0, 2.0, 3.0]
    for i, v in enumerate(values):
        idx = m.add_var(f"x[{i}]", kind=BINARY)
        m.add_objective(idx, v)
    m.add_constr("cap", {i: w for i, w in enumerate(weights)}, "<=", 7.0)
    return m


def test_solve_knapsack():
    res = knapsack().solve()
    assert res.status == "optimal"
    assert res.objective == pytest.approx(23.0)
    assert res.values["x[0]"] == pytest.approx(1.0)
    assert res.values["x[1]"] == pytest.approx(1.0)


def test_continuous_and_integer():
    m = Model()
    x = m.add_var("x", ub=10.0)
    y = m.add_var("y", ub=10.0, kind=INTEGER)
    m.add_objective(x, 1.0)
    m.add_objective(y, 1.0)
    m.add_constr("c", {x: 1.0, y: 2.0}, "<=", 8.5)
    res = m.solve()
    assert res.status == "optimal"
    assert res.values["y"] == pytest.approx(round(res.values["y"]))
    assert res.objective == pytest.approx(8.5)


def test_infeasible_status():
    m = Model()
    x = m.add_var("x", ub=1.0)
    m.add_constr("c", {x: 1.0}, ">=", 2.0)
    res = m.solve()
    assert res.status == "infeasible"
    assert not res.feasible
    assert res.objective is None


def test_unbounded_status():
    m = Model()
    x = m.add_var("x")
    m.add_objective(x, 1.0)
    res = m.solve()
    assert res.status == "unbounded"


def test_fix_and_duplicate():
    m = Model()
    x = m.add_var("x", ub=5.0)
    m.add_objective(x, 1.0)
    m.fix(x, 2.5)
    assert m.solve().objective == pytest.approx(2.5)
    with pytest.raises(ValueError):
        m.add_var("x")
    with pytest.raises(ValueError):
        m.add_constr("bad", {x: 1.0}, "=<", 0.0)


def test_lp_round_trip(tmp_path):
    m = Model("rt")
    x = m.add_var("x[a|0]", ub=4.0)
    y = m.add_var("y", ub=3.0, kind=INTEGER)
    z = m.add_var("z", kind=BINARY)
    m.add_objective(x, 1.5)
    m.add_objective(y, 2.0)
    m.add_objective(z, -1.0)
    m.add_constr("c1", {x: 1.0, y: 1.0}, "<=", 5.25)
    m.add_constr("c2", {x: 2.0, z: -1e-5}, ">=", 0.5)
    m.add_constr("c3", {y: 1.0, z: 1.0}, "==", 2.0)
    path = tmp_path / "model.lp"
    m.write_lp(path)
    again = parse_lp(path)
    r1, r2 = m.solve(), again.solve()
    assert r1.status == r2.status == "optimal"
    assert r1.objective == pytest.approx(r2.objective, rel=1e-9)


def test_read_solution(tmp_path):
    p = tmp_path / "model.sol"
    p.write_text("# comment line\nx_a_0_ 1.5\ny 2\n")
    values = read_solution(p, default_names=["x[a|0]", "y", "z"])
    assert values["x[a|0]"] == 1.5
    assert values["y"] == 2.0
    assert values["z"] == 0.0


def test_solve_subprocess_round_trip(tmp_path):
    # external backend stub: parse the LP with our own reader, solve with
    # HiGHS, emit a plain name/value solution file
    import sys
    script = tmp_path / "solver.py"
    script.write_text(
        "import sys\n"
        "from oosplan.lp import parse_lp\n"
        "model = parse_lp(sys.argv[1])\n"
        "res = model.solve()\n"
        "with open(sys.argv[2], 'w') as fh:\n"
        "    for name, val in res.values.items():\n"
        "        fh.write(f'{name} {val!r}\\n')\n")
    m = knapsack()
    res = m.solve_subprocess(f"{sys.executable} {script} {{lp}} {{sol}}")
    assert res.status == "optimal"
    assert res.objective == pytest.approx(23.0)


def test_gap_and_mip_gap_reported():
    res = knapsack().solve(gap=0.5)
    assert res.feasible
    assert res.gap is None or res.gap <= 0.5 + 1e-9
