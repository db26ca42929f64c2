import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rational_lp import classify, dual_bound, random_instance
from socompliance.lp import (EQ, GE, INFEASIBLE, ITERATION_LIMIT, LE, OPTIMAL, UNBOUNDED, LinearProgram, LpError,
                             export_lp, read_mps, solve_lp)


def test_single_bound():
    lp = LinearProgram("max")
    x = lp.add_variable("x", objective=1.0)
    lp.add_constraint({x: 1.0}, LE, 3.0)
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL and sol.objective_value == pytest.approx(3.0)


def test_simplex_face():
    lp = LinearProgram("max")
    x = lp.add_variable("x", objective=1.0)
    y = lp.add_variable("y", objective=1.0)
    lp.add_constraint({x: 1.0, y: 1.0}, LE, 1.0)
    sol = solve_lp(lp)
    assert sol.objective_value == pytest.approx(1.0)
    assert lp.max_violation(sol.x) <= 1e-9


def test_infeasible_and_unbounded():
    lp = LinearProgram("min")
    x = lp.add_variable("x", objective=1.0)
    lp.add_constraint({x: 1.0}, LE, -1.0)
    assert solve_lp(lp).status == INFEASIBLE
    lp = LinearProgram("max")
    x = lp.add_variable("x", objective=1.0)
    lp.add_constraint({x: 1.0}, GE, 2.0)
    assert solve_lp(lp).status == UNBOUNDED


def test_iteration_limit():
    lp = LinearProgram("max")
    xs = [lp.add_variable(f"x{i}", objective=1.0) for i in range(5)]
    for i in range(5):
        lp.add_constraint({xs[i]: 1.0, xs[(i + 1) % 5]: 1.0}, LE, 1.0)
    assert solve_lp(lp, max_iterations=1).status == ITERATION_LIMIT


def test_unconstrained_lp():
    lp = LinearProgram("min")
    lp.add_variable("x", -1.0, 4.0, 2.0)
    lp.add_variable("y", 0.0, 5.0, -1.0)
    sol = solve_lp(lp)
    assert sol.objective_value == pytest.approx(-7.0)
    lp.add_variable("z", 0.0, np.inf, -1.0)
    assert solve_lp(lp).status == UNBOUNDED


def test_model_validation():
    lp = LinearProgram()
    lp.add_variable("x")
    with pytest.raises(LpError):
        lp.add_variable("x")
    with pytest.raises(LpError):
        lp.add_variable("y", 2.0, 1.0)
    with pytest.raises(LpError):
        lp.add_constraint({5: 1.0}, LE, 1.0)
    with pytest.raises(LpError):
        lp.add_constraint({0: 1.0}, "<", 1.0)
    with pytest.raises(LpError):
        LinearProgram("maximise")


def test_pigou_ue_lp_objective(pigou):
    from socompliance.assignment import SO, solve_equilibrium
    from socompliance.compliance import build_ue_lp
    from socompliance.reduced_cost import reduced_cost_sets
    so = solve_equilibrium(pigou, SO, 1e-12)
    inst = build_ue_lp(pigou, so, reduced_cost_sets(pigou, so))
    assert solve_lp(inst.lp).objective_value == pytest.approx(0.5)


def _sample_lp():
    lp = LinearProgram("max", name="sample")
    x = lp.add_variable("x", 0.0, 4.0, 3.0)
    y = lp.add_variable("y name", -np.inf, np.inf, -1.5)
    z = lp.add_variable("z", 1.0, 1.0, 0.0)
    lp.add_constraint({x: 1.0, y: 2.0}, LE, 7.0, "cap")
    lp.add_constraint({x: 1.0, y: -1.0, z: 1.0}, GE, -2.0)
    lp.add_constraint({y: 1.0, z: 1.0}, EQ, 0.25, "bal")
    return lp


def test_mps_sections_and_round_trip():
    lp = _sample_lp()
    text = export_lp(lp)
    for section in ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
        assert section in text
    again = read_mps(text)
    assert again.var_names == lp.var_names and again.row_names == lp.row_names
    assert again.sense == lp.sense and again.relations == lp.relations
    for attr in ("lower", "upper", "objective", "rhs"):
        np.testing.assert_array_equal(getattr(again, attr), getattr(lp, attr))
    assert (again.matrix() != lp.matrix()).nnz == 0
    assert solve_lp(again).objective_value == pytest.approx(solve_lp(lp).objective_value)
    assert export_lp(again) == text


def test_mps_matches_external_reader(tmp_path):
    scipy_io = pytest.importorskip("scipy.optimize")
    lp = _sample_lp()
    again = read_mps(export_lp(lp))
    c, A, rel, b, lo, up = again.arrays()
    ub = [A[i].toarray()[0] * (1 if r == LE else -1) for i, r in enumerate(rel) if r != EQ]
    bu = [b[i] * (1 if r == LE else -1) for i, r in enumerate(rel) if r != EQ]
    eq = [A[i].toarray()[0] for i, r in enumerate(rel) if r == EQ]
    be = [b[i] for i, r in enumerate(rel) if r == EQ]
    ref = scipy_io.linprog(-c, A_ub=ub, b_ub=bu, A_eq=eq, b_eq=be, bounds=list(zip(lo, up)))
    assert -ref.fun == pytest.approx(solve_lp(lp).objective_value, abs=1e-9)


def test_empty_lp():
    lp = LinearProgram()
    text = export_lp(lp)
    assert "ROWS" in text and "ENDATA" in text
    again = read_mps(text)
    assert again.n_variables == 0 and again.n_constraints == 0
    assert solve_lp(lp).status == OPTIMAL


def test_determinism():
    lp = _sample_lp()
    a, b = solve_lp(lp), solve_lp(read_mps(export_lp(lp)))
    assert np.array_equal(a.x, b.x)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_rational_oracle(seed):
    lp, data = random_instance(np.random.default_rng(seed))
    status, value = classify(*data)
    sol = solve_lp(lp)
    assert sol.status == status
    if status == OPTIMAL:
        assert sol.objective_value == pytest.approx(float(value), abs=1e-7)
        assert lp.max_violation(sol.x) <= 1e-7
        bound = dual_bound(lp, sol.duals)
        assert abs(bound - sol.objective_value) <= 1e-6 * max(1.0, abs(sol.objective_value))
        assert sol.duality_gap <= 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 30), st.integers(3, 20))
def test_larger_random_lps_against_highs(seed, n, m):
    from scipy.optimize import linprog
    rng = np.random.default_rng(seed)
    A = rng.integers(-3, 6, (m, n)).astype(float)
    b = rng.integers(0, 20, m).astype(float)
    c = rng.integers(-5, 6, n).astype(float)
    up = np.where(rng.random(n) < 0.4, rng.integers(1, 10, n), np.inf)
    lp = LinearProgram("min")
    for j in range(n):
        lp.add_variable(f"x{j}", 0.0, up[j], c[j])
    for i in range(m):
        lp.add_constraint({j: A[i, j] for j in range(n)}, LE, b[i])
    ref = linprog(c, A_ub=A, b_ub=b, bounds=list(zip(np.zeros(n), up)), method="highs")
    sol = solve_lp(lp)
    if ref.status == 0:
        assert sol.status == OPTIMAL
        assert sol.objective_value == pytest.approx(ref.fun, rel=1e-9, abs=1e-7)
        assert sol.duality_gap <= 1e-6
    elif ref.status == 3:
        assert sol.status == UNBOUNDED
