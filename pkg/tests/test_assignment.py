import numpy as np
import pytest

from socompliance.assignment import (LATENCY, MARGINAL_COST, SO, UE, AssignmentError, compute_aec, compute_f_bar,
                                     solve_equilibrium)
from socompliance.network import LatencyFunction, NetworkError, PathFlowSet, make_network, path_metrics

AEC = 1e-10


def test_pigou_ue(pigou):
    sol = solve_equilibrium(pigou, UE, AEC)
    assert sol.converged
    np.testing.assert_allclose(sol.link_flow, [0.0, 1.0], atol=1e-9)
    assert sol.total_travel_time == pytest.approx(1.0)
    assert sol.f_bar is None


def test_pigou_so(pigou):
    sol = solve_equilibrium(pigou, SO, AEC)
    assert sol.converged
    np.testing.assert_allclose(sol.link_flow, [0.5, 0.5], atol=1e-9)
    assert sol.total_travel_time == pytest.approx(0.75)
    assert sol.f_bar[0] == np.inf
    assert sol.f_bar[1] == pytest.approx(0.5)


def test_compute_aec_examples(pigou):
    on_a = PathFlowSet(((0, 1, (0,), 1.0),))
    assert compute_aec(pigou, on_a, LATENCY) == pytest.approx(1.0)
    on_b = PathFlowSet(((0, 1, (1,), 1.0),))
    assert compute_aec(pigou, on_b, LATENCY) == pytest.approx(0.0)
    empty = make_network([(0, 1, LatencyFunction.constant(1.0))], {})
    assert compute_aec(empty, PathFlowSet(), MARGINAL_COST) == 0.0


def test_compute_f_bar_examples():
    model = make_network([(0, 1, LatencyFunction.bpr(10.0, 100.0)), (0, 1, LatencyFunction.constant(1.0)),
                          (0, 1, LatencyFunction.bpr(10.0, 100.0))], {(0, 1): 1.0})
    fb = compute_f_bar(model, np.array([50.0, 3.0, 0.0]))
    assert fb[0] == 50.0
    assert fb[1] == np.inf
    # idle BPR link: latency may rise by at most 1e-12 above free flow
    assert 0.0 < fb[2] < 1e-1
    assert 10.0 * 0.15 * (fb[2] / 100.0) ** 4 <= 1e-12 * (1 + 1e-9)


def test_closed_link_never_used():
    model = make_network([(0, 1, LatencyFunction.bpr(1.0, 0.0)), (0, 1, LatencyFunction.bpr(5.0, 10.0))],
                         {(0, 1): 4.0})
    for mode in (UE, SO):
        sol = solve_equilibrium(model, mode, AEC)
        assert sol.link_flow[0] == 0.0
    assert compute_f_bar(model, sol.link_flow)[0] == 0.0


def test_unroutable_demand_rejected():
    with pytest.raises((NetworkError, AssignmentError)):
        make_network([(1, 0, LatencyFunction.constant(1.0))], {(0, 1): 1.0})


def test_bad_arguments(pigou):
    with pytest.raises(ValueError):
        solve_equilibrium(pigou, "XX", AEC)
    with pytest.raises(ValueError):
        solve_equilibrium(pigou, UE, 0.0)


def test_non_convergence_is_flagged(sioux_falls):
    sol = solve_equilibrium(sioux_falls, UE, 1e-14, max_iterations=2)
    assert not sol.converged and sol.iterations == 2
    assert sol.path_flows.link_flow(sioux_falls.n_links) == pytest.approx(sol.link_flow, abs=1e-6)


def _check_solution(model, sol, slack):
    np.testing.assert_allclose(sol.path_flows.link_flow(model.n_links), sol.link_flow, rtol=1e-9, atol=1e-9)
    for od, routed in sol.path_flows.od_totals().items():
        assert routed == pytest.approx(model.demand[od], rel=1e-9)
    assert sol.aec >= 0
    metric = 0 if sol.mode == UE else 1
    best = {}
    for s, t, p, v in sol.path_flows:
        cost = path_metrics(model, sol.link_flow, p)[metric]
        best[(s, t)] = min(best.get((s, t), np.inf), cost)
    for s, t, p, v in sol.path_flows:
        if v > 1e-9:
            assert path_metrics(model, sol.link_flow, p)[metric] <= best[(s, t)] + slack


@pytest.mark.slow
def test_sioux_falls_equilibria(sioux_falls):
    ue = solve_equilibrium(sioux_falls, UE, 1e-8)
    so = solve_equilibrium(sioux_falls, SO, 1e-8)
    assert ue.converged and so.converged
    assert so.total_travel_time <= ue.total_travel_time
    assert ue.total_travel_time == pytest.approx(7_480_225, rel=5e-3)
    assert so.total_travel_time == pytest.approx(7_194_256, rel=5e-3)
    # used-path cost gaps stay at the aec scale (demand-weighted mean <= 1e-8)
    _check_solution(sioux_falls, ue, 1e-4)
    _check_solution(sioux_falls, so, 1e-4)
    assert np.all(so.f_bar >= so.link_flow)


def test_corpus_solutions(corpus_runs):
    for name, model, so, _, _ in corpus_runs:
        assert so.converged, name
        _check_solution(model, so, 1e-9)
        ue = solve_equilibrium(model, UE, 1e-12, max_iterations=5000)
        _check_solution(model, ue, 1e-9)
        assert so.total_travel_time <= ue.total_travel_time + 1e-12, name
        assert np.all(so.f_bar >= so.link_flow), name


@pytest.mark.slow
def test_so_latencies_agree_across_starts(sioux_falls):
    aec = 1e-8
    a = solve_equilibrium(sioux_falls, SO, aec, seed=1)
    b = solve_equilibrium(sioux_falls, SO, aec, seed=2)
    assert a.converged and b.converged
    np.testing.assert_allclose(a.link_latency, b.link_latency, rtol=0, atol=10 * aec)


def test_so_latencies_agree_on_corpus(corpus_runs):
    for name, model, so, _, _ in corpus_runs:
        other = solve_equilibrium(model, SO, 1e-12, max_iterations=5000, seed=7)
        np.testing.assert_allclose(other.link_latency, so.link_latency, rtol=0, atol=10 * 1e-12,
                                   err_msg=name)


def test_determinism(pigou, braess):
    for model in (pigou, braess):
        a = solve_equilibrium(model, SO, AEC)
        b = solve_equilibrium(model, SO, AEC)
        assert np.array_equal(a.link_flow, b.link_flow) and a.path_flows == b.path_flows
