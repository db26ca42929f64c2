import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socompliance import oracle
from socompliance.assignment import SO, solve_equilibrium
from socompliance.compliance import (JOINT_LP, UE_LP, ComplianceError, assign_compliant_flow, build_ue_lp,
                                     check_sufficiency, decompose_flow, decompose_flow_with_cycles, max_ue_share)
from socompliance.lp import solve_lp
from socompliance.network import LatencyFunction, make_network
from socompliance.reduced_cost import EXACT, reduced_cost_sets

AEC = 1e-12


def _setup(model, tol=1e-8):
    so = solve_equilibrium(model, SO, AEC, max_iterations=5000)
    return so, reduced_cost_sets(model, so, EXACT, tol)


def test_pigou_ue_lp_structure(pigou):
    so, rc = _setup(pigou)
    inst = build_ue_lp(pigou, so, rc)
    assert list(inst.r_index) == [(0, 1)] and list(inst.x_index) == [(0, 1)]
    lp = inst.lp
    assert lp.upper[inst.r_index[(0, 1)]] == 1.0
    # conservation at s and t plus one capacity row on link b
    assert lp.n_constraints == 3
    cap = [i for i, n in enumerate(lp.row_names) if n.startswith("cap")]
    assert len(cap) == 1 and lp.rhs[cap[0]] == pytest.approx(0.5)


def test_origin_without_demand_adds_nothing():
    C, A = LatencyFunction.constant, LatencyFunction.affine
    model = make_network([(0, 1, A(0.0, 1.0)), (1, 2, C(1.0))], {(0, 1): 1.0}, n_nodes=3)
    so, rc = _setup(model)
    inst = build_ue_lp(model, so, rc)
    assert all(s == 0 for s, _ in inst.x_index) and list(inst.r_index) == [(0, 1)]


def test_fingerprint_mismatch(pigou, braess):
    so, rc = _setup(pigou)
    so_b, rc_b = _setup(braess)
    with pytest.raises(ValueError):
        build_ue_lp(pigou, so, rc_b)
    with pytest.raises(ValueError):
        max_ue_share(braess, so, rc)
    ue = solve_equilibrium(pigou, "UE", AEC)
    with pytest.raises(ValueError):
        build_ue_lp(pigou, ue, rc)


def test_pigou_max_ue(pigou):
    so, rc = _setup(pigou)
    res = max_ue_share(pigou, so, rc)
    assert res.method == UE_LP
    assert res.r_ue_total == pytest.approx(0.5)
    assert res.percent_compliant == pytest.approx(50.0)
    np.testing.assert_allclose(res.compliant_flow, [0.5, 0.0], atol=1e-9)
    np.testing.assert_allclose(res.ue_subflow, [0.0, 0.5], atol=1e-9)


def test_braess_max_ue(braess):
    # the shortcut is the only acceptable path, but any UE flow on it pushes the
    # outer links beyond their SO load, so every agent must be compliant
    so, rc = _setup(braess)
    res = max_ue_share(braess, so, rc)
    assert res.ue_lp_bound == pytest.approx(0.5)
    assert res.method == JOINT_LP
    assert res.r_ue_total == pytest.approx(0.0, abs=1e-9)
    assert res.compliant_fraction == pytest.approx(1.0)
    outer = sorted(v for _, _, _, v in res.compliant_paths)
    assert sum(outer) == pytest.approx(1.0)
    assert {p for _, _, p, _ in res.compliant_paths} <= {(0, 1), (2, 3)}


def test_assign_compliant_flow(pigou, braess):
    so, rc = _setup(pigou)
    ue = {0: np.array([0.0, 0.5])}
    np.testing.assert_allclose(assign_compliant_flow(pigou, so, ue, {(0, 1): 0.5}), [0.5, 0.0], atol=1e-9)
    assert not assign_compliant_flow(pigou, so, ue, {(0, 1): 0.0}).any()
    so_b, _ = _setup(braess)
    shortcut = {0: np.array([0.5, 0.0, 0.0, 0.5, 0.5])}
    with pytest.raises(ComplianceError):
        assign_compliant_flow(braess, so_b, shortcut, {(0, 3): 0.5})
    flow = assign_compliant_flow(braess, so_b, {0: np.zeros(5)}, {(0, 3): 0.5})
    assert flow[0] + flow[2] == pytest.approx(0.5)
    assert np.all(flow <= so_b.f_bar + 1e-9)


def test_assign_compliant_flow_rejects_excess(pigou):
    so, _ = _setup(pigou)
    with pytest.raises(ValueError):
        assign_compliant_flow(pigou, so, {0: np.zeros(2)}, {(0, 1): 2.0})


def test_pigou_sufficiency_examples(pigou):
    so, rc = _setup(pigou)
    assert check_sufficiency(pigou, so, rc, {(0, 1): 0.5}).sufficient
    assert not check_sufficiency(pigou, so, rc, {(0, 1): 0.3}).sufficient
    assert check_sufficiency(pigou, so, rc, dict(pigou.demand)).sufficient
    with pytest.raises(ValueError):
        check_sufficiency(pigou, so, rc, {(0, 1): 1.5})


def test_sufficiency_witness_is_within_f_bar(pigou):
    so, rc = _setup(pigou)
    v = check_sufficiency(pigou, so, rc, {(0, 1): 0.7})
    combined = v.ue_per_origin[0] + v.compliant_per_origin[0]
    assert np.all(combined <= so.f_bar + 1e-9)
    assert combined.sum() == pytest.approx(1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 23), st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2), st.floats(0.0, 1.0))
def test_sufficiency_monotone(corpus_runs, k, shares, bump):
    name, model, so, rc, res = corpus_runs[k]
    pairs = sorted(model.demand)
    D = {p: shares[i % 2] * model.demand[p] for i, p in enumerate(pairs)}
    D2 = {p: d + bump * (model.demand[p] - d) for p, d in D.items()}
    if check_sufficiency(model, so, rc, D).sufficient:
        assert check_sufficiency(model, so, rc, D2).sufficient, name


def test_sufficiency_agrees_with_max_ue(corpus_runs):
    for name, model, so, rc, res in corpus_runs:
        assert check_sufficiency(model, so, rc, res.compliant_demand).sufficient, name
        if res.r_ue_total > 1e-4:
            # asking for slightly more UE demand on some pair must fail
            k = max(res.r_ue, key=lambda p: model.demand[p] - res.compliant_demand[p])
            tighter = dict(res.compliant_demand)
            step = min(1e-3, tighter[k]) if tighter[k] > 0 else 0.0
            if step > 0:
                tighter[k] -= step
                assert not check_sufficiency(model, so, rc, tighter).sufficient, name


def test_result_invariants(corpus_runs):
    for name, model, so, rc, res in corpus_runs:
        for k, R in model.demand.items():
            assert 0.0 <= res.r_ue[k] <= R
            assert res.r_ue[k] + res.compliant_demand[k] == pytest.approx(R, abs=1e-12), name
        assert 0.0 <= res.compliant_fraction <= 1.0
        assert np.all(res.ue_subflow + res.compliant_flow <= so.f_bar + 1e-7), name
        assert res.r_ue_total <= res.ue_lp_bound + 1e-9, name
        for s in model.origins:
            assert set(np.flatnonzero(res.ue_per_origin[s] > 1e-12)) <= set(rc.links(s)), name


def test_ue_lp_column_count_sioux_falls(sf_pipeline, sioux_falls):
    inst = build_ue_lp(sioux_falls, sf_pipeline.so, sf_pipeline.rc)
    assert inst.lp.n_variables <= 24 * 24 + 24 * 76
    assert all(e in sf_pipeline.rc.links(s) for s, e in inst.x_index)


# ----------------------------------------------------------- decomposition

def _chain():
    C = LatencyFunction.constant
    return make_network([(0, 1, C(1.0)), (1, 2, C(1.0)), (2, 3, C(1.0))], {(0, 3): 5.0})


def test_decompose_chain():
    paths = decompose_flow(_chain(), {0: np.array([5.0, 5.0, 5.0])}, {(0, 3): 5.0})
    assert list(paths) == [(0, 3, (0, 1, 2), 5.0)]


def test_decompose_parallel(pigou):
    paths = decompose_flow(pigou, {0: np.array([1.0, 1.0])}, {(0, 1): 2.0})
    assert sorted(p for _, _, p, _ in paths) == [(0,), (1,)]
    assert all(v == 1.0 for *_, v in paths)


def test_decompose_cancels_cycles():
    C = LatencyFunction.constant
    model = make_network([(0, 1, C(1.0)), (1, 2, C(1.0)), (2, 1, C(1.0)), (2, 3, C(1.0))], {(0, 3): 1.0})
    paths, cycles = decompose_flow_with_cycles(model, {0: np.array([1.0, 1.5, 0.5, 1.0])}, {(0, 3): 1.0})
    assert list(paths) == [(0, 3, (0, 1, 3), 1.0)]
    assert len(cycles) == 1 and cycles[0][2] == pytest.approx(0.5)


def test_decompose_rejects_conservation_violation():
    with pytest.raises(ValueError, match="conservation"):
        decompose_flow(_chain(), {0: np.array([5.0, 4.0, 5.0])}, {(0, 3): 5.0})


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_decompose_round_trip_random(seed):
    """Random path flows on a layered DAG aggregate, decompose and re-aggregate."""
    rng = np.random.default_rng(seed)
    n = 6
    links = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.6 or j == i + 1]
    model = make_network([(u, v, LatencyFunction.constant(1.0)) for u, v in links],
                         {(0, n - 1): 1.0, (0, 3): 1.0, (1, n - 1): 1.0})
    out = {v: [e for e, (a, _) in enumerate(links) if a == v] for v in range(n)}
    flows = {s: np.zeros(len(links)) for s in (0, 1)}
    demands = {}
    for s, t in ((0, n - 1), (0, 3), (1, n - 1)):
        for _ in range(int(rng.integers(1, 4))):
            v, vol = s, float(rng.uniform(0.1, 2.0))
            while v != t:
                choices = [e for e in out[v] if links[e][1] <= t]
                e = choices[int(rng.integers(len(choices)))]
                flows[s][e] += vol
                v = links[e][1]
            demands[(s, t)] = demands.get((s, t), 0.0) + vol
    paths = decompose_flow(model, flows, demands)
    for s in flows:
        mine = [p for p in paths if p[0] == s]
        assert len(mine) <= model.n_links
        agg = sum((np.bincount(p[2], minlength=model.n_links) * p[3] for p in mine), np.zeros(model.n_links))
        np.testing.assert_allclose(agg, flows[s], atol=1e-7)
    for k, d in demands.items():
        assert paths.od_totals()[k] == pytest.approx(d, abs=1e-7)
    paths.validate(model)
