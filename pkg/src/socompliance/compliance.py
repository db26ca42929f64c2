"""Maximal self-interested share, sufficiency checks and compliant routing.

Self-interested (UE) demand from origin ``s`` may only travel on the links
``E^s_RC`` of the reduced-cost sets. The UE LP maximises the routed UE demand
subject to per-origin conservation and the per-link bound ``f_bar``. Its
optimum is an upper bound on the achievable UE share: the complementary
compliant demand must still be routable inside ``f_bar - f_UE``. When it is
not, a joint LP that carries both the UE and the compliant commodities decides
the largest share for which SO is actually reached.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assignment import EquilibriumSolution
from .lp import EQ, LE, LinearProgram, export_lp, solve_lp
from .network import NetworkModel, PathFlowSet
from .reduced_cost import ReducedCostSets

log = logging.getLogger(__name__)

UE_LP = "ue_lp"
JOINT_LP = "joint_lp"
DECOMPOSE_TOL = 1e-7


class ComplianceError(RuntimeError):
    pass


@dataclass(eq=False)
class UeLpInstance:
    lp: LinearProgram
    r_index: dict
    x_index: dict
    y_index: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class ComplianceResult:
    r_ue: dict
    r_ue_total: float
    ue_lp_bound: float
    ue_subflow: np.ndarray
    ue_per_origin: dict
    compliant_flow: np.ndarray
    compliant_per_origin: dict
    ue_paths: PathFlowSet
    compliant_paths: PathFlowSet
    compliant_fraction: float
    total_demand: float
    method: str
    compliant_demand: dict = field(default_factory=dict)
    cycles: tuple = ()
    disconnected_pairs: tuple = ()
    lp_stats: dict = field(default_factory=dict)

    @property
    def percent_compliant(self) -> float:
        return 100.0 * self.compliant_fraction

    @property
    def ue_lp_compliant_fraction(self) -> float:
        """Compliant share implied by the UE LP optimum alone (an upper bound on the UE share)."""
        if self.total_demand <= 0:
            return 0.0
        return float(np.clip(1.0 - self.ue_lp_bound / self.total_demand, 0.0, 1.0))


@dataclass(frozen=True)
class SufficiencyResult:
    sufficient: bool
    ue_per_origin: dict
    compliant_per_origin: dict
    lp_status: str


def _check_inputs(model, so, rc=None):
    fp = model.fingerprint()
    if so.model_fingerprint != fp:
        raise ValueError("SO solution was computed for a different network")
    if so.f_bar is None:
        raise ValueError("an SO-mode solution (with f_bar) is required")
    if rc is not None and rc.model_fingerprint != fp:
        raise ValueError("reduced-cost sets were computed for a different network")


def _allowed_compliant(model, s):
    """Links commodity ``s`` may use: none entering ``s``, none leaving a blocked centroid."""
    entering = set(model.in_links[s])
    out = []
    for e in range(model.n_links):
        u = int(model.tails[e])
        if e in entering or model.costs.closed[e]:
            continue
        if u != s and model.is_thru_blocked(u):
            continue
        out.append(e)
    return out


def _conservation(lp, model, s, var_of, supply, tag):
    """Per-node conservation for commodity ``s``.

    ``var_of`` maps link -> variable index. ``supply`` maps destination ->
    (coefficient dict on other variables, constant) describing the amount that
    must be absorbed there; the origin row balances the total.
    """
    nodes = {s} | set(supply)
    for e in var_of:
        nodes.add(int(model.tails[e]))
        nodes.add(int(model.heads[e]))
    name = model.node_ids
    total_coeffs, total_const = {}, 0.0
    for coeffs, const in supply.values():
        for j, a in coeffs.items():
            total_coeffs[j] = total_coeffs.get(j, 0.0) + a
        total_const += const
    for v in sorted(nodes):
        row = {}
        for e in model.out_links[v]:
            if e in var_of:
                row[var_of[e]] = row.get(var_of[e], 0.0) - 1.0
        for e in model.in_links[v]:
            if e in var_of:
                row[var_of[e]] = row.get(var_of[e], 0.0) + 1.0
        if v == s:
            # out - in = total supply  <=>  (in - out) + total = 0
            for j, a in total_coeffs.items():
                row[j] = row.get(j, 0.0) + a
            rhs = -total_const
        else:
            coeffs, const = supply.get(v, ({}, 0.0))
            for j, a in coeffs.items():
                row[j] = row.get(j, 0.0) - a
            rhs = const
        lp.add_constraint(row, EQ, rhs, f"{tag}[{name[s]},{name[v]}]")


def _bundle(lp, model, per_link_vars, cap, tag):
    for e in range(model.n_links):
        vars_e = per_link_vars.get(e)
        if not vars_e or not np.isfinite(cap[e]):
            continue
        lp.add_constraint({j: 1.0 for j in vars_e}, LE, max(float(cap[e]), 0.0), f"{tag}[{e + 1}]")


def build_ue_lp(model: NetworkModel, so: EquilibriumSolution, rc: ReducedCostSets) -> UeLpInstance:
    """The UE LP: maximise routed UE demand on the reduced-cost links within ``f_bar``."""
    _check_inputs(model, so, rc)
    lp = LinearProgram("max", "UE_LP")
    name = model.node_ids
    r_index, x_index = {}, {}
    per_link = {}
    for s in model.origins:
        for t in model.destinations_of(s):
            r_index[(s, t)] = lp.add_variable(f"r[{name[s]},{name[t]}]", 0.0, model.demand[(s, t)], 1.0)
        for e in sorted(rc.links(s)):
            j = lp.add_variable(f"x[{name[s]},{e + 1}]")
            x_index[(s, e)] = j
            per_link.setdefault(e, []).append(j)
    for s in model.origins:
        var_of = {e: x_index[(s, e)] for e in sorted(rc.links(s))}
        supply = {t: ({r_index[(s, t)]: 1.0}, 0.0) for t in model.destinations_of(s)}
        _conservation(lp, model, s, var_of, supply, "ue")
    _bundle(lp, model, per_link, so.f_bar, "cap")
    return UeLpInstance(lp, r_index, x_index)


def _compliant_block(lp, model, amounts, per_link, cost=None):
    """Per-origin compliant flow variables ``y[s,e]`` with their conservation rows.

    ``amounts`` maps each pair to ``(coefficient dict, constant)``: its
    compliant demand as an affine expression in other variables.
    """
    name = model.node_ids
    index = {}
    for s in sorted({o for o, _ in amounts}):
        var_of = {}
        for e in _allowed_compliant(model, s):
            obj = 0.0 if cost is None else float(cost[e])
            j = lp.add_variable(f"y[{name[s]},{e + 1}]", objective=obj)
            index[(s, e)] = var_of[e] = j
            per_link.setdefault(e, []).append(j)
        supply = {t: amounts[(o, t)] for (o, t) in amounts if o == s}
        _conservation(lp, model, s, var_of, supply, "co")
    return index


def _build_joint_lp(model, so, rc, fixed_ue=None):
    """UE and compliant commodities together; ``fixed_ue`` pins r to given values."""
    lp = LinearProgram("max" if fixed_ue is None else "min", "JOINT_LP")
    name = model.node_ids
    r_index, x_index = {}, {}
    per_link = {}
    for s in model.origins:
        for t in model.destinations_of(s):
            R = model.demand[(s, t)]
            if fixed_ue is None:
                lo, hi = 0.0, R
            else:
                lo = hi = float(fixed_ue.get((s, t), 0.0))
            r_index[(s, t)] = lp.add_variable(f"r[{name[s]},{name[t]}]", lo, hi, 1.0 if fixed_ue is None else 0.0)
        for e in sorted(rc.links(s)):
            j = lp.add_variable(f"x[{name[s]},{e + 1}]")
            x_index[(s, e)] = j
            per_link.setdefault(e, []).append(j)
    for s in model.origins:
        x_of = {e: x_index[(s, e)] for e in sorted(rc.links(s))}
        supply = {t: ({r_index[(s, t)]: 1.0}, 0.0) for t in model.destinations_of(s)}
        _conservation(lp, model, s, x_of, supply, "ue")
    amounts = {k: ({r_index[k]: -1.0}, R) for k, R in model.demand.items()}
    y_index = _compliant_block(lp, model, amounts, per_link)
    _bundle(lp, model, per_link, so.f_bar, "cap")
    return UeLpInstance(lp, r_index, x_index, y_index)


def _dump(lp, export_dir, filename):
    if export_dir is None:
        return
    path = Path(export_dir)
    path.mkdir(parents=True, exist_ok=True)
    (path / filename).write_text(export_lp(lp))


def _solve_compliant(model, so, ue_per_origin, compliant_demand, export_dir=None):
    """Route ``compliant_demand`` inside f_bar - f_UE at least SO latency. Returns (solution, index)."""
    ue_total = sum(ue_per_origin.values(), np.zeros(model.n_links))
    cap = np.asarray(so.f_bar, dtype=float) - ue_total
    lat = np.where(np.isfinite(so.link_latency), so.link_latency, 0.0)
    lp = LinearProgram("min", "COMPLIANT_LP")
    per_link = {}
    amounts = {k: ({}, float(d)) for k, d in compliant_demand.items() if d > 0.0}
    index = _compliant_block(lp, model, amounts, per_link, cost=lat)
    _bundle(lp, model, per_link, cap, "cap")
    _dump(lp, export_dir, "compliant_lp.mps")
    return solve_lp(lp), index


def _validate_compliant_demand(model, compliant_demand):
    out = {}
    for (s, t), d in compliant_demand.items():
        R = model.demand.get((s, t), 0.0)
        if d < 0 or d > R * (1 + 1e-12) + 1e-12:
            raise ValueError(f"compliant demand {d} for pair {(s, t)} outside [0, {R}]")
        out[(s, t)] = min(float(d), R)
    return out


def _flows_of(model, index, x, keys):
    out = {k: np.zeros(model.n_links) for k in keys}
    for (k, e), j in index.items():
        out.setdefault(k, np.zeros(model.n_links))[e] = max(float(x[j]), 0.0)
    return out


def assign_compliant_flow(model: NetworkModel, so: EquilibriumSolution, ue_per_origin: dict,
                          compliant_demand: dict) -> np.ndarray:
    """Compliant link flow routing ``compliant_demand`` within ``f_bar - f_UE``.

    One commodity per origin keeps the result decomposable into OD paths.
    Among feasible flows the one with least total SO latency is returned.
    """
    _check_inputs(model, so)
    compliant_demand = _validate_compliant_demand(model, compliant_demand)
    if not any(d > 0 for d in compliant_demand.values()):
        return np.zeros(model.n_links)
    sol, index = _solve_compliant(model, so, ue_per_origin, compliant_demand)
    if not sol.optimal:
        raise ComplianceError(f"compliant LP is {sol.status}")
    return sum(_flows_of(model, index, sol.x, ()).values(), np.zeros(model.n_links))


def check_sufficiency(model: NetworkModel, so: EquilibriumSolution, rc: ReducedCostSets,
                      compliant_demand: dict) -> SufficiencyResult:
    """Can SO be reached when exactly ``compliant_demand`` is compliant and the rest is selfish?

    Pairs missing from ``compliant_demand`` are fully self-interested. The UE
    and compliant flows are searched for together, so a positive answer always
    comes with a witness whose combined load stays within ``f_bar``.
    """
    _check_inputs(model, so, rc)
    compliant_demand = _validate_compliant_demand(model, compliant_demand)
    fixed = {k: R - compliant_demand.get(k, 0.0) for k, R in model.demand.items()}
    inst = _build_joint_lp(model, so, rc, fixed_ue=fixed)
    sol = solve_lp(inst.lp)
    if not sol.optimal:
        return SufficiencyResult(False, {}, {}, sol.status)
    return SufficiencyResult(True, _flows_of(model, inst.x_index, sol.x, model.origins),
                             _flows_of(model, inst.y_index, sol.x, model.origins), sol.status)


def _decompose(model, flow, balance, tol, label):
    """Paths (and cancelled cycles) of one commodity with node balance ``balance``
    (positive = supply, negative = demand)."""
    flow = np.array(flow, dtype=float)
    supply = {v: b for v, b in balance.items() if b > 0.0}
    sink = {v: -b for v, b in balance.items() if b < 0.0}
    scale = max(1.0, float(np.max(flow, initial=0.0)), max(supply.values(), default=0.0))
    eps = tol * scale
    net = np.zeros(model.n_nodes)
    np.add.at(net, model.heads, flow)
    np.subtract.at(net, model.tails, flow)
    for v, b in balance.items():
        net[v] += b
    bad = np.flatnonzero(np.abs(net) > 10 * eps)
    if bad.size:
        v = int(bad[0])
        raise ValueError(f"flow of {label} violates conservation at node {model.node_ids[v]} by {net[v]:.3e}")
    flow[flow <= eps * 1e-3] = 0.0
    paths, cycles = [], []
    while True:
        start = next((v for v in sorted(supply) if supply[v] > eps), None)
        if start is None:
            break
        path, cycle = _walk(model, start, flow, sink, eps)
        if cycle is not None:
            vol = min(flow[e] for e in cycle)
            flow[cycle] -= vol
            cycles.append((tuple(cycle), vol))
            continue
        if path is None:
            supply[start] = 0.0  # numerical leftover below tolerance
            continue
        t = int(model.heads[path[-1]])
        vol = min(min(flow[e] for e in path), sink[t], supply[start])
        flow[path] -= vol
        flow[flow <= eps * 1e-3] = 0.0
        sink[t] -= vol
        supply[start] -= vol
        paths.append((start, t, tuple(path), vol))
    return paths, cycles


def _walk(model, s, flow, sink, eps):
    """Follow positive flow from ``s``; returns (path, None), (None, cycle) or (None, None)."""
    path = []
    pos = {s: 0}
    v = s
    while True:
        if v != s and sink.get(v, 0.0) > eps:
            return path, None
        nxt = next((e for e in model.out_links[v] if flow[e] > eps), None)
        if nxt is None:
            nxt = next((e for e in model.out_links[v] if flow[e] > 0.0), None)
        if nxt is None:
            if v != s and sink.get(v, 0.0) > 0.0:
                return path, None
            return None, None
        w = int(model.heads[nxt])
        path.append(nxt)
        if w in pos:
            return None, path[pos[w]:]
        pos[w] = len(path)
        v = w


def decompose_flow_with_cycles(model: NetworkModel, per_origin_flow: dict, demands: dict,
                               tol: float = DECOMPOSE_TOL):
    """Split per-origin link flows into (origin, dest, path, volume) entries.

    Walks positive-flow links from the origin (lowest link index first) until a
    node with unmet demand is reached. Cycles met on the way are cancelled and
    returned separately as ``(origin, link tuple, volume)``.
    """
    entries, cycles = [], []
    for s in sorted(per_origin_flow):
        balance = {}
        for (o, t), d in demands.items():
            if o == s and d > 0.0:
                balance[t] = balance.get(t, 0.0) - d
                balance[s] = balance.get(s, 0.0) + d
        paths, cyc = _decompose(model, per_origin_flow[s], balance, tol, f"origin {model.node_ids[s]}")
        entries += sorted(paths, key=lambda p: (p[1], p[2]))
        cycles += [(s, c, v) for c, v in cyc]
    return PathFlowSet(tuple(entries)), tuple(cycles)


def decompose_flow(model: NetworkModel, per_origin_flow: dict, demands: dict,
                   tol: float = DECOMPOSE_TOL) -> PathFlowSet:
    """Per-origin flow decomposition into OD paths; cycles are cancelled and logged."""
    paths, cycles = decompose_flow_with_cycles(model, per_origin_flow, demands, tol)
    if cycles:
        log.warning("cancelled %d flow cycles during decomposition", len(cycles))
    return paths


def max_ue_share(model: NetworkModel, so: EquilibriumSolution, rc: ReducedCostSets,
                 export_dir=None) -> ComplianceResult:
    """Largest self-interested demand that still lets the network reach SO.

    The UE LP is solved first; its optimum is kept as ``ue_lp_bound``. If the
    complementary compliant demand fits in the remaining capacity, that optimum
    is the answer. Otherwise the joint LP over both populations gives the
    largest share for which a compliant flow exists.
    """
    _check_inputs(model, so, rc)
    inst = build_ue_lp(model, so, rc)
    _dump(inst.lp, export_dir, "ue_lp.mps")
    sol = solve_lp(inst.lp)
    if not sol.optimal:
        raise ComplianceError(f"UE LP is {sol.status}; the zero flow should always be feasible")
    bound = float(sol.objective_value)
    stats = {"ue_lp_rows": inst.lp.n_constraints, "ue_lp_columns": inst.lp.n_variables,
             "ue_lp_iterations": sol.iterations, "ue_lp_gap": float(sol.duality_gap)}
    r_ue = {k: float(np.clip(sol.x[j], 0.0, model.demand[k])) for k, j in inst.r_index.items()}
    ue_per_origin = _flows_of(model, inst.x_index, sol.x, model.origins)
    compliant = {k: max(R - r_ue[k], 0.0) for k, R in model.demand.items()}
    co_sol, co_index = _solve_compliant(model, so, ue_per_origin, compliant, export_dir)
    if co_sol.optimal:
        method = UE_LP
        co_flows = _flows_of(model, co_index, co_sol.x, model.origins)
        stats.update(compliant_lp_iterations=co_sol.iterations, compliant_lp_gap=float(co_sol.duality_gap))
    else:
        log.info("complement of the UE LP optimum is not routable (%s); solving the joint LP", co_sol.status)
        joint = _build_joint_lp(model, so, rc)
        _dump(joint.lp, export_dir, "joint_lp.mps")
        jsol = solve_lp(joint.lp)
        if not jsol.optimal:
            raise ComplianceError(f"joint LP is {jsol.status}; the SO flow itself should be feasible")
        method = JOINT_LP
        stats.update(joint_lp_rows=joint.lp.n_constraints, joint_lp_columns=joint.lp.n_variables,
                     joint_lp_iterations=jsol.iterations, joint_lp_gap=float(jsol.duality_gap))
        r_ue = {k: float(np.clip(jsol.x[j], 0.0, model.demand[k])) for k, j in joint.r_index.items()}
        ue_per_origin = _flows_of(model, joint.x_index, jsol.x, model.origins)
        co_flows = _flows_of(model, joint.y_index, jsol.x, model.origins)
        compliant = {k: max(R - r_ue[k], 0.0) for k, R in model.demand.items()}
    return _assemble(model, rc, r_ue, bound, ue_per_origin, co_flows, compliant, method, stats)


def _assemble(model, rc, r_ue, bound, ue_per_origin, co_per_origin, compliant, method, stats):
    ue_paths, ue_cycles = decompose_flow_with_cycles(model, ue_per_origin, r_ue)
    co_paths, co_cycles = decompose_flow_with_cycles(model, co_per_origin, compliant)
    # cycles carry no demand: drop them from the link flows so paths and flows agree
    for flows, cycles in ((ue_per_origin, ue_cycles), (co_per_origin, co_cycles)):
        for s, cyc, vol in cycles:
            flows[s][list(cyc)] -= vol
        for arr in flows.values():
            np.maximum(arr, 0.0, out=arr)
            arr.setflags(write=False)
    ue_flow = sum(ue_per_origin.values(), np.zeros(model.n_links))
    co_flow = sum(co_per_origin.values(), np.zeros(model.n_links))
    ue_flow.setflags(write=False)
    co_flow.setflags(write=False)
    total = model.total_demand
    r_total = float(sum(r_ue.values()))
    fraction = float(np.clip(1.0 - r_total / total, 0.0, 1.0)) if total > 0 else 0.0
    return ComplianceResult(r_ue, r_total, bound, ue_flow, ue_per_origin, co_flow, co_per_origin,
                            ue_paths, co_paths, fraction, total, method, compliant,
                            ue_cycles + co_cycles, tuple(rc.disconnected_pairs), stats)
