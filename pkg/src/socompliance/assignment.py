"""User-equilibrium and system-optimum assignment by path-based gradient projection.

SO is solved as an equilibrium in which every link charges its marginal cost
c'(x) = l(x) + x l'(x) instead of its latency. Per-OD path flows are kept so
that later stages can read per-origin link flows directly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .network import NetworkModel, PathFlowSet, shortest_path_tree, total_travel_time, trace_path

log = logging.getLogger(__name__)

UE = "UE"
SO = "SO"
LATENCY = "latency"
MARGINAL_COST = "marginal_cost"

DEFAULT_AEC = 1e-8
F_BAR_LATENCY_TOL = 1e-12


class AssignmentError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    mode: str
    link_flow: np.ndarray
    path_flows: PathFlowSet
    per_origin_link_flow: dict
    link_latency: np.ndarray
    link_marginal_cost: np.ndarray
    aec: float
    total_travel_time: float
    f_bar: np.ndarray | None
    converged: bool
    iterations: int
    model_fingerprint: str


def _metric_for(mode):
    if mode == UE:
        return LATENCY
    if mode == SO:
        return MARGINAL_COST
    raise ValueError(f"mode must be {UE!r} or {SO!r}, got {mode!r}")


def _cost_functions(model, metric):
    c = model.costs
    if metric == LATENCY:
        return c.latency, c.latency_derivative
    if metric == MARGINAL_COST:
        return c.marginal_cost, c.marginal_cost_derivative
    raise ValueError(f"unknown cost metric {metric!r}")


class _OdPaths:
    __slots__ = ("origin", "dest", "demand", "paths", "arrays", "flows")

    def __init__(self, origin, dest, demand):
        self.origin = origin
        self.dest = dest
        self.demand = demand
        self.paths = []
        self.arrays = []
        self.flows = []

    def add(self, path, flow=0.0):
        if path in self.paths:
            return self.paths.index(path)
        self.paths.append(path)
        self.arrays.append(np.asarray(path, dtype=np.int64))
        self.flows.append(flow)
        return len(self.paths) - 1


def _shortest_paths(model, origin, cost):
    _, pred = shortest_path_tree(model, origin, cost)
    return {t: trace_path(model, pred, origin, t) for t in model.destinations_of(origin)}


def _equilibrate_od(od, link_flow, cost, deriv, cost_fn, deriv_fn):
    """One projected-Newton shift from every costlier path onto the cheapest one."""
    if len(od.paths) < 2:
        return cost, deriv, False
    pc = [float(cost[a].sum()) for a in od.arrays]
    k = int(np.argmin(pc))
    base = set(od.paths[k])
    moved = False
    for j, p in enumerate(od.paths):
        if j == k or od.flows[j] <= 0.0:
            continue
        gap = pc[j] - pc[k]
        if gap <= 0.0:
            continue
        diff = np.fromiter(base.symmetric_difference(p), dtype=np.int64)
        curvature = float(deriv[diff].sum())
        step = od.flows[j] if curvature <= 0.0 else min(od.flows[j], gap / curvature)
        if step <= 0.0:
            continue
        if step >= od.flows[j]:
            step = od.flows[j]
            od.flows[j] = 0.0
        else:
            od.flows[j] -= step
        od.flows[k] += step
        link_flow[od.arrays[j]] -= step
        link_flow[od.arrays[k]] += step
        moved = True
    if moved:
        np.maximum(link_flow, 0.0, out=link_flow)
        keep = [i for i, f in enumerate(od.flows) if f > 0.0]
        od.paths = [od.paths[i] for i in keep]
        od.arrays = [od.arrays[i] for i in keep]
        od.flows = [od.flows[i] for i in keep]
        cost = cost_fn(link_flow)
        deriv = deriv_fn(link_flow)
    return cost, deriv, moved


def _rebuild_link_flow(n_links, ods):
    flow = np.zeros(n_links)
    for od in ods:
        for a, f in zip(od.arrays, od.flows):
            flow[a] += f
    return flow


def _renormalize(od):
    total = sum(od.flows)
    if total > 0 and total != od.demand:
        scale = od.demand / total
        od.flows = [f * scale for f in od.flows]


def _path_flow_set(ods):
    entries = []
    for od in ods:
        for p, f in sorted(zip(od.paths, od.flows)):
            if f > 0.0:
                entries.append((od.origin, od.dest, p, f))
    return PathFlowSet(tuple(entries))


def _aec_from(model, ods, cost, metric_cost=None):
    total = model.total_demand
    if total <= 0:
        return 0.0
    used = 0.0
    best = 0.0
    by_origin = {}
    for od in ods:
        by_origin.setdefault(od.origin, []).append(od)
    for s, group in by_origin.items():
        dist, _ = shortest_path_tree(model, s, cost)
        for od in group:
            used += sum(f * float(cost[a].sum()) for a, f in zip(od.arrays, od.flows))
            best += od.demand * dist[od.dest]
    return max(used - best, 0.0) / total


def solve_equilibrium(model: NetworkModel, mode: str = UE, aec_target: float = DEFAULT_AEC,
                      max_iterations: int = 2000, inner_sweeps: int = 4,
                      seed: int | None = None) -> EquilibriumSolution:
    """Route all demand until the average excess cost drops to ``aec_target``.

    ``mode`` is ``"UE"`` (links charge latency) or ``"SO"`` (links charge
    marginal cost). A ``seed`` perturbs the starting all-or-nothing costs and
    the OD processing order; ``None`` gives the plain deterministic start.
    Non-convergence is reported through ``converged=False``, not raised.
    """
    if aec_target <= 0:
        raise ValueError("aec_target must be positive")
    metric = _metric_for(mode)
    cost_fn, deriv_fn = _cost_functions(model, metric)
    rng = np.random.default_rng(seed) if seed is not None else None

    ods = [_OdPaths(s, t, r) for (s, t), r in model.demand.items()]
    by_origin = {}
    for od in ods:
        by_origin.setdefault(od.origin, []).append(od)
    origins = sorted(by_origin)

    link_flow = np.zeros(model.n_links)
    start_cost = cost_fn(link_flow)
    if rng is not None:
        start_cost = start_cost * rng.uniform(0.5, 1.5, size=model.n_links)
    for s in origins:
        sp = _shortest_paths(model, s, start_cost)
        for od in by_origin[s]:
            if not np.isfinite(start_cost[list(sp[od.dest])]).all():
                raise AssignmentError(f"no open path for OD {od.origin}->{od.dest}")
            od.add(sp[od.dest], od.demand)
    link_flow = _rebuild_link_flow(model.n_links, ods)

    aec = np.inf
    converged = False
    it = 0
    for it in range(1, max_iterations + 1):
        order = list(origins)
        if rng is not None:
            rng.shuffle(order)
        cost = cost_fn(link_flow)
        deriv = deriv_fn(link_flow)
        for s in order:
            sp = _shortest_paths(model, s, cost)
            for od in by_origin[s]:
                od.add(sp[od.dest])
                cost, deriv, _ = _equilibrate_od(od, link_flow, cost, deriv, cost_fn, deriv_fn)
        for _ in range(inner_sweeps):
            for s in order:
                for od in by_origin[s]:
                    cost, deriv, _ = _equilibrate_od(od, link_flow, cost, deriv, cost_fn, deriv_fn)
        for od in ods:
            _renormalize(od)
        link_flow = _rebuild_link_flow(model.n_links, ods)
        cost = cost_fn(link_flow)
        aec = _aec_from(model, ods, cost)
        log.debug("%s iteration %d: AEC %.3e", mode, it, aec)
        if aec <= aec_target:
            converged = True
            break
    if not converged:
        log.warning("%s assignment stopped after %d iterations at AEC %.3e", mode, it, aec)

    return _make_solution(model, mode, ods, link_flow, aec, converged, it)


def _make_solution(model, mode, ods, link_flow, aec, converged, iterations):
    paths = _path_flow_set(ods)
    per_origin = {}
    for od in ods:
        acc = per_origin.setdefault(od.origin, np.zeros(model.n_links))
        for a, f in zip(od.arrays, od.flows):
            acc[a] += f
    for arr in per_origin.values():
        arr.setflags(write=False)
    link_flow = link_flow.copy()
    link_flow.setflags(write=False)
    lat = model.costs.latency(link_flow)
    mc = model.costs.marginal_cost(link_flow)
    f_bar = compute_f_bar(model, link_flow) if mode == SO else None
    return EquilibriumSolution(mode, link_flow, paths, per_origin, lat, mc, float(aec),
                               total_travel_time(model, link_flow), f_bar, converged, iterations,
                               model.fingerprint())


def compute_aec(model: NetworkModel, path_flows: PathFlowSet, cost_metric: str = LATENCY) -> float:
    """Demand-weighted mean gap between used-path cost and the OD shortest-path cost."""
    total = model.total_demand
    if total <= 0:
        return 0.0
    cost_fn, _ = _cost_functions(model, cost_metric)
    flow = path_flows.link_flow(model.n_links)
    cost = cost_fn(flow)
    used = sum(f * float(cost[list(p)].sum()) for _, _, p, f in path_flows)
    best = 0.0
    for s in model.origins:
        dist, _ = shortest_path_tree(model, s, cost)
        best += sum(model.demand[(s, t)] * dist[t] for t in model.destinations_of(s))
    return max(used - best, 0.0) / total


def compute_f_bar(model: NetworkModel, so_flow, latency_tol: float = F_BAR_LATENCY_TOL) -> np.ndarray:
    """Per link, the largest flow whose latency equals the latency at ``so_flow``.

    Strictly increasing links return their SO flow, constant links +inf. A
    strictly increasing link left unused at SO may grow until its latency
    rises by ``latency_tol`` above free flow.
    """
    so_flow = np.asarray(so_flow, dtype=float)
    c = model.costs
    out = so_flow.copy()
    increasing = np.array([fn.strictly_increasing for fn in model.latencies], dtype=bool)
    out[~increasing] = np.inf
    out[c.closed] = 0.0
    idle = increasing & (so_flow <= 0.0) & ~c.closed
    bpr = idle & (c.kind == 0)
    if bpr.any():
        out[bpr] = c.capacity[bpr] * (latency_tol / (c.t0[bpr] * c.alpha[bpr])) ** (1.0 / c.beta[bpr])
    aff = idle & (c.kind == 1)
    if aff.any():
        out[aff] = latency_tol / c.slope[aff]
    out.setflags(write=False)
    return out
