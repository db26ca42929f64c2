"""Per-origin sets of zero-reduced-cost links at a system-optimum flow.

A link belongs to the set of origin ``s`` when it lies on an ``s -> t`` path
(``t`` a destination of ``s``) that is simultaneously a least-latency and a
least-marginal-cost path at the SO flow. Self-interested demand from ``s``
may only use these links.
"""
from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assignment import EquilibriumSolution
from .network import NetworkModel, shortest_path_tree

EXACT = "exact"
EMPIRICAL = "empirical"
DEFAULT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ReducedCostSets:
    per_origin_links: dict
    mode: str
    tolerance: float
    threshold_T: float | None = None
    disconnected_pairs: tuple = ()
    model_fingerprint: str = ""
    stats: dict = field(default_factory=dict)

    def links(self, origin: int) -> frozenset:
        return self.per_origin_links.get(origin, frozenset())


def _reduced_costs(model, origin, link_cost):
    dist, _ = shortest_path_tree(model, origin, link_cost)
    with np.errstate(invalid="ignore"):
        rc = dist[model.tails] + link_cost - dist[model.heads]
    rc[~np.isfinite(rc)] = np.inf
    return dist, rc


def _forward_reachable(model, origin, allowed):
    seen = np.zeros(model.n_nodes, dtype=bool)
    seen[origin] = True
    queue = deque([origin])
    while queue:
        u = queue.popleft()
        if u != origin and model.is_thru_blocked(u):
            continue
        for e in model.out_links[u]:
            v = int(model.heads[e])
            if allowed[e] and not seen[v]:
                seen[v] = True
                queue.append(v)
    return seen


def _backward_reachable(model, targets, allowed, origin):
    seen = np.zeros(model.n_nodes, dtype=bool)
    queue = deque(targets)
    seen[list(targets)] = True
    while queue:
        v = queue.popleft()
        for e in model.in_links[v]:
            u = int(model.tails[e])
            if not allowed[e] or seen[u]:
                continue
            if u != origin and model.is_thru_blocked(u):
                continue
            seen[u] = True
            queue.append(u)
    return seen


def _entering(model, origin):
    mask = np.zeros(model.n_links, dtype=bool)
    mask[list(model.in_links[origin])] = True
    return mask


def zero_reduced_cost_links(model: NetworkModel, so: EquilibriumSolution, origin: int,
                            mode: str = EXACT, tolerance: float = DEFAULT_TOLERANCE,
                            threshold_T: float | None = None) -> frozenset:
    """Links on zero-reduced-cost paths from ``origin`` (empty when it has no demand).

    ``exact``: a link must have reduced cost at most ``tolerance`` under both
    latency and marginal cost, and sit on an ``origin -> destination`` chain of
    such links. ``empirical``: a link must carry SO flow from ``origin`` and be
    at most ``threshold_T`` worse than the least-latency route to its head.
    """
    dests = model.destinations_of(origin)
    if not dests:
        return frozenset()
    if mode == EXACT:
        _, rc_lat = _reduced_costs(model, origin, so.link_latency)
        _, rc_mc = _reduced_costs(model, origin, so.link_marginal_cost)
        tight = (rc_lat <= tolerance) & (rc_mc <= tolerance) & ~_entering(model, origin)
        fwd = _forward_reachable(model, origin, tight)
        bwd = _backward_reachable(model, dests, tight, origin)
        keep = tight & fwd[model.tails] & bwd[model.heads]
        blocked = np.array([model.is_thru_blocked(int(u)) and int(u) != origin for u in model.tails])
        keep &= ~blocked
        return frozenset(int(e) for e in np.flatnonzero(keep))
    if mode == EMPIRICAL:
        if threshold_T is None:
            threshold_T = compute_threshold_T(model, so)
        carried = so.per_origin_link_flow.get(origin, np.zeros(model.n_links)) > 0.0
        _, rc_lat = _reduced_costs(model, origin, so.link_latency)
        keep = carried & (rc_lat <= threshold_T) & ~_entering(model, origin)
        return frozenset(int(e) for e in np.flatnonzero(keep))
    raise ValueError(f"unknown reduced-cost mode {mode!r}")


def compute_threshold_T(model: NetworkModel, so: EquilibriumSolution) -> float:
    """Largest marginal-cost gap, over origins and links carrying their SO flow,
    between the best route to the link's head forced through the link and the
    unrestricted best route."""
    worst = 0.0
    for s in model.origins:
        carried = so.per_origin_link_flow.get(s)
        if carried is None:
            continue
        _, rc_mc = _reduced_costs(model, s, so.link_marginal_cost)
        used = carried > 0.0
        if used.any():
            worst = max(worst, float(np.max(rc_mc[used])))
    return worst


def reduced_cost_sets(model: NetworkModel, so: EquilibriumSolution, mode: str = EXACT,
                      tolerance: float = DEFAULT_TOLERANCE, threads: int = 1) -> ReducedCostSets:
    """Zero-reduced-cost links for every origin with demand.

    Origins are processed independently (on ``threads`` workers); results are
    merged in origin order, so the output does not depend on ``threads``.
    """
    if so.model_fingerprint != model.fingerprint():
        raise ValueError("SO solution was computed for a different network")
    if mode not in (EXACT, EMPIRICAL):
        raise ValueError(f"unknown reduced-cost mode {mode!r}")
    T = compute_threshold_T(model, so) if mode == EMPIRICAL else None
    origins = model.origins

    def work(s):
        return zero_reduced_cost_links(model, so, s, mode, tolerance, T)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sets = list(pool.map(work, origins))
    else:
        sets = [work(s) for s in origins]
    per_origin = {}
    disconnected = []
    for s, links in zip(origins, sets):
        per_origin[s] = links
        allowed = np.zeros(model.n_links, dtype=bool)
        allowed[list(links)] = True
        reach = _forward_reachable(model, s, allowed)
        disconnected += [(s, t) for t in model.destinations_of(s) if not reach[t]]
    stats = {"links_total": sum(len(v) for v in per_origin.values())}
    return ReducedCostSets(per_origin, mode, tolerance, T, tuple(disconnected), model.fingerprint(), stats)
