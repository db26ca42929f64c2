"""Brute-force reference answers for small networks.

Nothing here calls the assignment, reduced-cost, LP or compliance code: paths
are enumerated by depth-first search, link costs are re-derived from the raw
latency parameters, SO is found by pairwise coordinate descent over path
flows, and the maximal self-interested share by enumerating every vertex of
the path-flow polytope.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .network import LatencyFunction, NetworkModel, make_network


class OracleRefusal(RuntimeError):
    """The instance is too large for exhaustive treatment."""


@dataclass(frozen=True)
class PathEnumeration:
    paths: dict  # (s, t) -> tuple of link tuples

    @property
    def count(self) -> int:
        return sum(len(v) for v in self.paths.values())

    @property
    def degrees_of_freedom(self) -> int:
        return sum(len(v) - 1 for v in self.paths.values())


# ------------------------------------------------------------- link costs

def _lat(fn: LatencyFunction, x: float) -> float:
    if fn.kind == "constant":
        return fn.free_flow_time
    if fn.kind == "affine":
        return fn.free_flow_time + fn.slope * x
    if fn.capacity == 0:
        return np.inf
    return fn.free_flow_time * (1.0 + fn.alpha * (x / fn.capacity) ** fn.beta)


def _mc(fn: LatencyFunction, x: float) -> float:
    """d/dx of x * l(x), written out per kind."""
    if fn.kind == "constant":
        return fn.free_flow_time
    if fn.kind == "affine":
        return fn.free_flow_time + 2.0 * fn.slope * x
    if fn.capacity == 0:
        return np.inf
    return fn.free_flow_time * (1.0 + (fn.beta + 1.0) * fn.alpha * (x / fn.capacity) ** fn.beta)


def _ttt(model, flow) -> float:
    return float(sum(x * _lat(fn, x) for fn, x in zip(model.latencies, flow) if x > 0))


def _increasing(fn: LatencyFunction) -> bool:
    if fn.kind == "affine":
        return fn.slope > 0
    if fn.kind == "bpr":
        return fn.alpha > 0 and fn.free_flow_time > 0 and fn.capacity > 0
    return False


# ------------------------------------------------------------- enumeration

def enumerate_paths(model: NetworkModel, max_paths: int = 10_000) -> PathEnumeration:
    """All simple paths of every OD pair, by depth-first search."""
    out = {}
    total = 0
    adj = {}
    for e, (u, v) in enumerate(zip(model.tails.tolist(), model.heads.tolist())):
        adj.setdefault(u, []).append((e, v))
    blocked = {v for v in model.zones if v < model.first_thru_node}
    for (s, t) in model.demand:
        found = []
        stack = [(s, (), frozenset([s]))]
        while stack:
            v, links, seen = stack.pop()
            if v == t:
                found.append(links)
                total += 1
                if total > max_paths:
                    raise OracleRefusal(f"more than {max_paths} simple paths")
                continue
            if v != s and v in blocked:
                continue
            for e, w in reversed(adj.get(v, [])):
                if w not in seen and not (model.latencies[e].kind == "bpr" and model.latencies[e].capacity == 0):
                    stack.append((w, links + (e,), seen | {w}))
        out[(s, t)] = tuple(sorted(found))
    return PathEnumeration(out)


def _link_flow(model, paths, h):
    flow = np.zeros(model.n_links)
    k = 0
    for od in paths.paths.values():
        for p in od:
            for e in p:
                flow[e] += h[k]
            k += 1
    return flow


# ------------------------------------------------------------- system optimum

def brute_force_so(model: NetworkModel, paths: PathEnumeration, tol: float = 1e-10,
                   max_dof: int = 6, max_sweeps: int = 20_000):
    """Minimise total travel time over path flows.

    Repeatedly takes each OD pair's pair of paths and moves flow between them
    to the exact one-dimensional optimum (bisection on the directional
    derivative), until every OD's used paths are within ``tol`` of its
    cheapest path in marginal cost. Returns ``(link_flow, ttt, path_flows)``.
    """
    if paths.degrees_of_freedom > max_dof:
        raise OracleRefusal(f"{paths.degrees_of_freedom} degrees of freedom exceed {max_dof}")
    fns = model.latencies
    ods = list(paths.paths.items())
    h = []
    for (s, t), od in ods:
        if not od:
            raise OracleRefusal(f"no path for OD {(s, t)}")
        h.append(np.full(len(od), model.demand[(s, t)] / len(od)))
    flow = np.zeros(model.n_links)
    for (_, od), hk in zip(ods, h):
        for p, v in zip(od, hk):
            flow[list(p)] += v

    def path_mc(p):
        return sum(_mc(fns[e], flow[e]) for e in p)

    for _ in range(max_sweeps):
        worst = 0.0
        for (_, od), hk in zip(ods, h):
            if len(od) < 2:
                continue
            costs = [path_mc(p) for p in od]
            cheapest = min(costs)
            worst = max(worst, max(c - cheapest for c, v in zip(costs, hk) if v > 0))
            for i, j in itertools.permutations(range(len(od)), 2):
                if hk[i] <= 0:
                    continue
                only_i = [e for e in od[i] if e not in od[j]]
                only_j = [e for e in od[j] if e not in od[i]]

                def slope(d):
                    return (sum(_mc(fns[e], flow[e] + d) for e in only_j)
                            - sum(_mc(fns[e], flow[e] - d) for e in only_i))

                if slope(0.0) >= 0:
                    continue
                lo, hi = 0.0, hk[i]
                if slope(hi) <= 0:
                    d = hi
                else:
                    for _ in range(200):
                        mid = 0.5 * (lo + hi)
                        if slope(mid) < 0:
                            lo = mid
                        else:
                            hi = mid
                        if hi - lo <= 1e-15 * max(1.0, hk[i]):
                            break
                    d = lo
                flow[only_j] += d
                flow[only_i] -= d
                hk[i] -= d
                hk[j] += d
        if worst <= tol:
            break
    h_all = np.concatenate(h) if h else np.zeros(0)
    flow = _link_flow(model, paths, h_all)
    return flow, _ttt(model, flow), h_all


# ------------------------------------------------------------- maximal UE share

def oracle_f_bar(model: NetworkModel, so_flow, latency_tol: float = 1e-12) -> np.ndarray:
    """sup{f : l(f) <= l(f_SO) + latency_tol}, solved per link by bisection."""
    out = np.empty(model.n_links)
    for e, fn in enumerate(model.latencies):
        x = float(so_flow[e])
        if fn.kind == "bpr" and fn.capacity == 0:
            out[e] = 0.0
        elif not _increasing(fn):
            out[e] = np.inf
        elif x > 0:
            out[e] = x
        else:
            target = _lat(fn, 0.0) + latency_tol
            lo, hi = 0.0, 1.0
            while _lat(fn, hi) <= target:
                hi *= 2.0
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                lo, hi = (mid, hi) if _lat(fn, mid) <= target else (lo, mid)
            out[e] = lo
    return out


def acceptable_paths(model: NetworkModel, paths: PathEnumeration, so_flow, tol: float = 1e-6) -> dict:
    """Per OD, the paths within ``tol`` of both the least latency and the least marginal cost."""
    fns = model.latencies
    lat = np.array([_lat(fn, x) for fn, x in zip(fns, so_flow)])
    mc = np.array([_mc(fn, x) for fn, x in zip(fns, so_flow)])
    out = {}
    for od, plist in paths.paths.items():
        pl = [float(lat[list(p)].sum()) for p in plist]
        pm = [float(mc[list(p)].sum()) for p in plist]
        out[od] = tuple(i for i in range(len(plist)) if pl[i] <= min(pl) + tol and pm[i] <= min(pm) + tol)
    return out


def brute_force_max_ue(model: NetworkModel, paths: PathEnumeration, so_flow=None, tol: float = 1e-6,
                       max_dof: int = 6) -> float:
    """Largest self-interested demand with which SO is still reached.

    Self-interested agents only take acceptable paths (least latency and least
    marginal cost at SO). All demand must be routed with every link at most
    ``f_bar``. Given total path flows ``h``, every unit on an acceptable path
    may be self-interested, so the answer is the maximum of the acceptable flow
    over the polytope of feasible ``h``, found by visiting all its vertices.
    """
    if paths.degrees_of_freedom > max_dof:
        raise OracleRefusal(f"{paths.degrees_of_freedom} degrees of freedom exceed {max_dof}")
    if so_flow is None:
        so_flow, _, _ = brute_force_so(model, paths, max_dof=max_dof)
    f_bar = oracle_f_bar(model, so_flow)
    accept = acceptable_paths(model, paths, so_flow, tol)

    # free variables: every path flow but the last of each OD
    ods = list(paths.paths.items())
    n_free = paths.degrees_of_freedom
    rows, rhs = [], []      # inequalities  rows @ z <= rhs
    objective = np.zeros(n_free)
    obj_const = 0.0
    link_rows = np.zeros((model.n_links, n_free))
    link_const = np.zeros(model.n_links)
    k = 0
    for (s, t), od in ods:
        R = model.demand[(s, t)]
        last = len(od) - 1
        free = list(range(k, k + last))
        for i, p in enumerate(od):
            coef = np.zeros(n_free)
            const = 0.0
            if i < last:
                coef[free[i]] = 1.0
            else:
                coef[free] = -1.0
                const = R
            rows.append(-coef)          # h_p >= 0
            rhs.append(const)
            for e in p:
                link_rows[e] += coef
                link_const[e] += const
            if i in accept[(s, t)]:
                objective += coef
                obj_const += const
        k += last
    for e in range(model.n_links):
        if np.isfinite(f_bar[e]) and (np.any(link_rows[e]) or link_const[e] > 0):
            rows.append(link_rows[e].copy())
            rhs.append(f_bar[e] - link_const[e])
    b = np.array(rhs)
    scale = max(1.0, float(np.max(np.abs(b)))) if b.size else 1.0
    feas = 1e-9 * scale
    if n_free == 0:
        if np.all(b >= -feas):
            return float(obj_const)
        raise OracleRefusal("the SO flow violates f_bar")
    A = np.array(rows)
    best = -np.inf
    for combo in itertools.combinations(range(len(b)), n_free):
        M = A[list(combo)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        z = np.linalg.solve(M, b[list(combo)])
        if np.all(A @ z <= b + feas):
            best = max(best, float(objective @ z) + obj_const)
    if not np.isfinite(best):
        raise OracleRefusal("no feasible vertex found")
    return best


# ------------------------------------------------------------- corpus

def pigou() -> NetworkModel:
    return make_network([(0, 1, LatencyFunction.constant(1.0)), (0, 1, LatencyFunction.affine(0.0, 1.0))],
                        {(0, 1): 1.0})


def braess() -> NetworkModel:
    A, C = LatencyFunction.affine, LatencyFunction.constant
    return make_network([(0, 1, A(0.0, 1.0)), (1, 3, C(1.0)), (0, 2, C(1.0)), (2, 3, A(0.0, 1.0)),
                         (1, 2, C(0.0))], {(0, 3): 1.0})


def min_latency_not_min_cost() -> NetworkModel:
    """A path that is fastest but not cheapest in marginal cost for its OD pair.

    Pair 0->2 can go direct (constant 1.5) or through node 1, whose link to 2
    is loaded by pair 1->2. At SO the detour is faster (latency 1) but its
    marginal cost is 2, so self-interested 0->2 agents have no acceptable path.
    """
    A, C = LatencyFunction.affine, LatencyFunction.constant
    return make_network([(0, 2, C(1.5)), (0, 1, C(0.0)), (1, 2, A(0.0, 1.0))],
                        {(0, 2): 1.0, (1, 2): 1.0})


def shared_bottleneck() -> NetworkModel:
    """Two origins share a congested link into the destination; each has a private bypass."""
    A, C = LatencyFunction.affine, LatencyFunction.constant
    return make_network([(0, 2, C(0.0)), (1, 2, C(0.0)), (2, 3, A(0.0, 1.0)), (0, 3, C(1.2)),
                         (1, 3, C(1.5))], {(0, 3): 1.0, (1, 3): 1.0})


def random_dag(rng: np.random.Generator, max_dof: int = 6, constant_share: float = 0.15) -> NetworkModel:
    """Small random DAG with affine latencies and one or two OD pairs."""
    while True:
        n = int(rng.integers(4, 7))
        links = []
        for i in range(n - 1):
            links.append((i, i + 1))  # spine keeps every pair connected
            for j in range(i + 2, n):
                if rng.random() < 0.35:
                    links.append((i, j))
        fns = []
        for _ in links:
            a = float(np.round(rng.uniform(0.0, 2.0), 3))
            b = 0.0 if rng.random() < constant_share else float(np.round(rng.uniform(0.2, 2.0), 3))
            fns.append(LatencyFunction.affine(a, b))
        demand = {(0, n - 1): float(np.round(rng.uniform(0.5, 2.0), 3))}
        if rng.random() < 0.5:
            s = int(rng.integers(1, n - 2))
            t = int(rng.integers(s + 1, n))
            if (s, t) not in demand:
                demand[(s, t)] = float(np.round(rng.uniform(0.5, 2.0), 3))
        model = make_network([(u, v, fn) for (u, v), fn in zip(links, fns)], demand)
        try:
            if 1 <= enumerate_paths(model, 64).degrees_of_freedom <= max_dof:
                return model
        except OracleRefusal:
            pass


def corpus(seed: int = 20240601, n_random: int = 20) -> list:
    """(name, model) pairs: the named instances followed by ``n_random`` random DAGs."""
    out = [("pigou", pigou()), ("braess", braess()), ("min_latency_not_min_cost", min_latency_not_min_cost()),
           ("shared_bottleneck", shared_bottleneck())]
    rng = np.random.default_rng(seed)
    out += [(f"random_dag_{k:02d}", random_dag(rng)) for k in range(n_random)]
    return out
