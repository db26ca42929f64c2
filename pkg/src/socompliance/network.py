"""Flow model: directed graph, link latency functions, OD demand and flow vectors."""
from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

BPR = "bpr"
AFFINE = "affine"
CONSTANT = "constant"
KINDS = (BPR, AFFINE, CONSTANT)

_KIND_CODE = {BPR: 0, AFFINE: 1, CONSTANT: 2}


class NetworkError(ValueError):
    """Invalid network data (self loops, negative demand, unreachable pairs...)."""


@dataclass(frozen=True)
class LatencyFunction:
    """Latency of one link as a function of its flow.

    ``bpr``:      t0 * (1 + alpha * (x / capacity) ** beta)
    ``affine``:   t0 + slope * x
    ``constant``: t0
    """

    kind: str = BPR
    free_flow_time: float = 0.0
    capacity: float = 1.0
    alpha: float = 0.15
    beta: float = 4.0
    slope: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown latency kind {self.kind!r}")
        if self.free_flow_time < 0 or self.alpha < 0 or self.slope < 0:
            raise ValueError("latency parameters must be non-negative")
        if self.kind == BPR and (self.capacity < 0 or self.beta < 1):
            raise ValueError("BPR needs capacity >= 0 and beta >= 1")

    @classmethod
    def bpr(cls, free_flow_time, capacity, alpha=0.15, beta=4.0):
        return cls(BPR, float(free_flow_time), float(capacity), float(alpha), float(beta))

    @classmethod
    def affine(cls, intercept, slope):
        return cls(AFFINE, float(intercept), slope=float(slope))

    @classmethod
    def constant(cls, value):
        return cls(CONSTANT, float(value))

    @property
    def strictly_increasing(self) -> bool:
        if self.kind == BPR:
            return self.alpha > 0 and self.free_flow_time > 0
        if self.kind == AFFINE:
            return self.slope > 0
        return False


def latency(link_fn: LatencyFunction, flow: float) -> float:
    """Travel time on a link carrying ``flow``."""
    return float(_vectorized(link_fn, flow)[0])


def latency_derivative(link_fn: LatencyFunction, flow: float) -> float:
    return float(_vectorized(link_fn, flow)[1])


def marginal_cost(link_fn: LatencyFunction, flow: float) -> float:
    """d/dx [x * l(x)] = l(x) + x * l'(x)."""
    lat, dlat = _vectorized(link_fn, flow)[:2]
    return float(lat + flow * dlat)


def _vectorized(link_fn, flow):
    if flow < 0:
        raise ValueError(f"negative flow {flow}")
    lf = link_fn
    arrays = LinkCostArrays.from_functions([lf])
    x = np.array([float(flow)])
    return arrays.latency(x)[0], arrays.latency_derivative(x)[0]


@dataclass(frozen=True)
class LinkCostArrays:
    """Column-wise latency parameters, evaluated for all links at once."""

    kind: np.ndarray
    t0: np.ndarray
    capacity: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    slope: np.ndarray

    @classmethod
    def from_functions(cls, fns: Sequence[LatencyFunction]) -> "LinkCostArrays":
        def col(attr, dtype=float):
            a = np.array([getattr(f, attr) for f in fns], dtype=dtype)
            a.setflags(write=False)
            return a

        kind = np.array([_KIND_CODE[f.kind] for f in fns], dtype=np.int8)
        kind.setflags(write=False)
        return cls(kind, col("free_flow_time"), col("capacity"), col("alpha"), col("beta"), col("slope"))

    def _ratio(self, x):
        cap = self.capacity
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(cap > 0, x / np.where(cap > 0, cap, 1.0), np.where(x > 0, np.inf, 0.0))
        return r

    def latency(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.t0.copy()
        bpr = self.kind == 0
        if bpr.any():
            r = self._ratio(x)[bpr]
            out[bpr] = self.t0[bpr] * (1.0 + self.alpha[bpr] * r ** self.beta[bpr])
        aff = self.kind == 1
        if aff.any():
            out[aff] += self.slope[aff] * x[aff]
        out[self.closed] = np.inf
        return out

    @property
    def closed(self) -> np.ndarray:
        """Zero-capacity BPR links; they never carry traffic."""
        return (self.kind == 0) & (self.capacity <= 0)

    def latency_derivative(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(self.t0)
        bpr = self.kind == 0
        if bpr.any():
            b = self.beta[bpr]
            r = self._ratio(x)[bpr]
            cap = np.where(self.capacity[bpr] > 0, self.capacity[bpr], np.inf)
            out[bpr] = self.t0[bpr] * self.alpha[bpr] * b * r ** (b - 1.0) / cap
        aff = self.kind == 1
        out[aff] = self.slope[aff]
        out[self.closed] = 0.0
        return out

    def marginal_cost(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.latency(x) + x * self.latency_derivative(x)

    def marginal_cost_derivative(self, x: np.ndarray) -> np.ndarray:
        # c''(x) = 2 l'(x) + x l''(x)
        x = np.asarray(x, dtype=float)
        out = 2.0 * self.latency_derivative(x)
        bpr = self.kind == 0
        if bpr.any():
            b = self.beta[bpr]
            r = self._ratio(x)[bpr]
            cap = np.where(self.capacity[bpr] > 0, self.capacity[bpr], np.inf)
            # x * l''(x) = t0 alpha b (b-1) r^(b-1) / cap
            out[bpr] += self.t0[bpr] * self.alpha[bpr] * b * (b - 1.0) * r ** (b - 1.0) / cap
        out[self.closed] = 0.0
        return out


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """Directed graph with per-link latency functions and an OD demand table.

    Vertices and links are dense 0-based indices. ``node_ids`` maps each index
    back to the external node id used by the input files.
    """

    n_nodes: int
    tails: np.ndarray
    heads: np.ndarray
    latencies: tuple
    demand: Mapping[tuple, float]
    zones: frozenset
    first_thru_node: int = 0
    node_ids: tuple = ()
    costs: LinkCostArrays = field(init=False, repr=False)

    def __post_init__(self):
        tails = np.asarray(self.tails, dtype=np.int64)
        heads = np.asarray(self.heads, dtype=np.int64)
        if tails.shape != heads.shape or len(self.latencies) != len(tails):
            raise NetworkError("tails, heads and latencies must have equal length")
        if len(tails) and (tails.min() < 0 or heads.min() < 0 or max(tails.max(), heads.max()) >= self.n_nodes):
            raise NetworkError("link endpoint outside vertex range")
        loops = np.flatnonzero(tails == heads)
        if loops.size:
            raise NetworkError(f"self-loop on link {int(loops[0])}")
        tails.setflags(write=False)
        heads.setflags(write=False)
        object.__setattr__(self, "tails", tails)
        object.__setattr__(self, "heads", heads)
        object.__setattr__(self, "latencies", tuple(self.latencies))
        object.__setattr__(self, "zones", frozenset(int(z) for z in self.zones))
        if not self.node_ids:
            object.__setattr__(self, "node_ids", tuple(range(1, self.n_nodes + 1)))

        clean = {}
        for (s, t), r in self.demand.items():
            s, t, r = int(s), int(t), float(r)
            if r < 0:
                raise NetworkError(f"negative demand {r} for pair {(s, t)}")
            if r == 0 or s == t:
                continue
            if s not in self.zones or t not in self.zones:
                raise NetworkError(f"demand pair {(s, t)} is not between zones")
            clean[(s, t)] = r
        object.__setattr__(self, "demand", dict(sorted(clean.items())))
        object.__setattr__(self, "costs", LinkCostArrays.from_functions(self.latencies))

        self._build_adjacency()
        self._check_reachability()

    def _build_adjacency(self):
        order = np.lexsort((np.arange(self.n_links), self.tails))
        start = np.searchsorted(self.tails[order], np.arange(self.n_nodes + 1))
        out_links = [tuple(int(e) for e in order[start[v]:start[v + 1]]) for v in range(self.n_nodes)]
        order_in = np.lexsort((np.arange(self.n_links), self.heads))
        start_in = np.searchsorted(self.heads[order_in], np.arange(self.n_nodes + 1))
        in_links = [tuple(int(e) for e in order_in[start_in[v]:start_in[v + 1]]) for v in range(self.n_nodes)]
        object.__setattr__(self, "out_links", tuple(out_links))
        object.__setattr__(self, "in_links", tuple(in_links))

    def _check_reachability(self):
        unreachable = []
        for s in self.origins:
            dist, _ = shortest_path_tree(self, s, np.ones(self.n_links))
            unreachable += [(s, t) for t in self.destinations_of(s) if not np.isfinite(dist[t])]
        if unreachable:
            shown = ", ".join(f"{self.node_ids[s]}->{self.node_ids[t]}" for s, t in unreachable[:10])
            raise NetworkError(f"demand between unreachable pairs: {shown}")

    @property
    def n_links(self) -> int:
        return len(self.tails)

    @property
    def origins(self) -> list:
        return sorted({s for s, _ in self.demand})

    def destinations_of(self, origin: int) -> list:
        return [t for (s, t) in self.demand if s == origin]

    @property
    def total_demand(self) -> float:
        return float(sum(self.demand.values()))

    def is_thru_blocked(self, v: int) -> bool:
        """Centroids numbered below the first through node may not be passed through."""
        return v in self.zones and v < self.first_thru_node

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.n_nodes).tobytes())
        h.update(self.tails.tobytes())
        h.update(self.heads.tobytes())
        for arr in (self.costs.t0, self.costs.capacity, self.costs.alpha, self.costs.beta, self.costs.slope):
            h.update(arr.tobytes())
        h.update(repr(sorted(self.demand.items())).encode())
        return h.hexdigest()[:16]

    def link_latency(self, flow: np.ndarray) -> np.ndarray:
        return self.costs.latency(self._check_flow(flow))

    def link_marginal_cost(self, flow: np.ndarray) -> np.ndarray:
        return self.costs.marginal_cost(self._check_flow(flow))

    def _check_flow(self, flow):
        flow = np.asarray(flow, dtype=float)
        if flow.shape != (self.n_links,):
            raise ValueError(f"flow has shape {flow.shape}, expected ({self.n_links},)")
        return flow


def make_network(links: Iterable[tuple], demand: Mapping[tuple, float], zones=None,
                 n_nodes=None, first_thru_node=0, node_ids=()) -> NetworkModel:
    """Convenience constructor from ``(tail, head, LatencyFunction)`` triples on 0-based nodes."""
    links = list(links)
    tails = [int(a) for a, _, _ in links]
    heads = [int(b) for _, b, _ in links]
    if n_nodes is None:
        n_nodes = 1 + max(tails + heads + [v for pair in demand for v in pair])
    if zones is None:
        zones = range(n_nodes)
    return NetworkModel(n_nodes, np.array(tails, dtype=np.int64), np.array(heads, dtype=np.int64),
                        tuple(fn for _, _, fn in links), dict(demand), frozenset(zones),
                        first_thru_node, tuple(node_ids))


def total_travel_time(model: NetworkModel, flow) -> float:
    """System cost: sum over links of l_e(f_e) * f_e."""
    flow = model._check_flow(flow)
    if np.any(flow < 0):
        raise ValueError("link flows must be non-negative")
    return float(np.dot(model.costs.latency(flow), flow))


def check_path(model: NetworkModel, path: Sequence[int]) -> None:
    for a, b in zip(path, path[1:]):
        if model.heads[a] != model.tails[b]:
            raise ValueError(f"links {a} and {b} are not consecutive")


def path_metrics(model: NetworkModel, flow, path: Sequence[int]) -> tuple:
    """(latency, marginal cost) of a link sequence under ``flow``."""
    check_path(model, path)
    flow = model._check_flow(flow)
    idx = np.asarray(path, dtype=np.int64)
    sub = flow[idx]
    fns = [model.latencies[e] for e in path]
    arrays = LinkCostArrays.from_functions(fns) if fns else None
    if arrays is None:
        return 0.0, 0.0
    return float(arrays.latency(sub).sum()), float(arrays.marginal_cost(sub).sum())


def shortest_path_tree(model: NetworkModel, origin: int, link_cost: np.ndarray,
                       allowed: np.ndarray | None = None):
    """One-to-all Dijkstra from ``origin`` on non-negative link costs.

    Returns ``(dist, pred_link)``; ``pred_link[v] == -1`` for the origin and
    unreached vertices. Equal-distance ties go to the lowest link index.
    ``allowed`` optionally masks links out of the search.
    """
    n = model.n_nodes
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    dist[origin] = 0.0
    done = np.zeros(n, dtype=bool)
    heap = [(0.0, origin)]
    heads = model.heads
    cost = link_cost.tolist() if isinstance(link_cost, np.ndarray) else list(link_cost)
    mask = None if allowed is None else allowed.tolist()
    out_links = model.out_links
    blocked_lim = model.first_thru_node
    zones = model.zones
    dist_l = dist.tolist()
    pred_l = pred.tolist()
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u != origin and u < blocked_lim and u in zones:
            continue
        for e in out_links[u]:
            if mask is not None and not mask[e]:
                continue
            c = cost[e]
            if c == np.inf:
                continue
            v = int(heads[e])
            nd = d + c
            dv = dist_l[v]
            if nd < dv or (nd == dv and not done[v] and e < pred_l[v]):
                dist_l[v] = nd
                pred_l[v] = e
                heapq.heappush(heap, (nd, v))
    return np.array(dist_l), np.array(pred_l, dtype=np.int64)


def trace_path(model: NetworkModel, pred: np.ndarray, origin: int, dest: int) -> tuple:
    """Link sequence from ``origin`` to ``dest`` in a predecessor-link tree."""
    tails = model.tails
    path = []
    v = dest
    while v != origin:
        e = int(pred[v])
        if e < 0:
            raise ValueError(f"vertex {dest} not reached from {origin}")
        path.append(e)
        v = int(tails[e])
    path.reverse()
    return tuple(path)


@dataclass(frozen=True)
class PathFlowSet:
    """Path flows: entries of (origin, destination, link tuple, volume)."""

    entries: tuple = ()

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def link_flow(self, n_links: int) -> np.ndarray:
        flow = np.zeros(n_links)
        for _, _, path, volume in self.entries:
            np.add.at(flow, np.asarray(path, dtype=np.int64), volume)
        return flow

    def od_totals(self) -> dict:
        out = {}
        for s, t, _, volume in self.entries:
            out[(s, t)] = out.get((s, t), 0.0) + volume
        return out

    def by_origin(self) -> dict:
        out = {}
        for entry in self.entries:
            out.setdefault(entry[0], []).append(entry)
        return out

    def validate(self, model: NetworkModel) -> None:
        for s, t, path, volume in self.entries:
            if volume < 0:
                raise ValueError("negative path flow")
            check_path(model, path)
            if not path or model.tails[path[0]] != s or model.heads[path[-1]] != t:
                raise ValueError(f"path does not connect {s} to {t}")
            nodes = [s] + [int(model.heads[e]) for e in path]
            if len(set(nodes)) != len(nodes):
                raise ValueError(f"path {path} is not simple")
