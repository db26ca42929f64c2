"""Readers and writers for the TransportationNetworks (TNTP) text dialect."""
from __future__ import annotations

import io
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import LatencyFunction, NetworkError, NetworkModel

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.15
DEFAULT_BETA = 4.0

LINK_COLUMNS = ("init_node", "term_node", "capacity", "length", "free_flow_time",
                "b", "power", "speed", "toll", "link_type")

_META = re.compile(r"^\s*<([^>]+)>(.*)$")


class TntpParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class LinkRecord:
    init_node: int
    term_node: int
    capacity: float
    length: float
    free_flow_time: float
    b: float = DEFAULT_ALPHA
    power: float = DEFAULT_BETA
    speed: float = 0.0
    toll: float = 0.0
    link_type: int = 1


@dataclass(frozen=True)
class TntpNetworkFile:
    n_zones: int
    n_nodes: int
    first_thru_node: int
    n_links: int
    links: tuple
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TntpTripsFile:
    n_zones: int
    total_flow: float | None
    demand: dict
    metadata: dict = field(default_factory=dict)


def _read_text(source) -> str:
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "<" not in source):
        return Path(source).read_text()
    if hasattr(source, "read"):
        return source.read()
    return str(source)


def _split_metadata(lines):
    meta = {}
    for i, raw in enumerate(lines):
        line = raw.strip()
        if not line or line.startswith("~"):
            continue
        m = _META.match(line)
        if not m:
            raise TntpParseError("expected <KEY> value metadata line", i + 1)
        key, value = m.group(1).strip().upper(), m.group(2).strip()
        if key == "END OF METADATA":
            return meta, i + 1
        meta[key] = value
    raise TntpParseError("missing <END OF METADATA> marker")


def _meta_int(meta, key, required=True, default=0):
    if key not in meta:
        if required:
            raise TntpParseError(f"missing mandatory metadata <{key}>")
        return default
    try:
        return int(float(meta[key]))
    except ValueError:
        raise TntpParseError(f"metadata <{key}> is not numeric: {meta[key]!r}") from None


def parse_network(text) -> TntpNetworkFile:
    """Parse a ``*_net.tntp`` file (path, stream or text)."""
    lines = _read_text(text).splitlines()
    meta, body = _split_metadata(lines)
    n_nodes = _meta_int(meta, "NUMBER OF NODES")
    n_links = _meta_int(meta, "NUMBER OF LINKS")
    n_zones = _meta_int(meta, "NUMBER OF ZONES", required=False)
    first_thru = _meta_int(meta, "FIRST THRU NODE", required=False, default=1)

    records = []
    for lineno in range(body, len(lines)):
        line = lines[lineno].strip()
        if not line or line.startswith("~"):
            continue
        fields = line.rstrip(";").split()
        if not line.endswith(";"):
            raise TntpParseError("link record must end with ';'", lineno + 1)
        if len(fields) != len(LINK_COLUMNS):
            raise TntpParseError(f"expected {len(LINK_COLUMNS)} fields, got {len(fields)}", lineno + 1)
        try:
            values = [float(v) for v in fields]
        except ValueError:
            raise TntpParseError(f"non-numeric field in {line!r}", lineno + 1) from None
        rec = LinkRecord(int(values[0]), int(values[1]), *values[2:9], int(values[9]))
        if not (1 <= rec.init_node <= n_nodes and 1 <= rec.term_node <= n_nodes):
            raise TntpParseError(f"node index outside 1..{n_nodes}", lineno + 1)
        records.append(rec)
    if len(records) != n_links:
        raise TntpParseError(f"declared {n_links} links but parsed {len(records)}")
    known = {"NUMBER OF NODES", "NUMBER OF LINKS", "NUMBER OF ZONES", "FIRST THRU NODE"}
    extra = {k: v for k, v in meta.items() if k not in known}
    return TntpNetworkFile(n_zones, n_nodes, first_thru, n_links, tuple(records), extra)


def parse_trips(text) -> TntpTripsFile:
    """Parse a ``*_trips.tntp`` file; zero entries are dropped."""
    lines = _read_text(text).splitlines()
    meta, body = _split_metadata(lines)
    n_zones = _meta_int(meta, "NUMBER OF ZONES", required=False)
    total = meta.get("TOTAL OD FLOW")
    total = float(total) if total not in (None, "") else None

    demand = {}
    seen = set()
    origin = None
    for lineno in range(body, len(lines)):
        line = lines[lineno].strip()
        if not line or line.startswith("~"):
            continue
        if line.lower().startswith("origin"):
            parts = line.split()
            if len(parts) != 2:
                raise TntpParseError("malformed Origin line", lineno + 1)
            try:
                origin = int(parts[1])
            except ValueError:
                raise TntpParseError(f"bad origin {parts[1]!r}", lineno + 1) from None
            continue
        if origin is None:
            raise TntpParseError("demand entry before any Origin block", lineno + 1)
        for entry in line.split(";"):
            entry = entry.strip()
            if not entry:
                continue
            dest, sep, value = entry.partition(":")
            if not sep:
                raise TntpParseError(f"malformed entry {entry!r}", lineno + 1)
            try:
                d, v = int(dest), float(value)
            except ValueError:
                raise TntpParseError(f"malformed entry {entry!r}", lineno + 1) from None
            if v < 0:
                raise TntpParseError(f"negative demand {v}", lineno + 1)
            if (origin, d) in seen:
                raise TntpParseError(f"duplicate entry for ({origin}, {d})", lineno + 1)
            seen.add((origin, d))
            if v > 0:
                demand[(origin, d)] = v

    if total is not None and total > 0:
        parsed = sum(demand.values())
        if abs(parsed - total) > 1e-3 * total:
            log.warning("trips total %.6g differs from header <TOTAL OD FLOW> %.6g", parsed, total)
    extra = {k: v for k, v in meta.items() if k not in ("NUMBER OF ZONES", "TOTAL OD FLOW")}
    return TntpTripsFile(n_zones, total, demand, extra)


def build_model(net: TntpNetworkFile, trips: TntpTripsFile) -> NetworkModel:
    """NetworkModel with one BPR latency per link record; node ``k`` becomes index ``k-1``."""
    fns = []
    for i, rec in enumerate(net.links):
        if rec.capacity <= 0:
            log.warning("link %d (%d->%d) has zero capacity and is closed to traffic",
                        i, rec.init_node, rec.term_node)
        # b = 0 gives a constant link; a power below 1 only matters when b > 0
        power = rec.power
        if power < 1:
            if rec.b > 0:
                log.warning("link %d has BPR power %g < 1; using %g", i, power, DEFAULT_BETA)
            power = DEFAULT_BETA
        fns.append(LatencyFunction.bpr(rec.free_flow_time, max(rec.capacity, 0.0), max(rec.b, 0.0), power))
    n_zones = net.n_zones or trips.n_zones or net.n_nodes
    for (s, t) in trips.demand:
        for v in (s, t):
            if not 1 <= v <= net.n_nodes:
                raise NetworkError(f"trips reference node {v} outside 1..{net.n_nodes}")
            if v > n_zones:
                raise NetworkError(f"trips reference node {v}, which is not a zone (zones 1..{n_zones})")
    demand = {(s - 1, t - 1): r for (s, t), r in trips.demand.items()}
    return NetworkModel(
        n_nodes=net.n_nodes,
        tails=np.array([r.init_node - 1 for r in net.links], dtype=np.int64),
        heads=np.array([r.term_node - 1 for r in net.links], dtype=np.int64),
        latencies=tuple(fns),
        demand=demand,
        zones=frozenset(range(n_zones)),
        first_thru_node=max(net.first_thru_node - 1, 0),
        node_ids=tuple(range(1, net.n_nodes + 1)),
    )


def load_model(net_path, trips_path) -> NetworkModel:
    return build_model(parse_network(Path(net_path).read_text()), parse_trips(Path(trips_path).read_text()))


def _num(x):
    return f"{x:.12g}"


def format_network(net: TntpNetworkFile) -> str:
    out = io.StringIO()
    out.write(f"<NUMBER OF ZONES> {net.n_zones}\n")
    out.write(f"<NUMBER OF NODES> {net.n_nodes}\n")
    out.write(f"<FIRST THRU NODE> {net.first_thru_node}\n")
    out.write(f"<NUMBER OF LINKS> {net.n_links}\n")
    for k, v in net.metadata.items():
        out.write(f"<{k}> {v}\n")
    out.write("<END OF METADATA>\n\n\n")
    out.write("~\t" + "\t".join(LINK_COLUMNS) + "\t;\n")
    for r in net.links:
        vals = [str(r.init_node), str(r.term_node)] + [_num(getattr(r, c)) for c in LINK_COLUMNS[2:9]]
        out.write("\t" + "\t".join(vals + [str(r.link_type)]) + "\t;\n")
    return out.getvalue()


def format_trips(demand: dict, n_zones: int, per_line: int = 5) -> str:
    """Trips-file text for a 1-based ``{(origin, dest): flow}`` map."""
    out = io.StringIO()
    out.write(f"<NUMBER OF ZONES> {n_zones}\n")
    out.write(f"<TOTAL OD FLOW> {_num(sum(demand.values()))}\n")
    out.write("<END OF METADATA>\n\n\n")
    by_origin = {}
    for (s, t), v in sorted(demand.items()):
        by_origin.setdefault(s, []).append((t, v))
    for s, entries in by_origin.items():
        out.write(f"Origin \t{s}\n")
        cells = [f"{t:5d} : {_num(v)};" for t, v in entries]
        for k in range(0, len(cells), per_line):
            out.write("  ".join(cells[k:k + per_line]) + "\n")
        out.write("\n")
    return out.getvalue()
