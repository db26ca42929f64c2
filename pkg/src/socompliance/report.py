"""Plain-text result reports with an optional JSON twin.

Text layout::

    # socompliance report
    [section]
    key = value
    [table name]
    col1<TAB>col2 ...
    v1<TAB>v2 ...

Floats are written with ``repr``-stable ``%.12g`` formatting and sections keep
insertion order, so identical inputs give byte-identical files. No timestamps
or host details are recorded.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) or hasattr(value, "dtype"):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.12g}"
    if value is None:
        return "-"
    return str(value)


def _jsonable(value):
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    v = float(value)
    return v if math.isfinite(v) else fmt(v)


@dataclass
class Report:
    title: str = "socompliance report"
    sections: list = field(default_factory=list)

    def section(self, name: str, items: dict) -> None:
        self.sections.append(("kv", name, dict(items)))

    def table(self, name: str, columns: list, rows: list) -> None:
        self.sections.append(("table", name, (list(columns), [list(r) for r in rows])))

    def get(self, section: str, key: str):
        for kind, name, body in self.sections:
            if kind == "kv" and name == section:
                return body[key]
        raise KeyError((section, key))

    def to_text(self) -> str:
        lines = [f"# {self.title}"]
        for kind, name, body in self.sections:
            if kind == "kv":
                lines.append(f"[{name}]")
                lines += [f"{k} = {fmt(v)}" for k, v in body.items()]
            else:
                columns, rows = body
                lines.append(f"[table {name}]")
                lines.append("\t".join(columns))
                lines += ["\t".join(fmt(v) for v in row) for row in rows]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        out = {"title": self.title}
        for kind, name, body in self.sections:
            if kind == "kv":
                out[name] = {k: _jsonable(v) for k, v in body.items()}
            else:
                columns, rows = body
                out[name] = {"columns": columns, "rows": [[_jsonable(v) for v in r] for r in rows]}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def parse_text(text: str) -> dict:
    """Read a text report back into ``{section: {key: str}}`` / ``{table: [row dicts]}``."""
    out, current, columns = {}, None, None
    for line in text.splitlines():
        if line.startswith("# ") or not line:
            continue
        if line.startswith("[table ") and line.endswith("]"):
            current = out.setdefault(line[7:-1], [])
            columns = None
        elif line.startswith("[") and line.endswith("]"):
            current = out.setdefault(line[1:-1], {})
            columns = None
        elif isinstance(current, dict):
            key, _, value = line.partition(" = ")
            current[key] = value
        elif columns is None:
            columns = line.split("\t")
        else:
            current.append(dict(zip(columns, line.split("\t"))))
    return out
