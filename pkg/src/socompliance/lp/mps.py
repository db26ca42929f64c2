"""Fixed-field MPS export (and a reader for round-trip checks).

Names are mangled to 8-character codes: rows ``R0000001``, columns
``C0000001``, objective row ``OBJ``. The original names are listed in comment
lines at the top of the file (``* COL C0000001 x[3,17]``) so the mapping can
be reversed. Fixed-field MPS always minimises: a maximisation problem is
written with a negated objective and flagged by ``* OBJSENSE MAX``. Numbers
occupy 12-character fields, so coefficients keep as many significant digits
as fit in 12 characters.
"""
from __future__ import annotations

import io

import numpy as np

from .model import EQ, GE, LE, LinearProgram

_REL_CODE = {LE: "L", GE: "G", EQ: "E"}
_CODE_REL = {v: k for k, v in _REL_CODE.items()}


def _num(v: float) -> str:
    if v == 0:
        return "0."
    for digits in range(12, 0, -1):
        s = f"{v:.{digits}g}"
        if "e" not in s and "." not in s:
            s += "."
        if len(s) <= 12:
            return s
    raise ValueError(f"cannot fit {v} into a 12-character MPS field")


def _line(code, name1, name2="", num1=None, name3="", num2=None):
    s = f" {code:<2} {name1:<8}  {name2:<8}  "
    if num1 is not None:
        s += f"{_num(num1):>12}"
    if name3:
        s += f"   {name3:<8}  {_num(num2):>12}"
    return s.rstrip()


def export_lp(lp: LinearProgram) -> str:
    """MPS text for ``lp``; see the module docstring for the dialect."""
    out = io.StringIO()
    rows = [f"R{i + 1:07d}" for i in range(lp.n_constraints)]
    cols = [f"C{j + 1:07d}" for j in range(lp.n_variables)]
    out.write(f"* {lp.name}\n")
    if lp.sense == "max":
        out.write("* OBJSENSE MAX\n")
    for code, name in zip(rows, lp.row_names):
        out.write(f"* ROW {code} {name}\n")
    for code, name in zip(cols, lp.var_names):
        out.write(f"* COL {code} {name}\n")
    out.write(f"{'NAME':<14}{lp.name[:8]}\n")
    out.write("ROWS\n")
    out.write(" N  OBJ\n")
    for code, rel in zip(rows, lp.relations):
        out.write(f" {_REL_CODE[rel]}  {code}\n")

    out.write("COLUMNS\n")
    sign = -1.0 if lp.sense == "max" else 1.0
    A = lp.matrix()
    for j, code in enumerate(cols):
        entries = []
        if lp.objective[j] != 0:
            entries.append(("OBJ", sign * lp.objective[j]))
        start, end = A.indptr[j], A.indptr[j + 1]
        entries += [(rows[i], v) for i, v in zip(A.indices[start:end], A.data[start:end])]
        if not entries:
            entries = [("OBJ", 0.0)]
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            if len(pair) == 2:
                out.write(_line("", code, pair[0][0], pair[0][1], pair[1][0], pair[1][1]) + "\n")
            else:
                out.write(_line("", code, pair[0][0], pair[0][1]) + "\n")

    out.write("RHS\n")
    for code, b in zip(rows, lp.rhs):
        if b != 0:
            out.write(_line("", "RHS", code, b) + "\n")

    out.write("BOUNDS\n")
    for code, lo, hi in zip(cols, lp.lower, lp.upper):
        if lo == hi:
            out.write(_line("FX", "BND", code, lo) + "\n")
            continue
        if lo == -np.inf and hi == np.inf:
            out.write(_line("FR", "BND", code) + "\n")
            continue
        if lo == -np.inf:
            out.write(_line("MI", "BND", code) + "\n")
        elif lo != 0:
            out.write(_line("LO", "BND", code, lo) + "\n")
        if hi != np.inf:
            out.write(_line("UP", "BND", code, hi) + "\n")
    out.write("ENDATA\n")
    return out.getvalue()


def read_mps(text: str) -> LinearProgram:
    """Parse MPS written by :func:`export_lp`, restoring names and objective sense."""
    names = {}
    sense = "min"
    title = "LP"
    section = None
    row_rel = {}
    row_order = []
    col_entries = {}
    col_order = []
    rhs = {}
    bounds = {}
    for raw in text.splitlines():
        if raw.startswith("*"):
            parts = raw[1:].split(maxsplit=2)
            if parts[:2] == ["OBJSENSE", "MAX"]:
                sense = "max"
            elif len(parts) == 3 and parts[0] in ("ROW", "COL"):
                names[parts[1]] = parts[2]
            continue
        if not raw.strip():
            continue
        if not raw.startswith(" "):
            head = raw.split()
            section = head[0]
            if section == "NAME" and len(head) > 1:
                title = head[1]
            continue
        f = raw.split()
        if section == "ROWS":
            if f[0] != "N":
                row_rel[f[1]] = _CODE_REL[f[0]]
                row_order.append(f[1])
        elif section == "COLUMNS":
            col = f[0]
            if col not in col_entries:
                col_entries[col] = []
                col_order.append(col)
            for k in range(1, len(f), 2):
                col_entries[col].append((f[k], float(f[k + 1])))
        elif section == "RHS":
            for k in range(1, len(f), 2):
                rhs[f[k]] = float(f[k + 1])
        elif section == "BOUNDS":
            kind, col = f[0], f[2]
            val = float(f[3]) if len(f) > 3 else None
            lo, hi = bounds.get(col, (0.0, np.inf))
            if kind == "UP":
                hi = val
            elif kind == "LO":
                lo = val
            elif kind == "FX":
                lo = hi = val
            elif kind == "FR":
                lo, hi = -np.inf, np.inf
            elif kind == "MI":
                lo = -np.inf
            elif kind == "PL":
                hi = np.inf
            bounds[col] = (lo, hi)

    lp = LinearProgram(sense, names.get("NAME", title))
    sign = -1.0 if sense == "max" else 1.0
    index = {}
    for col in col_order:
        lo, hi = bounds.get(col, (0.0, np.inf))
        obj = sum(v for r, v in col_entries[col] if r == "OBJ")
        index[col] = lp.add_variable(names.get(col, col), lo, hi, sign * obj)
    coeffs = {r: {} for r in row_order}
    for col in col_order:
        for r, v in col_entries[col]:
            if r != "OBJ":
                coeffs[r][index[col]] = v
    for r in row_order:
        lp.add_constraint(coeffs[r], row_rel[r], rhs.get(r, 0.0), names.get(r, r))
    return lp
