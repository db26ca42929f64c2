"""Exact classification of tiny LPs by vertex enumeration in rational arithmetic.

Used as the independent check for the simplex solver. Variables have lower
bound 0, so every nonempty feasible region is pointed and has a vertex.
"""
from fractions import Fraction
from itertools import combinations

import numpy as np

from socompliance.lp import EQ, GE, INFEASIBLE, LE, OPTIMAL, UNBOUNDED, LinearProgram


def _solve3(rows, rhs):
    """Gaussian elimination on a square Fraction system; None when singular."""
    n = len(rows)
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((i for i in range(col, n) if m[i][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        for i in range(n):
            if i != col and m[i][col] != 0:
                f = m[i][col] / m[col][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[col])]
    return [m[i][n] / m[i][i] for i in range(n)]


def _vertices(le, eq, n):
    """Vertices of {a.x <= b for le, a.x = b for eq}."""
    pool = le + eq
    out = []
    for combo in combinations(range(len(pool)), n):
        x = _solve3([pool[i][0] for i in combo], [pool[i][1] for i in combo])
        if x is None:
            continue
        if all(sum(a * v for a, v in zip(row, x)) <= b for row, b in le) and \
                all(sum(a * v for a, v in zip(row, x)) == b for row, b in eq):
            out.append(x)
    return out


def classify(c, A, relations, b, upper, sense):
    """(status, optimal value) with exact arithmetic; ``upper`` entries may be None."""
    n = len(c)
    c = [Fraction(v) for v in c]
    if sense == "min":
        c = [-v for v in c]
    le, eq = [], []
    for row, rel, rhs in zip(A, relations, b):
        row = [Fraction(v) for v in row]
        if rel == LE:
            le.append((row, Fraction(rhs)))
        elif rel == GE:
            le.append(([-v for v in row], -Fraction(rhs)))
        else:
            eq.append((row, Fraction(rhs)))
    unit = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    bounds = [([-v for v in unit[j]], Fraction(0)) for j in range(n)]
    bounds += [(unit[j], Fraction(u)) for j, u in enumerate(upper) if u is not None]
    verts = _vertices(le + bounds, eq, n)
    if not verts:
        return INFEASIBLE, None
    # recession cone normalised by sum(r) = 1
    cone_le = [(row, Fraction(0)) for row, _ in le + bounds]
    cone_eq = [(row, Fraction(0)) for row, _ in eq] + [([Fraction(1)] * n, Fraction(1))]
    rays = _vertices(cone_le, cone_eq, n)
    if any(sum(a * v for a, v in zip(c, r)) > 0 for r in rays):
        return UNBOUNDED, None
    best = max(sum(a * v for a, v in zip(c, x)) for x in verts)
    return OPTIMAL, (best if sense == "max" else -best)


def random_instance(rng):
    """A 3-variable LP with small integer data, as (LinearProgram, raw data)."""
    n = 3
    m = int(rng.integers(1, 5))
    sense = "max" if rng.random() < 0.5 else "min"
    c = [int(v) for v in rng.integers(-5, 6, n)]
    A = [[int(v) for v in rng.integers(-4, 5, n)] for _ in range(m)]
    relations = [str(rng.choice([LE, LE, GE, EQ])) for _ in range(m)]
    b = [int(v) for v in rng.integers(-6, 11, m)]
    upper = [int(rng.integers(1, 9)) if rng.random() < 0.3 else None for _ in range(n)]
    lp = LinearProgram(sense)
    for j in range(n):
        lp.add_variable(f"x{j}", 0.0, np.inf if upper[j] is None else upper[j], c[j])
    for row, rel, rhs in zip(A, relations, b):
        lp.add_constraint({j: a for j, a in enumerate(row)}, rel, rhs)
    return lp, (c, A, relations, b, upper, sense)


def dual_bound(lp, duals, zero=1e-9):
    """Weak-duality bound on the optimum implied by row prices ``duals``.

    For any feasible x, c.x = (c - A'y).x + y.(Ax); each term is bounded over
    the variable box and the row's allowed activity range. Prices and reduced
    costs below ``zero`` in magnitude are treated as round-off.
    """
    c, A, relations, b, lo, up = lp.arrays()
    sign = 1.0 if lp.sense == "min" else -1.0
    y = sign * np.asarray(duals, dtype=float)
    y[np.abs(y) <= zero] = 0.0
    d = sign * c - A.T @ y
    d[np.abs(d) <= zero] = 0.0
    total = 0.0
    for dj, l, u in zip(d, lo, up):
        total += dj * (l if dj > 0 else u) if dj != 0 else 0.0
    for yi, rel, bi in zip(y, relations, b):
        if yi == 0:
            continue
        allowed_low = rel in (GE, EQ)
        allowed_high = rel in (LE, EQ)
        if (yi > 0 and allowed_low) or (yi < 0 and allowed_high):
            total += yi * bi
        else:
            return -sign * np.inf
    return sign * total
