from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = "<=", "=", ">="
OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


class LpError(ValueError):
    pass


class LinearProgram:
    """Sparse LP: ``sense`` c.x subject to row relations and variable bounds.

    Built incrementally::

        lp = LinearProgram("max")
        x = lp.add_variable("x", upper=3.0, objective=1.0)
        lp.add_constraint({x: 1.0}, "<=", 3.0)
    """

    def __init__(self, sense: str = "min", name: str = "LP"):
        if sense not in ("min", "max"):
            raise LpError(f"sense must be 'min' or 'max', got {sense!r}")
        self.sense = sense
        self.name = name
        self.var_names: list[str] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.objective: list[float] = []
        self.row_names: list[str] = []
        self.relations: list[str] = []
        self.rhs: list[float] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._index: dict[str, int] = {}

    @property
    def n_variables(self) -> int:
        return len(self.var_names)

    @property
    def n_constraints(self) -> int:
        return len(self.row_names)

    def add_variable(self, name: str, lower: float = 0.0, upper: float = np.inf, objective: float = 0.0) -> int:
        if name in self._index:
            raise LpError(f"duplicate variable name {name!r}")
        if lower > upper:
            raise LpError(f"variable {name!r}: lower bound {lower} exceeds upper bound {upper}")
        idx = len(self.var_names)
        self._index[name] = idx
        self.var_names.append(name)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.objective.append(float(objective))
        return idx

    def index(self, name: str) -> int:
        return self._index[name]

    def add_constraint(self, coeffs: dict, relation: str, rhs: float, name: str | None = None) -> int:
        if relation not in (LE, EQ, GE):
            raise LpError(f"unknown relation {relation!r}")
        row = len(self.row_names)
        for j, a in coeffs.items():
            if not 0 <= j < self.n_variables:
                raise LpError(f"constraint references unknown variable index {j}")
            if a != 0:
                self._rows.append(row)
                self._cols.append(int(j))
                self._vals.append(float(a))
        self.row_names.append(name or f"r{row}")
        self.relations.append(relation)
        self.rhs.append(float(rhs))
        return row

    def matrix(self) -> sp.csc_matrix:
        return sp.csc_matrix((self._vals, (self._rows, self._cols)),
                             shape=(self.n_constraints, self.n_variables))

    def arrays(self):
        """(c, A, relations, b, lower, upper) as numpy/scipy objects."""
        return (np.array(self.objective, dtype=float), self.matrix(), list(self.relations),
                np.array(self.rhs, dtype=float), np.array(self.lower, dtype=float),
                np.array(self.upper, dtype=float))

    def evaluate(self, x) -> float:
        return float(np.dot(self.objective, x))

    def max_violation(self, x) -> float:
        """Largest bound or row violation of ``x``, recomputed from the stored triplets."""
        x = np.asarray(x, dtype=float)
        worst = float(max(np.max(np.asarray(self.lower) - x, initial=0.0),
                          np.max(x - np.asarray(self.upper), initial=0.0)))
        act = np.zeros(self.n_constraints)
        for r, c, v in zip(self._rows, self._cols, self._vals):
            act[r] += v * x[c]
        for r, (rel, b) in enumerate(zip(self.relations, self.rhs)):
            gap = act[r] - b
            if rel == LE:
                worst = max(worst, gap)
            elif rel == GE:
                worst = max(worst, -gap)
            else:
                worst = max(worst, abs(gap))
        return worst


@dataclass
class LpSolution:
    status: str
    objective_value: float
    x: np.ndarray
    duals: np.ndarray | None = None
    iterations: int = 0
    phase1_iterations: int = 0
    duality_gap: float = float("nan")
    stats: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def value(self, lp: LinearProgram, name: str) -> float:
        return float(self.x[lp.index(name)])
