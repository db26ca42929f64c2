"""Sparse linear programs, a revised simplex solver and MPS export."""
from .model import (EQ, GE, INFEASIBLE, ITERATION_LIMIT, LE, OPTIMAL, UNBOUNDED, LinearProgram, LpError,
                    LpSolution)
from .mps import export_lp, read_mps
from .simplex import solve_lp

__all__ = ["EQ", "GE", "LE", "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "ITERATION_LIMIT", "LinearProgram",
           "LpError", "LpSolution", "solve_lp", "export_lp", "read_mps"]
