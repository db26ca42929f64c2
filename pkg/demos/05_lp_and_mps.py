"""
The LP layer on its own
=======================

A small production-planning LP built through the sparse model, solved with
the bundled revised simplex, written to MPS and read back.
"""

# %%
import numpy as np

from socompliance.lp import LE, LinearProgram, export_lp, read_mps, solve_lp

lp = LinearProgram("max", name="PLAN")
chairs = lp.add_variable("chairs", upper=40, objective=45.0)
tables = lp.add_variable("tables", objective=80.0)
lp.add_constraint({chairs: 5.0, tables: 20.0}, LE, 400.0, "wood")
lp.add_constraint({chairs: 10.0, tables: 15.0}, LE, 450.0, "labour")

# %%
sol = solve_lp(lp)
print(sol.status, sol.objective_value, dict(zip(lp.var_names, sol.x)))
print("row prices", sol.duals, "duality gap", sol.duality_gap)

# %%
text = export_lp(lp)
print(text)
again = read_mps(text)
assert np.allclose(solve_lp(again).x, sol.x)
