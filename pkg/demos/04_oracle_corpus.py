"""
Checking the LP pipeline against brute force
============================================

The oracle enumerates every simple path of a small network and searches path
flows directly, sharing no code with the solvers. On the test corpus the LP
answers and the oracle agree.
"""

# %%
from socompliance import oracle
from socompliance.assignment import SO, solve_equilibrium
from socompliance.compliance import max_ue_share
from socompliance.reduced_cost import reduced_cost_sets

# %%
print(f"{'instance':26s} {'paths':>5s} {'SO TTT':>12s} {'oracle':>12s} {'max UE':>10s} {'oracle':>10s}")
for name, model in oracle.corpus():
    paths = oracle.enumerate_paths(model)
    _, oracle_ttt, _ = oracle.brute_force_so(model, paths)
    so = solve_equilibrium(model, SO, 1e-12, max_iterations=5000)
    res = max_ue_share(model, so, reduced_cost_sets(model, so, "exact", 1e-8))
    print(f"{name:26s} {paths.count:5d} {so.total_travel_time:12.8f} {oracle_ttt:12.8f} "
          f"{res.r_ue_total:10.6f} {oracle.brute_force_max_ue(model, paths):10.6f}")
