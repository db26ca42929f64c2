"""
Pigou's network, one step at a time
===================================

Two parallel links from s to t carry one unit of demand. Link a always takes
1 minute, link b takes x minutes when it carries x. Selfish drivers all take
b; the system optimum splits the demand evenly. How many drivers must follow
instructions so that the optimum is reached anyway?
"""

# %%
# Build the network. Nodes are dense integers; each link is
# (tail, head, latency function).
import numpy as np

from socompliance.assignment import SO, UE, solve_equilibrium
from socompliance.compliance import build_ue_lp, check_sufficiency, max_ue_share
from socompliance.lp import export_lp
from socompliance.network import LatencyFunction, make_network
from socompliance.reduced_cost import reduced_cost_sets

pigou = make_network([(0, 1, LatencyFunction.constant(1.0)),
                      (0, 1, LatencyFunction.affine(0.0, 1.0))], {(0, 1): 1.0})

# %%
# User equilibrium and system optimum. The SO is an equilibrium under the
# marginal cost l(x) + x l'(x), so both come out of the same solver.
ue = solve_equilibrium(pigou, UE, aec_target=1e-12)
so = solve_equilibrium(pigou, SO, aec_target=1e-12)
print("UE flow", ue.link_flow, "TTT", ue.total_travel_time)
print("SO flow", so.link_flow, "TTT", so.total_travel_time)

# %%
# f_bar is the most flow a link can take without its latency moving off the
# SO value. Link a is constant, so it is unbounded; link b is capped at 0.5.
print("f_bar", so.f_bar)

# %%
# A selfish driver only accepts a route that is fastest and also cheapest in
# marginal cost at the SO. Here only link b qualifies.
rc = reduced_cost_sets(pigou, so)
print("acceptable links from s:", sorted(rc.links(0)))

# %%
# The UE linear program maximises the selfish demand routed on acceptable
# links within f_bar. Its MPS export can be handed to any external solver.
inst = build_ue_lp(pigou, so, rc)
print(export_lp(inst.lp))

# %%
# Solve it and route the compliant rest. Half the drivers must comply.
res = max_ue_share(pigou, so, rc)
print(f"selfish demand {res.r_ue_total:.3f}, compliant {res.percent_compliant:.1f}%")
for s, t, path, volume in res.ue_paths:
    print("  selfish  ", path, volume)
for s, t, path, volume in res.compliant_paths:
    print("  compliant", path, volume)

# %%
# Sufficiency of a given compliant share flips exactly at one half.
for share in np.linspace(0.0, 1.0, 11):
    verdict = check_sufficiency(pigou, so, rc, {(0, 1): share})
    print(f"compliant {share:.1f}: {'sufficient' if verdict.sufficient else 'insufficient'}")
