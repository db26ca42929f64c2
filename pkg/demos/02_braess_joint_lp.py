"""
Braess's network: when the UE program overstates the selfish share
===================================================================

At the SO of Braess's network nobody uses the zero-latency shortcut a->b, yet
the shortcut route s->a->b->t is the only one that is both fastest and
cheapest in marginal cost. The UE program happily puts 0.5 units on it. The
compliant remainder then has nowhere to go: both outer routes need one of the
links the shortcut route already saturated. The largest selfish share that
still yields the SO is zero.
"""

# %%
import numpy as np

from socompliance import oracle
from socompliance.assignment import SO, solve_equilibrium
from socompliance.compliance import assign_compliant_flow, build_ue_lp, max_ue_share
from socompliance.lp import solve_lp
from socompliance.reduced_cost import reduced_cost_sets

braess = oracle.braess()
so = solve_equilibrium(braess, SO, aec_target=1e-12)
rc = reduced_cost_sets(braess, so)
print("SO flow", so.link_flow.round(6), "acceptable links", sorted(rc.links(0)))

# %%
# The UE program on its own.
inst = build_ue_lp(braess, so, rc)
print("UE program optimum:", solve_lp(inst.lp).objective_value)

# %%
# Routing the complement of that optimum fails: 0.5 on s->a->b->t fills
# both s->a and b->t.
selfish = {0: np.array([0.5, 0.0, 0.0, 0.5, 0.5])}
try:
    assign_compliant_flow(braess, so, selfish, {(0, 3): 0.5})
except Exception as exc:  # noqa: BLE001 - shown on purpose
    print("compliant routing:", exc)

# %%
# max_ue_share notices and solves both populations together. The
# brute-force oracle, which enumerates path flows directly, agrees.
res = max_ue_share(braess, so, rc)
print(f"method {res.method}: selfish {res.r_ue_total:.6f}, UE program bound {res.ue_lp_bound:.6f}")
print("oracle:", oracle.brute_force_max_ue(braess, oracle.enumerate_paths(braess)))
