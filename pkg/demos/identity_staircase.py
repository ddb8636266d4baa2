"""
How small a noiseless system can stand in for a larger one?
===========================================================

A two-qubit identity (4 levels) can be simulated exactly from fewer levels if
the sampling budget allows it.  The table shows the smallest source, in bits,
for each budget, together with the exact costs where the steps occur.
"""
import math

from shadowsim import formation_zero_error_cost, identity_choi, shadow_sim_cost

target = identity_choi(4)
for d in (2, 3):
    print(f"exact cost of simulating 4 levels from {d}: {formation_zero_error_cost(d, target).value:.4f}")

print(f"\n{'gamma':>6} {'tr V*':>9} {'bits':>6}")
for gamma in [1, 2, 2.5, 2.6, 3, 4, 6, 6.9, 7, 10]:
    res = shadow_sim_cost(target, float(gamma))
    print(f"{gamma:>6} {res.details['trace_v']:>9.4f} {res.value:>6.3f}")

# %%
# The minimal trace follows 32/(γ+1): the source dimension is the ceiling of
# its square root, so the log2 3 step begins at γ = 23/9.
print(f"\nlog2 3 step begins at gamma = {23 / 9:.4f}; one qubit suffices from gamma = 7")
assert math.isclose(formation_zero_error_cost(3, target).value, 23 / 9, abs_tol=1e-5)
