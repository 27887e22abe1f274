"""
Return and escape probabilities
===============================

Hitting, first-return and Green values come from linear solves on the walk
truncated to words of length at most m. Values are monotone in m and the
history shows convergence.
"""
# %%
from fprw import EMPTY, FreeWord, first_return, get_scenario, group_case_range, hitting_probability, truncated_green, xi

spec = get_scenario("group-z2z3").spec
u = first_return(spec, EMPTY, 40, tol=1e-6)
print(f"U(o,o) = {u.value:.12f}  (17/24 = {17 / 24:.12f})  converged={u.converged}")
print("last steps of the history:", [f"{v:.3e}" for _, v in u.history[-3:]])

# %%
g = truncated_green(spec, EMPTY, EMPTY, 40)
print(f"G(o,o) = {g.value:.10f}  residuals {g.residuals}")
print("xi_1, xi_2 =", xi(spec, 1, 40).value, xi(spec, 2, 40).value)

a = FreeWord.of((1, 0))
print("P[hit o from a] =", hitting_probability(spec, a, EMPTY, 40).value)

# %%
# the cone route and plain enumeration of the truncated space agree
for method in ("cone", "enumerate"):
    print(method, first_return(spec, EMPTY, 12, method=method).value)

# %%
# for a group-invariant walk the asymptotic range is 1 - U(o,o)
print("predicted range:", group_case_range(spec, 40).value)
