"""
When the group formula fails
============================

On a free product of graphs that are not groups, 1 - U(o,o) need not be the
asymptotic range. In this scenario the walk never returns to o, so the
formula predicts 1, yet the simulated range stays below 1 - 1/24. The range
still equals the mean exit piece times the rate of escape.
"""
# %%
import warnings

from fprw import EMPTY, first_return, get_scenario, group_case_range, range_report, run_replicas

spec = get_scenario("counterexample").spec
print("U(o,o) =", first_return(spec, EMPTY, 40).value)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    print("formula prediction =", group_case_range(spec, 40).value)

# %%
reps = run_replicas(spec, 50_000, 16, base_seed=42, analyze=True, keep_series=False)
rep = range_report(reps)
print(f"r      = {rep.r_hat.mean:.4f} +- {rep.r_hat.std_error:.4f}")
print(f"ell    = {rep.ell_hat.mean:.4f} (by exits {rep.ell_exit_hat.mean:.4f})")
print(f"r~     = {rep.r_tilde_hat.mean:.4f}")
print(f"r~ ell = {rep.r_tilde_hat.mean * rep.ell_hat.mean:.4f}, gap {rep.product_check:.2e}, se {rep.product_std_error:.2e}")

# %%
# the same comparison on the group case
spec = get_scenario("group-z2z3").spec
rep = range_report(run_replicas(spec, 50_000, 16, base_seed=42, analyze=True, keep_series=False))
print(f"r = {rep.r_hat.mean:.4f}, 1 - U(o,o) = {1 - first_return(spec, EMPTY, 40).value:.4f}")
