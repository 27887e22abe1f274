"""
Simulating the range
====================

The range R_n counts distinct words visited up to time n. Replicas use
independent Philox streams derived from one base seed, so a run is
reproducible from (model, steps, replicas, seed).
"""
# %%
import numpy as np

from fprw import estimate_range, exact_expected_range_series, get_scenario, mean_range_at, run, run_replicas

spec = get_scenario("counterexample").spec
traj = run(spec, 20, seed=7)
for n in range(0, 21, 5):
    print(n, traj.word(n), traj.ranges[n])

# %%
# exact E[R_n] for small n by enumerating every path
exact = exact_expected_range_series(spec, 8)
reps = run_replicas(spec, 8, 4000, base_seed=1)
for n in range(1, 9):
    mc = mean_range_at(reps, n)
    print(f"n={n}  exact={str(exact[n]):>6s}  monte carlo={mc.mean:.3f} +- {mc.std_error:.3f}")

# %%
# R_N / N over long runs
reps = run_replicas(spec, 50_000, 16, base_seed=42)
est = estimate_range(reps)
print(f"R_N/N = {est.mean:.4f} +- {est.std_error:.4f}  (upper bound {1 - 1 / 24:.4f})")
print("spread over replicas:", np.ptp([r.final_range / r.n_steps for r in reps]))
