"""
Exit times and range pieces
===========================

The k-th exit time is the first time after which the first k letters of the
walk's word never change again. The visited set splits into pieces, one per
exit, plus an overhead that stays small relative to k.
"""
# %%
from fprw import chain_diagnostics, exit_times, get_scenario, psi_decomposition, run

spec = get_scenario("example1").spec
traj = run(spec, 5000, seed=3)
summary = exit_times(traj)
print("certified exits:", summary.k_of_n, "of", len(summary.e))
print("first exit times:", summary.e[:10])

# %%
# pieces R~_k tile the range; O_k is what sits inside the current cone
for rec in psi_decomposition(traj, summary, ks=range(1, 6)):
    print(rec.k, rec.e_k, rec.w_k, rec.r_tilde, rec.overhead)

k = summary.k_of_n
pieces = summary.r_tilde[:k].sum()
print("r~_0 + sum of pieces + overhead =", summary.r_tilde_0 + pieces + summary.overhead[k - 1])
print("range at e_k =", traj.ranges[summary.e[k - 1]])

# %%
report = chain_diagnostics(summary, traj)
print("clean:", report.clean, "alternation", report.alternation_violations, "nesting", report.nesting_violations)
