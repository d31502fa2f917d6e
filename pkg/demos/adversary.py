"""The rate-constant adversary, and where slow tails bite.

Run:  python demos/adversary.py
"""
import os
from fractions import Fraction

from robustcrn.crn import unit_rates
from robustcrn.predicates import Threshold, compile_majority, compile_threshold
from robustcrn.simulate import simulate
from robustcrn.verify import AdversaryPolicy, check_chain_limits, run_decider_trials, summary_table

os.environ.setdefault("CRN_ROBUST_THREADS", "2")

m = compile_majority()
inputs = [(Fraction(2, 5), Fraction(3, 5)), (Fraction(3, 5), Fraction(2, 5))]
reports = run_decider_trials(m, inputs, AdversaryPolicy.log_uniform(count=5, seed=1), horizon=1e3)
print(summary_table(reports))

# The yes side drains N through C + Y -> C + N, and C only decays like t^-1/2.
d = compile_threshold(Threshold((2, "-1/3", "5/4"), 4))
k = unit_rates(d.crn, k1=0.1, k4=3.0)
traj = simulate(d.crn, {n: float(v) for n, v in d.initial_state((3, 0, 0)).items()}, k, 1e8,
                times=[1e2, 1e4, 1e6, 1e8])
print("yes side with a slow k1 and fast k4:")
for t in traj.times[1:]:
    s = traj.at(t)
    print(f"  t={t:6.0e}  N={s['N']:.3e}  k4 C / (k1 A + k4 C) = {3 * s['C'] / (0.1 * s['A'] + 3 * s['C']):.3e}")
print()

for eps in (0.5, 0.1, 0.01):
    res = check_chain_limits(eps)
    print(f"chain eps={eps}: V_nn -> {res.simulated[2]:.6f} (closed form {res.expected[2]:.6f})")
