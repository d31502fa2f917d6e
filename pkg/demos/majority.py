"""Majority by mass action: who wins, how fast, and what happens at a tie.

Run:  python demos/majority.py
"""
import numpy as np

from robustcrn.crn import unit_rates
from robustcrn.predicates import compile_majority
from robustcrn.simulate import detect_convergence, format_odes, simulate

np.set_printoptions(precision=4)

m = compile_majority()
for r in m.crn.reactions:
    print(f"{r.rate:>3}:  {r}")
print()
print(format_odes(m.crn))

# A = 0.4 < B = 0.6, so the answer is "no".  Y starts at 1 and must flip to N.
init = {"A": 0.4, "B": 0.6, "C": 1.0, "Y": 1.0}
for name, k in [("all ones", unit_rates(m.crn)), ("k1 = k5 = 10", unit_rates(m.crn, k1=10, k5=10))]:
    traj = simulate(m.crn, init, k, 100, times=[1, 3, 10, 30, 100])
    print(name)
    print("   t      Y        N        A        B        C")
    for t, s in zip(traj.times, traj.states):
        d = dict(zip(traj.species, s))
        print(f"{t:5g}  {d['Y']:.5f}  {d['N']:.5f}  {d['A']:.5f}  {d['B']:.5f}  {d['C']:.5f}")
    print()

# Voters are conserved: Y + N = 1 along the whole run.
traj = simulate(m.crn, init, unit_rates(m.crn), 1e3)
print("max |Y + N - 1| =", np.max(np.abs(traj["Y"] + traj["N"] - 1)))
v = detect_convergence(traj, {"no": "N"})["no"]
print(f"N -> {v.limit:.6f} ({v.verdict} over t in [{v.window[0]:.4g}, {v.window[1]:.4g}])")
print()

# A tie.  A and B annihilate to zero together and the leader C decays as t^-1/2,
# so C eventually dominates and pushes Y down, but only slowly.
tie = {"A": 0.5, "B": 0.5, "C": 0.5, "Y": 1.0}
decades = [1e2, 1e3, 1e4, 1e5, 1e6]
traj = simulate(m.crn, tie, unit_rates(m.crn, k1=10, k5=10), 1e6, times=decades)
print("tie, k1 = k5 = 10")
for t in decades:
    d = traj.at(t)
    print(f"t={t:8.0e}  Y={d['Y']:.4f}  A/C={d['A'] / d['C']:.3e}")
