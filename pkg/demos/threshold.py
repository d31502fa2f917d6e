"""Threshold predicates and their Boolean combinations.

Run:  python demos/threshold.py
"""
from fractions import Fraction

from robustcrn.crn import unit_rates
from robustcrn.predicates import And, Not, Threshold, compile_multi_threshold, compile_threshold
from robustcrn.simulate import simulate

# 2 x1 - x2/3 + 5/4 x3 > 4
phi = Threshold((2, "-1/3", "5/4"), 4)
d = compile_threshold(phi)
print("relays and majority core:")
for r in d.crn.reactions:
    print(f"  {r.rate:>5}:  {r}")
print("initial context:", {n: str(v) for n, v in d.context.items()})
print()

for x in [(3, 0, 0), (1, 3, 0), (0, 0, 4)]:
    truth = phi.evaluate(x)
    traj = simulate(d.crn, {n: float(v) for n, v in d.initial_state(x).items()}, unit_rates(d.crn), 1e4)
    end = traj.final()
    print(f"x={x}: sum={phi.value(x)}  expect {'yes' if truth else 'no'}   Y={end['Y']:.4f}  N={end['N']:.4f}")
print()

# A band: 1 < x1 - x2 and NOT(x1 - x2 > 3).  Each leaf is normalized to a
# single yes and no voter before the two are combined.
band = And((Threshold((1, -1), 1), Not(Threshold((1, -1), 3))))
db = compile_multi_threshold(band)
print(f"band decider: {len(db.crn.names)} species, {len(db.crn.reactions)} reactions")
print("yes voters:", db.yes, " no voters:", db.no)
for x in [(Fraction(5, 2), 0), (5, 0), (1, 1)]:
    traj = simulate(db.crn, {n: float(v) for n, v in db.initial_state(x).items()}, unit_rates(db.crn), 1e4)
    end = traj.final()
    yes = sum(end[v] for v in db.yes)
    print(f"x={tuple(str(v) for v in x)}: expect {band.evaluate(x)!s:5}  yes-voter total {yes:.4f}")
