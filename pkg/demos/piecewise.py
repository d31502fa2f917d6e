"""A threshold-piecewise function: max(0, x1 - x2) above the diagonal, min(x1, x2) below.

Run:  python demos/piecewise.py
"""
import numpy as np

from robustcrn.crn import unit_rates
from robustcrn.functions import DIFF_OR_MIN, FloorAffineSpec, compile_floor_affine, compile_piecewise
from robustcrn.simulate import detect_convergence, simulate

# a single floor-affine body first
fa = compile_floor_affine(FloorAffineSpec((1, -1)))
for r in fa.crn.reactions:
    print(f"{r.rate:>8}:  {r}")
traj = simulate(fa.crn, {"X1": 5.0, "X2": 2.0}, unit_rates(fa.crn), 1e3)
print("x1 - x2 at (5, 2) ->", round(traj.final()["Y"], 6))
print()

c, layout = compile_piecewise(DIFF_OR_MIN)
print(f"piecewise network: {len(c.crn.names)} species, {len(c.crn.reactions)} reactions")
print("activation:")
for r in c.crn.reactions:
    if r.rate.startswith("k1_") or r.rate == "k_out":
        print(f"  {r.rate:>5}:  {r}")
print()

init = {n: float(v) for n, v in c.initial_state((5, 2)).items()}
traj = simulate(c.crn, init, unit_rates(c.crn), 1e6, times=[1, 10, 1e2, 1e3, 1e4, 1e5, 1e6])
print("     t      Y^P       Y^C")
for t in traj.times[1:]:
    d = traj.at(t)
    print(f"{t:8.0e}  {d['Y^P']:.5f}  {d['Y^C']:.2e}")
# the verdict needs the default geometric schedule, whose window is the last decade
full = simulate(c.crn, init, unit_rates(c.crn), 1e6)
print("verdict:", detect_convergence(full, {"y": "Y^P"})["y"])

# the three conservation laws the construction maintains
for name, law in [("total", layout.law_total()), ("piece 1", layout.law_piece(0)), ("piece 2", layout.law_piece(1))]:
    w = np.array([float(law.get(n, 0)) for n in c.crn.names])
    drift = np.max(np.abs(traj.states @ w - traj.states[0] @ w))
    print(f"law {name:8} drift {drift:.1e}")
print()

for x in [(2, 5), (4, 1), (3, 3)]:
    traj = simulate(c.crn, {n: float(v) for n, v in c.initial_state(x).items()}, unit_rates(c.crn), 1e6)
    print(f"f{x} = {DIFF_OR_MIN.evaluate(x)}  simulated {traj.final()['Y^P']:.4f}"
          + ("  (on the guard boundary)" if DIFF_OR_MIN.on_boundary(x) else ""))
