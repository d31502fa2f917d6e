"""Rate-independent reachability in exact arithmetic.

Run:  python demos/reachability.py
"""
from robustcrn.crn import Crn, rxn
from robustcrn.predicates import Detect, Not, Or, compile_detection
from robustcrn.reachability import (RunUntilExhausted, execute_script, output_of, run_to_static,
                                    straight_line_reachable)

crn = Crn.from_reactions([rxn("X1", "Y", "k1"), rxn("X2 + Y", "0", "k2")])
start = {"X1": 5, "X2": 2}

# one straight segment cannot use X2 + Y since Y is absent at the start
print("one segment to {3Y}:", straight_line_reachable(crn, start, {"Y": 3}))
print("one segment to {5Y, 2X2}:", straight_line_reachable(crn, start, {"Y": 5, "X2": 2}))

end, hops = execute_script(crn, start, [RunUntilExhausted("k1", "X1"), RunUntilExhausted("k2", "X2")])
for i, h in enumerate(hops, 1):
    print(f"segment {i}: {({n: str(v) for n, v in h.start.items() if v})} -> "
          f"{({n: str(v) for n, v in h.end.items() if v})}")
print("end:", {n: str(v) for n, v in end.items()})
print()

# detection: "x1 present or x3 absent", judged by running to a static state
phi = Or((Detect(0, 3), Not(Detect(2, 3))))
d = compile_detection(phi)
for r in d.crn.reactions:
    print(f"  {r}")
print(" support   expected  reached")
for support in [(0, 0, 0), (0, 0, 1), (1, 0, 1), (0, 1, 1)]:
    final, script = run_to_static(d.crn, d.initial_state(support))
    print(f" {support}  {'yes' if phi.evaluate(support) else 'no':8}  {output_of(final, d.yes, d.no)}"
          f"  ({len(script)} segments)")
