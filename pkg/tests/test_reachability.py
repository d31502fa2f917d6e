import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from robustcrn.crn import Crn, CrnError, Reaction, build_stoichiometry_matrix, is_applicable, rxn
from robustcrn.predicates import And, Detect, Not, Or, compile_detection
from robustcrn.reachability import (RunFlux, RunUntilExhausted, ScriptError, execute_script, output_of,
                                    parse_script, run_to_static, stability, straight_line_reachable)

SUBTRACT = Crn.from_reactions([rxn("X1", "Y", "a"), rxn("X2 + Y", "0", "b")])
START = {"X1": 5, "X2": 2}


def test_one_segment_to_three_y_is_infeasible():
    # Y is absent at the start, so X2 + Y -> 0 cannot fire in a single segment
    assert straight_line_reachable(SUBTRACT, START, {"Y": 3}) is None


def test_one_segment_partial_progress():
    assert straight_line_reachable(SUBTRACT, START, {"X1": 0, "X2": 2, "Y": 5}) == {0: 5}


def test_two_segment_script():
    script = [RunUntilExhausted("a", "X1"), RunUntilExhausted(1, "X2")]
    end, hops = execute_script(SUBTRACT, START, script)
    assert end == {"X1": 0, "X2": 0, "Y": 3}
    assert all(isinstance(v, Fraction) for v in end.values())
    assert len(hops) == 2 and hops[0].end == hops[1].start
    assert stability(SUBTRACT, end) == "stable"


def test_script_errors():
    with pytest.raises(ScriptError):
        execute_script(SUBTRACT, START, [RunUntilExhausted("b", "X2")])  # Y absent
    with pytest.raises(ScriptError):
        execute_script(SUBTRACT, START, [RunFlux({"a": 6})])  # X1 goes negative
    with pytest.raises(ScriptError):
        execute_script(SUBTRACT, START, [RunUntilExhausted("a", "Y")])  # a does not consume Y
    with pytest.raises(CrnError):
        execute_script(SUBTRACT, START, [RunFlux({"nope": 1})])


def test_parse_script_accepts_index_and_name():
    doc = [{"run": "a", "until": "X1"}, {"flux": {"1": "2"}}]
    script = parse_script(doc)
    assert script == [RunUntilExhausted("a", "X1"), RunFlux({1: "2"})]
    end, _ = execute_script(SUBTRACT, START, script)
    assert end["Y"] == 3
    with pytest.raises(CrnError):
        parse_script([{"go": 1}])


def test_output_of():
    assert output_of({"Y": 1, "N": 0}, ["Y"], ["N"]) == "yes"
    assert output_of({"Y": 0, "N": "1/2"}, ["Y"], ["N"]) == "no"
    assert output_of({"Y": 1, "N": 1}, ["Y"], ["N"]) == "undefined"
    assert output_of({}, ["Y"], ["N"]) == "undefined"


# -- soundness against an independent LP ------------------------------------------

NAMES = ["A", "B", "C", "D"]


@st.composite
def instances(draw):
    rs = []
    for j in range(draw(st.integers(1, 5))):
        side = st.dictionaries(st.sampled_from(NAMES), st.integers(1, 2), max_size=2)
        r, p = draw(side), draw(side)
        if r != p:
            rs.append(Reaction(r, p, f"k{j}"))
    if not rs:
        rs = [rxn("A", "B", "k0")]
    crn = Crn.from_reactions(rs, species=NAMES)
    val = st.integers(0, 4).map(Fraction)
    c = {n: draw(val) for n in NAMES}
    if draw(st.booleans()):
        # a target known to be reachable: apply a random flux of applicable reactions
        app = [j for j, r in enumerate(crn.reactions) if is_applicable(r, c)]
        d = dict(c)
        for j in app:
            u = Fraction(draw(st.integers(0, 3)), draw(st.integers(1, 3)))
            for n, v in crn.reactions[j].net_change().items():
                d[n] += v * u
        if any(v < 0 for v in d.values()):
            d = c
    else:
        d = {n: draw(val) for n in NAMES}
    return crn, c, d


def lp_oracle(crn, c, d):
    app = [j for j, r in enumerate(crn.reactions) if is_applicable(r, c)]
    delta = np.array([float(d[n] - c[n]) for n in crn.names])
    if not app:
        return not np.any(delta)
    M = build_stoichiometry_matrix(crn).astype(float)[:, app]
    res = linprog(np.zeros(len(app)), A_eq=M, b_eq=delta, bounds=[(0, None)] * len(app), method="highs")
    return res.status == 0


@settings(max_examples=150, deadline=None)
@given(instances())
def test_feasibility_agrees_with_float_lp(inst):
    crn, c, d = inst
    flux = straight_line_reachable(crn, c, d)
    assert (flux is not None) == lp_oracle(crn, c, d)
    if flux is not None:
        assert all(u > 0 and is_applicable(crn.reactions[j], c) for j, u in flux.items())
        end = dict(c)
        for j, u in flux.items():
            for n, v in crn.reactions[j].net_change().items():
                end[n] += v * u
        assert end == {n: Fraction(d[n]) for n in NAMES}


@settings(max_examples=60, deadline=None)
@given(instances())
def test_executed_segments_are_certified(inst):
    crn, c, _ = inst
    try:
        end, script = run_to_static(crn, c, max_hops=50)
    except ScriptError:
        return  # a cycle or an unbounded producer; nothing to certify
    _, hops = execute_script(crn, c, script)
    for seg in hops:
        assert straight_line_reachable(crn, seg.start, seg.end) is not None
    assert stability(crn, end) == "stable"


# -- detection truth tables -------------------------------------------------------------

def detection_exprs(k):
    leaves = [Detect(i, k) for i in range(k)]
    yield from leaves
    yield Not(leaves[0])
    yield And((leaves[0], leaves[-1]))
    yield Or((leaves[0], Not(leaves[-1])))
    if k >= 3:
        yield And((Or((leaves[0], leaves[1])), Not(leaves[2])))
    if k >= 4:
        yield Or((And((leaves[0], leaves[3])), And((leaves[1], Not(leaves[2])))))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_detection_matches_truth_table(k):
    for expr in detection_exprs(k):
        d = compile_detection(expr)
        for support in itertools.product((0, 1), repeat=k):
            x = [Fraction(s * (i + 2), 3) for i, s in enumerate(support)]  # varied positive amounts
            end, script = run_to_static(d.crn, d.initial_state(x))
            _, hops = execute_script(d.crn, d.initial_state(x), script)
            assert all(straight_line_reachable(d.crn, h.start, h.end) is not None for h in hops)
            assert stability(d.crn, end) == "stable"
            assert output_of(end, d.yes, d.no) == ("yes" if expr.evaluate(x) else "no"), (expr, support)
