from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustcrn.crn import Crn, CrnError, build_stoichiometry_matrix, conservation_vectors, unit_rates
from robustcrn.exact import in_row_span
from robustcrn.predicates import (And, Detect, Not, Or, Threshold, combine, compile_detection, compile_majority,
                                  compile_multi_threshold, compile_threshold, decider_from_json,
                                  normalize_two_voters, parse_predicate, predicate_to_json)
from robustcrn.reachability import output_of, run_to_static
from robustcrn.simulate import simulate

SKETCH = Threshold((2, "-1/3", "5/4"), 4)


def run(d, x, k=None, horizon=1e3):
    k = k or unit_rates(d.crn)
    return simulate(d.crn, {n: float(v) for n, v in d.initial_state(x).items()}, k, horizon)


def voter_sum(traj, names):
    return sum(traj[n] for n in names)


def lines(crn):
    return [(str(r), r.rate) for r in crn.reactions]


# -- majority ---------------------------------------------------------------------

def test_majority_structure():
    m = compile_majority()
    assert lines(m.crn) == [
        ("A + N -> A + Y", "k1"),
        ("B + Y -> B + N", "k2"),
        ("A + B -> 0", "k3"),
        ("C + Y -> C + N", "k4"),
        ("3C -> 0", "k5"),
    ]
    assert set(m.crn.names) == {"A", "B", "C", "Y", "N"}
    assert m.yes == ("Y",) and m.no == ("N",)
    assert m.context == {"Y": 1, "C": 1}
    assert m.inputs == ("A", "B")


def test_majority_unequal_inputs_decide_no_by_100():
    m = compile_majority()
    traj = run(m, (Fraction(2, 5), Fraction(3, 5)), horizon=100)
    assert traj.final()["N"] > 0.99


# -- threshold ----------------------------------------------------------------------

def test_threshold_sketch_reactions():
    d = compile_threshold(SKETCH)
    relays = lines(d.crn)[:3]
    assert relays == [("X1 -> 2A", "k_X1"), ("3X2 -> B", "k_X2"), ("4X3 -> 5A", "k_X3")]
    assert d.context == {"Y": 1, "C": 1, "B": 4}


def test_negative_threshold_goes_to_a():
    d = compile_threshold(Threshold((1,), "-5/2"))
    assert d.context["A"] == Fraction(5, 2) and "B" not in d.context


def test_difference_threshold_is_majority_plus_relays():
    d = compile_threshold(Threshold((1, -1), 0))
    assert lines(d.crn)[:2] == [("X1 -> A", "k_X1"), ("X2 -> B", "k_X2")]
    assert lines(d.crn)[2:] == lines(compile_majority().crn)


def test_threshold_sketch_yes_input():
    d = compile_threshold(SKETCH)
    assert SKETCH.value((3, 0, 0)) == 6 and d.evaluate((3, 0, 0))
    traj = run(d, (3, 0, 0), horizon=1e4)
    assert traj.final()["Y"] > 0.99


def test_all_zero_weights_rejected():
    with pytest.raises(CrnError):
        Threshold((0, 0), 1)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.fractions(-3, 3, max_denominator=4), min_size=1, max_size=3).filter(any),
       st.fractions(-2, 2, max_denominator=3),
       st.lists(st.fractions(0, 4, max_denominator=5), min_size=3, max_size=3))
def test_relay_limits_match_exact_sums(weights, h, x):
    spec = Threshold(tuple(weights), h)
    d = compile_threshold(spec)
    x = x[:spec.arity]
    relays = Crn.from_reactions(d.crn.reactions[:-5], species=d.crn.names)
    # q X -> p A decays like a power law when q >= 3, so the limit needs a long run
    traj = simulate(relays, {n: float(v) for n, v in d.initial_state(x).items()}, unit_rates(relays), 1e12)
    pos = sum((w * v for w, v in zip(spec.weights, x) if w > 0), Fraction(0)) + max(-spec.h, 0)
    neg = sum((-w * v for w, v in zip(spec.weights, x) if w < 0), Fraction(0)) + max(spec.h, 0)
    assert abs(traj.final()["A"] - float(pos)) < 1e-3
    assert abs(traj.final()["B"] - float(neg)) < 1e-3


# -- normalization and Boolean closure --------------------------------------------------

def test_normalize_adds_two_reactions_and_two_species():
    m = compile_majority()
    d = normalize_two_voters(m)
    assert len(d.crn.reactions) == len(m.crn.reactions) + 2
    assert len(d.crn.names) == len(m.crn.names) + 2
    assert lines(d.crn)[-2:] == [("N' + Y -> Y + Y'", "kv_Y"), ("N + Y' -> N + N'", "kv_N")]
    assert d.yes == ("Y'",) and d.no == ("N'",) and d.context["Y'"] == 1
    assert in_row_span(conservation_vectors(build_stoichiometry_matrix(d.crn)),
                       [int(n in ("Y'", "N'")) for n in d.crn.names])


def test_normalized_threshold_true_side():
    d = normalize_two_voters(compile_threshold(Threshold((1, -1), 0)))
    traj = run(d, (5, 2))
    assert np.allclose(voter_sum(traj, d.yes + d.no), 1.0, atol=1e-7)
    assert traj.final()[d.yes[0]] > 0.99


def test_normalize_requires_voters():
    m = compile_majority()
    with pytest.raises(CrnError):
        normalize_two_voters(type(m)(m.crn, m.inputs, (), ("N",), m.context))


def test_not_swaps_voters():
    m = compile_majority()
    d = combine("not", m)
    assert d.yes == m.no and d.no == m.yes
    traj = run(d, (Fraction(2, 5), Fraction(3, 5)), horizon=100)
    assert traj.final()[d.yes[0]] > 0.99


def test_or_structure_and_truth():
    gt, lt = (normalize_two_voters(compile_threshold(Threshold(w, 0))) for w in ((1, -1), (-1, 1)))
    d = combine("or", gt, lt)
    assert d.yes == ("Vyy", "Vyn", "Vny") and d.no == ("Vnn",)
    assert d.context["Vyy"] == 1
    fan = [str(r) for r in d.crn.reactions if r.rate.startswith("fan_")]
    assert fan == ["X1 -> 1.X1 + 2.X1", "X2 -> 1.X2 + 2.X2"]
    assert sum(r.rate.startswith("rec") for r in d.crn.reactions) == 8
    assert in_row_span(conservation_vectors(build_stoichiometry_matrix(d.crn)),
                       [int(n.startswith("V")) for n in d.crn.names])
    traj = run(d, (5, 2), horizon=1e4)
    assert voter_sum(traj, d.yes)[-1] > 0.99


def test_and_has_single_yes_voter():
    gt = normalize_two_voters(compile_threshold(Threshold((1, -1), 0)))
    d = combine("and", gt, gt)
    assert d.yes == ("Vyy",) and set(d.no) == {"Vyn", "Vny", "Vnn"}


def test_combine_errors():
    gt = normalize_two_voters(compile_threshold(Threshold((1, -1), 0)))
    wide = normalize_two_voters(compile_threshold(Threshold((1, 1, 1), 0)))
    with pytest.raises(CrnError):
        combine("and", gt, wide)
    raw_or = combine("or", wide, wide)
    assert not raw_or.is_normalized
    with pytest.raises(CrnError):
        combine("or", raw_or, wide)
    with pytest.raises(CrnError):
        combine("xor", gt, gt)


# -- multi-threshold ---------------------------------------------------------------------

def test_single_leaf_equals_normalized_threshold():
    spec = Threshold((1, -2), 1)
    a = compile_multi_threshold(spec)
    b = normalize_two_voters(compile_threshold(spec))
    assert a.crn == b.crn and a.context == b.context and a.yes == b.yes and a.no == b.no


@pytest.mark.parametrize("x", [(5, 2), (2, 5)])
def test_contradiction_votes_no(x):
    gt = Threshold((1, -1), 0)
    d = compile_multi_threshold(And((gt, Not(gt))))
    assert d.is_normalized
    traj = run(d, x, horizon=1e4)
    assert traj.final()[d.no[0]] > 0.99


def test_region_predicate_yes_at_five_two():
    d = compile_multi_threshold(Threshold((1, -1), 0))
    traj = run(d, (5, 2))
    assert traj.final()[d.yes[0]] > 0.99


def test_multi_threshold_rejects_detection():
    with pytest.raises(CrnError):
        compile_multi_threshold(Detect(0, 2))


def test_initial_contexts_avoid_inputs():
    for d in (compile_majority(), compile_threshold(SKETCH), compile_multi_threshold(Or((SKETCH, Not(SKETCH)))),
              compile_detection(And((Detect(0, 3), Detect(2, 3))))):
        assert not set(d.inputs) & set(d.context)


# -- detection ----------------------------------------------------------------------

def test_detection_leaf_structure():
    d = compile_detection(Detect(0, 2))
    assert d.semantics == "stable"
    assert [str(r) for r in d.crn.reactions] == ["X1 + X2 -> X1", "X1 + Z -> X1"]
    assert d.yes == ("X1",) and d.no == ("X2", "Z")


def test_detection_examples():
    d = compile_detection(Detect(0, 2))
    end, _ = run_to_static(d.crn, d.initial_state((1, 1)))
    assert end["X1"] == 1 and end["X2"] == 0 and output_of(end, d.yes, d.no) == "yes"
    end, script = run_to_static(d.crn, d.initial_state((0, 1)))
    assert script == [] and output_of(end, d.yes, d.no) == "no"
    n = compile_detection(Not(Detect(0, 2)))
    end, _ = run_to_static(n.crn, n.initial_state((1, 1)))
    assert output_of(end, n.yes, n.no) == "no"


def test_detection_rejects_threshold_leaves():
    with pytest.raises(CrnError):
        compile_detection(And((Detect(0, 2), Threshold((1, -1), 0))))


# -- spec files -----------------------------------------------------------------------

leaf = st.builds(lambda w, h: Threshold(tuple(w), h),
                 st.lists(st.fractions(-5, 5, max_denominator=7), min_size=2, max_size=2).filter(any),
                 st.fractions(-5, 5, max_denominator=7))
exprs = st.recursive(leaf, lambda sub: st.one_of(
    st.builds(Not, sub),
    st.builds(lambda a, b: And((a, b)), sub, sub),
    st.builds(lambda a, b: Or((a, b)), sub, sub)), max_leaves=4)


@given(exprs, st.lists(st.fractions(0, 5, max_denominator=3), min_size=2, max_size=2))
def test_predicate_json_round_trip(expr, x):
    again = parse_predicate(predicate_to_json(expr))
    assert again == expr
    assert again.evaluate(x) == expr.evaluate(x)


def test_decider_from_json():
    assert decider_from_json({"majority": True}).crn == compile_majority().crn
    doc = {"op": "and", "args": [{"threshold": {"weights": ["2", "-1/3", "5/4"], "h": "4"}},
                                 {"threshold": {"weights": ["1", "0", "0"], "h": "0.5"}}]}
    d = decider_from_json(doc)
    assert d.arity == 3 and d.predicate.evaluate((3, 0, 0)) and not d.predicate.evaluate((0.25, 0, 4))
    assert decider_from_json({"detect": 1, "arity": 2}).semantics == "stable"
    with pytest.raises(CrnError):
        decider_from_json({"op": "xor", "args": []})
