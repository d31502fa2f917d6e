from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustcrn.crn import (Crn, CrnError, Reaction, build_stoichiometry_matrix, conservation_vectors,
                           is_conserved, is_feedforward, rxn, unit_rates)
from robustcrn.exact import in_row_span
from robustcrn.functions import (DIFF_OR_MIN, CompiledComputer, FloorAffineSpec, MinOf, PiecewiseSpec,
                                 always_true, check_partition, compile_floor_affine, compile_piecewise,
                                 function_to_json, instrument_dual_rail, parse_function,
                                 static_steady_state_check)
from robustcrn.predicates import Not, Threshold
from robustcrn.simulate import simulate

DIFF = FloorAffineSpec((1, -1))
AFFINE = FloorAffineSpec(("2/3", "-1/4"), "1/2")


def run(c, x, k=None, horizon=1e3):
    k = k or unit_rates(c.crn)
    return simulate(c.crn, {n: float(v) for n, v in c.initial_state(x).items()}, k, horizon)


# -- floor-affine ------------------------------------------------------------------

def test_floor_affine_reactions():
    c = compile_floor_affine(AFFINE)
    assert [str(r) for r in c.crn.reactions] == ["3X1 -> 2Y", "4X2 -> Y^-", "Y + Y^- -> 0"]
    assert c.context == {"Y": Fraction(1, 2)}
    neg = compile_floor_affine(FloorAffineSpec((1,), -2))
    assert neg.context == {"Y^-": 2}


@pytest.mark.parametrize("spec, x, expected", [
    (DIFF, (5, 2), 3),
    (DIFF, (2, 5), 0),
    (FloorAffineSpec((-1,)), (4,), 0),
    (AFFINE, (3, 4), Fraction(3, 2)),
])
def test_floor_affine_limits(spec, x, expected):
    assert spec.evaluate(x) == expected
    c = compile_floor_affine(spec)
    # 4X2 -> Y^- is a quartic power-law decay; give it room
    traj = run(c, x, horizon=1e9)
    assert abs(traj.final()["Y"] - float(expected)) <= 1e-3


def test_floor_affine_is_feedforward():
    for spec in (DIFF, AFFINE, FloorAffineSpec((1, -2, "3/5"), "-1/7")):
        assert is_feedforward(compile_floor_affine(spec).crn) is not None


@settings(max_examples=20, deadline=None)
@given(st.lists(st.fractions(-3, 3, max_denominator=3), min_size=2, max_size=2),
       st.fractions(-2, 2, max_denominator=3),
       st.lists(st.fractions(0, 5, max_denominator=4), min_size=2, max_size=2),
       st.integers(0, 2**32 - 1))
def test_output_never_exceeds_ceiling(weights, h, x, seed):
    spec = FloorAffineSpec(tuple(weights), h)
    c = compile_floor_affine(spec)
    rng = np.random.default_rng(seed)
    k = {label: float(10 ** rng.uniform(-1, 1)) for label in c.crn.labels}
    traj = run(c, x, k)
    assert np.all(traj["Y"] <= float(spec.ceiling(x)) + 1e-7)


# -- dual rail ----------------------------------------------------------------------

def _wrap(reactions, context=None):
    crn = Crn.from_reactions(reactions, species=["X", "Y"])
    return CompiledComputer(crn, ("X",), "Y", context or {})


def test_dual_rail_examples():
    c, rail = instrument_dual_rail(_wrap([rxn("A + Y", "B + 3Y", "a"), rxn("B + 4Y", "Y", "b")]))
    assert [str(r) for r in c.crn.reactions] == ["A + Y -> B + 3Y + 2Y^P", "B + 4Y -> Y + 3Y^C"]
    assert (rail.yp, rail.yc) == ("Y^P", "Y^C")


def test_dual_rail_copies_initial_output_and_leaves_reactants_alone():
    base = compile_floor_affine(AFFINE)
    c, rail = instrument_dual_rail(base)
    assert c.context[rail.yp] == base.context["Y"]
    for r0, r1 in zip(base.crn.reactions, c.crn.reactions):
        assert r0.reactants == r1.reactants and r0.rate == r1.rate
    reactant_names = {n for r in c.crn.reactions for n, _ in r.reactants}
    assert not reactant_names & {rail.yp, rail.yc, rail.yp_hat, rail.yc_hat}


def test_dual_rail_conservation_relation():
    c, rail = instrument_dual_rail(compile_floor_affine(AFFINE))
    vec = [{rail.yp: 1, rail.yc: -1, "Y": -1}.get(n, 0) for n in c.crn.names]
    assert in_row_span(conservation_vectors(build_stoichiometry_matrix(c.crn)), vec)


def test_dual_rail_preserves_output_kinetics():
    base = compile_floor_affine(DIFF)
    c, rail = instrument_dual_rail(base)
    a, b = run(base, (5, 2)), run(c, (5, 2))
    assert np.allclose(a["Y"], b["Y"], atol=1e-9)
    assert np.allclose(b[rail.yp] - b[rail.yc], b["Y"], atol=1e-7)


# -- piecewise ------------------------------------------------------------------------

def test_piecewise_activation_reactions():
    c, lay = compile_piecewise(DIFF_OR_MIN)
    text = {r.rate: str(r) for r in c.crn.reactions}
    assert text["k1_1"] == "C1.Y^P + D1.Y' -> C1.Yhat^P + D1.Y' + Y^P"
    assert text["k1_2"] == "C1.Y^C + D1.Y' -> C1.Yhat^C + D1.Y' + Y^C"
    assert text["k1_3"] == "C1.Yhat^P + D1.N' -> C1.Y^P + D1.N' + Y^C"
    assert text["k1_4"] == "C1.Yhat^C + D1.N' -> C1.Y^C + D1.N' + Y^P"
    assert text["k_out"] == "Y^C + Y^P -> 0"
    assert text["fan_X1"] == "X1 -> C1.X1 + C2.X1 + D1.X1 + D2.X1"
    assert c.output == "Y^P"
    assert lay.voters[1] == ("D2.N'", "D2.Y'")  # the second guard is a negation


def test_piecewise_conservation_laws_are_structural():
    c, lay = compile_piecewise(DIFF_OR_MIN)
    basis = conservation_vectors(build_stoichiometry_matrix(c.crn))
    for law in [lay.law_total()] + [lay.law_piece(j) for j in range(2)]:
        assert is_conserved(c.crn, law)
        assert in_row_span(basis, [law.get(n, 0) for n in c.crn.names])


def test_diff_or_min_at_five_two():
    c, lay = compile_piecewise(DIFF_OR_MIN)
    assert DIFF_OR_MIN.evaluate((5, 2)) == 3
    traj = run(c, (5, 2), horizon=1e6)
    assert abs(traj.final()["Y^P"] - 3) < 1e-3
    assert traj.final()["Y^C"] < 1e-3
    for law in [lay.law_total()] + [lay.law_piece(j) for j in range(2)]:
        drift = sum(w * traj[n] for n, w in law.items()) - sum(w * traj[n][0] for n, w in law.items())
        assert np.max(np.abs(drift)) < 1e-6


def test_single_true_piece_matches_floor_affine():
    spec = PiecewiseSpec(((always_true(2), AFFINE),))
    c, _ = compile_piecewise(spec)
    pw = run(c, (3, 4), horizon=1e9).final()["Y^P"]
    fa = run(compile_floor_affine(AFFINE), (3, 4), horizon=1e9).final()["Y"]
    assert abs(pw - fa) < 1e-3 and abs(pw - 1.5) < 1e-3


def test_arity_mismatch_rejected():
    with pytest.raises(CrnError):
        PiecewiseSpec(((Threshold((1, -1), 0), FloorAffineSpec((1,))),))


def test_partition_sampling():
    assert check_partition(DIFF_OR_MIN) == []
    overlap = PiecewiseSpec(((always_true(2), DIFF), (Threshold((1, -1), 0), DIFF)))
    assert len(check_partition(overlap, samples=200)) > 0


def test_exact_evaluation_and_boundary():
    assert DIFF_OR_MIN.evaluate((2, 5)) == 2
    assert DIFF_OR_MIN.evaluate((3, 3)) == 3
    assert DIFF_OR_MIN.on_boundary((3, 3)) and not DIFF_OR_MIN.on_boundary((3, 4))
    assert MinOf((0, 1), 2).evaluate(("1/3", "1/2")) == Fraction(1, 3)


# -- static steady state ---------------------------------------------------------------

def test_static_steady_state_examples():
    c = compile_floor_affine(DIFF)
    assert static_steady_state_check(run(c, (5, 2)), c.crn, "Y")
    loop = Crn.from_reactions([rxn("S", "A", "f"), rxn("A", "S", "b")], species=["Z"])
    traj = simulate(loop, {"S": 0.5, "A": 0.5}, {"f": 1.0, "b": 1.0}, 100)
    assert not static_steady_state_check(traj, loop, "S")
    assert static_steady_state_check(traj, loop, "Z")


# -- spec files ------------------------------------------------------------------------

def test_function_json_round_trip():
    for spec in (AFFINE, MinOf((0, 1), 2), DIFF_OR_MIN):
        again = parse_function(function_to_json(spec))
        assert function_to_json(again) == function_to_json(spec)
        for x in [(5, 2), (2, 5), (3, 3)]:
            assert again.evaluate(x) == spec.evaluate(x)


def test_min_body_in_piecewise_json():
    doc = {"pieces": [
        {"guard": {"threshold": {"weights": ["1", "-1"], "h": "0"}}, "body": {"weights": ["1", "-1"]}},
        {"guard": {"op": "not", "args": [{"threshold": {"weights": ["1", "-1"], "h": "0"}}]},
         "body": {"min_of": [0, 1]}},
    ]}
    spec = parse_function(doc)
    assert isinstance(spec.pieces[1][0], Not) and spec.pieces[1][1] == MinOf((0, 1), 2)
    assert spec.evaluate((5, 2)) == 3 and spec.evaluate((1, 4)) == 1


def test_min_reaction():
    c, _ = compile_piecewise(DIFF_OR_MIN)
    assert any(str(r) == "C2.X1 + C2.X2 -> C2.Y + C2.Y^P" for r in c.crn.reactions)
    assert Reaction(["X1", "X2"], ["Y"], "k").net("Y") == 1
