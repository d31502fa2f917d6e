"""Rate-independent semantics in exact arithmetic: straight-line segments,
scripted multi-segment executions and the stable output of a decider."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .crn import Crn, CrnError, build_stoichiometry_matrix, is_applicable
from .exact import feasible_nonneg
from .predicates import as_fraction


class ScriptError(CrnError):
    pass


def exact_state(crn: Crn, state: Mapping) -> dict[str, Fraction]:
    out = {n: Fraction(0) for n in crn.names}
    for name, v in state.items():
        if name not in out:
            raise CrnError(f"unknown species {name!r} in state")
        v = as_fraction(v)
        if v < 0:
            raise CrnError(f"negative concentration for {name!r}")
        out[name] = v
    return out


def _apply(crn: Crn, state: Mapping[str, Fraction], flux: Mapping[int, Fraction]) -> dict[str, Fraction]:
    out = dict(state)
    for j, u in flux.items():
        for name, d in crn.reactions[j].net_change().items():
            out[name] += d * u
    return out


def straight_line_reachable(crn: Crn, c: Mapping, d: Mapping) -> dict[int, Fraction] | None:
    """Flux u >= 0 over reactions applicable at ``c`` with c + M u = d, or None.

    The witness maps reaction index to flux; reactions with zero flux are left out.
    """
    c, d = exact_state(crn, c), exact_state(crn, d)
    app = [j for j, r in enumerate(crn.reactions) if is_applicable(r, c)]
    names = crn.names
    delta = [d[n] - c[n] for n in names]
    if not app:
        return {} if not any(delta) else None
    M = build_stoichiometry_matrix(crn)
    A = [[Fraction(int(M[i, j])) for j in app] for i in range(len(names))]
    u = feasible_nonneg(A, delta)
    if u is None:
        return None
    flux = {j: x for j, x in zip(app, u) if x}
    if _apply(crn, c, flux) != d:  # soundness, cheap in exact arithmetic
        raise AssertionError("simplex returned a flux that does not reach the target")
    return flux


@dataclass(frozen=True)
class RunUntilExhausted:
    """Run one reaction until ``species`` reaches zero."""

    reaction: object
    species: str


@dataclass(frozen=True)
class RunFlux:
    """Run a fixed flux vector (reaction reference -> amount) as one segment."""

    flux: Mapping[object, object]


@dataclass(frozen=True)
class Segment:
    start: dict
    end: dict
    flux: dict


def _segment(crn: Crn, state: dict, flux: dict[int, Fraction]) -> Segment:
    for j, u in flux.items():
        if u < 0:
            raise ScriptError(f"negative flux on reaction {crn.reactions[j]}")
        if u and not is_applicable(crn.reactions[j], state):
            raise ScriptError(f"reaction {crn.reactions[j]} is not applicable")
    end = _apply(crn, state, flux)
    neg = [n for n, v in end.items() if v < 0]
    if neg:
        raise ScriptError(f"segment drives {neg} negative")
    if straight_line_reachable(crn, state, end) is None:
        raise ScriptError("segment is not certified as straight-line reachable")
    return Segment(state, end, flux)


def execute_script(crn: Crn, start: Mapping, script: Sequence) -> tuple[dict[str, Fraction], list[Segment]]:
    """Run the instructions in order; every hop is certified by the exact LP."""
    state = exact_state(crn, start)
    hops = []
    for ins in script:
        if isinstance(ins, RunUntilExhausted):
            j = crn.reaction(ins.reaction)
            r = crn.reactions[j]
            net = r.net(ins.species)
            if net >= 0:
                raise ScriptError(f"{r} does not consume {ins.species}")
            flux = {j: state[ins.species] / -net}
        elif isinstance(ins, RunFlux):
            flux = {}
            for ref, u in ins.flux.items():
                j = crn.reaction(ref)
                flux[j] = flux.get(j, Fraction(0)) + as_fraction(u)
        else:
            raise ScriptError(f"unknown instruction {ins!r}")
        seg = _segment(crn, state, flux)
        hops.append(seg)
        state = seg.end
    return state, hops


def is_static(crn: Crn, state: Mapping) -> bool:
    return not any(is_applicable(r, state) for r in crn.reactions)


def run_to_static(crn: Crn, start: Mapping, max_hops: int = 10_000) -> tuple[dict[str, Fraction], list]:
    """Greedy witness: repeatedly exhaust the first applicable reaction that
    net-consumes one of its reactants, until nothing is applicable.

    Returns the end state and the script that reached it.  Raises
    ScriptError if a reaction that consumes nothing stays applicable.
    """
    state = exact_state(crn, start)
    script = []
    for _ in range(max_hops):
        app = [j for j, r in enumerate(crn.reactions) if is_applicable(r, state)]
        if not app:
            return state, script
        for j in app:
            r = crn.reactions[j]
            limits = [(state[n] / -r.net(n), n) for n, _ in r.reactants if r.net(n) < 0]
            if limits:
                _, species = min(limits)
                ins = RunUntilExhausted(j, species)
                state, _ = execute_script(crn, state, [ins])
                script.append(ins)
                break
        else:
            raise ScriptError("applicable reactions consume none of their reactants")
    raise ScriptError(f"no static state within {max_hops} hops")


def output_of(state: Mapping, yes: Sequence[str], no: Sequence[str]) -> str:
    """'yes' / 'no' when only that side's voters are present, else 'undefined'."""
    y = any(as_fraction(state.get(v, 0)) > 0 for v in yes)
    n = any(as_fraction(state.get(v, 0)) > 0 for v in no)
    if y and not n:
        return "yes"
    if n and not y:
        return "no"
    return "undefined"


def stability(crn: Crn, state: Mapping) -> str:
    """'stable' for static states; anything else is not certified here."""
    return "stable" if is_static(crn, state) else "unknown"


def parse_script(doc: Sequence) -> list:
    """``[{"run": ref, "until": "S"}, {"flux": {ref: "1/2"}}]``; ``ref`` is an index or a name."""
    out = []
    for item in doc:
        if "until" in item:
            out.append(RunUntilExhausted(item["run"], item["until"]))
        elif "flux" in item:
            out.append(RunFlux({(int(k) if str(k).isdigit() else k): v for k, v in item["flux"].items()}))
        else:
            raise CrnError(f"unrecognized script instruction {item!r}")
    return out
