"""Compile floor-affine and threshold-piecewise functions into computers (CRCs)."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .config import DEFAULTS
from .crn import Crn, CrnError, NetworkDocument, Reaction, build_stoichiometry_matrix
from .predicates import (CompiledDecider, Not, Threshold, as_fraction, compile_multi_threshold, inputs_for,
                         parse_predicate, predicate_to_json)
from .simulate import Trajectory


@dataclass(frozen=True)
class FloorAffineSpec:
    """f(x) = max(0, h + sum(w_i * x_i))"""

    weights: tuple[Fraction, ...]
    h: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(as_fraction(w) for w in self.weights))
        object.__setattr__(self, "h", as_fraction(self.h))
        if not self.weights:
            raise CrnError("floor-affine body needs at least one weight")

    @property
    def arity(self) -> int:
        return len(self.weights)

    def evaluate(self, x) -> Fraction:
        return max(Fraction(0), self.h + sum((w * as_fraction(v) for w, v in zip(self.weights, x)), Fraction(0)))

    def ceiling(self, x) -> Fraction:
        """Largest amount of Y the compiled network can ever hold."""
        return max(self.h, Fraction(0)) + sum((w * as_fraction(v) for w, v in zip(self.weights, x) if w > 0),
                                              Fraction(0))


@dataclass(frozen=True)
class MinOf:
    """min(x_i, x_j) over the given 0-based input indices."""

    indices: tuple[int, ...]
    arity: int

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(self.indices))
        if len(self.indices) < 2 or len(set(self.indices)) != len(self.indices):
            raise CrnError("min body needs at least two distinct inputs")
        if not all(0 <= i < self.arity for i in self.indices):
            raise CrnError(f"min body index out of range for arity {self.arity}")

    def evaluate(self, x) -> Fraction:
        return min(as_fraction(x[i]) for i in self.indices)

    def ceiling(self, x) -> Fraction:
        return self.evaluate(x)


@dataclass(frozen=True)
class PiecewiseSpec:
    pieces: tuple[tuple[object, object], ...]

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple((g, b) for g, b in self.pieces))
        if not self.pieces:
            raise CrnError("piecewise function needs at least one piece")
        arities = {g.arity for g, _ in self.pieces} | {b.arity for _, b in self.pieces}
        if len(arities) != 1:
            raise CrnError(f"guard/body arity mismatch: {sorted(arities)}")

    @property
    def arity(self) -> int:
        return self.pieces[0][1].arity

    def selected(self, x) -> int:
        """Index of the unique guard that holds at ``x``."""
        hits = [j for j, (g, _) in enumerate(self.pieces) if g.evaluate(x)]
        if len(hits) != 1:
            raise CrnError(f"guards do not select exactly one piece at {tuple(x)}: {hits}")
        return hits[0]

    def evaluate(self, x) -> Fraction:
        return self.pieces[self.selected(x)][1].evaluate(x)

    def on_boundary(self, x) -> bool:
        return any(g.on_boundary(x) for g, _ in self.pieces)


def always_true(arity: int) -> Threshold:
    """x_1 > -1, true on the whole nonnegative orthant."""
    return Threshold((1,) + (0,) * (arity - 1), -1)


def check_partition(spec: PiecewiseSpec, samples: int = 10_000, seed: int = 0, scale: float = 10.0) -> list:
    """Sample the orthant; return the points where not exactly one guard holds."""
    rng = np.random.default_rng(seed)
    bad = []
    for row in rng.uniform(0.0, scale, size=(samples, spec.arity)):
        x = [Fraction(float(v)) for v in row]
        if sum(bool(g.evaluate(x)) for g, _ in spec.pieces) != 1:
            bad.append(tuple(float(v) for v in row))
    return bad


@dataclass(frozen=True)
class CompiledComputer:
    crn: Crn
    inputs: tuple[str, ...]
    output: str
    context: Mapping[str, Fraction] = field(default_factory=dict)
    semantics: str = "robust"
    function: object = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "context", {n: Fraction(v) for n, v in self.context.items() if v})
        bad = [n for n in self.inputs if self.context.get(n)]
        if bad:
            raise CrnError(f"initial context must be zero on inputs {bad}")
        names = set(self.crn.names)
        missing = [n for n in (*self.inputs, self.output, *self.context) if n not in names]
        if missing:
            raise CrnError(f"computer refers to unknown species {missing}")
        roles = {n: "input" for n in self.inputs}
        roles[self.output] = "output"
        object.__setattr__(self, "crn", self.crn.with_roles(roles))

    @property
    def arity(self) -> int:
        return len(self.inputs)

    def initial_state(self, x: Sequence) -> dict:
        if len(x) != self.arity:
            raise CrnError(f"expected {self.arity} inputs, got {len(x)}")
        state = dict(self.context)
        for name, v in zip(self.inputs, x):
            state[name] = as_fraction(v)
        return state

    def evaluate(self, x) -> Fraction:
        if self.function is None:
            raise CrnError("computer carries no function to evaluate")
        return self.function.evaluate(x)

    def document(self) -> NetworkDocument:
        return NetworkDocument(self.crn, dict(self.context), self.semantics)


def compile_floor_affine(spec: FloorAffineSpec) -> CompiledComputer:
    """q_i X_i -> p_i Y (or |p_i| Y^-) for w_i = p_i/q_i, plus Y + Y^- -> 0."""
    xs = inputs_for(spec.arity)
    reactions = []
    for x, w in zip(xs, spec.weights):
        if w == 0:
            continue
        target = "Y" if w > 0 else "Y^-"
        reactions.append(Reaction([(x, w.denominator)], [(target, abs(w.numerator))], f"k_{x}"))
    reactions.append(Reaction(["Y", "Y^-"], [], "k_cancel"))
    crn = Crn.from_reactions(reactions, species=[*xs, "Y", "Y^-"])
    context = {"Y": spec.h} if spec.h > 0 else {"Y^-": -spec.h}
    return CompiledComputer(crn, xs, "Y", context, function=spec)


def compile_min(spec: MinOf) -> CompiledComputer:
    """X_i + X_j -> Y: the output is limited by the scarcer input."""
    xs = inputs_for(spec.arity)
    r = Reaction([xs[i] for i in spec.indices], ["Y"], "k_min")
    crn = Crn.from_reactions([r], species=[*xs, "Y"])
    return CompiledComputer(crn, xs, "Y", {}, function=spec)


def compile_body(body) -> CompiledComputer:
    if isinstance(body, FloorAffineSpec):
        return compile_floor_affine(body)
    if isinstance(body, MinOf):
        return compile_min(body)
    raise CrnError(f"unsupported function body {body!r}")


@dataclass(frozen=True)
class DualRail:
    """Species of one instrumented computer: Y, its production/consumption
    records and their activated copies."""

    y: str
    yp: str
    yc: str
    yp_hat: str
    yc_hat: str


def instrument_dual_rail(c: CompiledComputer) -> tuple[CompiledComputer, DualRail]:
    """Record every net change of the output in Y^P (production) or Y^C (consumption)."""
    y = c.output
    rail = DualRail(y, f"{y}^P", f"{y}^C", f"{y}hat^P", f"{y}hat^C")
    clash = {rail.yp, rail.yc, rail.yp_hat, rail.yc_hat} & set(c.crn.names)
    if clash:
        raise CrnError(f"instrumentation names already in use: {sorted(clash)}")
    reactions = []
    for r in c.crn.reactions:
        d = r.net(y)
        if d > 0:
            r = Reaction(r.reactants, r.products + ((rail.yp, d),), r.rate)
        elif d < 0:
            r = Reaction(r.reactants, r.products + ((rail.yc, -d),), r.rate)
        reactions.append(r)
    crn = Crn.from_reactions(reactions, species=[*c.crn.names, rail.yp, rail.yc, rail.yp_hat, rail.yc_hat])
    context = dict(c.context)
    if c.context.get(y):
        context[rail.yp] = c.context[y]
    out = CompiledComputer(crn, c.inputs, y, context, c.semantics, c.function)
    return out, rail


@dataclass(frozen=True)
class PiecewiseLayout:
    """Where each piece lives inside the assembled network."""

    deciders: tuple[CompiledDecider, ...]
    rails: tuple[DualRail, ...]
    voters: tuple[tuple[str, str], ...]  # (T_j, F_j)
    yp: str = "Y^P"
    yc: str = "Y^C"

    def law_total(self) -> dict[str, int]:
        """Weights w with w . state constant: sum(Yhat_j^P - Yhat_j^C) - Y^P + Y^C."""
        w = {self.yp: -1, self.yc: 1}
        for r in self.rails:
            w[r.yp_hat] = 1
            w[r.yc_hat] = -1
        return w

    def law_piece(self, j: int) -> dict[str, int]:
        """Y_j^P - Y_j^C + Yhat_j^P - Yhat_j^C - Y_j."""
        r = self.rails[j]
        return {r.yp: 1, r.yc: -1, r.yp_hat: 1, r.yc_hat: -1, r.y: -1}


def compile_piecewise(spec: PiecewiseSpec) -> tuple[CompiledComputer, PiecewiseLayout]:
    """Piece j runs decider D_j on one input copy and computer C_j on another.

    D_j's voters T_j/F_j move C_j's instrumented records into or out of the
    global output pair Y^P/Y^C, which cancel each other pairwise.
    """
    xs = inputs_for(spec.arity)
    reactions, species, context = [], list(xs), {}
    copies = {x: [] for x in xs}
    deciders, rails, voters = [], [], []
    for j, (guard, body) in enumerate(spec.pieces, start=1):
        d = compile_multi_threshold(guard)
        c, _ = instrument_dual_rail(compile_body(body))
        for tag, sub, sub_inputs in (("D", d, d.inputs), ("C", c, c.inputs)):
            prefix = f"{tag}{j}"
            smap = {s: f"{prefix}.{s}" for s in sub.crn.names}
            reactions += [r.renamed(smap, lambda label, p=prefix: f"{p}.{label}") for r in sub.crn.reactions]
            species += [smap[s] for s in sub.crn.names]
            context.update({smap[k]: v for k, v in sub.context.items()})
            for x, xi in zip(xs, sub_inputs):
                copies[x].append(smap[xi])
        y = f"C{j}.{c.output}"
        rail = DualRail(y, f"{y}^P", f"{y}^C", f"{y}hat^P", f"{y}hat^C")
        t, f = f"D{j}.{d.yes[0]}", f"D{j}.{d.no[0]}"
        deciders.append(d)
        rails.append(rail)
        voters.append((t, f))
        reactions += [
            Reaction([t, rail.yp], [t, rail.yp_hat, "Y^P"], f"k{j}_1"),
            Reaction([t, rail.yc], [t, rail.yc_hat, "Y^C"], f"k{j}_2"),
            Reaction([f, rail.yp_hat], [f, rail.yp, "Y^C"], f"k{j}_3"),
            Reaction([f, rail.yc_hat], [f, rail.yc, "Y^P"], f"k{j}_4"),
        ]
    reactions.append(Reaction(["Y^P", "Y^C"], [], "k_out"))
    fan = [Reaction([x], copies[x], f"fan_{x}") for x in xs]
    crn = Crn.from_reactions(fan + reactions, species=species + ["Y^P", "Y^C"])
    comp = CompiledComputer(crn, xs, "Y^P", context, function=spec)
    return comp, PiecewiseLayout(tuple(deciders), tuple(rails), tuple(voters))


def static_steady_state_check(traj: Trajectory, crn: Crn, species: str, tol: float = DEFAULTS.tol_conv,
                              window: int = DEFAULTS.window) -> bool:
    """Every reaction that changes ``species`` has rate below ``tol`` over the final window."""
    M = build_stoichiometry_matrix(crn)
    row = M[crn.index()[species]]
    cols = np.flatnonzero(row)
    if cols.size == 0:
        return True
    tail = traj.rates[-window:, cols]
    return bool(np.all(tail < tol))


def parse_body(doc, arity: int | None = None):
    if "min_of" in doc:
        idx = tuple(int(i) for i in doc["min_of"])
        return MinOf(idx, int(doc.get("arity", arity if arity is not None else max(idx) + 1)))
    return FloorAffineSpec(tuple(doc["weights"]), doc.get("h", "0"))


def parse_function(doc) -> object:
    """``{"pieces": [{"guard": ..., "body": ...}, ...]}`` or a bare body."""
    if "pieces" not in doc:
        return parse_body(doc)
    pieces = []
    for p in doc["pieces"]:
        guard = parse_predicate(p["guard"])
        pieces.append((guard, parse_body(p["body"], guard.arity)))
    return PiecewiseSpec(tuple(pieces))


def function_to_json(spec) -> dict:
    if isinstance(spec, FloorAffineSpec):
        return {"weights": [str(w) for w in spec.weights], "h": str(spec.h)}
    if isinstance(spec, MinOf):
        return {"min_of": list(spec.indices), "arity": spec.arity}
    return {"pieces": [{"guard": predicate_to_json(g), "body": function_to_json(b)} for g, b in spec.pieces]}


def compile_function(spec) -> CompiledComputer:
    if isinstance(spec, PiecewiseSpec):
        return compile_piecewise(spec)[0]
    return compile_body(spec)


# x1 - x2 where x1 > x2, min(x1, x2) elsewhere
DIFF_OR_MIN = PiecewiseSpec((
    (Threshold((1, -1), 0), FloorAffineSpec((1, -1), 0)),
    (Not(Threshold((1, -1), 0)), MinOf((0, 1), 2)),
))
