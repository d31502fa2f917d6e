"""Compile threshold / Boolean / detection predicates into deciders (CRDs).

Robust deciders:
    compile_majority, compile_threshold, normalize_two_voters, combine,
    compile_multi_threshold
Stable deciders:
    compile_detection
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

from .crn import Crn, CrnError, NetworkDocument, Reaction, rxn


def as_fraction(x) -> Fraction:
    """Exact rational from int, Fraction, ``"p/q"`` or decimal string."""
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


# -- predicate expressions --------------------------------------------------------

@dataclass(frozen=True)
class Threshold:
    """sum(w_i * x_i) > h"""

    weights: tuple[Fraction, ...]
    h: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(as_fraction(w) for w in self.weights))
        object.__setattr__(self, "h", as_fraction(self.h))
        if not self.weights:
            raise CrnError("threshold needs at least one weight")
        if not any(self.weights):
            raise CrnError("threshold weights are all zero")

    @property
    def arity(self) -> int:
        return len(self.weights)

    def value(self, x) -> Fraction:
        return sum((w * as_fraction(xi) for w, xi in zip(self.weights, x)), Fraction(0))

    def evaluate(self, x) -> bool:
        return self.value(x) > self.h

    def on_boundary(self, x) -> bool:
        return self.value(x) == self.h


@dataclass(frozen=True)
class Detect:
    """x_i > 0 (0-based ``index``) over ``arity`` inputs."""

    index: int
    arity: int

    def __post_init__(self):
        if not 0 <= self.index < self.arity:
            raise CrnError(f"detection index {self.index} out of range for arity {self.arity}")

    def evaluate(self, x) -> bool:
        return as_fraction(x[self.index]) > 0

    def on_boundary(self, x) -> bool:
        return False


@dataclass(frozen=True)
class Not:
    arg: object

    @property
    def arity(self) -> int:
        return self.arg.arity

    def evaluate(self, x) -> bool:
        return not self.arg.evaluate(x)

    def on_boundary(self, x) -> bool:
        return self.arg.on_boundary(x)


@dataclass(frozen=True)
class And:
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) < 2:
            raise CrnError(f"{type(self).__name__} needs at least two arguments")
        if len({a.arity for a in self.args}) != 1:
            raise CrnError("arity mismatch between Boolean operands")

    @property
    def arity(self) -> int:
        return self.args[0].arity

    def evaluate(self, x) -> bool:
        return all(a.evaluate(x) for a in self.args)

    def on_boundary(self, x) -> bool:
        return any(a.on_boundary(x) for a in self.args)


class Or(And):
    def evaluate(self, x) -> bool:
        return any(a.evaluate(x) for a in self.args)


def leaves(expr):
    if isinstance(expr, (Threshold, Detect)):
        yield expr
    elif isinstance(expr, Not):
        yield from leaves(expr.arg)
    else:
        for a in expr.args:
            yield from leaves(a)


def parse_predicate(doc) -> object:
    """Build an expression from its JSON form.

    ``{"threshold": {"weights": ["2", "-1/3"], "h": "4"}}``,
    ``{"detect": 0, "arity": 2}``, ``{"op": "and"|"or", "args": [...]}``,
    ``{"op": "not", "args": [e]}``.
    """
    if not isinstance(doc, Mapping):
        raise CrnError(f"predicate must be an object, got {doc!r}")
    if "threshold" in doc:
        t = doc["threshold"]
        return Threshold(tuple(t["weights"]), t.get("h", "0"))
    if "detect" in doc:
        return Detect(int(doc["detect"]), int(doc["arity"]))
    op = doc.get("op")
    args = [parse_predicate(a) for a in doc.get("args", [])]
    if op == "not":
        if len(args) != 1:
            raise CrnError("'not' takes exactly one argument")
        return Not(args[0])
    if op == "and":
        return And(tuple(args))
    if op == "or":
        return Or(tuple(args))
    raise CrnError(f"unrecognized predicate node {doc!r}")


def predicate_to_json(expr) -> dict:
    if isinstance(expr, Threshold):
        return {"threshold": {"weights": [str(w) for w in expr.weights], "h": str(expr.h)}}
    if isinstance(expr, Detect):
        return {"detect": expr.index, "arity": expr.arity}
    if isinstance(expr, Not):
        return {"op": "not", "args": [predicate_to_json(expr.arg)]}
    return {"op": "or" if isinstance(expr, Or) else "and", "args": [predicate_to_json(a) for a in expr.args]}


# -- compiled deciders ------------------------------------------------------------

@dataclass(frozen=True)
class CompiledDecider:
    crn: Crn
    inputs: tuple[str, ...]
    yes: tuple[str, ...]
    no: tuple[str, ...]
    context: Mapping[str, Fraction] = field(default_factory=dict)
    semantics: str = "robust"
    predicate: object = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "yes", tuple(self.yes))
        object.__setattr__(self, "no", tuple(self.no))
        object.__setattr__(self, "context", {n: Fraction(v) for n, v in self.context.items() if v})
        if set(self.yes) & set(self.no):
            raise CrnError("yes and no voters must be disjoint")
        bad = [n for n in self.inputs if self.context.get(n)]
        if bad:
            raise CrnError(f"initial context must be zero on inputs {bad}")
        names = set(self.crn.names)
        missing = [n for n in (*self.inputs, *self.yes, *self.no, *self.context) if n not in names]
        if missing:
            raise CrnError(f"decider refers to unknown species {missing}")
        roles = {n: "input" for n in self.inputs}
        roles.update({n: "voter-yes" for n in self.yes})
        roles.update({n: "voter-no" for n in self.no})
        object.__setattr__(self, "crn", self.crn.with_roles(roles))

    @property
    def arity(self) -> int:
        return len(self.inputs)

    @property
    def is_normalized(self) -> bool:
        return len(self.yes) == 1 and len(self.no) == 1

    def initial_state(self, x: Sequence) -> dict:
        if len(x) != self.arity:
            raise CrnError(f"expected {self.arity} inputs, got {len(x)}")
        state = dict(self.context)
        for name, v in zip(self.inputs, x):
            state[name] = as_fraction(v)
        return state

    def evaluate(self, x) -> bool:
        if self.predicate is None:
            raise CrnError("decider carries no predicate to evaluate")
        return self.predicate.evaluate(x)

    def document(self) -> NetworkDocument:
        return NetworkDocument(self.crn, dict(self.context), self.semantics)


def _decider_from_document(doc: NetworkDocument) -> CompiledDecider:
    crn = doc.crn
    pick = lambda role: tuple(s.name for s in crn.species if s.role == role)  # noqa: E731
    return CompiledDecider(crn, pick("input"), pick("voter-yes"), pick("voter-no"), doc.initial_context,
                           doc.semantics or "robust")


def inputs_for(k: int) -> tuple[str, ...]:
    return tuple(f"X{i + 1}" for i in range(k))


MAJORITY_REACTIONS = (
    ("A + N", "A + Y", "k1"),
    ("B + Y", "B + N", "k2"),
    ("A + B", "0", "k3"),
    ("C + Y", "C + N", "k4"),
    ("3C", "0", "k5"),
)


def compile_majority() -> CompiledDecider:
    """Decide a > b from inputs A, B; yes voter Y, no voter N, context {1 Y, 1 C}."""
    crn = Crn.from_reactions([rxn(*r) for r in MAJORITY_REACTIONS], species=["A", "B", "C", "Y", "N"])
    return CompiledDecider(crn, ("A", "B"), ("Y",), ("N",), {"Y": 1, "C": 1},
                           predicate=Threshold((1, -1), 0))


def compile_threshold(spec: Threshold) -> CompiledDecider:
    """Relay weighted inputs into A (positive side) and B (negative side), then run majority.

    w_i = p_i/q_i in lowest terms gives ``q_i X_i -> p_i A`` (p_i > 0) or
    ``q_i X_i -> |p_i| B`` (p_i < 0).  A threshold h > 0 starts as h units of
    B, h < 0 as |h| units of A.
    """
    xs = inputs_for(spec.arity)
    relays = []
    for x, w in zip(xs, spec.weights):
        if w == 0:
            continue
        target = "A" if w > 0 else "B"
        relays.append(Reaction([(x, w.denominator)], [(target, abs(w.numerator))], f"k_{x}"))
    majority = [rxn(*r) for r in MAJORITY_REACTIONS]
    crn = Crn.from_reactions(relays + majority, species=[*xs, "A", "B", "C", "Y", "N"])
    context = {"Y": Fraction(1), "C": Fraction(1)}
    if spec.h > 0:
        context["B"] = spec.h
    elif spec.h < 0:
        context["A"] = -spec.h
    return CompiledDecider(crn, xs, ("Y",), ("N",), context, predicate=spec)


def _fresh(name: str, taken) -> str:
    while name in taken:
        name += "'"
    return name


def normalize_two_voters(d: CompiledDecider) -> CompiledDecider:
    """Add fresh voters Y, N driven catalytically by the old voters; Y + N stays 1."""
    if not d.yes or not d.no:
        raise CrnError("each voter side needs at least one species")
    taken = set(d.crn.names)
    y = _fresh("Y", taken)
    n = _fresh("N", taken | {y})
    extra = [Reaction([vy, n], [vy, y], f"kv_{vy}") for vy in d.yes]
    extra += [Reaction([vn, y], [vn, n], f"kv_{vn}") for vn in d.no]
    crn = Crn.from_reactions(d.crn.reactions + tuple(extra), species=[*d.crn.names, y, n])
    context = dict(d.context)
    context[y] = context.get(y, 0) + 1
    return CompiledDecider(crn, d.inputs, (y,), (n,), context, d.semantics, d.predicate)


def namespaced(d: CompiledDecider, prefix: str) -> tuple[Crn, dict, dict]:
    """Prefix every species and rate label of ``d``; returns (crn, context, species map)."""
    smap = {s: f"{prefix}.{s}" for s in d.crn.names}
    reactions = [r.renamed(smap, lambda label: f"{prefix}.{label}") for r in d.crn.reactions]
    crn = Crn.from_reactions(reactions, species=[smap[s] for s in d.crn.names])
    return crn, {smap[k]: v for k, v in d.context.items()}, smap


# recording reactions: (catalyst side, catalyst vote, from, to); "f" rates use labels rec1..rec8
_RECORDING = (
    (1, "Y", "Vnn", "Vyn"),
    (1, "Y", "Vny", "Vyy"),
    (1, "N", "Vyn", "Vnn"),
    (1, "N", "Vyy", "Vny"),
    (2, "Y", "Vnn", "Vny"),
    (2, "Y", "Vyn", "Vyy"),
    (2, "N", "Vny", "Vnn"),
    (2, "N", "Vyy", "Vyn"),
)


def combine(op: str, d1: CompiledDecider, d2: CompiledDecider | None = None) -> CompiledDecider:
    """NOT swaps voters; AND/OR run both deciders on fanned-out inputs and record their votes."""
    op = op.lower()
    if op == "not":
        pred = Not(d1.predicate) if d1.predicate is not None else None
        return CompiledDecider(d1.crn, d1.inputs, d1.no, d1.yes, d1.context, d1.semantics, pred)
    if op not in ("and", "or"):
        raise CrnError(f"unknown Boolean operator {op!r}")
    if d2 is None:
        raise CrnError(f"{op} needs two deciders")
    if d1.arity != d2.arity:
        raise CrnError("arity mismatch between deciders")
    if d1.semantics == "robust" and not (d1.is_normalized and d2.is_normalized):
        raise CrnError("robust AND/OR requires two-voter normalized deciders")

    c1, ctx1, m1 = namespaced(d1, "1")
    c2, ctx2, m2 = namespaced(d2, "2")
    inputs = inputs_for(d1.arity)
    fan = [Reaction([x], [m1[x1], m2[x2]], f"fan_{x}") for x, x1, x2 in zip(inputs, d1.inputs, d2.inputs)]
    voters = ("Vyy", "Vyn", "Vny", "Vnn")
    record = []
    for side, vote, src, dst in _RECORDING:
        d, m = (d1, m1) if side == 1 else (d2, m2)
        for v in (d.yes if vote == "Y" else d.no):
            label = f"rec{side}{vote}_{src}" if d.is_normalized else f"rec{side}{vote}_{src}_{m[v]}"
            record.append(Reaction([m[v], src], [m[v], dst], label))
    crn = Crn.from_reactions(fan + list(c1.reactions) + list(c2.reactions) + record,
                             species=[*inputs, *c1.names, *c2.names, *voters])
    context = {**ctx1, **ctx2, "Vyy": Fraction(1)}
    if op == "or":
        yes, no = ("Vyy", "Vyn", "Vny"), ("Vnn",)
    else:
        yes, no = ("Vyy",), ("Vyn", "Vny", "Vnn")
    pred = None
    if d1.predicate is not None and d2.predicate is not None:
        pred = (Or if op == "or" else And)((d1.predicate, d2.predicate))
    return CompiledDecider(crn, inputs, yes, no, context, d1.semantics, pred)


def compile_multi_threshold(expr) -> CompiledDecider:
    """Leaves via compile_threshold, nodes via combine; the result is two-voter normalized."""
    if isinstance(expr, Threshold):
        return normalize_two_voters(compile_threshold(expr))
    if isinstance(expr, Detect):
        raise CrnError("detection leaves need compile_detection")
    if isinstance(expr, Not):
        return combine("not", compile_multi_threshold(expr.arg))
    op = "or" if isinstance(expr, Or) else "and"
    acc = compile_multi_threshold(expr.args[0])
    for a in expr.args[1:]:
        acc = normalize_two_voters(combine(op, acc, compile_multi_threshold(a)))
    return replace(acc, predicate=expr)


def compile_detection(expr) -> CompiledDecider:
    """Stable decider for a Boolean combination of ``x_i > 0`` questions.

    Leaf i: inputs X_1..X_k, reactions X_i + X_j -> X_i (j != i), yes voter
    X_i, no voters the other inputs plus a context species Z (1 unit) that X_i
    also consumes, so that the all-zero input still has a voter present.
    """
    if isinstance(expr, Detect):
        xs = inputs_for(expr.arity)
        xi = xs[expr.index]
        others = [x for x in xs if x != xi] + ["Z"]
        reactions = [Reaction([xi, xj], [xi], f"k_{xi}_{xj}") for xj in others]
        crn = Crn.from_reactions(reactions, species=[*xs, "Z"])
        return CompiledDecider(crn, xs, (xi,), tuple(others), {"Z": 1}, "stable", expr)
    if isinstance(expr, Threshold):
        raise CrnError("threshold leaves cannot be stably decided; use compile_multi_threshold")
    if isinstance(expr, Not):
        return combine("not", compile_detection(expr.arg))
    op = "or" if isinstance(expr, Or) else "and"
    acc = compile_detection(expr.args[0])
    for a in expr.args[1:]:
        acc = combine(op, acc, compile_detection(a))
    return replace(acc, predicate=expr)


def decider_from_json(doc) -> CompiledDecider:
    """Compile a predicate document; ``{"majority": true}`` selects the bare majority CRD."""
    if isinstance(doc, Mapping) and doc.get("majority"):
        return compile_majority()
    expr = parse_predicate(doc)
    kinds = {type(leaf) for leaf in leaves(expr)}
    if kinds == {Detect}:
        return compile_detection(expr)
    if Detect in kinds:
        raise CrnError("mixed detection and threshold leaves")
    return compile_multi_threshold(expr)
