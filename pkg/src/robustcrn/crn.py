"""Species, reactions and networks, plus the structural analyses on them.

Networks are immutable.  Rate constants are *labels* on reactions; numeric
values are bound separately (see :func:`check_assignment`) so one network can
be swept over many adversarial assignments.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exact import left_null_space

ROLES = ("input", "output", "voter-yes", "voter-no", "auxiliary")


class CrnError(ValueError):
    """Malformed network, state or rate assignment."""


def _multiset(terms) -> tuple[tuple[str, int], ...]:
    """Normalize ``{name: n}`` / ``[(name, n)]`` / ``"A"`` items to a sorted tuple."""
    if isinstance(terms, Mapping):
        items = terms.items()
    else:
        items = [(t, 1) if isinstance(t, str) else tuple(t) for t in terms]
    acc: dict[str, int] = {}
    for name, n in items:
        if int(n) != n or n < 1:
            raise CrnError(f"stoichiometry of {name!r} must be a positive integer, got {n}")
        acc[name] = acc.get(name, 0) + int(n)
    return tuple(sorted(acc.items()))


@dataclass(frozen=True)
class Species:
    name: str
    role: str = "auxiliary"

    def __post_init__(self):
        if self.role not in ROLES:
            raise CrnError(f"unknown species role {self.role!r}")


@dataclass(frozen=True)
class Reaction:
    """``reactants -> products`` with rate-constant label ``rate``.

    ``reactants``/``products`` accept a mapping or a sequence of names (repeat
    a name for stoichiometry > 1) and are stored as sorted (name, n) tuples.
    """

    reactants: tuple[tuple[str, int], ...]
    products: tuple[tuple[str, int], ...]
    rate: str

    def __post_init__(self):
        object.__setattr__(self, "reactants", _multiset(self.reactants))
        object.__setattr__(self, "products", _multiset(self.products))
        if self.reactants == self.products:
            raise CrnError(f"reaction {self} has identical reactants and products")

    @property
    def species(self) -> list[str]:
        seen = dict.fromkeys(n for n, _ in self.reactants)
        seen.update(dict.fromkeys(n for n, _ in self.products))
        return list(seen)

    def net(self, name: str) -> int:
        return dict(self.products).get(name, 0) - dict(self.reactants).get(name, 0)

    def net_change(self) -> dict[str, int]:
        out = {n: 0 for n in self.species}
        for n, s in self.reactants:
            out[n] -= s
        for n, s in self.products:
            out[n] += s
        return {n: v for n, v in out.items() if v}

    def renamed(self, species_map, label_map=None) -> "Reaction":
        rename = species_map if callable(species_map) else species_map.get
        if label_map is None:
            relabel = lambda s: s  # noqa: E731
        else:
            relabel = label_map if callable(label_map) else label_map.get
        return Reaction(
            tuple((rename(n), s) for n, s in self.reactants),
            tuple((rename(n), s) for n, s in self.products),
            relabel(self.rate),
        )

    def __str__(self):
        def side(terms):
            if not terms:
                return "0"
            return " + ".join(n if s == 1 else f"{s}{n}" for n, s in terms)

        return f"{side(self.reactants)} -> {side(self.products)}"


def rxn(reactants: str, products: str, rate: str) -> Reaction:
    """Parse ``"A + 2B"``-style sides; ``"0"`` or ``""`` is the empty multiset."""

    def parse(side: str):
        terms = []
        for tok in side.split("+"):
            tok = tok.strip()
            if not tok or tok == "0":
                continue
            digits = len(tok) - len(tok.lstrip("0123456789"))
            n = int(tok[:digits]) if digits else 1
            terms.append((tok[digits:].strip(), n))
        return terms

    return Reaction(parse(reactants), parse(products), rate)


@dataclass(frozen=True)
class Crn:
    species: tuple[Species, ...]
    reactions: tuple[Reaction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise CrnError("species names must be unique")
        known = set(names)
        for r in self.reactions:
            missing = [n for n in r.species if n not in known]
            if missing:
                raise CrnError(f"reaction {r} mentions undeclared species {missing}")

    @classmethod
    def from_reactions(cls, reactions: Iterable[Reaction], species: Sequence = (), roles=None):
        """Declare species in order: ``species`` first, then by first appearance."""
        reactions = tuple(reactions)
        roles = dict(roles or {})
        order = dict.fromkeys(s.name if isinstance(s, Species) else s for s in species)
        for r in reactions:
            order.update(dict.fromkeys(n for n in r.species if n not in order))
        return cls(tuple(Species(n, roles.get(n, "auxiliary")) for n in order), reactions)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.species]

    @property
    def labels(self) -> list[str]:
        return list(dict.fromkeys(r.rate for r in self.reactions))

    def index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.names)}

    def role(self, name: str) -> str:
        for s in self.species:
            if s.name == name:
                return s.role
        raise KeyError(name)

    def with_roles(self, roles: Mapping[str, str]) -> "Crn":
        """Copy with the given roles set and every other species auxiliary."""
        return replace(self, species=tuple(Species(s.name, roles.get(s.name, "auxiliary")) for s in self.species))

    def reaction(self, ref) -> int:
        """Resolve a reaction reference (index, rate label, or ``str(reaction)``)."""
        if isinstance(ref, int):
            if not 0 <= ref < len(self.reactions):
                raise CrnError(f"reaction index {ref} out of range")
            return ref
        for i, r in enumerate(self.reactions):
            if ref == r.rate or ref == str(r):
                return i
        raise CrnError(f"no reaction matches {ref!r}")


# -- states ------------------------------------------------------------------

def state_vector(crn: Crn, state: Mapping[str, float], dtype=float) -> np.ndarray:
    idx = crn.index()
    v = np.zeros(len(idx), dtype=dtype) if dtype is float else np.array([Fraction(0)] * len(idx), dtype=object)
    for name, value in state.items():
        if name not in idx:
            raise CrnError(f"unknown species {name!r} in state")
        if value < 0:
            raise CrnError(f"negative concentration for {name!r}")
        v[idx[name]] = value
    return v


def support(state: Mapping[str, float]) -> set[str]:
    return {n for n, v in state.items() if v > 0}


def is_applicable(reaction: Reaction, state: Mapping[str, float]) -> bool:
    return all(state.get(n, 0) > 0 for n, _ in reaction.reactants)


def is_static(crn: Crn, state: Mapping[str, float]) -> bool:
    return not any(is_applicable(r, state) for r in crn.reactions)


# -- stoichiometry and rates -------------------------------------------------

def build_stoichiometry_matrix(crn: Crn) -> np.ndarray:
    """Integer |species| x |reactions| matrix with M[S, a] = p(S) - r(S)."""
    idx = crn.index()
    M = np.zeros((len(idx), len(crn.reactions)), dtype=np.int64)
    for j, r in enumerate(crn.reactions):
        for n, s in r.reactants:
            M[idx[n], j] -= s
        for n, s in r.products:
            M[idx[n], j] += s
    return M


def reactant_matrix(crn: Crn) -> np.ndarray:
    """|reactions| x |species| matrix of reactant stoichiometries."""
    idx = crn.index()
    R = np.zeros((len(crn.reactions), len(idx)), dtype=np.int64)
    for j, r in enumerate(crn.reactions):
        for n, s in r.reactants:
            R[j, idx[n]] = s
    return R


def check_assignment(crn: Crn, kassign: Mapping[str, float]) -> np.ndarray:
    """Per-reaction rate constants; every label must be bound to a positive real."""
    ks = []
    for r in crn.reactions:
        if r.rate not in kassign:
            raise CrnError(f"rate constant {r.rate!r} is unbound")
        k = float(kassign[r.rate])
        if not k > 0 or not np.isfinite(k):
            raise CrnError(f"rate constant {r.rate!r} must be strictly positive, got {k}")
        ks.append(k)
    return np.array(ks, dtype=float)


def unit_rates(crn: Crn, **overrides: float) -> dict[str, float]:
    ks = {label: 1.0 for label in crn.labels}
    ks.update(overrides)
    return ks


def reaction_rates(crn: Crn, state: Mapping[str, float], kassign: Mapping[str, float]) -> np.ndarray:
    ks = check_assignment(crn, kassign)
    rates = np.empty(len(crn.reactions))
    for j, r in enumerate(crn.reactions):
        rate = ks[j]
        for n, s in r.reactants:
            rate *= float(state.get(n, 0.0)) ** s
        rates[j] = rate
    return rates


# -- structural analyses -----------------------------------------------------

def _feedforward_ok(crn: Crn, order: Sequence[str]) -> bool:
    pos = {n: i for i, n in enumerate(order)}
    for r in crn.reactions:
        net = r.net_change()
        consumed = [pos[n] for n, v in net.items() if v < 0]
        first = min(consumed, default=len(order))
        if any(v > 0 and pos[n] <= first for n, v in net.items()):
            return False
    return True


def is_feedforward(crn: Crn, brute_force_limit: int = 8) -> list[str] | None:
    """Species ordering witnessing the feedforward property, or ``None``.

    A reaction net-producing S_j must net-consume some S_i with i < j.  The
    greedy pass repeatedly places a species none of whose still-unsatisfied
    producing reactions lacks an already placed consumed species; when it gets
    stuck on small networks all orderings are tried.
    """
    names = crn.names
    nets = [r.net_change() for r in crn.reactions]
    placed: list[str] = []
    remaining = list(names)
    while remaining:
        done = set(placed)
        pick = None
        for n in remaining:
            # every reaction producing n must already consume something placed
            if all(any(net.get(m, 0) < 0 for m in done) for net in nets if net.get(n, 0) > 0):
                pick = n
                break
        if pick is None:
            break
        placed.append(pick)
        remaining.remove(pick)
    if not remaining and _feedforward_ok(crn, placed):
        return placed
    if len(names) <= brute_force_limit:
        for order in itertools.permutations(names):
            if _feedforward_ok(crn, order):
                return list(order)
    return None


def conservation_vectors(M) -> list[list[Fraction]]:
    """Exact rational basis of {v : v^T M = 0}."""
    M = [[Fraction(int(x)) for x in row] for row in np.asarray(M).tolist()]
    if not M:
        return []
    return left_null_space(M)


def is_conserved(crn: Crn, weights: Mapping[str, Fraction]) -> bool:
    """True iff the weighted species sum is invariant under every reaction."""
    for r in crn.reactions:
        if sum(Fraction(weights.get(n, 0)) * v for n, v in r.net_change().items()) != 0:
            return False
    return True


# -- serialization ------------------------------------------------------------

def _num_to_json(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def _num_from_json(s) -> Fraction | float:
    """``"p/q"`` and integers load as Fraction, decimal reprs as float, so
    dumps(loads(text)) == text."""
    if isinstance(s, (int, float)):
        return s
    s = str(s).strip()
    try:
        if "/" in s or s.lstrip("-").isdigit():
            return Fraction(s)
        return float(s)
    except ValueError as exc:
        raise CrnError(f"bad concentration {s!r}") from exc


@dataclass(frozen=True)
class NetworkDocument:
    """A network plus its initial context, as stored on disk."""

    crn: Crn
    initial_context: dict = field(default_factory=dict)
    semantics: str | None = None

    def to_dict(self) -> dict:
        doc = {
            "species": [{"name": s.name, "role": s.role} for s in self.crn.species],
            "reactions": [
                {
                    "reactants": [{"name": n, "stoich": s} for n, s in r.reactants],
                    "products": [{"name": n, "stoich": s} for n, s in r.products],
                    "rate": r.rate,
                }
                for r in self.crn.reactions
            ],
            "initial_context": {n: _num_to_json(v) for n, v in self.initial_context.items()},
        }
        if self.semantics is not None:
            doc["semantics"] = self.semantics
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "NetworkDocument":
        try:
            species = tuple(Species(s["name"], s.get("role", "auxiliary")) for s in doc["species"])
            reactions = tuple(
                Reaction(
                    [(t["name"], t.get("stoich", 1)) for t in r.get("reactants", [])],
                    [(t["name"], t.get("stoich", 1)) for t in r.get("products", [])],
                    r["rate"],
                )
                for r in doc["reactions"]
            )
        except (KeyError, TypeError) as exc:
            raise CrnError(f"malformed network document: {exc}") from exc
        context = {n: _num_from_json(v) for n, v in doc.get("initial_context", {}).items()}
        crn = Crn(species, reactions)
        inputs = {s.name for s in species if s.role == "input"}
        bad = [n for n, v in context.items() if n in inputs and v]
        if bad:
            raise CrnError(f"initial context must be zero on input species {bad}")
        return cls(crn, context, doc.get("semantics"))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def loads(cls, text: str) -> "NetworkDocument":
        return cls.from_dict(json.loads(text))
