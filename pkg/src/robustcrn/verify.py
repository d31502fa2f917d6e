"""The robustness adversary: sweep rate constants, run deciders and computers,
and check the first-order linear ODE bounds numerically."""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .config import DEFAULTS
from .crn import Crn, rxn
from .functions import CompiledComputer
from .predicates import CompiledDecider, as_fraction
from .simulate import Trajectory, checkpoint_times, detect_convergence, simulate

# all ones, and the pattern with the first and last majority reactions sped up tenfold
FIGURE_PRESETS = ({}, {"k1": 10.0, "k5": 10.0})


def _matches(label: str, key: str) -> bool:
    return label == key or label.endswith("." + key)


@dataclass(frozen=True)
class AdversaryPolicy:
    """How rate-constant assignments are chosen.

    ``log-uniform``: ``count`` draws of every constant from 10**U(log lo, log hi).
    ``preset``: explicit override dicts on top of all-ones (default: the figure presets).
    ``targeted``: a single override dict on top of all-ones.
    Override keys match a label exactly or its last dotted component.
    """

    mode: str = "preset"
    lo: float = 0.1
    hi: float = 10.0
    count: int = 20
    seed: int = 0
    presets: tuple = FIGURE_PRESETS
    overrides: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("log-uniform", "preset", "targeted"):
            raise ValueError(f"unknown policy mode {self.mode!r}")
        if not 0 < self.lo <= self.hi:
            raise ValueError("need 0 < lo <= hi")

    @classmethod
    def log_uniform(cls, count: int = 20, lo: float = 0.1, hi: float = 10.0, seed: int = 0):
        return cls("log-uniform", lo, hi, count, seed)

    @classmethod
    def from_json(cls, doc: Mapping) -> "AdversaryPolicy":
        doc = dict(doc)
        if "presets" in doc:
            doc["presets"] = tuple(doc["presets"])
        return cls(**doc)

    def assignments(self, crn: Crn) -> list[dict[str, float]]:
        labels = crn.labels
        if self.mode == "log-uniform":
            rng = np.random.default_rng(self.seed)
            lo, hi = math.log10(self.lo), math.log10(self.hi)
            return [dict(zip(labels, (10 ** rng.uniform(lo, hi, size=len(labels))).tolist()))
                    for _ in range(self.count)]
        sets = [self.overrides] if self.mode == "targeted" else list(self.presets)
        out = []
        for ov in sets:
            k = {}
            for label in labels:
                hit = [v for key, v in ov.items() if _matches(label, key)]
                k[label] = float(hit[0]) if hit else 1.0
            if any(v <= 0 for v in k.values()):
                raise ValueError("rate constants must be strictly positive")
            out.append(k)
        return out


@dataclass
class TrialReport:
    input: list[str]
    assignment: dict[str, float]
    expected: str
    verdicts: dict
    passed: bool | None
    horizon: float
    boundary: bool = False
    reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _threads() -> int:
    cap = os.environ.get("CRN_ROBUST_THREADS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else n


def _run_grid(job: Callable, inputs: Sequence, ks: Sequence) -> list:
    pairs = [(i, a) for i in range(len(inputs)) for a in range(len(ks))]
    threads = _threads()
    if threads == 1 or len(pairs) == 1:
        return [job(inputs[i], ks[a]) for i, a in pairs]
    with ThreadPoolExecutor(threads) as ex:
        # map preserves submission order: (input index, assignment index)
        return list(ex.map(lambda p: job(inputs[p[0]], ks[p[1]]), pairs))


def _fmt(x) -> list[str]:
    return [str(as_fraction(v)) for v in x]


def _verdicts_dict(report) -> dict:
    return {k: asdict(v) for k, v in report.items()}


def decider_trial(d: CompiledDecider, x, k: Mapping[str, float], horizon: float = DEFAULTS.horizon,
                  tol: float = DEFAULTS.tol_conv, delta_floor: float = DEFAULTS.delta_floor,
                  boundary_horizon: float = DEFAULTS.boundary_horizon) -> TrialReport:
    """One (input, assignment) pair.

    Off the boundary: pass iff the wrong-side voter total converges to 0
    within ``tol`` and the right-side total stays >= ``delta_floor`` over the
    confirmation window.  On the boundary the horizon is extended and the
    verdict is a trend: the wrong side strictly decreases across decades.
    """
    expected = d.evaluate(x)
    boundary = bool(getattr(d.predicate, "on_boundary", lambda _x: False)(x))
    T = boundary_horizon if boundary else horizon
    decades = [10.0 ** e for e in range(2, int(round(math.log10(T))) + 1)] if boundary else []
    traj = simulate(d.crn, {n: float(v) for n, v in d.initial_state(x).items()}, k, T,
                    times=sorted(set(checkpoint_times(T)) | set(decades)))
    right = {v: 1 for v in (d.yes if expected else d.no)}
    wrong = {v: 1 for v in (d.no if expected else d.yes)}
    rep = TrialReport(_fmt(x), dict(k), "yes" if expected else "no", {}, False, T, boundary)
    if traj.blew_up:
        rep.reason = f"blow-up at t={traj.stats['t_blowup']:.6g}"
        return rep
    if traj.stats.get("failed"):
        rep.reason = f"integrator failure: {traj.stats.get('message', '')}"
        return rep
    conv = detect_convergence(traj, {"wrong": wrong, "right": right}, tol, targets={"wrong": 0.0})
    rep.verdicts = _verdicts_dict(conv)
    if boundary:
        vals = [traj.value_at(wrong, t) for t in decades]
        rep.verdicts["trend"] = {"times": decades, "wrong": vals}
        if len(vals) >= 4 and all(b < a for a, b in zip(vals, vals[1:])):
            rep.passed = True
        else:
            rep.reason = "wrong-side voters not strictly decreasing across decades"
        return rep
    floor_ok = bool(np.all(traj.observable(right)[-DEFAULTS.window:] >= delta_floor))
    if conv["wrong"].verdict != "converged":
        rep.reason = f"wrong-side voters {conv['wrong'].verdict} (max deviation {conv['wrong'].max_deviation:.3g})"
    elif not floor_ok:
        rep.reason = f"right-side voters below {delta_floor}"
    else:
        rep.passed = True
    return rep


def run_decider_trials(d: CompiledDecider, inputs: Sequence, policy: AdversaryPolicy,
                       horizon: float = DEFAULTS.horizon, **kw) -> list[TrialReport]:
    for x in inputs:
        if len(x) != d.arity:
            raise ValueError(f"input {x} does not match arity {d.arity}")
    return _run_grid(lambda x, k: decider_trial(d, x, k, horizon, **kw), list(inputs), policy.assignments(d.crn))


def computer_trial(c: CompiledComputer, x, k: Mapping[str, float], horizon: float = DEFAULTS.horizon,
                   tol: float = DEFAULTS.tol_conv) -> TrialReport:
    """Pass iff the output settles (converged verdict) within ``tol`` of f(x).

    Inputs on a guard boundary are run and reported but not judged.
    """
    fx = c.evaluate(x)
    boundary = bool(getattr(c.function, "on_boundary", lambda _x: False)(x))
    traj = simulate(c.crn, {n: float(v) for n, v in c.initial_state(x).items()}, k, horizon)
    rep = TrialReport(_fmt(x), dict(k), str(fx), {}, False, horizon, boundary)
    if traj.blew_up:
        rep.reason = f"blow-up at t={traj.stats['t_blowup']:.6g}"
        return rep
    if traj.stats.get("failed"):
        rep.reason = f"integrator failure: {traj.stats.get('message', '')}"
        return rep
    conv = detect_convergence(traj, {"output": c.output}, tol)
    rep.verdicts = _verdicts_dict(conv)
    err = abs(conv["output"].limit - float(fx))
    rep.verdicts["output"]["error"] = err
    if boundary:
        rep.passed = None
        rep.reason = "input on a guard boundary; not judged"
    elif conv["output"].verdict != "converged":
        rep.reason = f"output {conv['output'].verdict}"
    elif err > tol:
        rep.reason = f"limit {conv['output'].limit:.6g} is {err:.3g} from f(x) = {float(fx):.6g}"
    else:
        rep.passed = True
    return rep


def run_computer_trials(c: CompiledComputer, inputs: Sequence, policy: AdversaryPolicy,
                        horizon: float = DEFAULTS.horizon, **kw) -> list[TrialReport]:
    for x in inputs:
        if len(x) != c.arity:
            raise ValueError(f"input {x} does not match arity {c.arity}")
    return _run_grid(lambda x, k: computer_trial(c, x, k, horizon, **kw), list(inputs), policy.assignments(c.crn))


def all_passed(reports: Sequence[TrialReport]) -> bool:
    return all(r.passed is not False for r in reports)


def reports_to_json(reports: Sequence[TrialReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=1, sort_keys=True) + "\n"


def summary_table(reports: Sequence[TrialReport]) -> str:
    rows = [f"{'input':<24} {'expected':<10} {'result':<8} reason"]
    for r in reports:
        res = {True: "pass", False: "FAIL", None: "skip"}[r.passed]
        rows.append(f"{','.join(r.input):<24} {r.expected:<10} {res:<8} {r.reason}")
    n_pass = sum(r.passed is True for r in reports)
    n_fail = sum(r.passed is False for r in reports)
    rows.append(f"{n_pass} passed, {n_fail} failed, {len(reports) - n_pass - n_fail} skipped")
    return "\n".join(rows) + "\n"


# -- analytic bounds -------------------------------------------------------------

@dataclass(frozen=True)
class BoundCheck:
    holds: bool
    worst_margin: float  # min over checkpoints of bound - f (negative means violated)
    worst_time: float
    K: float


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y, dtype=float)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def linear_ode_bound(t, f, g, p, variant: str = "positive-p") -> tuple[np.ndarray, float]:
    """Upper bound on f for f' = g - p f, and its constant K."""
    t, f, g, p = (np.asarray(a, dtype=float) for a in (t, f, g, p))
    decay = np.exp(-_cumtrapz(p, t))
    if variant == "positive-p":
        if np.any(p <= 0):
            raise ValueError("positive-p variant needs p > 0 at every checkpoint")
        K = (g[0] + p[0] * f[0]) / p[0]
        return g / p + K * decay, float(K)
    if variant == "zero-p":
        K = (g[0] + f[0] * (p[0] + 1)) / (p[0] + 1)
        return 5 * g / (p + 1 / (t ** 2 + 1)) + K * decay, float(K)
    raise ValueError(f"unknown variant {variant!r}")


def check_linear_ode_bound(traj_or_t, f, g, p, variant: str = "positive-p",
                           slack: float = DEFAULTS.bound_slack) -> BoundCheck:
    """Pointwise check of the bound at every checkpoint.

    ``traj_or_t`` is a Trajectory (then f, g, p are observables) or a time
    array (then f, g, p are sampled arrays).
    """
    if isinstance(traj_or_t, Trajectory):
        t = traj_or_t.times
        f, g, p = (traj_or_t.observable(o) if isinstance(o, (str, Mapping)) else np.asarray(o) for o in (f, g, p))
    else:
        t = np.asarray(traj_or_t, dtype=float)
    bound, K = linear_ode_bound(t, f, g, p, variant)
    margin = bound - np.asarray(f, dtype=float)
    i = int(np.argmin(margin))
    return BoundCheck(bool(margin[i] >= -slack), float(margin[i]), float(t[i]), K)


def synthetic_linear_ode(g: Callable, p: Callable, f0: float, times) -> np.ndarray:
    """Solve f' = g(t) - p(t) f with a tight implicit integrator."""
    times = np.asarray(times, dtype=float)
    sol = solve_ivp(lambda t, f: g(t) - p(t) * f, (times[0], times[-1]), [f0], t_eval=times,
                    method="Radau", rtol=1e-11, atol=1e-14)
    return sol.y[0]


# -- closure chain ------------------------------------------------------------------

@dataclass(frozen=True)
class ChainLimits:
    epsilon: float
    simulated: tuple[float, float, float]  # (V_yy, V_m, V_nn)
    expected: tuple[float, float, float]
    max_error: float
    horizon: float
    within_epsilon: bool  # 1 - V_nn limit < epsilon


def chain_crn() -> Crn:
    return Crn.from_reactions([
        rxn("Vyy", "Vm", "f1"), rxn("Vm", "Vyy", "b1"),
        rxn("Vm", "Vnn", "f2"), rxn("Vnn", "Vm", "b2"),
    ], species=["Vyy", "Vm", "Vnn"])


def check_chain_limits(epsilon: float) -> ChainLimits:
    """Integrate V_yy <-> V_m <-> V_nn (forward 1, backward epsilon) from 1 V_yy."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    e = float(epsilon)
    # generator of the linear system; its slowest nonzero mode sets the horizon
    G = np.array([[-1, e, 0], [1, -(1 + e), e], [0, 1, -e]])
    slow = min(abs(lam) for lam in np.linalg.eigvals(G).real if abs(lam) > 1e-12)
    horizon = 40.0 / slow
    traj = simulate(chain_crn(), {"Vyy": 1.0}, {"f1": 1.0, "b1": e, "f2": 1.0, "b2": e}, horizon,
                    rtol=1e-10, atol=1e-13)
    z = e * e + e + 1
    expected = (e * e / z, e / z, 1 / z)
    got = tuple(float(traj.final()[n]) for n in ("Vyy", "Vm", "Vnn"))
    err = max(abs(a - b) for a, b in zip(got, expected))
    return ChainLimits(e, got, expected, err, horizon, 1 - got[2] < e)
