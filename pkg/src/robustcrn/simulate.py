"""Mass-action ODEs, long-horizon integration and convergence detection.

The integrator is a Dormand-Prince 5(4) embedded pair with the usual
PI-free step control.  Rates are evaluated on max(0, state) and the state is
projected onto the nonnegative orthant after every accepted step.  When the
step size underflows without the state growing, integration is handed to
scipy's implicit Radau method for the rest of the horizon.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .config import DEFAULTS
from .crn import Crn, build_stoichiometry_matrix, check_assignment, reactant_matrix, state_vector


class BlowUpError(RuntimeError):
    """The trajectory diverges in finite time."""

    def __init__(self, t_last: float, trajectory: "Trajectory | None" = None):
        super().__init__(f"trajectory blows up: last valid time t={t_last:.6g}")
        self.t_last = t_last
        self.trajectory = trajectory


class StepSizeUnderflow(RuntimeError):
    pass


# -- ODE system -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OdeSystem:
    """d(state)/dt = M . rates(state) for a network under fixed constants."""

    crn: Crn
    ks: np.ndarray
    M: np.ndarray
    R: np.ndarray

    @property
    def species(self) -> list[str]:
        return self.crn.names

    def __post_init__(self):
        # flattened (species, power) entries per reaction; each reaction also
        # gets a dummy factor 1.0 (index n) so empty reactant sides reduce too
        n = self.R.shape[1]
        idx, pw, starts, terms = [], [], [], []
        for row in self.R:
            nz = np.nonzero(row)[0]
            starts.append(len(idx))
            idx.extend([*nz.tolist(), n])
            pw.extend([*row[nz].astype(float).tolist(), 1.0])
            terms.append((nz, row[nz].astype(float)))
        object.__setattr__(self, "_idx", np.array(idx, dtype=np.intp))
        object.__setattr__(self, "_pw", np.array(pw))
        object.__setattr__(self, "_starts", np.array(starts, dtype=np.intp))
        object.__setattr__(self, "_terms", terms)
        object.__setattr__(self, "_Mf", self.M.astype(float))

    def rates(self, y: np.ndarray, clamp: bool = True) -> np.ndarray:
        if not len(self.ks):
            return np.zeros(0)
        ext = np.append(np.maximum(y, 0.0) if clamp else y, 1.0)
        return self.ks * np.multiply.reduceat(ext[self._idx] ** self._pw, self._starts)

    def __call__(self, y: np.ndarray, clamp: bool = True) -> np.ndarray:
        return self._Mf @ self.rates(y, clamp)

    def jacobian(self, y: np.ndarray, clamp: bool = True) -> np.ndarray:
        if clamp:
            y = np.maximum(y, 0.0)
        n = len(y)
        J = np.zeros((len(self.ks), n))
        for j, (idx, pw) in enumerate(self._terms):
            for a, (i, p) in enumerate(zip(idx, pw)):
                d = self.ks[j] * p * y[i] ** (p - 1) if p != 1.0 else self.ks[j]
                for b, (i2, p2) in enumerate(zip(idx, pw)):
                    if b != a:
                        d *= y[i2] ** p2
                J[j, i] = d
        return self._Mf @ J

    def polynomials(self) -> dict[str, list[tuple[int, str, tuple[tuple[str, int], ...]]]]:
        """Per species: (net stoichiometry, rate label, reactant monomial) terms."""
        out = {n: [] for n in self.species}
        for j, r in enumerate(self.crn.reactions):
            for name, v in r.net_change().items():
                out[name].append((v, r.rate, r.reactants))
        return out


def derive_odes(crn: Crn, kassign: Mapping[str, float]) -> OdeSystem:
    return OdeSystem(crn, check_assignment(crn, kassign), build_stoichiometry_matrix(crn), reactant_matrix(crn))


def format_odes(crn: Crn, kassign: Mapping[str, float] | None = None) -> str:
    """Human-readable ODE listing, e.g. ``C'(t) = 3*k1*A(t)*B(t)^2 - k2*C(t)^2``."""
    lines = []
    if kassign is not None:
        check_assignment(crn, kassign)
        for label in crn.labels:
            lines.append(f"{label} = {float(kassign[label])!r}")
        lines.append("")
    for name in crn.names:
        terms = []
        for r in crn.reactions:
            v = r.net(name)
            if not v:
                continue
            monomial = "".join(f"*{n}(t)" + (f"^{s}" if s > 1 else "") for n, s in r.reactants)
            coef = "" if abs(v) == 1 else f"{abs(v)}*"
            body = f"{coef}{r.rate}{monomial}"
            if not terms:
                terms.append(("-" if v < 0 else "") + body)
            else:
                terms.append(("- " if v < 0 else "+ ") + body)
        lines.append(f"{name}'(t) = " + (" ".join(terms) if terms else "0"))
    return "\n".join(lines) + "\n"


# -- checkpoints ----------------------------------------------------------------

def checkpoint_times(horizon: float, t0: float = DEFAULTS.t0, per_decade: int = DEFAULTS.per_decade,
                     extra: Sequence[float] = ()) -> np.ndarray:
    """0, then t0 * 10**(i/per_decade) below ``horizon``, then ``horizon``."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    base = math.log10(t0)
    ts = {0.0, float(horizon)}
    i = 0
    while True:
        t = 10 ** (base + i / per_decade)
        if t >= horizon * (1 - 1e-12):
            break
        ts.add(t)
        i += 1
    ts.update(float(t) for t in extra if 0 < t <= horizon)
    return np.array(sorted(ts))


# -- trajectory -----------------------------------------------------------------

@dataclass
class Trajectory:
    species: list[str]
    labels: list[str]
    times: np.ndarray
    states: np.ndarray  # (checkpoints, species)
    rates: np.ndarray  # (checkpoints, reactions)
    stats: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.states[:, self.species.index(name)]

    def at(self, t: float) -> dict[str, float]:
        i = int(np.argmin(np.abs(self.times - t)))
        return dict(zip(self.species, self.states[i].tolist()))

    def value_at(self, obs, t: float) -> float:
        i = int(np.argmin(np.abs(self.times - t)))
        return float(self.observable(obs)[i])

    def final(self) -> dict[str, float]:
        return dict(zip(self.species, self.states[-1].tolist()))

    def observable(self, obs) -> np.ndarray:
        """``obs`` is a species name or a mapping species -> coefficient."""
        if isinstance(obs, str):
            return self[obs]
        out = np.zeros(len(self.times))
        for name, c in obs.items():
            out = out + float(c) * self[name]
        return out

    @property
    def blew_up(self) -> bool:
        return bool(self.stats.get("blowup", False))

    def to_csv(self) -> str:
        lines = [",".join(["time"] + self.species)]
        for t, row in zip(self.times, self.states):
            lines.append(",".join([repr(float(t))] + [repr(float(x)) for x in row]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "times": [float(t) for t in self.times],
            "reactions": self.labels,
            "rates": [[float(x) for x in row] for row in self.rates],
            "stats": self.stats,
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


# -- Dormand-Prince 5(4) --------------------------------------------------------

_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_E = _B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _initial_step(f, y, f0, rtol, atol):
    scale = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y + h0 * f0
    d2 = np.sqrt(np.mean(((f(y1) - f0) / scale) ** 2)) / h0
    h1 = max(1e-6, h0 * 1e-3) if max(d1, d2) <= 1e-15 else (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)


def integrate(odes: OdeSystem, init: Mapping[str, float] | np.ndarray, horizon: float = DEFAULTS.horizon,
              times: Sequence[float] | None = None, rtol: float = DEFAULTS.rtol, atol: float = DEFAULTS.atol,
              blowup_factor: float = 1e10, max_steps: int = 5_000_000,
              raise_on_blowup: bool = False) -> Trajectory:
    """Integrate from ``init`` and sample at ``times`` (default geometric schedule).

    A trajectory that diverges is truncated at the last valid checkpoint and
    flagged with ``stats["blowup"]`` and ``stats["t_blowup"]``.
    """
    y = np.array(state_vector(odes.crn, init) if isinstance(init, Mapping) else init, dtype=float)
    if np.any(y < 0):
        raise ValueError("initial state must be nonnegative")
    ts = checkpoint_times(horizon) if times is None else np.array(sorted(set([0.0, *map(float, times)])))
    f = odes
    scale0 = max(1.0, float(np.max(np.abs(y))) if len(y) else 1.0)
    limit = blowup_factor * scale0

    out_y = [y.copy()]
    out_t = [0.0]
    stats = {"steps": 0, "rejected": 0, "rhs_evals": 0, "min_before_projection": 0.0,
             "method": "dopri5", "blowup": False, "rtol": rtol, "atol": atol}
    t = 0.0
    k1 = f(y)
    stats["rhs_evals"] += 1
    h = _initial_step(f, y, k1, rtol, atol) if len(y) else horizon
    stats["rhs_evals"] += 1
    K = np.empty((7, len(y)))
    ci = 1
    fallback = False
    stiff_hits = calm = 0
    while ci < len(ts):
        target = ts[ci]
        if stats["steps"] + stats["rejected"] > max_steps:
            raise StepSizeUnderflow(f"step budget exhausted at t={t:.6g}")
        if h < 1e-14 * max(1.0, abs(t)):
            if np.max(np.abs(y)) > 1e3 * scale0:
                stats.update(blowup=True, t_blowup=float(t))
                break
            fallback = True
            break
        step = min(h, target - t)
        K[0] = k1
        for s in range(1, 7):
            arg = y + step * (np.dot(_A[s], K[:s]))
            if s == 5:
                y6 = arg
            K[s] = f(arg)
        stats["rhs_evals"] += 6
        y_new = y + step * np.dot(_B, K)
        err_vec = step * np.dot(_E, K)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.sqrt(np.mean((err_vec / sc) ** 2)) if len(y) else 0.0
        if not np.all(np.isfinite(y_new)) or np.max(np.abs(y_new), initial=0.0) > limit:
            stats.update(blowup=True, t_blowup=float(t))
            break
        if err <= 1.0:
            t = target if step == target - t else t + step
            stats["min_before_projection"] = min(stats["min_before_projection"], float(np.min(y_new, initial=0.0)))
            y = np.maximum(y_new, 0.0)
            k1 = f(y)  # projection breaks FSAL, so re-evaluate
            stats["rhs_evals"] += 1
            stats["steps"] += 1
            # stiffness test: step * lambda estimated from the last two stages;
            # as in Hairer's DOPRI5, six calm steps in a row clear the count
            if step == h:
                den = np.linalg.norm(y_new - y6)
                if den > 0 and step * np.linalg.norm(K[6] - K[5]) / den > 3.25:
                    stiff_hits += 1
                    calm = 0
                    if stiff_hits >= 15 and t >= 1.0:
                        stats["stiff"] = True
                        fallback = True
                else:
                    calm += 1
                    if calm >= 6:
                        stiff_hits = 0
            if t == target:
                out_t.append(t)
                out_y.append(y.copy())
                ci += 1
            if fallback:
                break
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = step * fac if step >= h else max(h, step * fac)
        else:
            stats["rejected"] += 1
            h = step * max(0.2, 0.9 * err ** -0.2)

    if fallback and ci < len(ts):
        stats["method"] = "dopri5+radau"
        stats["fallback_t"] = float(t)
        _radau_tail(odes, y, t, ts[ci:], rtol, atol, out_t, out_y, stats, limit)

    times_arr = np.array(out_t)
    states = np.array(out_y)
    rates = np.array([odes.rates(s) for s in states]) if len(states) else np.zeros((0, len(odes.ks)))
    traj = Trajectory(odes.species, [r.rate for r in odes.crn.reactions], times_arr, states, rates, stats)
    if stats["blowup"] and raise_on_blowup:
        raise BlowUpError(stats["t_blowup"], traj)
    return traj


def _radau_tail(odes, y, t, remaining, rtol, atol, out_t, out_y, stats, limit):
    from scipy.integrate import solve_ivp

    # the clamp in the rate law puts a kink at zero that Newton iterations
    # stumble on; the raw polynomial field is smooth and keeps zero attracting
    sol = solve_ivp(lambda _t, z: odes(z, clamp=False), (t, remaining[-1]), y, method="Radau",
                    t_eval=remaining, rtol=rtol, atol=atol, jac=lambda _t, z: odes.jacobian(z, clamp=False))
    stats["rhs_evals"] += int(sol.nfev)
    for tt, col in zip(sol.t, sol.y.T):
        if not np.all(np.isfinite(col)) or np.max(np.abs(col)) > limit:
            stats.update(blowup=True, t_blowup=out_t[-1])
            return
        stats["min_before_projection"] = min(stats["min_before_projection"], float(np.min(col)))
        out_t.append(float(tt))
        out_y.append(np.maximum(col, 0.0))
    if sol.status != 0:
        stats.update(failed=True, message=str(sol.message))


def simulate(crn: Crn, init: Mapping[str, float], kassign: Mapping[str, float], horizon: float = DEFAULTS.horizon,
             **kwargs) -> Trajectory:
    return integrate(derive_odes(crn, kassign), init, horizon, **kwargs)


# -- convergence ----------------------------------------------------------------

@dataclass
class ObservableVerdict:
    limit: float
    window: tuple[float, float]
    max_deviation: float
    verdict: str  # converged | diverged | undecided-at-horizon


def detect_convergence(traj: Trajectory, observables: Mapping[str, object], tol: float = DEFAULTS.tol_conv,
                       window: int = DEFAULTS.window, targets: Mapping[str, float] | None = None
                       ) -> dict[str, ObservableVerdict]:
    """Judge each observable over the last ``window`` checkpoints.

    Converged to L when every value in the window is within ``tol`` of L and
    the deviations never grow.  L is ``targets[name]`` if given, else the
    final value.  Blown-up trajectories are diverged.
    """
    if len(traj.times) < 2:
        raise ValueError("need at least two checkpoints")
    targets = targets or {}
    report = {}
    w = min(window, len(traj.times))
    span = (float(traj.times[-w]), float(traj.times[-1]))
    for name, obs in observables.items():
        values = traj.observable(obs)[-w:]
        L = float(targets.get(name, values[-1]))
        dev = np.abs(values - L)
        slack = 1e-12 + 1e-9 * max(1.0, abs(L))
        if traj.blew_up:
            verdict = "diverged"
        elif np.all(dev < tol) and np.all(np.diff(dev) <= slack):
            verdict = "converged"
        elif np.all(np.diff(dev) > 0) and dev[-1] - dev[0] > tol:
            verdict = "diverged"
        else:
            verdict = "undecided-at-horizon"
        report[name] = ObservableVerdict(L, span, float(dev.max()), verdict)
    return report


def strictly_decreasing_at(traj: Trajectory, obs, times: Sequence[float]) -> bool:
    """Whether ``obs`` strictly decreases across the checkpoints nearest ``times``."""
    vals = [traj.value_at(obs, t) for t in times]
    return all(b < a for a, b in zip(vals, vals[1:]))


# -- closed forms ---------------------------------------------------------------

def closed_form_oracle(family: str, **p) -> Callable[[np.ndarray], np.ndarray]:
    """Analytic solutions of small mass-action subsystems.

    families:
      ``exp-decay``        X' = -k X               (k, x0)
      ``annihilation``     A' = -k A^2             (k, a)   e.g. A + B -> 0 with A(0) = B(0)
      ``cubic-decay``      C' = -c k C^3           (k, c0, c=3)   e.g. 3C -> 0
      ``quadratic-growth`` X' = k X^2              (k, x0)  e.g. 2X -> 3X, finite-time blow-up
    """
    if family == "exp-decay":
        k, x0 = p["k"], p["x0"]
        return lambda t: x0 * np.exp(-k * np.asarray(t, dtype=float))
    if family == "annihilation":
        k, a = p["k"], p["a"]
        return lambda t: a / (a * k * np.asarray(t, dtype=float) + 1)
    if family == "cubic-decay":
        k, c0, c = p["k"], p["c0"], p.get("c", 3)
        return lambda t: c0 / np.sqrt(2 * c * k * c0 ** 2 * np.asarray(t, dtype=float) + 1)
    if family == "quadratic-growth":
        k, x0 = p["k"], p["x0"]
        return lambda t: x0 / (1 - k * x0 * np.asarray(t, dtype=float))
    raise ValueError(f"unsupported closed-form family {family!r}")
