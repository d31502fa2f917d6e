"""Command-line pipeline: compile, simulate, decide, compute, verify, reach, export-odes.

Exit codes: 0 success, 1 verification failure, 2 parse error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .config import DEFAULTS
from .crn import CrnError, NetworkDocument, unit_rates
from .functions import compile_function, parse_function
from .predicates import decider_from_json
from .reachability import (ScriptError, execute_script, output_of, parse_script, stability,
                           straight_line_reachable)
from .simulate import StepSizeUnderflow, derive_odes, format_odes, integrate
from .verify import (AdversaryPolicy, all_passed, computer_trial, decider_trial, reports_to_json,
                     run_computer_trials, run_decider_trials, summary_table)

EXIT_OK, EXIT_VERIFY, EXIT_PARSE, EXIT_NUMERIC = 0, 1, 2, 3


class ParseError(Exception):
    pass


class NumericalError(Exception):
    pass


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def _parse_number(s: str) -> Fraction:
    try:
        return Fraction(s.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"not a number: {s!r}") from exc


def parse_input(text: str | None) -> list[Fraction]:
    """Comma-separated decimals or rationals, e.g. ``0.4,3/5``."""
    if not text:
        raise ParseError("--input is required")
    return [_parse_number(s) for s in text.split(",")]


def parse_pairs(text: str | None) -> dict[str, Fraction]:
    """``name=value,...``"""
    out = {}
    for item in filter(None, (text or "").split(",")):
        if "=" not in item:
            raise ParseError(f"expected name=value, got {item!r}")
        name, value = item.split("=", 1)
        out[name.strip()] = _parse_number(value)
    return out


def _constants(crn, text):
    given = {k: float(v) for k, v in parse_pairs(text).items()}
    unknown = set(given) - set(crn.labels)
    if unknown:
        raise ParseError(f"unknown rate constant labels {sorted(unknown)}")
    if any(v <= 0 for v in given.values()):
        raise ParseError("rate constants must be strictly positive")
    return unit_rates(crn, **given)


def _is_function_doc(doc) -> bool:
    return isinstance(doc, dict) and ("pieces" in doc or "min_of" in doc or "weights" in doc)


def _load_spec(path: str):
    doc = _read_json(path)
    try:
        if _is_function_doc(doc):
            spec = parse_function(doc)
            return "function", compile_function(spec), doc
        return "predicate", decider_from_json(doc), doc
    except (CrnError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad spec {path}: {exc}") from exc


def _load_network(path: str) -> NetworkDocument:
    try:
        return NetworkDocument.from_dict(_read_json(path))
    except CrnError as exc:
        raise ParseError(f"bad network {path}: {exc}") from exc


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _policy(args) -> AdversaryPolicy:
    if not args.policy:
        return AdversaryPolicy.log_uniform(seed=args.seed)
    if args.policy in ("preset", "figure"):
        return AdversaryPolicy()
    if args.policy == "log-uniform":
        return AdversaryPolicy.log_uniform(seed=args.seed)
    doc = _read_json(args.policy) if Path(args.policy).exists() else None
    if doc is None:
        try:
            doc = json.loads(args.policy)
        except json.JSONDecodeError as exc:
            raise ParseError(f"--policy is neither a file, a preset name nor JSON: {args.policy!r}") from exc
    doc.setdefault("seed", args.seed)
    try:
        return AdversaryPolicy.from_json(doc)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad policy: {exc}") from exc


# -- subcommands ------------------------------------------------------------------

def cmd_compile(args) -> int:
    _, compiled, _ = _load_spec(args.spec)
    _emit(compiled.document().dumps(), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = _load_network(args.network)
    crn = doc.crn
    init = {n: float(v) for n, v in doc.initial_context.items()}
    if args.input:
        inputs = [s.name for s in crn.species if s.role == "input"]
        x = parse_input(args.input)
        if len(x) != len(inputs):
            raise ParseError(f"network has {len(inputs)} inputs, got {len(x)} values")
        init.update({n: float(v) for n, v in zip(inputs, x)})
    init.update({n: float(v) for n, v in parse_pairs(args.init).items()})
    k = _constants(crn, args.constants)
    horizon = args.horizon or DEFAULTS.horizon
    try:
        traj = integrate(derive_odes(crn, k), init, horizon)
    except (StepSizeUnderflow, CrnError) as exc:
        raise NumericalError(str(exc)) from exc
    _emit(traj.to_json() if args.format == "json" else traj.to_csv(), args.out)
    if traj.blew_up:
        raise NumericalError(f"blow-up: trajectory diverges near t={traj.stats['t_blowup']:.6g}")
    if traj.stats.get("failed"):
        raise NumericalError(f"integrator failure: {traj.stats.get('message')}")
    return EXIT_OK


def cmd_decide(args) -> int:
    kind, d, _ = _load_spec(args.spec)
    if kind != "predicate":
        raise ParseError("decide needs a predicate spec")
    x = parse_input(args.input)
    if len(x) != d.arity:
        raise ParseError(f"predicate takes {d.arity} inputs, got {len(x)}")
    k = _constants(d.crn, args.constants)
    rep = decider_trial(d, x, k, args.horizon or DEFAULTS.horizon)
    if rep.reason.startswith(("blow-up", "integrator")):
        raise NumericalError(rep.reason)
    verdict = rep.expected if rep.passed else "undecided"
    print(verdict)
    for name, v in sorted(rep.verdicts.items()):
        if "limit" in v:
            print(f"  {name}-side voters: limit {v['limit']:.6g}, {v['verdict']}, "
                  f"max deviation {v['max_deviation']:.3g} over t in [{v['window'][0]:.6g}, {v['window'][1]:.6g}]",
                  file=sys.stderr)
    if args.out:
        Path(args.out).write_text(reports_to_json([rep]))
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_compute(args) -> int:
    kind, c, _ = _load_spec(args.spec)
    if kind != "function":
        raise ParseError("compute needs a function spec")
    x = parse_input(args.input)
    if len(x) != c.arity:
        raise ParseError(f"function takes {c.arity} inputs, got {len(x)}")
    k = _constants(c.crn, args.constants)
    horizon = args.horizon or DEFAULTS.horizon
    rep = computer_trial(c, x, k, horizon, tol=args.tol)
    if rep.reason.startswith(("blow-up", "integrator")):
        raise NumericalError(rep.reason)
    out = rep.verdicts["output"]
    print(f"{out['limit']:.3f} +/- {out['max_deviation']:.1g}")
    print(f"  exact f(x) = {rep.expected}; {out['verdict']}; error {out['error']:.3g}", file=sys.stderr)
    if args.out:
        Path(args.out).write_text(reports_to_json([rep]))
    return EXIT_OK if rep.passed is not False else EXIT_VERIFY


def cmd_verify(args) -> int:
    kind, compiled, doc = _load_spec(args.spec)
    if args.input:
        inputs = [parse_input(s) for s in args.input]
    elif isinstance(doc, dict) and "inputs" in doc:
        inputs = [[_parse_number(str(v)) for v in row] for row in doc["inputs"]]
    else:
        raise ParseError("verify needs --input or an 'inputs' list in the spec")
    policy = _policy(args)
    horizon = args.horizon or DEFAULTS.horizon
    try:
        if kind == "predicate":
            reports = run_decider_trials(compiled, inputs, policy, horizon)
        else:
            reports = run_computer_trials(compiled, inputs, policy, horizon, tol=args.tol)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    _emit(reports_to_json(reports), args.out)
    # the table goes to stdout unless stdout already carries the JSON
    (sys.stdout if args.out else sys.stderr).write(summary_table(reports))
    return EXIT_OK if all_passed(reports) else EXIT_VERIFY


def _fmt_state(state) -> dict:
    return {n: str(v) for n, v in state.items() if v}


def cmd_reach(args) -> int:
    doc = _load_network(args.network)
    script_doc = _read_json(args.spec)
    try:
        script = parse_script(script_doc["script"] if isinstance(script_doc, dict) else script_doc)
    except (KeyError, TypeError, CrnError) as exc:
        raise ParseError(f"bad script: {exc}") from exc
    start = {n: Fraction(v) for n, v in doc.initial_context.items()}
    if args.input:
        inputs = [s.name for s in doc.crn.species if s.role == "input"]
        start.update(zip(inputs, parse_input(args.input)))
    start.update(parse_pairs(args.init))
    try:
        end, hops = execute_script(doc.crn, start, script)
    except ScriptError as exc:
        print(f"script failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except CrnError as exc:
        raise ParseError(str(exc)) from exc
    result = {"end": _fmt_state(end), "segments": len(hops), "stability": stability(doc.crn, end)}
    yes = [s.name for s in doc.crn.species if s.role == "voter-yes"]
    no = [s.name for s in doc.crn.species if s.role == "voter-no"]
    if yes or no:
        result["output"] = output_of(end, yes, no)
    if isinstance(script_doc, dict) and "target" in script_doc:
        target = {n: _parse_number(str(v)) for n, v in script_doc["target"].items()}
        flux = straight_line_reachable(doc.crn, start, target)
        result["target_one_segment"] = None if flux is None else {str(j): str(u) for j, u in flux.items()}
    _emit(json.dumps(result, indent=1, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_export_odes(args) -> int:
    doc = _load_network(args.network)
    k = _constants(doc.crn, args.constants) if args.constants else None
    _emit(format_odes(doc.crn, k), args.out)
    return EXIT_OK


COMMANDS = {
    "compile": cmd_compile,
    "simulate": cmd_simulate,
    "decide": cmd_decide,
    "compute": cmd_compute,
    "verify": cmd_verify,
    "reach": cmd_reach,
    "export-odes": cmd_export_odes,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robustcrn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--spec", required=name in ("compile", "decide", "compute", "verify", "reach"))
        s.add_argument("--network", required=name in ("simulate", "reach", "export-odes"))
        s.add_argument("--input", action="append" if name == "verify" else "store")
        s.add_argument("--init")
        s.add_argument("--constants")
        s.add_argument("--policy")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--horizon", type=float)
        s.add_argument("--tol", type=float, default=DEFAULTS.tol_conv)
        s.add_argument("--out")
        s.add_argument("--format", choices=("csv", "json"), default="csv")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
