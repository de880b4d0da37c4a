"""Command-line surface: check, certify, simulate, falsify.

Every command reads a JSON system description, prints a JSON report to
stdout (optionally mirrored to --report), and reserves stderr for human
diagnostics.  Exit codes are total:

    0   success (check: certified-feasible; others: command completed)
    1   parse/schema/flag errors (diagnostics name the offending JSON path)
    2   structurally invalid system (sign/structure violations listed)
    3   feasibility UNSAT (check) or certifiably infeasible (certify)
    4   certificate construction failed for another reason (e.g. no common
        contraction direction, enumeration cap)

All randomness is seeded and echoed into the report; KRASOVSKII_THREADS
bounds falsification parallelism.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import schema
from .certificates import (
    CertificateError,
    ConstructionError,
    InfeasibleSystemError,
    StructuralError,
    build_certificate,
    class_tag,
    feasibility_problem_for,
    verify_certificate,
)
from .feasibility import find_common_vector
from .monitor import check_decrease, falsify
from .schema import SchemaError
from .simulate import (
    simulate_coupled,
    simulate_discrete,
    simulate_neutral,
    simulate_switched_delay,
    snap_signal,
    write_trace_csv,
)
from .systems import (
    CoupledSystem,
    DiscreteDelaySystem,
    NeutralSystem,
    SwitchedDelaySystem,
    constant_signal,
    identity,
    parse_nonlinearity,
    sample_signal,
    validate,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STRUCTURAL = 2
EXIT_INFEASIBLE = 3
EXIT_CONSTRUCTION = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags, which collides with the
    # structural-violation code; route flag errors through exit 1 instead.
    def error(self, message):
        raise _UsageError(message)


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _emit(report: dict, args) -> None:
    text = schema.dump_report(report)
    print(text)
    if getattr(args, "report", None):
        with open(args.report, "w") as fh:
            fh.write(text + "\n")


def _load(args) -> tuple:
    system, raw = schema.load_system(args.path)
    report = schema.report_skeleton(args.path, raw)
    report["class"] = class_tag(system)
    if system.label:
        report["label"] = system.label
    return system, report


def _structural_gate(system, report: dict, args) -> bool:
    violations = validate(system)
    report["validation"] = {
        "structurally_valid": not violations,
        "violations": schema.violations_to_json(violations),
    }
    if violations:
        _emit(report, args)
        for v in violations[:5]:
            print(f"structural violation: {v}", file=sys.stderr)
        return False
    return True


# ---------------------------------------------------------------------------
# check / certify
# ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    system, report = _load(args)
    if not _structural_gate(system, report, args):
        return EXIT_STRUCTURAL
    problem = feasibility_problem_for(system)
    result = find_common_vector(problem)
    report["feasibility"] = {
        "feasible": bool(result.feasible),
        "slack": float(result.slack),
        "iterations": int(result.iterations),
        "witness": None if result.witness is None else result.witness.tolist(),
    }
    _emit(report, args)
    if result.feasible:
        print("feasible: strict common weight vector found", file=sys.stderr)
        return EXIT_OK
    print("UNSAT: no strict common weight vector exists", file=sys.stderr)
    return EXIT_INFEASIBLE


def cmd_certify(args) -> int:
    system, report = _load(args)
    if not _structural_gate(system, report, args):
        return EXIT_STRUCTURAL
    try:
        cert = build_certificate(system)
    except InfeasibleSystemError as exc:
        report["certificate"] = None
        report["error"] = {"kind": "infeasible", "reason": str(exc)}
        _emit(report, args)
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConstructionError as exc:
        report["certificate"] = None
        report["error"] = {"kind": "construction", "reason": str(exc)}
        _emit(report, args)
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    margins = verify_certificate(system, cert)
    cert_doc = schema.certificate_to_json(cert, system_sha256=report["input"]["sha256"])
    report["certificate"] = cert_doc
    report["margins"] = schema.margin_report_to_json(margins)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(schema.dump_report(cert_doc) + "\n")
    _emit(report, args)
    print(f"certified: beta = {cert.beta:.6g}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _parse_floats(text: str, flag: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise _UsageError(f"{flag} expects comma-separated numbers, got {text!r}")


def _build_signal(spec: str, horizon: float, num_modes: int, seed: int, h: float):
    name, _, rest = (spec or "periodic:1.0").partition(":")
    name = name.strip()
    if name == "constant":
        mode = int(rest) if rest else 1
        if not 1 <= mode <= num_modes:
            raise _UsageError(f"--signal constant mode must lie in 1..{num_modes}")
        sig = constant_signal(mode, num_modes)
    elif name == "periodic":
        dwell = float(rest) if rest else 1.0
        sig = sample_signal("periodic", horizon, num_modes, dwell=dwell, seed=seed)
    elif name == "random":
        parts = _parse_floats(rest, "--signal") if rest else [0.5, 1.5]
        if len(parts) != 2:
            raise _UsageError("--signal random expects 'random:<dwell_min>,<dwell_max>'")
        sig = sample_signal("random", horizon, num_modes,
                            dwell_min=parts[0], dwell_max=parts[1], seed=seed)
    else:
        raise _UsageError(f"unknown --signal kind {name!r} "
                          "(expected constant:, periodic:, or random:)")
    snapped, shift = snap_signal(sig, h)
    if shift > 1e-12:
        _warn(f"aligned switching breakpoints to the step grid (max shift {shift:.3g})")
    return snapped


def _snap_scalar(value: float, h: float, what: str) -> float:
    k = int(round(value / h))
    eff = k * h
    if abs(eff - value) > 1e-12 * max(1.0, abs(value)):
        _warn(f"snapped {what} from {value:.17g} to {eff:.17g} (step {h:.17g})")
    return eff


def _history_vector(args, dim: int, flag: str = "--history") -> np.ndarray:
    text = getattr(args, flag.lstrip("-").replace("-", "_"), None)
    if not text:
        return np.ones(dim)
    vals = _parse_floats(text, flag)
    if len(vals) == 1:
        return np.full(dim, vals[0])
    if len(vals) != dim:
        raise _UsageError(f"{flag} expects 1 or {dim} values, got {len(vals)}")
    return np.asarray(vals)


def cmd_simulate(args) -> int:
    system, report = _load(args)
    cert = schema.load_certificate(args.cert) if args.cert else None
    if cert is not None and cert.kind != class_tag(system):
        print(f"error: certificate class {cert.kind!r} is incompatible with "
              f"system class {class_tag(system)!r}", file=sys.stderr)
        return EXIT_USAGE
    f = parse_nonlinearity(args.nonlinearity) if args.nonlinearity else identity()
    seed = args.seed

    if isinstance(system, DiscreteDelaySystem):
        steps = args.steps
        if args.tau:
            lags = [int(v) for v in _parse_floats(args.tau, "--tau")]
            if len(lags) == 1:
                lags = lags * system.num_channels
            if len(lags) != system.num_channels:
                raise _UsageError(f"--tau expects {system.num_channels} integer lags")
            system = DiscreteDelaySystem(system.A, system.B, tuple(lags),
                                         label=system.label)
        sig = _build_signal(args.signal, float(steps), system.num_modes, seed, 1.0)
        modes = sig.modes_on_grid(np.arange(steps, dtype=float))
        window = np.tile(_history_vector(args, system.n), (max(system.delays) + 1, 1))
        if not f.discrete_admissible:
            _warn("nonlinearity does not satisfy |f(x)| <= |x|; the discrete "
                  "decrease guarantee does not apply")
        traj = simulate_discrete(system, f, modes, window, steps)
        scenario = {"steps": steps, "delays": list(system.delays),
                    "signal": args.signal or "periodic:1.0",
                    "nonlinearity": f.describe(), "seed": seed}
    else:
        if isinstance(system, SwitchedDelaySystem):
            delays = list(system.delays)
            if args.tau:
                vals = _parse_floats(args.tau, "--tau")
                if len(vals) == 1:
                    vals = vals * len(delays)
                if len(vals) != len(delays):
                    raise _UsageError(f"--tau expects 1 or {len(delays)} values")
                delays = vals
        else:
            delays = [system.tau]
            if args.tau:
                vals = _parse_floats(args.tau, "--tau")
                if len(vals) != 1:
                    raise _UsageError("this class takes a single --tau value")
                delays = vals
        positive = [t for t in delays if t > 0]
        h = args.step if args.step else (min(positive) / 16.0 if positive else 1.0 / 16.0)
        if h <= 0:
            raise _UsageError("--step must be positive")
        delays = [_snap_scalar(t, h, "delay") for t in delays]
        horizon = _snap_scalar(args.horizon, h, "horizon")
        if horizon < h:
            raise _UsageError("--horizon must cover at least one step")
        sig = _build_signal(args.signal, horizon, system.num_modes, seed, h)
        if isinstance(system, SwitchedDelaySystem):
            variant = SwitchedDelaySystem(system.A, system.B, tuple(delays),
                                          label=system.label)
            hist = _history_vector(args, system.n)
            traj = simulate_switched_delay(variant, f, sig, hist, horizon, h)
        elif isinstance(system, CoupledSystem):
            variant = CoupledSystem(system.A, system.B, system.C, system.D,
                                    delays[0], label=system.label)
            x0 = _history_vector(args, system.n)
            y0 = _history_vector(args, system.m, "--y0")
            traj = simulate_coupled(variant, f, sig, x0, y0, horizon, h)
        else:
            if args.nonlinearity and args.nonlinearity != "identity":
                _warn("the neutral class is linear; ignoring --nonlinearity")
            variant = NeutralSystem(system.A, system.G, system.D, delays[0],
                                    label=system.label)
            hist = _history_vector(args, system.n)
            traj = simulate_neutral(variant, sig, hist, horizon, h)
        scenario = {"tau": delays if len(delays) > 1 else delays[0],
                    "horizon": horizon, "step": h,
                    "signal": args.signal or "periodic:1.0",
                    "nonlinearity": f.describe(), "seed": seed,
                    "breakpoints": list(sig.breakpoints), "modes": list(sig.modes)}

    if args.trace:
        write_trace_csv(traj, args.trace)
    init = max(float(np.max(np.abs(traj.x[0]))), 1e-12)
    term = float(np.max(np.abs(traj.x[-1])))
    ratio = term / init
    report["scenario"] = scenario
    report["trajectory"] = {
        "samples": int(traj.t.size),
        "h": float(traj.h),
        "diverged": bool(traj.diverged),
        "terminal_state": traj.x[-1].tolist(),
        "growth_ratio": ratio,
        "growth": bool(traj.diverged or ratio > 1.0),
        "csv": args.trace or None,
    }
    if cert is not None:
        mon = check_decrease(traj, cert, f, seed=seed)
        report["monitor"] = schema.monitor_report_to_json(mon)
        verdict = "pass" if mon.passed else "FAIL"
        print(f"monitor: {verdict} over {mon.margins.size} steps", file=sys.stderr)
    _emit(report, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# falsify
# ---------------------------------------------------------------------------

def cmd_falsify(args) -> int:
    system, report = _load(args)
    result = falsify(system, args.budget, args.seed,
                     horizon=args.horizon, step=args.step or 1.0 / 16.0)
    report["falsification"] = schema.falsification_to_json(result)
    _emit(report, args)
    if result.found:
        print(f"growth evidence: ratio {result.best_ratio:.6g} in scenario "
              f"{result.best_index} (not a proof of instability)", file=sys.stderr)
    else:
        print("none found", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="krasovskii",
                     description="Stability certificates for switched positive "
                                 "delay systems: check, certify, simulate, falsify.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate structure and decide feasibility")
    p.add_argument("path", help="system JSON file")
    p.add_argument("--report", help="also write the JSON report to this file")
    p.set_defaults(handler=cmd_check)

    p = sub.add_parser("certify", help="construct and verify a certificate")
    p.add_argument("path", help="system JSON file")
    p.add_argument("--out", help="write the certificate JSON to this file")
    p.add_argument("--report", help="also write the JSON report to this file")
    p.set_defaults(handler=cmd_certify)

    p = sub.add_parser("simulate", help="integrate one scenario, optionally monitored")
    p.add_argument("path", help="system JSON file")
    p.add_argument("--cert", help="certificate JSON file to monitor against")
    p.add_argument("--tau", help="delay override (comma-separated per channel)")
    p.add_argument("--horizon", type=float, default=10.0,
                   help="continuous horizon T (default 10)")
    p.add_argument("--step", type=float, help="grid step h (default: min delay / 16)")
    p.add_argument("--steps", type=int, default=100,
                   help="discrete iteration count (default 100)")
    p.add_argument("--signal", help="constant:<m> | periodic:<dwell> | "
                                    "random:<min>,<max> (default periodic:1.0)")
    p.add_argument("--nonlinearity", help="registry spec, e.g. tanh:0.8 (default identity)")
    p.add_argument("--seed", type=int, default=0, help="scenario seed (default 0)")
    p.add_argument("--history", help="initial state/history vector (comma-separated)")
    p.add_argument("--y0", help="coupled classes: initial y history vector")
    p.add_argument("--trace", help="write the trajectory CSV to this file")
    p.add_argument("--report", help="also write the JSON report to this file")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("falsify", help="randomized growth search (never a proof)")
    p.add_argument("path", help="system JSON file")
    p.add_argument("--budget", type=int, default=100, help="scenario count (default 100)")
    p.add_argument("--seed", type=int, default=0, help="sweep seed (default 0)")
    p.add_argument("--horizon", type=float, default=12.0,
                   help="per-scenario horizon (default 12)")
    p.add_argument("--step", type=float, help="grid step (default 1/16)")
    p.add_argument("--report", help="also write the JSON report to this file")
    p.set_defaults(handler=cmd_falsify)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StructuralError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STRUCTURAL
    except InfeasibleSystemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CertificateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION


if __name__ == "__main__":
    sys.exit(main())
