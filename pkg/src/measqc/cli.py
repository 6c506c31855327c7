"""Command-line front end.

Exit codes: 0 success, 2 usage or parse error, 3 unsupported construct,
4 a statistical claim failed, 5 internal invariant violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import MeasQCError, NotCliffordError, QubitBudgetError, UnsupportedGateError
from .gadgets import (
    acn_branch_pauli,
    acn_state,
    classify_acn_branch,
    prepare_acn,
    prepare_acn_stabilizer,
)
from .linalg import fidelity
from .measurement_sets import DEFAULT_PHI, DEFAULT_THETA, SpecialU, verify_u_squared
from .compiler import CompileMode, compile_circuit, dump_program, execute, load_circuit, load_program, verify
from .compiler.io import FormatError, dumps
from .stabilizer import tableau_to_state
from . import statistics as mc

EXIT_OK, EXIT_USAGE, EXIT_UNSUPPORTED, EXIT_STATS, EXIT_INTERNAL = 0, 2, 3, 4, 5

DEFAULT_SEED = 0
DEFAULT_TOL = 1e-9
TOL_ENV = "MEASQC_TOL"
WORKERS_ENV = "MEASQC_WORKERS"


class UsageError(Exception):
    pass


def _header(args) -> dict:
    """Report header; echoes environment overrides when present."""
    head = {"command": args.command, "seed": args.seed, "version": __version__}
    env = {k: os.environ[k] for k in (TOL_ENV, WORKERS_ENV) if k in os.environ}
    if env:
        head["environment"] = env
    return head


def _tol(args) -> float:
    tol = args.tol
    if tol is None:
        tol = float(os.environ.get(TOL_ENV, DEFAULT_TOL))
    if not tol > 0:
        raise UsageError("--tol must be positive")
    return tol


def _emit(report: dict, args) -> None:
    text = dumps(report)
    if getattr(args, "output", None):
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _mode(args) -> CompileMode:
    if args.mode == "two-qubit-discrete":
        theta = args.theta if args.set in ("S1", "S2") else None
        return CompileMode.discrete(args.set, theta)
    if args.mode == "single-measurement":
        return CompileMode.single(args.theta if args.theta is not None else DEFAULT_THETA,
                                  args.phi if args.phi is not None else DEFAULT_PHI)
    return CompileMode(args.mode)


def _read(path: str) -> str:
    try:
        return sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise UsageError(str(exc)) from None


# --- commands -----------------------------------------------------------------


def cmd_compile(args) -> int:
    circuit = load_circuit(_read(args.circuit))
    program = compile_circuit(circuit, _mode(args), args.frame_policy or "deferred")
    text = dump_program(program)
    if args.output:
        Path(args.output).write_text(text)
        print(f"high-water mark: {program.num_physical_qubits} physical qubits")
    else:
        sys.stdout.write(text)
        print(f"high-water mark: {program.num_physical_qubits} physical qubits", file=sys.stderr)
    return EXIT_OK


def cmd_run(args) -> int:
    if args.program:
        program = load_program(_read(args.program))
        circuit = None
    else:
        if not args.circuit:
            raise UsageError("run needs a circuit file or --program")
        circuit = load_circuit(_read(args.circuit))
        program = compile_circuit(circuit, _mode(args), args.frame_policy or "deferred")
    res = execute(program, np.random.default_rng(args.seed), args.frame_policy)
    report = _header(args)
    report.update({
        "mode": program.mode,
        "frame_policy": res.frame_policy,
        "num_physical_qubits": program.num_physical_qubits,
        "state": res.state.amplitudes,
        "residual_frame": str(res.residual_frame),
        "resource_counts": res.resource_counts,
        "trace": [[t.register, t.outcome, t.value] for t in res.trace],
    })
    if circuit is not None and circuit.num_qubits <= 4:
        report["fidelity_to_circuit"] = fidelity(res.state, circuit.apply())
    _emit(report, args)
    return EXIT_OK


def cmd_verify(args) -> int:
    tol = _tol(args)
    circuit = load_circuit(_read(args.circuit))
    rep = verify(circuit, _mode(args), args.trials, args.seed, args.frame_policy or "deferred", args.branches)
    report = _header(args)
    report.update(rep.as_dict())
    report["tol"] = tol
    report["passed"] = rep.max_infidelity <= tol
    _emit(report, args)
    return EXIT_OK if report["passed"] else EXIT_STATS


def cmd_stats(args) -> int:
    if args.trials < 100:
        raise UsageError("stats needs --trials >= 100")
    report = _header(args)
    report["trials"] = args.trials
    ok = True
    if args.experiment == "pauli-gadget":
        rounds, bells = mc.pauli_gadget_samples(args.trials, args.seed)
        r = mc.geometric_mean_check(rounds, 0.25)
        b = mc.geometric_mean_check(bells, 0.25, scale=2.0)
        report["experiment"] = "pauli-gadget"
        report["trials_per_gadget"] = r.as_dict()
        report["bell_measurements_per_gadget"] = b.as_dict()
        ok = r.ok and b.ok
    else:
        su = SpecialU(args.theta if args.theta is not None else DEFAULT_THETA,
                      args.phi if args.phi is not None else DEFAULT_PHI)
        lengths = mc.walk_samples(args.trials, args.seed, args.target, args.primitive, su)
        m = mc.geometric_mean_check(lengths, 1 / 16)
        chi = mc.geometric_chi_square(lengths, 1 / 16)
        report["experiment"] = "walk"
        report["iterations"] = m.as_dict()
        report["chi_square"] = chi.as_dict()
        ok = m.ok and not chi.rejected
    report["passed"] = bool(ok)
    _emit(report, args)
    return EXIT_OK if ok else EXIT_STATS


def cmd_acn(args) -> int:
    report = _header(args)
    target = acn_state()
    table = []
    for xx in (1, -1):
        for parity in (1, -1):
            tabs = prepare_acn_stabilizer((xx, parity))
            state = tableau_to_state(tabs[-1])
            e = acn_branch_pauli(xx, parity)
            kl = classify_acn_branch(state)
            expected = e.embed(4, (0, 1)).apply_to(target.amplitudes.copy())
            table.append({
                "xx": xx, "parity": parity, "correction": str(e), "branch": list(kl),
                "fidelity": float(abs(np.vdot(expected, state.amplitudes)) ** 2),
            })
    report["branches"] = table
    if args.post_select:
        run = prepare_acn(np.random.default_rng(args.seed), post_select=True)
        report["post_selected"] = {
            "probability": run.probability,
            "fidelity": fidelity(run.state, target),
            "amplitudes": run.state.amplitudes,
        }
    else:
        rng = np.random.default_rng(args.seed)
        counts = {}
        worst = 1.0
        for _ in range(args.trials):
            run = prepare_acn(rng)
            key = "".join(map(str, run.branch))
            counts[key] = counts.get(key, 0) + 1
            tab = prepare_acn_stabilizer(_branch_outcomes(run))[-1]
            worst = min(worst, fidelity(run.state, tableau_to_state(tab)))
        report["trials"] = args.trials
        report["branch_counts"] = dict(sorted(counts.items()))
        report["min_cross_engine_fidelity"] = worst
    _emit(report, args)
    return EXIT_OK


def _branch_outcomes(run) -> tuple[int, int]:
    values = {reg: o for reg, o, _ in run.trace}
    return (1 if values["p23"] == 0 else -1, values["parity13"])


def cmd_walk(args) -> int:
    su = SpecialU(args.theta if args.theta is not None else DEFAULT_THETA,
                  args.phi if args.phi is not None else DEFAULT_PHI)
    lengths = mc.walk_samples(args.trials, args.seed, args.target, args.primitive, su)
    report = _header(args)
    report.update({
        "trials": args.trials,
        "target": args.target,
        "primitive": args.primitive,
        "histogram": mc.histogram(lengths),
        "iterations": mc.geometric_mean_check(lengths, 1 / 16).as_dict(),
    })
    _emit(report, args)
    return EXIT_OK


def cmd_usq(args) -> int:
    su = SpecialU(args.theta if args.theta is not None else DEFAULT_THETA,
                  args.phi if args.phi is not None else DEFAULT_PHI)
    prod, _ = verify_u_squared(su)
    dev = float(np.max(np.abs(prod - su.matrix @ su.matrix)))
    report = _header(args)
    report.update({"theta": su.theta, "phi": su.phi, "max_deviation": dev})
    _emit(report, args)
    return EXIT_OK


# --- parser ---------------------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="measqc", description="Measurement-only quantum computation tools.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, trials=None):
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--output", "-o")
        if trials is not None:
            sp.add_argument("--trials", type=_positive_int, default=trials)

    def angles(sp):
        sp.add_argument("--theta", type=float)
        sp.add_argument("--phi", type=float)

    def mode(sp):
        sp.add_argument("--mode", choices=["four-qubit", "two-qubit-continuous",
                                           "two-qubit-discrete", "single-measurement"],
                        default="two-qubit-continuous")
        sp.add_argument("--set", choices=["S1", "S2", "S3"], default="S3")
        sp.add_argument("--frame-policy", choices=["eager", "deferred"],
                        help="default: deferred, or a loaded program's own policy")
        angles(sp)

    sp = sub.add_parser("compile", help="lower a circuit file to a program file")
    sp.add_argument("circuit")
    common(sp)
    mode(sp)
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("run", help="execute a circuit or program once")
    sp.add_argument("circuit", nargs="?")
    sp.add_argument("--program")
    common(sp)
    mode(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("verify", help="seeded executions against dense application")
    sp.add_argument("circuit")
    common(sp, trials=20)
    mode(sp)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--branches", action="store_true", help="also enumerate core outcome branches")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("stats", help="Monte Carlo means for the Pauli gadget or the walk")
    sp.add_argument("--experiment", choices=["pauli-gadget", "walk"], default="pauli-gadget")
    common(sp, trials=10000)
    angles(sp)
    sp.add_argument("--target", default="IZ")
    sp.add_argument("--primitive", type=int, choices=[1, 2], default=1)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("acn", help="prepare the CNOT ancilla in both engines")
    common(sp, trials=1000)
    sp.add_argument("--post-select", action="store_true")
    sp.set_defaults(func=cmd_acn)

    sp = sub.add_parser("walk", help="hitting-time histogram of the Pauli random walk")
    common(sp, trials=10000)
    angles(sp)
    sp.add_argument("--target", default="IZ")
    sp.add_argument("--primitive", type=int, choices=[1, 2], default=1)
    sp.set_defaults(func=cmd_walk)

    sp = sub.add_parser("usq", help="max deviation of Q U^dagger P U from U^2")
    common(sp)
    angles(sp)
    sp.set_defaults(func=cmd_usq)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnsupportedGateError, NotCliffordError, QubitBudgetError) as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MeasQCError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
