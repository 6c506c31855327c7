"""Seeded verification of compiled programs against dense circuit application."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ImpossibleBranchError
from ..linalg import fidelity
from .execute import execute
from .ir import GateCircuit, MeasurementProgram
from .lowering import CompileMode, compile_circuit

MAX_VERIFY_QUBITS = 4
MAX_BRANCH_REGISTERS = 4


@dataclass
class VerifyReport:
    max_infidelity: float
    trials: int
    seed: int
    mode: dict
    frame_policy: str
    num_physical_qubits: int
    resource_counts: dict
    outcome_statistics: dict = field(default_factory=dict)
    branches: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "max_infidelity": self.max_infidelity,
            "trials": self.trials,
            "seed": self.seed,
            "mode": self.mode,
            "frame_policy": self.frame_policy,
            "num_physical_qubits": self.num_physical_qubits,
            "resource_counts": self.resource_counts,
            "outcome_statistics": self.outcome_statistics,
            "branches": self.branches,
        }


def _mean(xs) -> float:
    return float(np.mean(xs)) if len(xs) else 0.0


def _aggregate(runs) -> dict:
    flush = [b for r in runs for b in r["pauli_flush_bell_measurements"]]
    walks = [w for r in runs for w in r["walk_lengths"]]
    walk_flush = [w for r in runs for w in r["walk_flush_lengths"]]
    tags = Counter()
    for r in runs:
        tags.update(r["by_tag"])
    n = max(len(runs), 1)
    return {
        "mean_measurements": _mean([r["measurements"] for r in runs]),
        "mean_bell_measurements": _mean([r["bell_measurements"] for r in runs]),
        "mean_four_qubit_measurements": _mean([r["four_qubit_measurements"] for r in runs]),
        "mean_measurements_by_tag": {k: v / n for k, v in sorted(tags.items())},
        "pauli_gadgets": len(flush),
        "mean_bell_measurements_per_pauli_gadget": _mean(flush),
        "walks": len(walks),
        "mean_walk_length": _mean(walks),
        "walk_flushes": len(walk_flush),
        "mean_walk_flush_length": _mean(walk_flush),
    }


def core_registers(program: MeasurementProgram) -> list:
    """Registers of the gadget core measurements (the ones branch enumeration forces)."""
    return [(m.register, m.spec) for m in program.measurements() if m.tag.startswith("core")]


def enumerate_branches(program: MeasurementProgram, reference, seed: int = 0) -> list[dict]:
    """Force every combination of core outcomes; other outcomes are sampled.

    Returns one record per branch with the forced values and the infidelity.
    """
    regs = core_registers(program)
    if len(regs) > MAX_BRANCH_REGISTERS:
        raise ValueError(f"branch enumeration supports at most {MAX_BRANCH_REGISTERS} core measurements")
    names = [r for r, _ in regs]
    out = []
    for i, values in enumerate(itertools.product(*(spec.outcomes for _, spec in regs))):
        forced = dict(zip(names, values))
        try:
            res = execute(program, np.random.default_rng([seed, i]), forced=forced)
        except ImpossibleBranchError:
            out.append({"forced": forced, "possible": False})
            continue
        out.append({"forced": forced, "possible": True,
                    "infidelity": max(0.0, 1.0 - fidelity(res.state, reference))})
    return out


def verify(circuit: GateCircuit, mode: CompileMode | str, trials: int = 20,
           seed: int = 0, frame_policy: str = "deferred", branches: bool = False,
           program: MeasurementProgram | None = None) -> VerifyReport:
    """Compile, execute ``trials`` times and compare with dense application.

    Trial ``i`` uses the generator seeded with ``[seed, i]``, so results do
    not depend on execution order.
    """
    if circuit.num_qubits > MAX_VERIFY_QUBITS:
        raise ValueError(f"dense verification supports at most {MAX_VERIFY_QUBITS} logical qubits")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if isinstance(mode, str):
        mode = CompileMode(mode)
    program = program or compile_circuit(circuit, mode, frame_policy)
    reference = circuit.apply()
    worst = 0.0
    runs = []
    stats: dict[str, Counter] = {}
    core = {r for r, _ in core_registers(program)}
    for i in range(trials):
        res = execute(program, np.random.default_rng([seed, i]), frame_policy)
        worst = max(worst, 1.0 - fidelity(res.state, reference))
        runs.append(res.resource_counts)
        for r in core:
            stats.setdefault(r, Counter())[str(res.registers[r])] += 1
    report = VerifyReport(
        max_infidelity=max(worst, 0.0),
        trials=trials,
        seed=seed,
        mode=mode.describe(),
        frame_policy=frame_policy,
        num_physical_qubits=program.num_physical_qubits,
        resource_counts=_aggregate(runs),
        outcome_statistics={r: dict(sorted(c.items())) for r, c in sorted(stats.items())},
    )
    if branches:
        report.branches = enumerate_branches(program, reference, seed)
        possible = [b["infidelity"] for b in report.branches if b["possible"]]
        report.max_infidelity = max([report.max_infidelity, *possible])
    return report
