"""Circuit, program and report files as canonical JSON.

Canonical form: sorted keys, two-space indent, floats written as strings in
``%.16e`` (17 significant digits) and complex matrices as row-major lists of
``[re, im]`` pairs.  Writing what was read gives identical bytes.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from ..exceptions import MeasQCError
from ..pauli import PauliString
from .ir import (
    AbsorbRule,
    FrameRule,
    Gate,
    GateCircuit,
    MeasurementProgram,
    ProgramMeasurement,
    RepeatBlock,
)
from .specs import spec_bell, spec_p_plus_minus, spec_pauli, spec_rotated


class FormatError(MeasQCError, ValueError):
    """A circuit or program file does not parse."""


def fmt_float(x: float) -> str:
    return format(float(x) + 0.0, ".16e")


def canonical(obj: Any) -> Any:
    """Recursively convert to JSON-ready values with fixed float formatting."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, np.ndarray):
        return encode_matrix(obj)
    if isinstance(obj, PauliString):
        return str(obj)
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def encode_matrix(m: np.ndarray) -> list:
    """Row-major ``[re, im]`` pairs; a vector becomes a flat list of pairs."""
    m = np.asarray(m, dtype=complex)
    if m.ndim == 1:
        return [[fmt_float(v.real), fmt_float(v.imag)] for v in m]
    return [[[fmt_float(v.real), fmt_float(v.imag)] for v in row] for row in m]


def decode_matrix(rows) -> np.ndarray:
    try:
        return np.array([[complex(float(re), float(im)) for re, im in row] for row in rows])
    except (TypeError, ValueError) as exc:
        raise FormatError(f"bad matrix: {exc}") from None


# --- circuits -------------------------------------------------------------------


def circuit_to_dict(c: GateCircuit) -> dict:
    gates = []
    for g in c.gates:
        d = {"name": g.name, "targets": list(g.targets)}
        if g.matrix is not None:
            d["matrix"] = encode_matrix(g.matrix)
        gates.append(d)
    return {"num_qubits": c.num_qubits, "gates": gates}


def circuit_from_dict(d: dict) -> GateCircuit:
    try:
        gates = [
            Gate(g["name"], tuple(g["targets"]),
                 decode_matrix(g["matrix"]) if "matrix" in g else None)
            for g in d["gates"]
        ]
        return GateCircuit(int(d["num_qubits"]), gates)
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad circuit: {exc}") from None


def load_circuit(text: str) -> GateCircuit:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"circuit file is not JSON: {exc}") from None
    return circuit_from_dict(d)


# --- programs -------------------------------------------------------------------


def _spec_to_dict(spec) -> dict:
    d = spec.descriptor or {}
    fam = d.get("family")
    if fam == "pauli":
        return {"family": "pauli", "pauli": d["pauli"]}
    if fam in ("bell", "p-plus-minus"):
        return {"family": fam}
    if fam == "rotated-bell":
        out = {"family": fam, "gate": encode_matrix(d["gate"]), "label": spec.label}
        if "observables" in d:
            out["observables"] = list(d["observables"])
        return out
    raise FormatError(f"measurement {spec.label!r} has no serializable descriptor")


def _spec_from_dict(d: dict):
    fam = d.get("family")
    if fam == "pauli":
        return spec_pauli(d["pauli"])
    if fam == "bell":
        return spec_bell()
    if fam == "p-plus-minus":
        return spec_p_plus_minus()
    if fam == "rotated-bell":
        return spec_rotated(decode_matrix(d["gate"]), label=d.get("label", ""))
    raise FormatError(f"unknown measurement family {fam!r}")


def program_to_dict(p: MeasurementProgram) -> dict:
    instructions = []
    for ins in p.instructions:
        if isinstance(ins, ProgramMeasurement):
            instructions.append({
                "type": "measure", "spec": _spec_to_dict(ins.spec), "targets": list(ins.targets),
                "register": ins.register, "role": ins.role, "tag": ins.tag,
            })
        else:
            instructions.append({
                "type": "repeat", "kind": ins.kind, "data": list(ins.data), "pool": list(ins.pool),
                "target": None if ins.target is None else str(ins.target),
                "optional": ins.optional, "max_iters": ins.max_iters, "tag": ins.tag,
            })
    feedforward = []
    for r in p.feedforward:
        if isinstance(r, FrameRule):
            table = [{"values": list(k), "pauli": str(v)} for k, v in sorted(r.table.items())]
            feedforward.append({"type": "frame", "after": r.after, "qubits": list(r.qubits),
                                "registers": list(r.registers), "table": table})
        else:
            feedforward.append({"type": "absorb", "before": r.before,
                                "gate": encode_matrix(r.gate), "qubits": list(r.qubits)})
    return {
        "num_physical_qubits": p.num_physical_qubits,
        "mode": p.mode,
        "frame_policy": p.frame_policy,
        "metadata": p.metadata,
        "instructions": instructions,
        "feedforward": feedforward,
        "output_map": {str(k): v for k, v in sorted(p.output_map.items())},
    }


def program_from_dict(d: dict) -> MeasurementProgram:
    try:
        instructions = []
        for ins in d["instructions"]:
            if ins["type"] == "measure":
                instructions.append(ProgramMeasurement(
                    _spec_from_dict(ins["spec"]), tuple(ins["targets"]), ins["register"],
                    ins.get("role", "normal"), ins.get("tag", ""),
                ))
            elif ins["type"] == "repeat":
                target = ins.get("target")
                instructions.append(RepeatBlock(
                    ins["kind"], tuple(ins["data"]), tuple(ins["pool"]),
                    None if target is None else PauliString.from_label(target),
                    bool(ins.get("optional", False)), int(ins.get("max_iters", 512)), ins.get("tag", ""),
                ))
            else:
                raise FormatError(f"unknown instruction type {ins['type']!r}")
        feedforward = []
        for r in d["feedforward"]:
            if r["type"] == "frame":
                table = {tuple(e["values"]): PauliString.from_label(e["pauli"]) for e in r["table"]}
                feedforward.append(FrameRule(int(r["after"]), tuple(r["qubits"]), tuple(r["registers"]), table))
            elif r["type"] == "absorb":
                feedforward.append(AbsorbRule(int(r["before"]), decode_matrix(r["gate"]), tuple(r["qubits"])))
            else:
                raise FormatError(f"unknown feedforward type {r['type']!r}")
        prog = MeasurementProgram(
            num_physical_qubits=int(d["num_physical_qubits"]),
            instructions=instructions,
            feedforward=feedforward,
            output_map={int(k): int(v) for k, v in d["output_map"].items()},
            mode=d["mode"],
            frame_policy=d.get("frame_policy", "deferred"),
            metadata=d.get("metadata", {}),
        )
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad program: {exc}") from None
    prog.validate()
    return prog


def dump_program(p: MeasurementProgram) -> str:
    return dumps(program_to_dict(p))


def load_program(text: str) -> MeasurementProgram:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"program file is not JSON: {exc}") from None
    return program_from_dict(d)
