import json

import numpy as np
import pytest

from measqc.compiler import CompileMode, GateCircuit, compile_circuit, dump_program, execute, load_circuit, load_program
from measqc.compiler.io import FormatError, circuit_to_dict, dumps, fmt_float
from measqc.linalg import random_unitary
from measqc.measurement_sets import SpecialU

SU = SpecialU(np.pi / 16, np.pi / 4)


def sample_circuit(rng):
    return GateCircuit.from_list(2, [
        ("H", (0,)), ("T", (1,)), ("CNOT", (0, 1)), ("U1", (1,), random_unitary(1, rng)),
    ])


def test_floats_are_fixed_width_strings():
    assert fmt_float(0.1) == "1.0000000000000001e-01"
    assert fmt_float(-0.0) == "0.0000000000000000e+00"
    assert json.loads(dumps({"b": 1.0, "a": [2]})) == {"a": [2], "b": "1.0000000000000000e+00"}
    assert dumps({"b": 1, "a": 2}).index('"a"') < dumps({"b": 1, "a": 2}).index('"b"')


def test_circuit_round_trip(rng):
    c = sample_circuit(rng)
    text = dumps(circuit_to_dict(c))
    back = load_circuit(text)
    assert dumps(circuit_to_dict(back)) == text
    np.testing.assert_array_equal(back.apply().amplitudes, c.apply().amplitudes)


@pytest.mark.parametrize("mode", [CompileMode("four-qubit"), CompileMode("two-qubit-continuous"),
                                  CompileMode.single(SU.theta, SU.phi)])
def test_program_round_trip_is_byte_stable(mode):
    c = GateCircuit.from_list(2, [("H", (0,)), ("T", (0,)), ("CNOT", (0, 1))])
    prog = compile_circuit(c, mode, "eager")
    text = dump_program(prog)
    again = load_program(text)
    assert dump_program(again) == text
    a, b = execute(prog, 7), execute(again, 7)
    assert a.trace == b.trace
    np.testing.assert_array_equal(a.state.amplitudes, b.state.amplitudes)


def test_discrete_program_keeps_its_set():
    prog = compile_circuit(GateCircuit.from_list(1, [("H", (0,))]), CompileMode.discrete("S3"))
    again = load_program(dump_program(prog))
    assert again.metadata == prog.metadata
    assert execute(again, 1).trace == execute(prog, 1).trace


@pytest.mark.parametrize("text", [
    "not json",
    "{}",
    '{"num_qubits": 1, "gates": [{"name": "H"}]}',
    '{"num_qubits": 1, "gates": [{"name": "U1", "targets": [0], "matrix": [["x", "0"]]}]}',
])
def test_bad_circuit_files(text):
    with pytest.raises(FormatError):
        load_circuit(text)


def test_unknown_gate_name_is_a_value_error():
    with pytest.raises(ValueError):
        load_circuit('{"num_qubits": 1, "gates": [{"name": "Q", "targets": [0]}]}')


@pytest.mark.parametrize("text", ["[", "{}", '{"num_physical_qubits": 2}'])
def test_bad_program_files(text):
    with pytest.raises(FormatError):
        load_program(text)
