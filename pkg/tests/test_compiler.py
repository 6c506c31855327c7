import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from measqc import linalg
from measqc.compiler import (
    AbsorbRule,
    CompileMode,
    FrameRule,
    Gate,
    GateCircuit,
    PauliFrame,
    ProgramMeasurement,
    RepeatBlock,
    absorb_frame,
    compile_circuit,
    enumerate_branches,
    execute,
    verify,
)
from measqc.compiler.execute import outcome_permutation
from measqc.compiler.lowering import plan_matrix, single_measurement_plan
from measqc.compiler.specs import spec_bell
from measqc.exceptions import DimensionError, NotCliffordError, ProgramError, QubitBudgetError, UnsupportedGateError
from measqc.linalg import PureState, fidelity, random_unitary
from measqc.measurement_sets import SpecialU, absorbed_variants, build_set
from measqc.pauli import PauliString, pauli

seeds = st.integers(0, 2**32 - 1)
SU = SpecialU(np.pi / 16, np.pi / 4)
MODES = {
    "four-qubit": CompileMode("four-qubit"),
    "continuous": CompileMode("two-qubit-continuous"),
    "discrete-S3": CompileMode.discrete("S3"),
    "single": CompileMode.single(SU.theta, SU.phi),
}
ONE_GATE_CLIFFORD_T = ["H", "P", "T", "X", "Y", "Z"]


def measurement_only(program) -> bool:
    return all(isinstance(i, (ProgramMeasurement, RepeatBlock)) for i in program.instructions)


def circuit(n, *gates):
    return GateCircuit.from_list(n, list(gates))


# --- IR ------------------------------------------------------------------------------


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("Q", (0,))
    with pytest.raises(DimensionError):
        Gate("CNOT", (0,))
    with pytest.raises(DimensionError):
        Gate("CNOT", (1, 1))
    with pytest.raises(ValueError):
        Gate("U1", (0,))
    with pytest.raises(ValueError):
        Gate("H", (0,), np.eye(2))
    with pytest.raises(DimensionError):
        GateCircuit.from_list(1, [("H", (1,))])


def test_program_validation_catches_unwritten_register():
    prog = compile_circuit(circuit(1, ("H", (0,))), "two-qubit-continuous")
    prog.feedforward.insert(0, FrameRule(0, (0,), ("never",), {}))
    with pytest.raises(ProgramError):
        prog.validate()


def test_repeat_block_validation():
    with pytest.raises(ProgramError):
        RepeatBlock("walk", (0, 1), (2, 3, 4, 5))
    with pytest.raises(ProgramError):
        RepeatBlock("spin", (0,), (1, 2))


# --- frames --------------------------------------------------------------------------


def test_frame_x_on_control_through_cnot():
    f = PauliFrame(2, pauli("XI"))
    res = absorb_frame(f, linalg.CNOT, [0, 1])
    assert res.frame.pauli == pauli("XX")
    np.testing.assert_allclose(res.gate, linalg.CNOT)
    assert res.measurement is None


def test_identity_frame_is_unchanged():
    res = absorb_frame(PauliFrame(1), linalg.H, [0])
    assert res.frame.is_identity()


def test_z_frame_before_t_becomes_rotated_measurement(rng):
    res = absorb_frame(PauliFrame(1, pauli("Z")), linalg.T, [0])
    assert res.frame.is_identity()
    np.testing.assert_allclose(res.gate, linalg.T @ linalg.Z, atol=1e-15)
    # physical Z psi through the new gate equals T psi up to phase
    psi = linalg.random_state(1, rng)
    out = PureState(1, res.gate @ (linalg.Z @ psi.amplitudes))
    assert fidelity(out, PureState(1, linalg.T @ psi.amplitudes)) == pytest.approx(1.0)
    assert res.measurement.arity == 2


def test_multi_qubit_non_clifford_absorption_is_rejected(rng):
    with pytest.raises(NotCliffordError):
        absorb_frame(PauliFrame(2, pauli("XI")), random_unitary(2, rng), [0, 1])


@given(st.text("IXYZ", min_size=3, max_size=3), st.text("IXYZ", min_size=3, max_size=3),
       st.text("IXYZ", min_size=3, max_size=3))
def test_frame_composition_is_associative(a, b, c):
    fa, fb, fc = (PauliFrame(3, pauli(x)) for x in (a, b, c))
    left = fa.compose(fb).compose(fc)
    right = fa.compose(fb.compose(fc))
    assert left.pauli == right.pauli


@settings(max_examples=25)
@given(seeds, st.text("IXYZ", min_size=2, max_size=2), st.integers(0, 3))
def test_flush_applies_frame_inverse(seed, letters, phase):
    rng = np.random.default_rng(seed)
    psi = linalg.random_state(2, rng)
    f = PauliFrame(2, pauli(letters).with_phase(phase))
    physical = f.pauli.apply_to(psi.amplitudes)
    np.testing.assert_allclose(f.flush(physical), psi.amplitudes, atol=1e-12)


def test_outcome_permutation_of_bell_measurement():
    perm = outcome_permutation(spec_bell(), pauli("XI"))
    assert sorted(perm) == [0, 1, 2, 3]
    assert perm != (0, 1, 2, 3)


# --- compile examples --------------------------------------------------------------------


def test_empty_circuit_is_initialization_only():
    for mode in MODES.values():
        prog = compile_circuit(GateCircuit(2), mode)
        assert all(ins.role == "init" for ins in prog.measurements())
        res = execute(prog, 1)
        assert fidelity(res.state, PureState.zeros(2)) == pytest.approx(1.0)
    assert verify(GateCircuit(1), "two-qubit-continuous", trials=3).max_infidelity <= 1e-15


def test_discrete_hadamard_stays_inside_s3():
    prog = compile_circuit(circuit(1, ("H", (0,))), CompileMode.discrete("S3"))
    allowed = absorbed_variants(build_set("S3"))
    from measqc.measurement_sets import Observable

    for ins in prog.measurements():
        d = ins.spec.descriptor
        if d["family"] == "pauli":
            assert allowed.contains(Observable.from_pauli(d["pauli"]))


def test_continuous_cnot_uses_the_ancilla_protocol():
    prog = compile_circuit(circuit(2, ("CNOT", (0, 1))), "two-qubit-continuous")
    tags = [ins.tag for ins in prog.measurements()]
    assert any(t.startswith("acn") for t in tags)
    assert sum(t == "core-2a" for t in tags) == 2
    assert any(isinstance(r, FrameRule) for r in prog.feedforward)


def test_t_gate_in_four_qubit_mode_is_one_rotated_measurement():
    prog = compile_circuit(circuit(1, ("T", (0,))), "four-qubit")
    core = [ins for ins in prog.measurements() if ins.tag.startswith("core")]
    assert len(core) == 1 and core[0].spec.arity == 4
    assert any(isinstance(r, FrameRule) for r in prog.feedforward)


@pytest.mark.parametrize("mode", list(MODES))
@pytest.mark.parametrize("gate", ["H", "T"])
def test_every_compile_output_is_measurement_only(mode, gate):
    prog = compile_circuit(circuit(2, (gate, (0,)), ("CNOT", (0, 1))), MODES[mode])
    assert measurement_only(prog)


@pytest.mark.parametrize("mode", list(MODES))
def test_hadamard_in_every_mode(mode):
    prog = compile_circuit(circuit(1, ("H", (0,))), MODES[mode])
    want = PureState(1, [1 / np.sqrt(2)] * 2)
    for s in range(5):
        assert fidelity(execute(prog, s).state, want) == pytest.approx(1.0, abs=1e-10)


def test_four_qubit_mode_handles_arbitrary_two_qubit_gates(rng):
    u = random_unitary(2, rng)
    c = circuit(3, ("H", (0,)), ("U2", (2, 0), u), ("T", (1,)), ("CNOT", (1, 2)), ("U1", (0,), random_unitary(1, rng)))
    assert verify(c, "four-qubit", trials=10).max_infidelity <= 1e-9


def test_continuous_mode_handles_general_one_qubit_gates(rng):
    c = circuit(2, ("U1", (0,), random_unitary(1, rng)), ("SWAP", (0, 1)), ("T", (1,)), ("CNOT", (1, 0)))
    assert verify(c, "two-qubit-continuous", trials=10).max_infidelity <= 1e-9


@pytest.mark.parametrize("set_name, theta", [("S1", 0.7), ("S2", 0.9)])
def test_other_discrete_sets(set_name, theta):
    mode = CompileMode.discrete(set_name, theta)
    c = circuit(2, ("H", (0,)), ("P", (1,)), ("CNOT", (0, 1)))
    assert verify(c, mode, trials=10).max_infidelity <= 1e-9


# --- errors ------------------------------------------------------------------------------


def test_qubit_budget():
    with pytest.raises(QubitBudgetError):
        compile_circuit(circuit(2, ("CNOT", (0, 1))), "two-qubit-continuous", max_qubits=4)


def test_discrete_mode_rejects_inexpressible_gates(rng):
    with pytest.raises(UnsupportedGateError):
        compile_circuit(circuit(1, ("U1", (0,), random_unitary(1, rng))), CompileMode.discrete("S3"))


def test_single_measurement_mode_rejects_default_special_u():
    with pytest.raises(UnsupportedGateError):
        compile_circuit(circuit(2, ("H", (0,))), CompileMode("single-measurement"))


def test_unknown_mode_and_policy():
    with pytest.raises(ValueError):
        CompileMode("three-qubit")
    with pytest.raises(ValueError):
        compile_circuit(GateCircuit(1), "four-qubit", frame_policy="lazy")
    with pytest.raises(ValueError):
        execute(compile_circuit(GateCircuit(1), "four-qubit"), 0, frame_policy="lazy")


def test_verify_limits():
    with pytest.raises(ValueError):
        verify(GateCircuit(5), "four-qubit")
    with pytest.raises(ValueError):
        verify(GateCircuit(1), "four-qubit", trials=0)


# --- single-measurement plans ------------------------------------------------------------


@pytest.mark.parametrize("name", ["H", "P", "T", "X", "CNOT"])
def test_single_measurement_plans_match_gate_up_to_phase(name):
    gate = Gate(name, (0,) if name != "CNOT" else (0, 1))
    full = gate.unitary if name == "CNOT" else np.kron(gate.unitary, np.eye(2))
    plan = single_measurement_plan(gate, SU, gate.targets)
    m = plan_matrix(plan, SU)
    overlap = abs(np.trace(full.conj().T @ m)) / 4
    assert overlap == pytest.approx(1.0, abs=1e-9)


# --- execution properties ------------------------------------------------------------------


def test_seed_determinism():
    prog = compile_circuit(circuit(2, ("H", (0,)), ("T", (0,)), ("CNOT", (0, 1))), "two-qubit-continuous")
    a, b = execute(prog, 42), execute(prog, 42)
    assert a.trace == b.trace
    np.testing.assert_array_equal(a.state.amplitudes, b.state.amplitudes)


def test_different_traces_give_the_same_state():
    prog = compile_circuit(circuit(2, ("H", (0,)), ("T", (0,)), ("CNOT", (0, 1))), "four-qubit")
    runs = [execute(prog, s) for s in range(6)]
    assert len({tuple(e.outcome for e in r.trace) for r in runs}) > 1
    for r in runs[1:]:
        assert fidelity(r.state, runs[0].state) == pytest.approx(1.0, abs=1e-10)


@st.composite
def random_circuits(draw):
    n = draw(st.integers(1, 2))
    names = ["H", "P", "T", "X", "Y", "Z"] + (["CNOT"] if n == 2 else [])
    gates = []
    for _ in range(draw(st.integers(0, 4))):
        name = draw(st.sampled_from(names))
        targets = (0, 1) if name == "CNOT" else (draw(st.integers(0, n - 1)),)
        if name == "CNOT" and draw(st.booleans()):
            targets = (1, 0)
        gates.append((name, targets))
    return GateCircuit.from_list(n, gates)


@settings(max_examples=15)
@given(random_circuits(), seeds, st.sampled_from(["four-qubit", "continuous", "discrete-S3"]))
def test_eager_equals_deferred_plus_flush(c, seed, mode):
    prog = compile_circuit(c, MODES[mode])
    eager = execute(prog, seed, "eager")
    deferred = execute(prog, seed, "deferred")
    assert eager.residual_frame.is_identity()
    assert fidelity(eager.physical_state, eager.state) == pytest.approx(1.0, abs=1e-10)
    assert fidelity(eager.state, deferred.state) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=10)
@given(random_circuits())
def test_mode_equivalence(c):
    reference = c.apply()
    for mode in ("four-qubit", "continuous", "discrete-S3"):
        assert verify(c, MODES[mode], trials=20, seed=3).max_infidelity <= 1e-9
    assert fidelity(execute(compile_circuit(c, "four-qubit"), 0).state, reference) == pytest.approx(1.0, abs=1e-9)


def test_single_measurement_mode_matches_dense():
    c = circuit(2, ("H", (1,)), ("CNOT", (1, 0)), ("T", (0,)))
    assert verify(c, MODES["single"], trials=5).max_infidelity <= 1e-9


# --- verification -------------------------------------------------------------------------------


def test_discrete_s3_benchmark():
    c = circuit(2, ("H", (0,)), ("T", (0,)), ("CNOT", (0, 1)), ("H", (0,)))
    rep = verify(c, CompileMode.discrete("S3"), trials=200)
    assert rep.max_infidelity < 1e-9
    assert rep.trials == 200


@pytest.mark.parametrize("name", ONE_GATE_CLIFFORD_T + ["CNOT", "SWAP"])
def test_single_gates_in_four_qubit_mode_all_branches(name):
    targets = (0, 1) if name in ("CNOT", "SWAP") else (0,)
    c = circuit(2, ("H", (0,)), (name, targets))
    rep = verify(c, "four-qubit", trials=1, branches=True)
    possible = [b for b in rep.branches if b["possible"]]
    assert possible
    assert all(b["infidelity"] < 1e-10 for b in possible)


def test_branch_enumeration_covers_sixteen_outcomes():
    c = circuit(1, ("T", (0,)))
    prog = compile_circuit(c, "four-qubit")
    branches = enumerate_branches(prog, c.apply())
    assert len(branches) == 16
    assert all(b["possible"] and b["infidelity"] < 1e-10 for b in branches)


def test_report_contents():
    rep = verify(circuit(2, ("T", (0,)), ("CNOT", (0, 1))), "two-qubit-continuous", trials=4, seed=9)
    d = rep.as_dict()
    assert set(d) >= {"max_infidelity", "trials", "seed", "resource_counts"}
    assert d["seed"] == 9 and d["mode"] == {"name": "two-qubit-continuous"}
    assert d["resource_counts"]["mean_measurements"] > 0


def test_pauli_gadget_resource_accounting():
    """Deterministic Pauli gadgets cost 8 Bell measurements on average."""
    c = circuit(4, *[("Y", (q,)) for q in range(4)])
    prog = compile_circuit(c, "two-qubit-continuous", "eager")
    counts = []
    seed = 0
    while len(counts) < 10_000:
        counts += execute(prog, seed).resource_counts["pauli_flush_bell_measurements"]
        seed += 1
    assert abs(np.mean(counts) - 8) <= 1.0


def test_allocator_high_water_mark():
    c = circuit(4, ("H", (0,)), ("CNOT", (0, 1)), ("CNOT", (2, 3)), ("T", (3,)), ("CNOT", (1, 2)))
    for mode in ("four-qubit", "continuous", "discrete-S3"):
        prog = compile_circuit(c, MODES[mode])
        assert prog.metadata["high_water"] == prog.num_physical_qubits <= 12


def test_absorb_rules_appear_for_non_clifford_gates():
    prog = compile_circuit(circuit(1, ("X", (0,)), ("T", (0,))), "two-qubit-continuous")
    assert any(isinstance(r, AbsorbRule) for r in prog.feedforward)
    assert verify(circuit(1, ("X", (0,)), ("T", (0,))), "two-qubit-continuous", trials=10).max_infidelity < 1e-10
