import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from measqc import linalg
from measqc.exceptions import ImpossibleBranchError, NonTerminationError, NotUnitaryError
from measqc.gadgets import (
    ACN_AMPLITUDES,
    acn_state,
    classify_acn_branch,
    fragment_branches,
    gadget_1a,
    gadget_1b,
    gadget_2a,
    gadget_2b,
    gadget_pauli_recursive,
    gadget_teleport,
    p_plus_minus_spec,
    pair_pauli,
    pauli_index,
    prepare_acn,
    prepare_acn_stabilizer,
    rotated_bell_basis,
    run_fragment,
)
from measqc.linalg import PureState, equal_up_to_global_phase, fidelity, random_state, random_unitary, tensor
from measqc.pauli import PauliString, clifford_membership
from measqc.stabilizer import StabilizerTableau, stabilizer_equal, tableau_to_state

seeds = st.integers(0, 2**32 - 1)
S = 1 / np.sqrt(2)


def target_output(frag, psi):
    return PureState(psi.num_qubits, frag.target_gate @ psi.amplitudes)


def all_branch_runs(frag, psi):
    for values in fragment_branches(frag):
        try:
            yield run_fragment(frag, psi, forced=dict(zip(frag.registers, values)))
        except ImpossibleBranchError:
            continue


# --- helpers -------------------------------------------------------------------


def test_pair_pauli_and_index_are_inverse():
    for j in range(16):
        assert pauli_index(pair_pauli(j, 2)) == j
    assert str(pair_pauli(7, 2)) == "+XZ"


def test_rotated_basis_of_identity_is_bell_basis():
    np.testing.assert_allclose(rotated_bell_basis(np.eye(2)),
                               np.array([linalg.bell_vector(j) for j in range(4)]))


def test_fragment_validation():
    with pytest.raises(NotUnitaryError):
        gadget_1a(np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValueError):
        run_fragment(gadget_teleport(), PureState.zeros(2))


# --- teleportation ---------------------------------------------------------------


def test_teleport_zero_before_correction():
    run = run_fragment(gadget_teleport(), PureState.zeros(1), forced={"k": 0, "j": 1})
    assert equal_up_to_global_phase(run.uncorrected, PureState.basis("1"))


def test_teleport_outcomes_are_uniform(rng):
    psi = random_state(1, rng)
    for j in range(4):
        run = run_fragment(gadget_teleport(), psi, forced={"k": 0, "j": j})
        # a Bell measurement on fresh |00> gives k = 0 with probability 1/2
        assert run.probability / 0.5 == pytest.approx(0.25, abs=1e-12)


@settings(max_examples=20)
@given(seeds)
def test_teleport_restores_input(seed):
    rng = np.random.default_rng(seed)
    psi = random_state(1, rng)
    run = run_fragment(gadget_teleport(), psi, rng)
    assert fidelity(run.output, psi) == pytest.approx(1.0, abs=1e-10)


# --- one-qubit methods -------------------------------------------------------------


def test_1a_hadamard_on_zero():
    for run in all_branch_runs(gadget_1a(linalg.H), PureState.zeros(1)):
        assert fidelity(run.output, PureState(1, [S, S])) == pytest.approx(1.0, abs=1e-10)


def test_1a_identity_matches_teleport(rng):
    a, b = gadget_1a(np.eye(2)), gadget_teleport()
    assert {k: str(v) for k, v in a.correction_rule.items()} == {k: str(v) for k, v in b.correction_rule.items()}


def test_1a_clifford_corrections_are_pauli():
    assert gadget_1a(linalg.Z).pauli_only
    assert gadget_1a(linalg.H).pauli_only
    assert not gadget_1a(linalg.T).pauli_only


def test_1b_hadamard_on_random_state(rng):
    psi = random_state(1, rng)
    frag = gadget_1b(linalg.H)
    for run in all_branch_runs(frag, psi):
        assert fidelity(run.output, target_output(frag, psi)) == pytest.approx(1.0, abs=1e-10)


def test_1b_with_nonzero_bell_ancilla(rng):
    psi = random_state(1, rng)
    frag = gadget_1b(linalg.T)
    for k in (0, 3):  # the outcomes reachable from fresh |00>
        run = run_fragment(frag, psi, rng, forced={"k": k})
        assert fidelity(run.output, target_output(frag, psi)) == pytest.approx(1.0, abs=1e-10)


def test_1b_pauli_z_basis_is_relabeled_bell_basis():
    rows = rotated_bell_basis(linalg.Z)
    bell = np.array([linalg.bell_vector(j) for j in range(4)])
    overlap = np.abs(rows.conj() @ bell.T) ** 2
    assert np.allclose(np.sort(overlap, axis=1)[:, -1], 1.0)
    assert sorted(np.argmax(overlap, axis=1)) == [0, 1, 2, 3]


# --- two-qubit methods -------------------------------------------------------------


def test_2a_cnot_corrections_are_pauli():
    assert gadget_2a(linalg.CNOT).pauli_only


def test_2a_non_clifford_needs_non_pauli_correction(rng):
    u = random_unitary(2, rng)
    assert not clifford_membership(u)
    assert not gadget_2a(u).pauli_only


def test_2a_cnot_makes_bell_pair(rng):
    start = PureState(2, [S, 0, S, 0])
    frag = gadget_2a(linalg.CNOT)
    for _ in range(10):
        run = run_fragment(frag, start, rng)
        assert fidelity(run.output, linalg.make_bell_state(0)) == pytest.approx(1.0, abs=1e-10)


def test_2a_identity_is_double_teleport(rng):
    psi = random_state(2, rng)
    run = run_fragment(gadget_2a(np.eye(4)), psi, rng)
    assert fidelity(run.output, psi) == pytest.approx(1.0, abs=1e-10)


def test_2b_all_outcomes_sound_and_uniform(rng):
    u = random_unitary(2, rng)
    psi = random_state(2, rng)
    frag = gadget_2b(u)
    assert frag.pauli_only
    for j in range(16):
        run = run_fragment(frag, psi, rng, forced={"k1": 0, "k2": 0, "j": j})
        assert run.probability / 0.25 == pytest.approx(1 / 16, abs=1e-12)
        assert fidelity(run.output, target_output(frag, psi)) == pytest.approx(1.0, abs=1e-10)


def test_2b_swap_exchanges_qubits(rng):
    a, b = random_state(1, rng), random_state(1, rng)
    run = run_fragment(gadget_2b(linalg.SWAP), tensor(a, b), rng)
    assert fidelity(run.output, tensor(b, a)) == pytest.approx(1.0, abs=1e-10)


def test_1b_and_2b_corrections_are_pauli_strings(rng):
    for frag in (gadget_1b(random_unitary(1, rng)), gadget_2b(random_unitary(2, rng))):
        assert all(isinstance(c, PauliString) for c in frag.correction_rule.values())


def test_correction_rules_cover_every_outcome(rng):
    for frag in (gadget_1a(linalg.T), gadget_1b(linalg.T), gadget_2a(linalg.CNOT), gadget_2b(linalg.CNOT)):
        assert set(frag.correction_rule) == set(fragment_branches(frag))
        assert len(set(frag.outputs)) == len(frag.outputs)


@settings(max_examples=15)
@given(seeds, st.sampled_from(["1a", "1b", "2a", "2b"]))
def test_gadget_soundness(seed, method):
    rng = np.random.default_rng(seed)
    build = {"1a": gadget_1a, "1b": gadget_1b, "2a": gadget_2a, "2b": gadget_2b}[method]
    n = int(method[0])
    frag = build(random_unitary(n, rng))
    psi = random_state(n, rng)
    for _ in range(5):
        run = run_fragment(frag, psi, rng)
        assert fidelity(run.output, target_output(frag, psi)) == pytest.approx(1.0, abs=1e-10)


# --- recursive Pauli gadget ----------------------------------------------------------


@pytest.mark.parametrize("l", range(4))
def test_pauli_gadget_applies_sigma(l, rng):
    psi = random_state(1, rng)
    for _ in range(10):
        run = gadget_pauli_recursive(l, rng, state=psi)
        want = PureState(1, linalg.SIGMA[l] @ psi.amplitudes)
        assert fidelity(run.output, want) == pytest.approx(1.0, abs=1e-10)
        assert run.bell_measurements == 2 * run.rounds == 2 * len(run.trace)


def test_pauli_gadget_round_success_rate():
    rng = np.random.default_rng(17)
    runs = [gadget_pauli_recursive(1, rng) for _ in range(4000)]
    first = np.mean([r.rounds == 1 for r in runs])
    assert abs(first - 0.25) <= 3 * np.sqrt(0.25 * 0.75 / 4000)


def test_pauli_gadget_nontermination_is_explicit():
    rng = np.random.default_rng(0)
    with pytest.raises(NonTerminationError):
        for _ in range(100):
            gadget_pauli_recursive(2, rng, max_rounds=1)
    with pytest.raises(ValueError):
        gadget_pauli_recursive(1, rng, max_rounds=0)


# --- the CNOT ancilla ------------------------------------------------------------------


def test_acn_amplitudes():
    assert np.count_nonzero(ACN_AMPLITUDES) == 4
    assert fidelity(acn_state(), PureState.from_amplitudes(ACN_AMPLITUDES)) == 1.0


def test_step_two_probabilities_on_step_one_state():
    step1 = tensor(tensor(PureState(1, [S, S]), PureState.zeros(1)), linalg.make_bell_state(0))
    probs = linalg.outcome_probabilities(step1, p_plus_minus_spec(), [1, 2])
    assert probs[0] == pytest.approx(0.5, abs=1e-12)
    _, after = linalg.post_select(step1, p_plus_minus_spec(), [1, 2], 0)
    parity = linalg.outcome_probabilities(after, linalg.observable_spec(PauliString.from_label("ZZ")), [0, 2])
    assert parity[1] == pytest.approx(0.5, abs=1e-12)


def test_post_selected_acn_is_exact(rng):
    run = prepare_acn(rng, post_select=True)
    assert fidelity(run.state, acn_state()) == pytest.approx(1.0, abs=1e-12)
    assert run.branch == (0, 0)
    assert [r for r, _, _ in run.trace] == ["z1", "z2", "x1", "bell34", "p23", "parity13"]


@pytest.mark.parametrize("branch", list(itertools.product((0, 1), (1, -1))))
def test_every_branch_is_a_pauli_shifted_acn(branch, rng):
    run = prepare_acn(rng, branch=branch)
    assert run.probability == pytest.approx(0.25, abs=1e-10)
    assert classify_acn_branch(run.state) == run.branch


def test_classify_rejects_foreign_state():
    with pytest.raises(AssertionError):
        classify_acn_branch(PureState.zeros(4))


def test_stabilizer_preparation_matches_dense():
    t0, t1, t2 = prepare_acn_stabilizer()
    assert t0.labels == ["+XIII", "+IZII", "+IIXX", "+IIZZ"]
    assert stabilizer_equal(t1, StabilizerTableau.from_labels(["XIII", "IXXI", "IIXX", "IZZZ"]))
    assert stabilizer_equal(t2, StabilizerTableau.from_labels(["XIXX", "ZIZI", "IXIX", "IZZZ"]))
    assert equal_up_to_global_phase(tableau_to_state(t2), acn_state())
