"""Indirect gate constructions built from measurements and prepared ancillas.

Every gadget is described by a :class:`GadgetFragment` on *local* qubits:
inputs come first (``0 .. num_inputs-1``), followed by fresh qubits that
start in ``|0>``.  :func:`run_fragment` executes a fragment on the dense
engine, which is how all gadgets are validated.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import linalg
from .exceptions import NonTerminationError
from .linalg import (
    MeasurementSpec,
    PureState,
    apply_matrix,
    basis_spec,
    bell_basis_spec,
    bell_vector,
    check_unitary,
    extract_subsystem,
    measure_array,
    observable_spec,
    projector_spec,
)
from .pauli import PauliString, pauli, pauli_commutes, pauli_from_matrix_mod_phase, pauli_mul
from .stabilizer import StabilizerTableau, stabilizer_equal, tableau_measure

ACN_AMPLITUDES = np.zeros(16, dtype=complex)
ACN_AMPLITUDES[[0b0000, 0b0101, 0b1011, 0b1110]] = 0.5
ACN_AMPLITUDES.setflags(write=False)


def acn_state() -> PureState:
    """(|0000> + |0101> + |1011> + |1110>) / 2."""
    return PureState(4, ACN_AMPLITUDES)


# --- rotated Bell bases -----------------------------------------------------


@lru_cache(maxsize=None)
def _bell_pairs(k: int) -> np.ndarray:
    """Rows j = (j1, ..., jk) in base 4; qubits ordered (a1..ak, b1..bk)."""
    rows = []
    for js in itertools.product(range(4), repeat=k):
        v = np.ones(1, dtype=complex)
        for j in js:
            v = np.kron(v, bell_vector(j))
        # natural order is (a1, b1, a2, b2, ...); move to (a1..ak, b1..bk)
        t = v.reshape((2,) * (2 * k))
        order = [2 * i for i in range(k)] + [2 * i + 1 for i in range(k)]
        rows.append(t.transpose(order).reshape(-1))
    out = np.array(rows)
    out.setflags(write=False)
    return out


def rotated_bell_basis(u: np.ndarray) -> np.ndarray:
    """Rows ``(u^dagger (x) I)(Phi_{j1} (x) ... )`` for a k-qubit ``u``.

    Row ``j`` encodes the pair outcomes ``(j1, .., jk)`` in base 4, and the
    qubit order of each row is (a1..ak, b1..bk): the gate inputs first, then
    the Bell halves they are paired with.
    """
    u = np.asarray(u, dtype=complex)
    k = int(round(np.log2(u.shape[0])))
    full = np.kron(u.conj().T, np.eye(2**k))
    return _bell_pairs(k) @ full.T


def rotated_bell_spec(u: np.ndarray, label: str = "") -> MeasurementSpec:
    k = int(round(np.log2(np.asarray(u).shape[0])))
    return basis_spec(rotated_bell_basis(u), label=label or f"B_U+[{k}]")


def pair_pauli(j: int, k: int) -> PauliString:
    """``P_j = sigma_{j1} (x) ... (x) sigma_{jk}`` for a base-4 outcome index."""
    digits = []
    for _ in range(k):
        digits.append(j % 4)
        j //= 4
    return PauliString.from_sigma_indices(digits[::-1])


def pauli_index(p: PauliString) -> int:
    j = 0
    for s in p.sigma_indices:
        j = 4 * j + s
    return j


# --- fragments ---------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementInstruction:
    """One measurement box: ``spec`` on ``targets``, result written to ``register``."""

    spec: MeasurementSpec
    targets: tuple[int, ...]
    register: str

    def __post_init__(self):
        t = tuple(int(q) for q in self.targets)
        if len(set(t)) != len(t):
            raise ValueError(f"duplicate targets {t}")
        if len(t) != self.spec.arity:
            raise ValueError(f"{self.spec.arity}-qubit spec on {len(t)} targets")
        object.__setattr__(self, "targets", t)


@dataclass
class GadgetFragment:
    """A measurement recipe implementing ``target_gate`` on ``num_inputs`` qubits.

    ``correction_rule`` maps the tuple of outcomes (in the order of
    ``registers``) to the correction for the output qubits: a PauliString
    whenever the recipe needs only Pauli corrections, otherwise a unitary
    matrix.
    """

    name: str
    num_inputs: int
    num_qubits: int
    ancilla_prep: list[MeasurementInstruction]
    core_measurements: list[MeasurementInstruction]
    correction_rule: dict[tuple, object]
    outputs: tuple[int, ...]
    target_gate: np.ndarray = field(repr=False)
    # operator left on the outputs after correction, for recipes that hand
    # their byproduct to a Pauli frame instead of correcting it
    byproduct_rule: dict[tuple, object] | None = field(default=None, repr=False)

    @property
    def registers(self) -> tuple[str, ...]:
        return tuple(i.register for i in self.ancilla_prep + self.core_measurements)

    @property
    def qubits_consumed(self) -> int:
        return self.num_qubits - len(self.outputs)

    @property
    def qubits_produced(self) -> dict[int, int]:
        """Logical input index -> local output qubit."""
        return dict(enumerate(self.outputs))

    @property
    def pauli_only(self) -> bool:
        return all(isinstance(c, PauliString) for c in self.correction_rule.values())


@dataclass
class FragmentRun:
    output: PureState
    uncorrected: PureState
    outcomes: dict[str, object]
    probability: float
    correction: object


def run_fragment(frag: GadgetFragment, state: PureState, rng=None,
                 forced: Mapping[str, object] | None = None) -> FragmentRun:
    """Execute ``frag`` on ``state`` with the dense engine.

    Outcomes named in ``forced`` are post-selected; the rest are sampled.
    ``probability`` is the joint probability of all forced outcomes.
    """
    if state.num_qubits != frag.num_inputs:
        raise ValueError(f"{frag.name} takes {frag.num_inputs} input qubit(s)")
    forced = dict(forced or {})
    n = frag.num_qubits
    fresh = np.zeros(2 ** (n - frag.num_inputs), dtype=complex)
    fresh[0] = 1.0
    vec = np.kron(state.amplitudes, fresh)
    outcomes: dict[str, object] = {}
    prob = 1.0
    for ins in frag.ancilla_prep + frag.core_measurements:
        f = forced.get(ins.register)
        o, p, vec = measure_array(vec, n, ins.spec, ins.targets, rng=rng, forced=f)
        outcomes[ins.register] = o
        if f is not None:
            prob *= p
    raw = extract_subsystem(vec, n, frag.outputs)
    key = tuple(outcomes[r] for r in frag.registers)
    corr = frag.correction_rule[key]
    k = len(frag.outputs)
    if isinstance(corr, PauliString):
        fixed = corr.apply_to(raw, k)
    else:
        fixed = corr @ raw
    return FragmentRun(
        output=PureState(k, fixed / np.linalg.norm(fixed)),
        uncorrected=PureState(k, raw),
        outcomes=outcomes,
        probability=prob,
        correction=corr,
    )


def fragment_branches(frag: GadgetFragment):
    """Every outcome tuple of the fragment's registers."""
    spaces = [i.spec.outcomes for i in frag.ancilla_prep + frag.core_measurements]
    return itertools.product(*spaces)


def _inverse_product(*ps: PauliString) -> PauliString:
    """``(p1 p2 ... pn)^dagger`` up to phase, returned phase-free."""
    out = PauliString.identity(ps[0].num_qubits)
    for p in reversed(ps):
        out = pauli_mul(out, p)
    return out.with_phase(0)


def _conj_correction(u: np.ndarray, p: PauliString):
    """``u p u^dagger`` as a PauliString when possible, else as a matrix."""
    m = u @ p.to_matrix() @ u.conj().T
    q = pauli_from_matrix_mod_phase(m)
    return q if q is not None else m


def gadget_teleport() -> GadgetFragment:
    """Teleport qubit 0 to qubit 2 through a Bell pair prepared on (1, 2)."""
    prep = [MeasurementInstruction(bell_basis_spec(), (1, 2), "k")]
    core = [MeasurementInstruction(bell_basis_spec(), (0, 1), "j")]
    rule = {
        (k, j): _inverse_product(pair_pauli(k, 1), pair_pauli(j, 1))
        for k in range(4)
        for j in range(4)
    }
    return GadgetFragment("teleport", 1, 3, prep, core, rule, (2,), linalg.I2)


def gadget_1a(u) -> GadgetFragment:
    """Ancilla (I (x) u)|Phi_k>, Bell measurement, correction u s u^dagger."""
    u = check_unitary(u, 1)
    anc = basis_spec(np.array([np.kron(np.eye(2), u) @ bell_vector(m) for m in range(4)]),
                     label="B_(I(x)u)")
    prep = [MeasurementInstruction(anc, (1, 2), "k")]
    core = [MeasurementInstruction(bell_basis_spec(), (0, 1), "j")]
    rule = {}
    for k in range(4):
        for j in range(4):
            inv = _inverse_product(pair_pauli(k, 1), pair_pauli(j, 1))
            rule[(k, j)] = _conj_correction(u, inv)
    return GadgetFragment("1a", 1, 3, prep, core, rule, (2,), u)


def gadget_1b(u) -> GadgetFragment:
    """Plain Bell ancilla, measurement in the u-rotated Bell basis, Pauli correction."""
    u = check_unitary(u, 1)
    prep = [MeasurementInstruction(bell_basis_spec(), (1, 2), "k")]
    core = [MeasurementInstruction(rotated_bell_spec(u), (0, 1), "j")]
    rule = {
        (k, j): _inverse_product(pair_pauli(k, 1), pair_pauli(j, 1))
        for k in range(4)
        for j in range(4)
    }
    return GadgetFragment("1b", 1, 3, prep, core, rule, (2,), u)


def gadget_2a(u) -> GadgetFragment:
    """Two-qubit gate from the ancilla (I (x) I (x) u)|Phi_0>_{13}|Phi_0>_{24}.

    Local qubits: inputs 0, 1; ancilla 2, 3, 4, 5 with Bell halves (2, 4) and
    (3, 5); ``u`` acts on (4, 5), which become the outputs.
    """
    u = check_unitary(u, 2)
    anc_rows = _bell_pairs(2) @ np.kron(np.eye(4), u).T
    prep = [MeasurementInstruction(basis_spec(anc_rows, label="B_(II(x)u)"), (2, 3, 4, 5), "k")]
    core = [
        MeasurementInstruction(bell_basis_spec(), (0, 2), "j1"),
        MeasurementInstruction(bell_basis_spec(), (1, 3), "j2"),
    ]
    rule = {}
    for k in range(16):
        for j1 in range(4):
            for j2 in range(4):
                pj = PauliString.from_sigma_indices((j1, j2))
                rule[(k, j1, j2)] = _conj_correction(u, _inverse_product(pair_pauli(k, 2), pj))
    return GadgetFragment("2a", 2, 6, prep, core, rule, (4, 5), u)


def gadget_2b(u) -> GadgetFragment:
    """Two Bell pairs and one 4-qubit rotated Bell measurement; Pauli correction only."""
    u = check_unitary(u, 2)
    prep = [
        MeasurementInstruction(bell_basis_spec(), (2, 4), "k1"),
        MeasurementInstruction(bell_basis_spec(), (3, 5), "k2"),
    ]
    core = [MeasurementInstruction(rotated_bell_spec(u), (0, 1, 2, 3), "j")]
    rule = {}
    for k1 in range(4):
        for k2 in range(4):
            pk = PauliString.from_sigma_indices((k1, k2))
            for j in range(16):
                rule[(k1, k2, j)] = _inverse_product(pk, pair_pauli(j, 2))
    return GadgetFragment("2b", 2, 6, prep, core, rule, (4, 5), u)


# --- recursive Pauli gadget -------------------------------------------------


_BELL_SPEC = bell_basis_spec()
# index of sigma_k sigma_j up to phase
_SIGMA_PRODUCT = tuple(tuple(pair_pauli(k, 1).__mul__(pair_pauli(j, 1)).sigma_indices[0]
                             for j in range(4)) for k in range(4))


@lru_cache(maxsize=None)
def _sigma_rotated_spec(l: int) -> MeasurementSpec:
    return rotated_bell_spec(linalg.SIGMA[l])


@dataclass
class PauliGadgetRun:
    output: PureState
    rounds: int
    bell_measurements: int
    trace: list[dict]


def gadget_pauli_recursive(l: int, rng: np.random.Generator, max_rounds: int = 64,
                           state: PureState | None = None) -> PauliGadgetRun:
    """Apply ``sigma_l`` with Bell measurements only, retrying until no correction is left.

    Each round prepares a Bell pair |Phi_k> with one Bell measurement and
    teleports the data through it with a measurement in the basis
    ``{(sigma_target (x) I)|Phi_j>}``.  The residual byproduct
    ``sigma_k sigma_j`` becomes the next round's target; the loop stops once
    it is the identity.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    if state is None:
        state = PureState.zeros(1)
    bell = _BELL_SPEC
    # three physical slots: data plus a fresh pair, rotated every round
    vec = np.zeros(8, dtype=complex)
    vec[::4] = state.amplitudes
    data, b, c = 0, 1, 2
    target = l
    trace = []
    for rnd in range(1, max_rounds + 1):
        k, _, vec = measure_array(vec, 3, bell, (b, c), rng=rng)
        j, _, vec = measure_array(vec, 3, _sigma_rotated_spec(target), (data, b), rng=rng)
        residual = _SIGMA_PRODUCT[k][j]
        trace.append({"round": rnd, "target": target, "k": k, "j": j})
        data, b, c = c, data, b
        if residual == 0:
            out = extract_subsystem(vec, 3, (data,))
            return PauliGadgetRun(PureState(1, out), rnd, 2 * rnd, trace)
        target = residual
    raise NonTerminationError(f"Pauli gadget did not terminate within {max_rounds} rounds")


# --- |a_cn> preparation -----------------------------------------------------


def p_plus_minus_spec() -> MeasurementSpec:
    """{P+, P-}: projectors onto span{Phi_0, Phi_1} and span{Phi_2, Phi_3}."""
    b = [bell_vector(j) for j in range(4)]
    p_plus = np.outer(b[0], b[0].conj()) + np.outer(b[1], b[1].conj())
    p_minus = np.outer(b[2], b[2].conj()) + np.outer(b[3], b[3].conj())
    return projector_spec([p_plus, p_minus], label="P+-")


def acn_candidates() -> dict[tuple[int, int], np.ndarray]:
    """(sigma_k (x) sigma_l (x) I (x) I)|a_cn> for all 16 (k, l)."""
    out = {}
    for k in range(4):
        for l in range(4):
            p = PauliString.from_sigma_indices((k, l, 0, 0))
            out[(k, l)] = p.apply_to(ACN_AMPLITUDES.copy())
    return out


def classify_acn_branch(state: PureState, tol: float = linalg.STRUCT_TOL) -> tuple[int, int]:
    """Find the unique (k, l) with state == (sigma_k sigma_l I I)|a_cn> up to phase."""
    hits = []
    for kl, v in acn_candidates().items():
        f = abs(np.vdot(v, state.amplitudes)) ** 2
        if f >= 1 - tol:
            hits.append(kl)
    if len(hits) != 1:
        raise AssertionError(f"expected exactly one matching branch, found {hits}")
    return hits[0]


@dataclass
class AcnRun:
    state: PureState
    trace: list[tuple[str, object, float]]
    branch: tuple[int, int]
    probability: float


def _fix(vec, n, m, q):
    return apply_matrix(vec, n, m, [q])


def prepare_acn(rng: np.random.Generator | None = None, post_select: bool = False,
                branch: tuple[int, int] | None = None) -> AcnRun:
    """Prepare the CNOT ancilla with one- and two-qubit measurements.

    Step 1 builds (|0>+|1>)|0>(|00>+|11>)/2 from Z, X and Bell measurements
    with Pauli fix-ups; step 2 measures {P+, P-} on qubits 2, 3; step 3
    measures the Z parity of qubits 1, 3 (qubits are 1-based in these names,
    0-based in ``targets``).

    ``post_select`` forces the outcomes giving |a_cn> itself; ``branch``
    forces ``(P+- index, parity)`` instead.  Step-1 outcomes are always
    sampled, so ``rng`` is needed either way.
    """
    if post_select:
        branch = (0, 1)
    n = 4
    vec = np.zeros(16, dtype=complex)
    vec[0] = 1.0
    trace = []

    def step(spec, targets, reg, forced=None):
        nonlocal vec
        o, p, vec = measure_array(vec, n, spec, targets, rng=rng, forced=forced)
        trace.append((reg, o, p))
        return o, p

    zspec = observable_spec(pauli("Z"))
    xspec = observable_spec(pauli("X"))
    for q, reg in ((0, "z1"), (1, "z2")):
        o, _ = step(zspec, (q,), reg)
        if o == -1:
            vec = _fix(vec, n, linalg.X, q)
    o, _ = step(xspec, (0,), "x1")
    if o == -1:
        vec = _fix(vec, n, linalg.Z, 0)
    k, _ = step(bell_basis_spec(), (2, 3), "bell34")
    if k:
        vec = _fix(vec, n, linalg.SIGMA[k], 3)
    _, p2 = step(p_plus_minus_spec(), (1, 2), "p23", forced=None if branch is None else branch[0])
    _, p3 = step(observable_spec(pauli("ZZ")), (0, 2), "parity13",
                 forced=None if branch is None else branch[1])
    state = PureState(4, vec)
    return AcnRun(state, trace, classify_acn_branch(state), p2 * p3)


def prepare_acn_stabilizer(outcomes: tuple[int, int] = (1, 1)) -> list[StabilizerTableau]:
    """Tableaus before, between and after measuring IXXI then ZIZI."""
    t0 = StabilizerTableau.from_labels(["XIII", "IZII", "IIXX", "IIZZ"])
    _, t1, _ = tableau_measure(t0, pauli("IXXI"), outcomes[0])
    _, t2, _ = tableau_measure(t1, pauli("ZIZI"), outcomes[1])
    return [t0, t1, t2]


@lru_cache(maxsize=None)
def acn_branch_pauli(xx_outcome: int, parity_outcome: int) -> PauliString:
    """The Pauli E on qubits 1, 2 with branch state = (E (x) I (x) I)|a_cn>.

    Found with the tableau engine: E must flip exactly the generator signs in
    which the branch tableau differs from the (+1, +1) tableau.
    """
    ideal = prepare_acn_stabilizer((1, 1))[-1]
    branch = prepare_acn_stabilizer((xx_outcome, parity_outcome))[-1]
    for k in range(4):
        for l in range(4):
            e = PauliString.from_sigma_indices((k, l, 0, 0))
            flipped = StabilizerTableau(tuple(
                g if pauli_commutes(e, g) else -g for g in ideal.generators
            ))
            if stabilizer_equal(flipped, branch):
                return PauliString.from_sigma_indices((k, l))
    raise AssertionError("no single-qubit-pair Pauli explains this branch")

