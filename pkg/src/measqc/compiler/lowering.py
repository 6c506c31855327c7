"""Lower a gate circuit to a measurement-only program.

Every gate becomes a gadget made of measurements plus frame rules.  Qubit
labels are handed out by a recycling allocator; the executor maps labels to
physical qubits and may permute that map when a data qubit teleports inside
a repeat block.

Modes:

``four-qubit``
    method 2b for every gate: two Bell pairs and one four-qubit rotated Bell
    measurement.  A one-qubit gate ``G`` runs as ``G (x) I`` with a partner.
``two-qubit-continuous``
    method 1b for one-qubit gates and method 2a with the CNOT ancilla for
    CNOT.  Only the Bell basis, rotated two-qubit Bell bases, Z, X, ZZ and
    the two-projector measurement are used.
``two-qubit-discrete``
    as above but every observable is drawn from a measurement set; gates are
    synthesized over the set's one-qubit alphabet.
``single-measurement``
    only Z initialization and the four-qubit measurement ``B_{U^dagger}`` of a
    SpecialU; gates are words over Paulis and ``U^dagger P U`` realized by
    random walks.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import linalg
from ..exceptions import QubitBudgetError, UnsupportedGateError
from ..gadgets import acn_branch_pauli, pair_pauli
from ..measurement_sets import (
    Observable,
    ObservableSet,
    SpecialU,
    absorbed_variants,
    build_set,
    rotated_bell_observables,
)
from ..pauli import CliffordGate, PauliString, clifford_membership, conjugate_by_clifford
from .ir import (
    PAULI_GATES,
    AbsorbRule,
    FrameRule,
    Gate,
    GateCircuit,
    MeasurementProgram,
    ProgramMeasurement,
    RepeatBlock,
)
from .specs import spec_bell, spec_init, spec_p_plus_minus, spec_pauli, spec_rotated
from .synthesis import equal_up_to_phase, find_conjugator, find_word, pauli_prefix, word_matrix

MODES = ("four-qubit", "two-qubit-continuous", "two-qubit-discrete", "single-measurement")

_SIGMA_LETTER = "IXYZ"


@dataclass(frozen=True)
class CompileMode:
    name: str
    observable_set: ObservableSet | None = None
    special_u: SpecialU | None = None

    def __post_init__(self):
        if self.name not in MODES:
            raise ValueError(f"unknown mode {self.name!r}; choose from {MODES}")
        if self.name == "two-qubit-discrete" and self.observable_set is None:
            object.__setattr__(self, "observable_set", build_set("S3"))
        if self.name == "single-measurement" and self.special_u is None:
            object.__setattr__(self, "special_u", SpecialU())

    @classmethod
    def discrete(cls, set_name: str = "S3", theta: float | None = None, u=None) -> "CompileMode":
        return cls("two-qubit-discrete", observable_set=build_set(set_name, theta, u))

    @classmethod
    def single(cls, theta: float | None = None, phi: float | None = None) -> "CompileMode":
        su = SpecialU() if theta is None else SpecialU(theta, SpecialU().phi if phi is None else phi)
        return cls("single-measurement", special_u=su)

    def describe(self) -> dict:
        out = {"name": self.name}
        if self.observable_set is not None:
            out["set"] = self.observable_set.name
            if self.observable_set.theta is not None:
                out["theta"] = self.observable_set.theta
        if self.special_u is not None:
            out["theta"] = self.special_u.theta
            out["phi"] = self.special_u.phi
        return out


def _sigma(j: int) -> PauliString:
    return PauliString.from_sigma_indices([j])


_BELL_TABLE = {(k,): _sigma(k) for k in range(4)}
_PAIR_TABLE = {(j,): pair_pauli(j, 2) for j in range(16)}


class _Builder:
    def __init__(self, max_qubits: int):
        self.instructions: list = []
        self.feedforward: list = []
        self.free: list[int] = []
        self.next_label = 0
        self.max_qubits = max_qubits
        self.loc: dict[int, int] = {}
        self._reg = 0

    # allocation ---------------------------------------------------------

    def alloc(self) -> int:
        if self.free:
            return heapq.heappop(self.free)
        if self.next_label >= self.max_qubits:
            raise QubitBudgetError(f"program needs more than {self.max_qubits} physical qubits")
        self.next_label += 1
        return self.next_label - 1

    def release(self, *labels: int) -> None:
        for q in labels:
            heapq.heappush(self.free, q)

    # emission -----------------------------------------------------------

    def measure(self, spec, targets, role: str = "normal", tag: str = "") -> str:
        reg = f"m{self._reg}"
        self._reg += 1
        self.instructions.append(ProgramMeasurement(spec, tuple(targets), reg, role, tag))
        return reg

    def frame(self, qubits, registers, table) -> None:
        self.feedforward.append(
            FrameRule(len(self.instructions) - 1, tuple(qubits), tuple(registers), dict(table))
        )

    def pauli(self, qubits, p: PauliString) -> None:
        if not p.is_identity():
            self.frame(qubits, (), {(): p.with_phase(0)})

    def absorb(self, gate: np.ndarray, qubits) -> None:
        self.feedforward.append(AbsorbRule(len(self.instructions), np.array(gate), tuple(qubits)))

    def repeat(self, block: RepeatBlock) -> None:
        self.instructions.append(block)

    def init(self, q: int) -> None:
        self.measure(spec_init(), (q,), role="init", tag="init")


# --- shared gadgets ------------------------------------------------------------


def _bell_pair(b: _Builder, q1: int, q2: int, tag: str = "bell-prep") -> None:
    """Bell measurement on two initialized qubits; frame brings the pair to Phi_0."""
    reg = b.measure(spec_bell(), (q1, q2), tag=tag)
    b.frame((q2,), (reg,), _BELL_TABLE)


def _fresh_pair(b: _Builder) -> tuple[int, int]:
    q1, q2 = b.alloc(), b.alloc()
    b.init(q1)
    b.init(q2)
    _bell_pair(b, q1, q2)
    return q1, q2


def _teleport_1b(b: _Builder, q: int, gate: np.ndarray, tag: str) -> int:
    """Method 1b on label ``q``; returns the output label."""
    r, c = _fresh_pair(b)
    if not clifford_membership(gate):
        b.absorb(gate, (q,))
    reg = b.measure(spec_rotated(gate, label=tag), (q, r), tag="core-1b")
    b.frame((c,), (reg,), _BELL_TABLE)
    b.release(q, r)
    return c


def _gadget_2b(b: _Builder, q1: int, q2: int, gate: np.ndarray, tag: str) -> tuple[int, int]:
    r1, c1 = _fresh_pair(b)
    r2, c2 = _fresh_pair(b)
    if not clifford_membership(gate):
        b.absorb(gate, (q1, q2))
    reg = b.measure(spec_rotated(gate, label=tag), (q1, q2, r1, r2), tag="core-2b")
    b.frame((c1, c2), (reg,), _PAIR_TABLE)
    b.release(q1, q2, r1, r2)
    return c1, c2


@lru_cache(maxsize=None)
def _cnot_frame_table() -> dict:
    """Bell outcomes (j1, j2) -> CNOT P_j CNOT, the byproduct left by method 2a."""
    table = {}
    for j1 in range(4):
        for j2 in range(4):
            p = PauliString.from_sigma_indices((j1, j2))
            table[(j1, j2)] = conjugate_by_clifford(p, CliffordGate("CNOT", (0, 1))).with_phase(0)
    return table


def _acn(b: _Builder, discrete: bool) -> tuple[int, int, int, int]:
    """Prepare the CNOT ancilla on four labels (a1, a2, a3, a4)."""
    a2, a3, a4 = b.alloc(), b.alloc(), b.alloc()
    for q in (a2, a3, a4):
        b.init(q)
    if discrete:
        # |+> as H applied to |0>, keeping to the measurement set
        x = b.alloc()
        b.init(x)
        a1 = _teleport_1b(b, x, linalg.H, "B_H+")
    else:
        a1 = b.alloc()
        b.init(a1)
        reg = b.measure(spec_pauli("X"), (a1,), tag="acn-x")
        b.frame((a1,), (reg,), {(1,): _sigma(0), (-1,): _sigma(3)})
    _bell_pair(b, a3, a4, tag="acn-bell")
    if discrete:
        p_reg = b.measure(spec_pauli("XX"), (a2, a3), tag="acn-pm")
        xx_value = {1: 1, -1: -1}
    else:
        p_reg = b.measure(spec_p_plus_minus(), (a2, a3), tag="acn-pm")
        xx_value = {0: 1, 1: -1}
    par_reg = b.measure(spec_pauli("ZZ"), (a1, a3), tag="acn-parity")
    table = {
        (p, par): acn_branch_pauli(xx, par)
        for p, xx in xx_value.items()
        for par in (1, -1)
    }
    b.frame((a1, a2), (p_reg, par_reg), table)
    return a1, a2, a3, a4


def _cnot_2a(b: _Builder, q1: int, q2: int, discrete: bool) -> tuple[int, int]:
    a1, a2, a3, a4 = _acn(b, discrete)
    r1 = b.measure(spec_bell(), (q1, a1), tag="core-2a")
    r2 = b.measure(spec_bell(), (q2, a2), tag="core-2a")
    b.frame((a3, a4), (r1, r2), _cnot_frame_table())
    b.release(q1, q2, a1, a2)
    return a3, a4


def _bell_flush(b: _Builder, q: int) -> None:
    pool = (b.alloc(), b.alloc())
    b.repeat(RepeatBlock("bell-flush", (q,), pool, optional=True, tag="flush"))
    b.release(*pool)


# --- mode lowerings -------------------------------------------------------------


def _lower_four_qubit(b: _Builder, circuit: GateCircuit, n_eff: int) -> None:
    for g in circuit.gates:
        if g.name in PAULI_GATES:
            b.pauli((b.loc[g.targets[0]],), _sigma(PAULI_GATES[g.name]))
            touched = g.targets
        elif g.name == "SWAP":
            q1, q2 = g.targets
            b.loc[q1], b.loc[q2] = b.loc[q2], b.loc[q1]
            touched = ()
        else:
            if len(g.targets) == 1:
                q = g.targets[0]
                partner = (q + 1) % n_eff
                qs = (q, partner)
                w = np.kron(g.unitary, np.eye(2))
            else:
                qs = g.targets
                w = g.unitary
            c1, c2 = _gadget_2b(b, b.loc[qs[0]], b.loc[qs[1]], w, f"B_{g.name}+")
            b.loc[qs[0]], b.loc[qs[1]] = c1, c2
            touched = qs
        for q in touched:
            _bell_flush(b, b.loc[q])


def _lower_two_qubit(b: _Builder, circuit: GateCircuit, mode: CompileMode) -> None:
    discrete = mode.name == "two-qubit-discrete"
    if discrete:
        s = mode.observable_set
        alphabet = {name: s.gate_matrix(name) for name in s.alphabet}
    for g in circuit.gates:
        if g.name in PAULI_GATES:
            b.pauli((b.loc[g.targets[0]],), _sigma(PAULI_GATES[g.name]))
            touched = g.targets
        elif g.name == "SWAP":
            q1, q2 = g.targets
            b.loc[q1], b.loc[q2] = b.loc[q2], b.loc[q1]
            touched = ()
        elif g.name == "CNOT":
            c1, c2 = _cnot_2a(b, b.loc[g.targets[0]], b.loc[g.targets[1]], discrete)
            b.loc[g.targets[0]], b.loc[g.targets[1]] = c1, c2
            touched = g.targets
        elif g.name == "U2":
            raise UnsupportedGateError(f"{mode.name} mode implements no two-qubit gate other than CNOT and SWAP")
        else:
            q = g.targets[0]
            if not discrete:
                b.loc[q] = _teleport_1b(b, b.loc[q], g.unitary, f"B_{g.name}+")
            else:
                word = find_word(g.unitary, alphabet)
                if word is None:
                    raise UnsupportedGateError(
                        f"{g.name} is not a short word over {sorted(alphabet)} for set {s.name}"
                    )
                for letter in word.letters:
                    b.loc[q] = _teleport_1b(b, b.loc[q], alphabet[letter], f"B_{letter}+")
                b.pauli((b.loc[q],), word.pauli)
            touched = (q,)
        for q in touched:
            _bell_flush(b, b.loc[q])


# single-measurement ---------------------------------------------------------------
#
# A plan is a list of ops on the two qubits (0, 1) of a register:
#   ("pauli", qubit, letter)        frame update
#   ("upu", (c, t), label)          U^dagger P U with U controlled by c; ``label``
#                                   is read in (c, t) order
# U^2 on (c, t) is ("upu", (c, t), "IZ") followed by Z on t.

_CONJ = {"A": "I", "a": "Z", "B": "X", "b": "Y"}
_INVERSE = {"A": "a", "a": "A", "B": "b", "b": "B"}


def _u_on(su: SpecialU, orient) -> np.ndarray:
    u = su.matrix
    return u if tuple(orient) == (0, 1) else linalg.SWAP @ u @ linalg.SWAP


def _u2_ops(c: int, t: int) -> list:
    return [("upu", (c, t), "IZ"), ("pauli", t, "Z")]


def _letter_ops(letter: str, c: int, t: int) -> list:
    conj = _CONJ[letter]
    ops = []
    if conj != "I":
        ops.append(("pauli", t, conj))
    ops += [("pauli", c, "X")] + _u2_ops(c, t) + [("pauli", c, "X")] + _u2_ops(c, t)
    if conj != "I":
        ops.append(("pauli", t, conj))
    return ops


def plan_matrix(ops, su: SpecialU) -> np.ndarray:
    m = np.eye(4, dtype=complex)
    for op in ops:
        if op[0] == "pauli":
            f = PauliString.single(2, op[1], op[2]).to_matrix()
        else:
            u = _u_on(su, op[1])
            label = op[2] if tuple(op[1]) == (0, 1) else op[2][::-1]
            p = PauliString.from_label(label).to_matrix()
            f = u.conj().T @ p @ u
        m = f @ m
    return m


def _letter_matrices(su: SpecialU, c: int, t: int) -> dict[str, np.ndarray] | None:
    """One-qubit action on ``t`` of each letter; None if a letter touches ``c``."""
    out = {}
    for name in _CONJ:
        m = plan_matrix(_letter_ops(name, c, t), su)
        one = m[:2, :2] if t == 1 else m[::2, ::2]
        full = np.kron(np.eye(2), one) if t == 1 else np.kron(one, np.eye(2))
        if np.max(np.abs(m - full)) > 1e-9:
            return None
        out[name] = one
    return out


def _embed1(g: np.ndarray, t: int) -> np.ndarray:
    return np.kron(np.eye(2), g) if t == 1 else np.kron(g, np.eye(2))


def _single_qubit_plan(g: np.ndarray, t: int, su: SpecialU) -> list | None:
    c = 1 - t
    letters = _letter_matrices(su, c, t)
    if letters is None:
        return None
    word = find_word(g, letters)
    if word is None:
        return None
    ops = []
    for letter in word.letters:
        ops += _letter_ops(letter, c, t)
    if not word.pauli.is_identity():
        ops.append(("pauli", t, word.pauli.letters))
    return ops


def _cnot_plan(c: int, t: int, su: SpecialU) -> list | None:
    """CNOT(c -> t) = (I (x) V^dag) phase_c (C-R^2)^m (I (x) V) with V X V^dag ~ R^(2m)."""
    letters_t = _letter_matrices(su, c, t)
    if letters_t is None:
        return None
    r2 = su.R @ su.R
    power = np.eye(2, dtype=complex)
    for m in range(1, 17):
        power = r2 @ power
        # power = e^{i alpha} N with N Hermitian, traceless and unitary
        if abs(np.trace(power)) > 1e-9:
            continue
        ph = np.sqrt(np.linalg.det(power) * -1 + 0j)
        n_op = power / ph
        if np.max(np.abs(n_op - n_op.conj().T)) > 1e-9:
            continue
        found = find_conjugator(n_op, letters_t)
        if found is None:
            continue
        v_letters, sign = found
        alpha = np.angle(ph) + (np.pi if sign < 0 else 0.0)
        fix = np.diag([1.0, np.exp(-1j * alpha)])
        fix_plan = _single_qubit_plan(fix, c, su)
        if fix_plan is None:
            continue
        ops = []
        for letter in v_letters:
            ops += _letter_ops(letter, c, t)
        for _ in range(m):
            ops += _u2_ops(c, t)
        ops += fix_plan
        for letter in reversed(v_letters):
            ops += _letter_ops(_INVERSE[letter], c, t)
        return ops
    return None


def _u2_gate_plan(g: np.ndarray, su: SpecialU) -> list | None:
    """Two-qubit gates of the form Q U^dagger P U in either orientation."""
    for orient in ((0, 1), (1, 0)):
        u = _u_on(su, orient)
        for label in ("IZ", "ZI", "ZZ", "IX", "XI", "XX", "IY", "YI", "YY",
                      "XY", "YX", "XZ", "ZX", "YZ", "ZY"):
            p = PauliString.from_label(label).to_matrix()
            q = pauli_prefix(g, u.conj().T @ p @ u)
            if q is not None:
                ops = [("upu", orient, label if orient == (0, 1) else label[::-1])]
                for i, letter in enumerate(q.letters):
                    if letter != "I":
                        ops.append(("pauli", i, letter))
                return ops
    return None


def single_measurement_plan(gate: Gate, su: SpecialU, local_targets) -> list:
    """Plan for ``gate`` on register positions ``local_targets``; raises if none exists."""
    plan = None
    if len(local_targets) == 1:
        plan = _single_qubit_plan(gate.unitary, local_targets[0], su)
        full = _embed1(gate.unitary, local_targets[0])
    elif gate.name == "CNOT":
        plan = _cnot_plan(local_targets[0], local_targets[1], su)
        full = linalg.CNOT if tuple(local_targets) == (0, 1) else linalg.SWAP @ linalg.CNOT @ linalg.SWAP
    else:
        g = gate.unitary
        full = g if tuple(local_targets) == (0, 1) else linalg.SWAP @ g @ linalg.SWAP
        plan = _u2_gate_plan(full, su)
    if plan is None:
        raise UnsupportedGateError(
            f"{gate.name} has no exact word over Paulis and U^dagger P U for "
            f"SpecialU(theta={su.theta!r}, phi={su.phi!r})"
        )
    if not equal_up_to_phase(plan_matrix(plan, su), full):
        raise AssertionError(f"synthesized plan for {gate.name} does not match the gate")
    return plan


def _lower_single(b: _Builder, circuit: GateCircuit, su: SpecialU, n_eff: int) -> None:
    regs = [(2 * i, 2 * i + 1) for i in range(n_eff // 2)]
    reg_of = {q: i for i, pair in enumerate(regs) for q in pair}
    pools = [tuple(b.alloc() for _ in range(4)) for _ in regs]

    def walk_flush(ri, optional):
        data = tuple(b.loc[q] for q in regs[ri])
        b.repeat(RepeatBlock("walk-flush", data, pools[ri], optional=optional, tag="flush"))

    for ri in range(len(regs)):
        walk_flush(ri, True)

    for g in circuit.gates:
        if g.name in PAULI_GATES:
            b.pauli((b.loc[g.targets[0]],), _sigma(PAULI_GATES[g.name]))
            walk_flush(reg_of[g.targets[0]], True)
            continue
        if g.name == "SWAP":
            q1, q2 = g.targets
            b.loc[q1], b.loc[q2] = b.loc[q2], b.loc[q1]
            continue
        ri = reg_of[g.targets[0]]
        if any(reg_of[q] != ri for q in g.targets):
            raise UnsupportedGateError("single-measurement mode acts within qubit pairs (0,1), (2,3), ...")
        local = tuple(regs[ri].index(q) for q in g.targets)
        plan = single_measurement_plan(g, su, local)
        for op in plan:
            if op[0] == "pauli":
                q = regs[ri][op[1]]
                b.pauli((b.loc[q],), PauliString.from_label(op[2]))
            else:
                walk_flush(ri, False)
                c, t = op[1]
                data = (b.loc[regs[ri][c]], b.loc[regs[ri][t]])
                b.repeat(RepeatBlock("walk", data, pools[ri], PauliString.from_label(op[2]), tag="upu"))
        walk_flush(ri, True)


# --- entry point ------------------------------------------------------------------


def _check_discrete(program: MeasurementProgram, s: ObservableSet) -> None:
    """Every observable the program can measure belongs to the set or its absorption extras."""
    allowed = absorbed_variants(s)
    absorbs = {r.before: r for r in program.feedforward if isinstance(r, AbsorbRule)}
    for i, ins in enumerate(program.instructions):
        if isinstance(ins, RepeatBlock):
            continue  # Bell measurements, relabelled
        d = ins.spec.descriptor or {}
        fam = d.get("family")
        if fam == "pauli":
            obs = [Observable.from_pauli(d["pauli"])]
        elif fam == "bell":
            obs = [Observable.from_pauli(t) for t in d["observables"]]
        elif fam == "rotated-bell" and d["gate"].shape == (2, 2):
            variants = [d["gate"]]
            if i in absorbs:
                variants = [d["gate"] @ PauliString.from_sigma_indices([k]).to_matrix() for k in range(4)]
            obs = [o for v in variants for o in rotated_bell_observables(v)]
        else:
            raise UnsupportedGateError(f"measurement {ins.spec.label!r} is outside set {s.name}")
        for o in obs:
            if not allowed.contains(o):
                raise UnsupportedGateError(f"observable {o} is outside set {s.name}")


def compile_circuit(circuit: GateCircuit, mode: CompileMode | str,
                    frame_policy: str = "deferred", max_qubits: int = linalg.MAX_QUBITS) -> MeasurementProgram:
    """Lower ``circuit`` to a measurement-only program under ``mode``."""
    if isinstance(mode, str):
        mode = CompileMode(mode)
    if frame_policy not in ("eager", "deferred"):
        raise ValueError("frame_policy must be 'eager' or 'deferred'")
    b = _Builder(max_qubits)
    n = circuit.num_qubits
    n_eff = n
    if mode.name == "four-qubit" and n == 1:
        n_eff = 2
    if mode.name == "single-measurement" and n % 2:
        n_eff = n + 1
    for q in range(n_eff):
        b.loc[q] = b.alloc()
        b.init(b.loc[q])
    if mode.name != "single-measurement":
        # qubits no gate touches still carry the init fix-up
        for q in range(n_eff):
            _bell_flush(b, b.loc[q])
    if mode.name == "four-qubit":
        _lower_four_qubit(b, circuit, n_eff)
    elif mode.name == "single-measurement":
        _lower_single(b, circuit, mode.special_u, n_eff)
    else:
        _lower_two_qubit(b, circuit, mode)
    meta = {"mode": mode.describe(), "high_water": b.next_label, "num_logical": n}
    prog = MeasurementProgram(
        num_physical_qubits=b.next_label,
        instructions=b.instructions,
        feedforward=b.feedforward,
        output_map={q: b.loc[q] for q in range(n)},
        mode=mode.name,
        frame_policy=frame_policy,
        metadata=meta,
    )
    prog.validate()
    if mode.name == "two-qubit-discrete":
        _check_discrete(prog, mode.observable_set)
    return prog
