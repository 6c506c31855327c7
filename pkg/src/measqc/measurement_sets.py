"""Discrete universal measurement sets and single-measurement universality.

The sets S0-S3 are lists of two-valued observables.  Each observable is an
axis ``n . sigma`` on its first qubit tensored with a Pauli string on the
rest, which covers every element the sets need, including the rotated Bell
observables ``(u^dagger X u) (x) X`` and ``(u^dagger Z u) (x) Z``.

The second half of the module builds the two-qubit gate ``U = I (+) R`` and
the primitives that use the single four-qubit measurement ``B_{U^dagger}``:
circuits (A) and (B), ancillas (C) and (D), and the Pauli random walk.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linalg
from .exceptions import NonTerminationError, NotCliffordError
from .gadgets import (
    GadgetFragment,
    MeasurementInstruction,
    pair_pauli,
    rotated_bell_basis,
    rotated_bell_spec,
)
from .linalg import (
    PureState,
    bell_basis_spec,
    check_unitary,
    extract_subsystem,
    measure_array,
    sample_from_cdf,
)
from .pauli import PauliString, all_paulis, clifford_membership, pauli_mul

DEFAULT_THETA = np.sqrt(2.0) * np.pi / 4
DEFAULT_PHI = np.sqrt(3.0) * np.pi / 4

_LETTER_AXIS = {"X": 0, "Y": 1, "Z": 2}
_AXIS_LETTER = "XYZ"


def _fmt(x: float) -> str:
    return format(float(x), ".16e")


# --- observables --------------------------------------------------------------


@dataclass(frozen=True)
class Observable:
    """``(axis . sigma) (x) rest``: a Hermitian operator with eigenvalues +-1.

    ``rot`` optionally records how the axis was built, as ``(theta, "AB")``
    meaning ``cos(theta) A + sin(theta) B``; it only affects the text form.
    """

    axis: tuple[float, float, float]
    rest: str = ""
    rot: tuple[float, str] | None = None

    def __post_init__(self):
        a = tuple(float(v) for v in self.axis)
        if abs(np.linalg.norm(a) - 1.0) > linalg.STRUCT_TOL:
            raise ValueError(f"axis {a} is not a unit vector")
        if any(c not in "IXYZ" for c in self.rest):
            raise ValueError(f"bad Pauli letters {self.rest!r}")
        object.__setattr__(self, "axis", a)

    @classmethod
    def from_pauli(cls, p: PauliString | str) -> "Observable":
        if isinstance(p, str):
            p = PauliString.from_label(p)
        if not p.is_hermitian():
            raise ValueError(f"{p} is not Hermitian")
        letters = p.letters
        if letters[0] == "I":
            raise ValueError("the first qubit must carry a non-identity Pauli")
        sign = 1.0 if p.phase == 0 else -1.0
        axis = [0.0, 0.0, 0.0]
        axis[_LETTER_AXIS[letters[0]]] = sign
        return cls(tuple(axis), letters[1:])

    @classmethod
    def rotated(cls, theta: float, pair: str, rest: str = "") -> "Observable":
        """``(cos(theta) A + sin(theta) B) (x) rest`` for ``pair == "AB"``."""
        axis = np.zeros(3)
        axis[_LETTER_AXIS[pair[0]]] += np.cos(theta)
        axis[_LETTER_AXIS[pair[1]]] += np.sin(theta)
        return cls(tuple(axis), rest, (float(theta), pair))

    @property
    def num_qubits(self) -> int:
        return 1 + len(self.rest)

    @cached_property
    def matrix(self) -> np.ndarray:
        first = sum(a * s for a, s in zip(self.axis, linalg.SIGMA[1:]))
        if not self.rest:
            return first
        return np.kron(first, PauliString.from_label(self.rest).to_matrix())

    def pauli_form(self) -> PauliString | None:
        """The PauliString equal to this observable, if the axis is a coordinate axis."""
        idx = [i for i, a in enumerate(self.axis) if abs(a) > 1e-12]
        if len(idx) != 1:
            return None
        p = PauliString.from_label(_AXIS_LETTER[idx[0]] + self.rest)
        return p if self.axis[idx[0]] > 0 else -p

    @property
    def text(self) -> str:
        p = self.pauli_form()
        if p is not None:
            return str(p)
        if self.rot is not None:
            head = f"rot({_fmt(self.rot[0])},{self.rot[1]})"
        else:
            head = "axis(" + ",".join(_fmt(a) for a in self.axis) + ")"
        return head + ("⊗" + self.rest if self.rest else "")

    def __str__(self) -> str:
        return self.text

    @classmethod
    def parse(cls, text: str) -> "Observable":
        text = text.strip()
        m = re.fullmatch(r"rot\(([^,]+),([XYZ]{2})\)(?:⊗([IXYZ]+))?", text)
        if m:
            return cls.rotated(float(m.group(1)), m.group(2), m.group(3) or "")
        m = re.fullmatch(r"axis\(([^,]+),([^,]+),([^,]+)\)(?:⊗([IXYZ]+))?", text)
        if m:
            axis = tuple(float(m.group(i)) for i in (1, 2, 3))
            return cls(axis, m.group(4) or "")
        return cls.from_pauli(text)

    def same_measurement(self, other: "Observable", tol: float = linalg.STRUCT_TOL) -> bool:
        """Equal up to sign, and for two qubits up to exchanging the qubits."""
        if self.num_qubits != other.num_qubits:
            return False
        a, b = self.matrix, other.matrix
        cands = [b]
        if self.num_qubits == 2:
            cands.append(linalg.SWAP @ b @ linalg.SWAP)
        return any(
            np.max(np.abs(a - s * c)) <= tol for c in cands for s in (1.0, -1.0)
        )


def axis_of(op: np.ndarray) -> tuple[float, float, float]:
    """Real unit vector ``n`` with ``op == n . sigma`` for a traceless Hermitian unitary."""
    n = np.array([np.trace(s @ op).real / 2 for s in linalg.SIGMA[1:]])
    return tuple(n / np.linalg.norm(n))


def rotated_bell_observables(u) -> tuple[Observable, Observable]:
    """``((u^dagger X u) (x) X, (u^dagger Z u) (x) Z)``, the pair measured by ``B_{u^dagger}``."""
    u = check_unitary(u, 1)
    ud = u.conj().T
    return (
        Observable(axis_of(ud @ linalg.X @ u), "X"),
        Observable(axis_of(ud @ linalg.Z @ u), "Z"),
    )


# --- the sets ------------------------------------------------------------------


def _rz(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def _rx(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


@dataclass(frozen=True)
class ObservableSet:
    """A discrete measurement set together with the non-Clifford gate it realizes.

    ``gate`` is the one-qubit gate whose rotated Bell measurement is covered
    by the listed observables; ``alphabet`` lists the one-qubit gates a
    compiler may perform with plain members of the set.
    """

    name: str
    observables: tuple[Observable, ...]
    gate: np.ndarray = field(repr=False)
    theta: float | None = None
    alphabet: tuple[str, ...] = ("H", "P", "u")

    def __post_init__(self):
        for o in self.observables:
            m = o.matrix
            d = m.shape[0]
            if np.max(np.abs(m @ m - np.eye(d))) > linalg.STRUCT_TOL or abs(np.trace(m)) > linalg.STRUCT_TOL:
                raise ValueError(f"{o} does not have eigenvalues +-1")

    def contains(self, obs: Observable) -> bool:
        return any(obs.same_measurement(o) for o in self.observables)

    def gate_matrix(self, name: str) -> np.ndarray:
        return {"H": linalg.H, "P": linalg.PHASE, "u": self.gate}[name]

    @property
    def texts(self) -> list[str]:
        return [o.text for o in self.observables]


def _check_theta(theta) -> float:
    if theta is None:
        raise ValueError("this set needs an angle theta")
    theta = float(theta)
    m = theta / (np.pi / 2)
    if abs(m - round(m)) < 1e-12:
        raise ValueError(f"theta = {theta} is an integer multiple of pi/2")
    return theta


_COMMON = ("Z", "XX", "ZZ", "XZ")


def build_set(name: str, theta: float | None = None, u=None) -> ObservableSet:
    """Build S0, S1, S2 or S3 with exactly the listed observables.

    S1 and S2 take ``theta`` (not a multiple of pi/2); S0 takes a non-Clifford
    one-qubit ``u``.
    """
    base = [Observable.from_pauli(t) for t in _COMMON]
    xy = Observable.from_pauli("XY")
    if name == "S0":
        if u is None:
            raise ValueError("S0 needs a one-qubit gate u")
        u = check_unitary(u, 1)
        if clifford_membership(u):
            raise NotCliffordError("S0 needs u outside the Clifford group")
        return ObservableSet("S0", tuple(base + [xy, *rotated_bell_observables(u)]), u)
    if name == "S1":
        theta = _check_theta(theta)
        last = Observable.rotated(theta, "ZY", "Z")
        return ObservableSet("S1", tuple(base + [xy, last]), _rx(theta), theta)
    if name == "S2":
        theta = _check_theta(theta)
        last = Observable.rotated(theta, "XY", "X")
        return ObservableSet("S2", tuple(base + [xy, last]), _rz(-theta), theta)
    if name == "S3":
        last = Observable.rotated(np.pi / 4, "XY", "X")
        return ObservableSet("S3", tuple(base + [last]), _rz(-np.pi / 4), alphabet=("H", "u"))
    raise ValueError(f"unknown set {name!r}")


def augment_for_absorption(s: ObservableSet, correction) -> ObservableSet:
    """Add the rotated Bell observables of ``u sigma`` for a pending Pauli ``sigma``.

    The absorbed gate is executed as ``u sigma`` (the correction acts first),
    so the measurement is ``B_{(u sigma)^dagger}``.
    """
    if isinstance(correction, (int, np.integer)):
        correction = PauliString.from_sigma_indices([int(correction)])
    if not isinstance(correction, PauliString) or correction.num_qubits != 1:
        raise ValueError("the correction must be a one-qubit Pauli")
    if correction.is_identity():
        return s
    new = list(s.observables)
    for o in rotated_bell_observables(s.gate @ correction.to_matrix()):
        if not any(o.same_measurement(e) for e in new):
            new.append(o)
    return ObservableSet(s.name, tuple(new), s.gate, s.theta, s.alphabet)


def absorbed_variants(s: ObservableSet) -> ObservableSet:
    """The set augmented for every possible single-qubit correction."""
    out = s
    for k in (1, 2, 3):
        out = augment_for_absorption(out, k)
    return out


# --- the special two-qubit gate ---------------------------------------------


@dataclass(frozen=True)
class SpecialU:
    """``U = I (+) R`` with ``R`` a rotation by ``2 theta`` about ``cos(phi) X + sin(phi) Y``."""

    theta: float = DEFAULT_THETA
    phi: float = DEFAULT_PHI

    @property
    def R(self) -> np.ndarray:
        c, s = np.cos(self.theta), np.sin(self.theta)
        return np.array([
            [c, -1j * np.exp(-1j * self.phi) * s],
            [-1j * np.exp(1j * self.phi) * s, c],
        ])

    @property
    def matrix(self) -> np.ndarray:
        m = np.zeros((4, 4), dtype=complex)
        m[:2, :2] = np.eye(2)
        m[2:, 2:] = self.R
        return m


Q_OP = PauliString.from_label("IZ")
P_OP = PauliString.from_label("IZ")


def verify_u_squared(su: SpecialU, tol: float = 1e-12) -> tuple[np.ndarray, bool]:
    """Return ``(Q U^dagger P U, equals U @ U)`` with ``P = Q = I (x) Z``."""
    u = su.matrix
    q = Q_OP.to_matrix()
    prod = q @ u.conj().T @ P_OP.to_matrix() @ u
    return prod, bool(np.max(np.abs(prod - u @ u)) < tol)


# --- circuits (A), (B) and ancillas (C), (D) -----------------------------------
#
# Local layout shared by all of them: data on 0, 1; ancilla on 2, 3, 4, 5 with
# Bell halves (2, 4) and (3, 5); outputs on 4, 5.

_PREP_C = (2, 3, 4, 5)
_PREP_D = (4, 5, 2, 3)
_CORE_A = (0, 1, 2, 3)
_CORE_B = (2, 3, 0, 1)


def _bell_pair_prep():
    return [
        MeasurementInstruction(bell_basis_spec(), (2, 4), "k1"),
        MeasurementInstruction(bell_basis_spec(), (3, 5), "k2"),
    ]


def _two(j: int) -> PauliString:
    return pair_pauli(j, 2)


def circuit_A(u, ancilla: str = "bell") -> GadgetFragment:
    """Rotated measurement on the data without correcting ``P_j``.

    With plain Bell pairs the output is ``P_j U |psi>``; with ancilla (D) it
    is ``U^dagger P_k P_j U |psi>`` (primitive 1).  The leftover operator is
    returned through ``byproduct_rule``.
    """
    u = check_unitary(u, 2)
    core = [MeasurementInstruction(rotated_bell_spec(u), _CORE_A, "j")]
    if ancilla == "bell":
        prep = _bell_pair_prep()
        rule, by = {}, {}
        for k1, k2, j in itertools.product(range(4), range(4), range(16)):
            rule[(k1, k2, j)] = PauliString.from_sigma_indices((k1, k2))
            by[(k1, k2, j)] = _two(j)
        return GadgetFragment("A", 2, 6, prep, core, rule, (4, 5), u, by)
    if ancilla == "D":
        prep = [MeasurementInstruction(rotated_bell_spec(u), _PREP_D, "k")]
        ud = u.conj().T
        rule, by = {}, {}
        for k, j in itertools.product(range(16), range(16)):
            rule[(k, j)] = PauliString.identity(2)
            by[(k, j)] = ud @ primitive_step(k, j).to_matrix() @ u
        return GadgetFragment("A+D", 2, 6, prep, core, rule, (4, 5), np.eye(4), by)
    raise ValueError(f"circuit (A) takes ancilla 'bell' or 'D', not {ancilla!r}")


def circuit_B(u, ancilla: str = "bell") -> GadgetFragment:
    """The same measurement with the qubit pairs interchanged.

    With plain Bell pairs the output is ``U^T P_j |psi>``; with ancilla (C)
    it is ``P_k P_j |psi>`` (primitive 2).
    """
    u = check_unitary(u, 2)
    core = [MeasurementInstruction(rotated_bell_spec(u), _CORE_B, "j")]
    if ancilla == "bell":
        prep = _bell_pair_prep()
        rule, by = {}, {}
        for k1, k2, j in itertools.product(range(4), range(4), range(16)):
            rule[(k1, k2, j)] = PauliString.from_sigma_indices((k1, k2))
            by[(k1, k2, j)] = u.T @ _two(j).to_matrix() @ u.conj()
        return GadgetFragment("B", 2, 6, prep, core, rule, (4, 5), u.T, by)
    if ancilla == "C":
        prep = [MeasurementInstruction(rotated_bell_spec(u), _PREP_C, "k")]
        rule, by = {}, {}
        for k, j in itertools.product(range(16), range(16)):
            rule[(k, j)] = PauliString.identity(2)
            by[(k, j)] = primitive_step(k, j)
        return GadgetFragment("B+C", 2, 6, prep, core, rule, (4, 5), np.eye(4), by)
    raise ValueError(f"circuit (B) takes ancilla 'bell' or 'C', not {ancilla!r}")


def _fresh_measure(u, targets, rng) -> tuple[PureState, int]:
    vec = np.zeros(16, dtype=complex)
    vec[0] = 1.0
    k, _, vec = measure_array(vec, 4, rotated_bell_spec(u), targets, rng=rng)
    return PureState(4, vec), k


def make_ancilla_C(u, rng) -> tuple[PureState, int]:
    """Measure four fresh qubits in ``B_{U^dagger_12}``; pairs (0, 2) and (1, 3)."""
    return _fresh_measure(check_unitary(u, 2), (0, 1, 2, 3), rng)


def make_ancilla_D(u, rng) -> tuple[PureState, int]:
    """Measure four fresh qubits in ``B_{U^dagger_34}``; pairs (0, 2) and (1, 3)."""
    return _fresh_measure(check_unitary(u, 2), (2, 3, 0, 1), rng)


def _bell_pairs_on_halves(op_second: np.ndarray) -> np.ndarray:
    """``(I (x) op)|Phi_0>_{02}|Phi_0>_{13}`` with ``op`` on qubits 2, 3."""
    base = rotated_bell_basis(np.eye(4))[0]
    return np.kron(np.eye(4), op_second) @ base


def ancilla_C_state(u, k: int) -> np.ndarray:
    """Closed form of ancilla (C): ``(I (x) P_k^T U^*)`` on the Bell pairs."""
    u = check_unitary(u, 2)
    return _bell_pairs_on_halves(_two(k).to_matrix().T @ u.conj())


def ancilla_D_state(u, k: int) -> np.ndarray:
    """Closed form of ancilla (D): ``(I (x) U^dagger P_k)`` on the Bell pairs."""
    u = check_unitary(u, 2)
    return _bell_pairs_on_halves(u.conj().T @ _two(k).to_matrix())


# --- random walk on the two-qubit Pauli group ----------------------------------


def primitive_step(k: int, j: int) -> PauliString:
    """Pauli ``P_k P_j`` (phase dropped) applied by one primitive with outcomes ``k``, ``j``."""
    return pauli_mul(_two(k), _two(j)).with_phase(0)


# sigma index -> (x, z) bits packed as 2*x + z, so that a product of Paulis
# modulo phase is a XOR of packed codes
_SIGMA_CODE = (0, 2, 3, 1)
_CODE_SIGMA = (0, 3, 1, 2)


def _code(j: int) -> int:
    return (_SIGMA_CODE[j // 4] << 2) | _SIGMA_CODE[j % 4]


_CODES = tuple(_code(j) for j in range(16))


def pauli_code(p: PauliString) -> int:
    """Packed code of a two-qubit Pauli modulo phase; products are XORs of codes."""
    a, b = p.sigma_indices
    return _CODES[4 * a + b]


def step_code(k: int, j: int) -> int:
    """Packed code of :func:`primitive_step`."""
    return _CODES[k] ^ _CODES[j]


def _uncode(c: int) -> PauliString:
    return PauliString.from_sigma_indices((_CODE_SIGMA[c >> 2], _CODE_SIGMA[c & 3]))


@dataclass
class WalkResult:
    iterations: int
    trace: list[tuple[int, int]]
    accumulated: PauliString
    output: PureState | None = None


def _born_table(su: np.ndarray, targets) -> np.ndarray:
    v = np.zeros(16, dtype=complex)
    v[0] = 1.0
    spec = rotated_bell_spec(su)
    front = linalg._to_front(v, 4, targets)
    probs, _ = spec.branch_weights(front)
    return probs / probs.sum()


_UNIFORM16 = np.full(16, 1.0 / 16)


def random_walk_to_target(target: PauliString, primitive: int, rng: np.random.Generator,
                          max_iters: int = 512, su: SpecialU | None = None,
                          engine: str = "sampled", state: PureState | None = None) -> WalkResult:
    """Repeat a primitive until the accumulated Pauli equals ``target`` mod phase.

    ``engine="dense"`` runs the measurements on a six-qubit state vector (data
    on 0, 1; a fresh ancilla on 2-5 every iteration).  ``engine="sampled"``
    draws the same outcomes from the exact Born tables: ``k`` from the fresh
    ancilla measurement and ``j`` uniform, which is what the dense engine
    produces for any data state.  Both consume the generator identically.
    """
    if primitive not in (1, 2):
        raise ValueError("primitive must be 1 or 2")
    if target.num_qubits != 2:
        raise ValueError("the walk target must be a two-qubit Pauli")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    su = su or SpecialU()
    u = su.matrix
    prep_t = _PREP_C if primitive == 2 else _PREP_D
    core_t = _CORE_B if primitive == 2 else _CORE_A
    goal = pauli_code(target)
    acc = 0
    trace = []
    if engine == "dense":
        spec = rotated_bell_spec(u)
        data = (state or PureState.zeros(2)).amplitudes
        fresh = np.zeros(16, dtype=complex)
        fresh[0] = 1.0
    elif engine == "sampled":
        table = _born_table(u, tuple(q - 2 for q in prep_t))
        table_cdf = np.cumsum(table)
        uniform_cdf = np.cumsum(_UNIFORM16)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    for it in range(1, max_iters + 1):
        if engine == "dense":
            vec = np.kron(data, fresh)
            k, _, vec = measure_array(vec, 6, spec, prep_t, rng=rng)
            j, _, vec = measure_array(vec, 6, spec, core_t, rng=rng)
            data = extract_subsystem(vec, 6, (4, 5))
        else:
            k = sample_from_cdf(table_cdf, table, rng)
            j = sample_from_cdf(uniform_cdf, _UNIFORM16, rng)
        trace.append((k, j))
        acc ^= _CODES[k] ^ _CODES[j]
        if acc == goal:
            out = PureState(2, data) if engine == "dense" else None
            return WalkResult(it, trace, _uncode(acc), out)
    raise NonTerminationError(f"random walk did not reach {target} within {max_iters} iterations")


# --- Clifford closure ----------------------------------------------------------


def primitive_product(u: np.ndarray, word) -> np.ndarray:
    """Dense product for a word of factors ``("P", p)`` or ``("UPU", p)``, applied left to right."""
    ud = u.conj().T
    out = np.eye(4, dtype=complex)
    for kind, p in word:
        m = p.to_matrix()
        f = m if kind == "P" else ud @ m @ u
        out = f @ out
    return out


def random_primitive_word(rng: np.random.Generator, length: int):
    paulis = list(all_paulis(2))
    return [
        ("P" if i % 2 == 0 else "UPU", paulis[int(rng.integers(16))])
        for i in range(length)
    ]


def clifford_closure_check(u, samples: int, rng: np.random.Generator, max_length: int = 7) -> bool:
    """True iff ``samples`` random words ``P1 U^dagger P2 U P3 ...`` are all Clifford."""
    u = check_unitary(u, 2)
    if not clifford_membership(u):
        raise NotCliffordError("closure check needs a Clifford u")
    for _ in range(samples):
        length = int(rng.integers(1, max_length + 1))
        if not clifford_membership(primitive_product(u, random_primitive_word(rng, length))):
            return False
    return True


def find_non_clifford_word(u, max_length: int = 4):
    """Shortest word of primitive factors whose product is not Clifford, or None."""
    u = check_unitary(u, 2)
    paulis = list(all_paulis(2))
    for length in range(1, max_length + 1):
        for kinds in itertools.product(("P", "UPU"), repeat=length):
            for ps in itertools.product(paulis, repeat=length):
                word = list(zip(kinds, ps))
                if not clifford_membership(primitive_product(u, word)):
                    return word
    return None
