"""Pauli-group and Clifford-group algebra.

A :class:`PauliString` is stored in *letter form*: the operator is
``i**phase * (sigma_1 (x) ... (x) sigma_n)`` where each letter is one of
I, X, Y, Z encoded by an (x, z) bit pair (I=00, X=10, Y=11, Z=01).  With
this convention ``Y = i X Z`` and the operator is Hermitian exactly when the
phase exponent is even.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import linalg
from .exceptions import DimensionError, NotCliffordError

_LETTERS = "IXYZ"
_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}
# sigma index (0..3 = I, X, Y, Z) <-> letter
SIGMA_LETTERS = "IXYZ"


def _as_bits(v, n=None) -> np.ndarray:
    a = np.asarray(v, dtype=np.uint8).reshape(-1) & 1
    if n is not None and a.shape[0] != n:
        raise DimensionError(f"expected {n} bits, got {a.shape[0]}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PauliString:
    """``i**phase`` times a tensor product of Pauli letters."""

    num_qubits: int
    x: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    phase: int = 0

    def __post_init__(self):
        object.__setattr__(self, "x", _as_bits(self.x, self.num_qubits))
        object.__setattr__(self, "z", _as_bits(self.z, self.num_qubits))
        object.__setattr__(self, "phase", int(self.phase) % 4)

    # construction ------------------------------------------------------

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, np.zeros(n, np.uint8), np.zeros(n, np.uint8), 0)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse text such as ``"XZ"``, ``"-IXXI"``, ``"+iY"`` or ``"−ZZ"``."""
        m = re.fullmatch(r"\s*([+\-−]?)(i?)([IXYZ]+)\s*", label)
        if m is None:
            raise ValueError(f"cannot parse Pauli label {label!r}")
        sign, imag, letters = m.groups()
        phase = (2 if sign in ("-", "−") else 0) + (1 if imag else 0)
        x = [_LETTER_BITS[c][0] for c in letters]
        z = [_LETTER_BITS[c][1] for c in letters]
        return cls(len(letters), x, z, phase)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str | int) -> "PauliString":
        if isinstance(letter, (int, np.integer)):
            letter = SIGMA_LETTERS[int(letter)]
        x = np.zeros(n, np.uint8)
        z = np.zeros(n, np.uint8)
        x[qubit], z[qubit] = _LETTER_BITS[letter]
        return cls(n, x, z, 0)

    @classmethod
    def from_sigma_indices(cls, indices: Sequence[int], phase: int = 0) -> "PauliString":
        """Build ``sigma_{j1} (x) sigma_{j2} (x) ...`` from indices in 0..3."""
        letters = "".join(SIGMA_LETTERS[j] for j in indices)
        p = cls.from_label(letters)
        return p.with_phase(phase)

    def with_phase(self, phase: int) -> "PauliString":
        return PauliString(self.num_qubits, self.x, self.z, phase)

    # views -------------------------------------------------------------

    @property
    def letters(self) -> str:
        return "".join(_BITS_LETTER[(int(a), int(b))] for a, b in zip(self.x, self.z))

    @property
    def sigma_indices(self) -> tuple[int, ...]:
        return tuple(SIGMA_LETTERS.index(c) for c in self.letters)

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.x | self.z))

    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    def is_identity(self, up_to_phase: bool = True) -> bool:
        trivial = not (self.x.any() or self.z.any())
        return trivial if up_to_phase else trivial and self.phase == 0

    def __str__(self) -> str:
        sign = "-" if self.phase in (2, 3) else "+"
        imag = "i" if self.phase % 2 else ""
        return f"{sign}{imag}{self.letters}"

    def __repr__(self) -> str:
        return f"PauliString({str(self)!r})"

    def key(self, with_phase: bool = True) -> tuple:
        base = (self.num_qubits, self.x.tobytes(), self.z.tobytes())
        return base + ((self.phase,) if with_phase else ())

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliString):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def equal_mod_phase(self, other: "PauliString") -> bool:
        return self.key(False) == other.key(False)

    def __neg__(self) -> "PauliString":
        return self.with_phase(self.phase + 2)

    def __mul__(self, other: "PauliString") -> "PauliString":
        return pauli_mul(self, other)

    def to_matrix(self) -> np.ndarray:
        m = linalg.kron(*(linalg.SIGMA[j] for j in self.sigma_indices))
        return (1j**self.phase) * m

    def restrict(self, qubits: Sequence[int]) -> "PauliString":
        """Sub-string on ``qubits`` (phase dropped)."""
        q = list(qubits)
        return PauliString(len(q), self.x[q], self.z[q], 0)

    def embed(self, n: int, qubits: Sequence[int]) -> "PauliString":
        """Place this string on ``qubits`` of an ``n``-qubit register."""
        x = np.zeros(n, np.uint8)
        z = np.zeros(n, np.uint8)
        x[list(qubits)] = self.x
        z[list(qubits)] = self.z
        return PauliString(n, x, z, self.phase)

    def apply_to(self, vec: np.ndarray, n: int | None = None) -> np.ndarray:
        """Apply the operator to a raw amplitude vector of ``num_qubits`` qubits."""
        n = self.num_qubits if n is None else n
        weights = 1 << np.arange(n - 1, -1, -1)
        xmask = int(np.dot(self.x.astype(np.int64), weights))
        zmask = int(np.dot(self.z.astype(np.int64), weights))
        ny = int(np.count_nonzero(self.x & self.z))
        idx = np.arange(vec.shape[0])
        parity = _popcount_parity(idx & zmask)
        signs = np.where(parity, -1.0, 1.0)
        out = np.empty_like(vec)
        out[idx ^ xmask] = vec * signs
        return (1j ** ((self.phase + ny) % 4)) * out


def _popcount_parity(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    p = np.zeros_like(a)
    while np.any(a):
        p ^= a & 1
        a >>= 1
    return p.astype(bool)


def pauli(label: str) -> PauliString:
    return PauliString.from_label(label)


def _check_width(a: PauliString, b: PauliString) -> None:
    if a.num_qubits != b.num_qubits:
        raise DimensionError(f"{a.num_qubits}-qubit vs {b.num_qubits}-qubit Pauli")


def _g(x1, z1, x2, z2) -> np.ndarray:
    """Exponent of i picked up per qubit when multiplying letters (x1,z1)(x2,z2)."""
    x1, z1, x2, z2 = (a.astype(np.int64) for a in (x1, z1, x2, z2))
    # Y·(x2,z2), X·(x2,z2), Z·(x2,z2) in turn; identity contributes nothing
    return (x1 * z1 * (z2 - x2)
            + x1 * (1 - z1) * z2 * (2 * x2 - 1)
            + (1 - x1) * z1 * x2 * (1 - 2 * z2))


def pauli_mul(a: PauliString, b: PauliString) -> PauliString:
    """Exact product ``a @ b`` with the phase tracked."""
    _check_width(a, b)
    phase = a.phase + b.phase + int(_g(a.x, a.z, b.x, b.z).sum())
    return PauliString(a.num_qubits, a.x ^ b.x, a.z ^ b.z, phase)


def pauli_commutes(a: PauliString, b: PauliString) -> bool:
    _check_width(a, b)
    s = int(np.count_nonzero(a.x & b.z)) + int(np.count_nonzero(a.z & b.x))
    return s % 2 == 0


def all_paulis(n: int) -> Iterable[PauliString]:
    """All ``4**n`` phase-free Pauli strings, in sigma-index lexicographic order."""
    for idx in itertools.product(range(4), repeat=n):
        yield PauliString.from_sigma_indices(idx)


@lru_cache(maxsize=None)
def _pauli_basis(k: int) -> tuple[tuple[PauliString, ...], np.ndarray]:
    ps = tuple(all_paulis(k))
    return ps, np.stack([p.to_matrix() for p in ps])


def _pauli_overlaps(m: np.ndarray) -> tuple[tuple[PauliString, ...], np.ndarray, np.ndarray]:
    m = np.asarray(m, dtype=complex)
    k = int(round(np.log2(m.shape[0])))
    ps, mats = _pauli_basis(k)
    # tr(p^dagger m) / d for every phase-free p at once
    coeffs = np.einsum("pij,ij->p", mats.conj(), m) / 2**k
    return ps, coeffs, m


def pauli_from_matrix(m: np.ndarray, tol: float = 1e-9) -> PauliString | None:
    """Return the PauliString equal to ``m`` (phase included) or ``None``.

    Phases outside the group {1, i, -1, -i} are rejected.
    """
    ps, coeffs, m = _pauli_overlaps(m)
    hits = np.flatnonzero(np.abs(np.abs(coeffs) - 1.0) <= tol)
    if not len(hits):
        return None
    c = coeffs[hits[0]]
    for e in range(4):
        if abs(c - 1j**e) <= tol:
            cand = ps[hits[0]].with_phase(e)
            if np.max(np.abs(cand.to_matrix() - m)) <= tol:
                return cand
    return None


def pauli_from_matrix_mod_phase(m: np.ndarray, tol: float = 1e-9) -> PauliString | None:
    """Like :func:`pauli_from_matrix` but ignores any global phase of ``m``."""
    ps, coeffs, _ = _pauli_overlaps(m)
    hits = np.flatnonzero(np.abs(np.abs(coeffs) - 1.0) <= tol)
    return ps[hits[0]] if len(hits) else None


# --- Clifford gates ---------------------------------------------------------

_CLIFFORD_ARITY = {"CNOT": 2, "SWAP": 2, "H": 1, "P": 1, "X": 1, "Y": 1, "Z": 1}
CLIFFORD_MATRICES = {
    "CNOT": linalg.CNOT,
    "SWAP": linalg.SWAP,
    "H": linalg.H,
    "P": linalg.PHASE,
    "X": linalg.X,
    "Y": linalg.Y,
    "Z": linalg.Z,
}


@dataclass(frozen=True)
class CliffordGate:
    """A named Clifford generator acting on ``targets``."""

    name: str
    targets: tuple[int, ...]

    def __post_init__(self):
        if self.name not in _CLIFFORD_ARITY:
            raise ValueError(f"unknown Clifford gate {self.name!r}")
        t = tuple(int(q) for q in self.targets)
        if len(t) != _CLIFFORD_ARITY[self.name]:
            raise DimensionError(f"{self.name} acts on {_CLIFFORD_ARITY[self.name]} qubit(s)")
        if len(set(t)) != len(t):
            raise ValueError(f"duplicate targets {t}")
        object.__setattr__(self, "targets", t)

    @property
    def matrix(self) -> np.ndarray:
        return CLIFFORD_MATRICES[self.name]


def conjugate_by_clifford(p: PauliString, g: CliffordGate) -> PauliString:
    """Return ``g p g^dagger`` exactly, as a PauliString.

    Uses symplectic update rules with sign bookkeeping in letter form.
    """
    n = p.num_qubits
    for t in g.targets:
        if not 0 <= t < n:
            raise DimensionError(f"target {t} out of range for {n} qubits")
    x = p.x.copy()
    z = p.z.copy()
    x.setflags(write=True)
    z.setflags(write=True)
    sign = 0  # extra factor (-1)**sign on the letter part
    name = g.name
    if name in ("H", "P", "X", "Y", "Z"):
        a = g.targets[0]
        xa, za = int(x[a]), int(z[a])
        if name == "H":
            sign ^= xa & za
            x[a], z[a] = za, xa
        elif name == "P":
            sign ^= xa & za
            z[a] = za ^ xa
        elif name == "X":
            sign ^= za
        elif name == "Y":
            sign ^= xa ^ za
        elif name == "Z":
            sign ^= xa
    elif name == "CNOT":
        c, t = g.targets
        xc, zc, xt, zt = int(x[c]), int(z[c]), int(x[t]), int(z[t])
        sign ^= xc & zt & (xt ^ zc ^ 1)
        x[t] = xt ^ xc
        z[c] = zc ^ zt
    elif name == "SWAP":
        a, b = g.targets
        x[a], x[b] = x[b], x[a]
        z[a], z[b] = z[b], z[a]
    return PauliString(n, x, z, p.phase + 2 * sign)


def conjugate_by_unitary(p: PauliString, u: np.ndarray, targets: Sequence[int] | None = None,
                         tol: float = 1e-9) -> PauliString:
    """``u p u^dagger`` for a Clifford matrix ``u``; raises if the result is not Pauli."""
    n = p.num_qubits
    targets = list(range(n)) if targets is None else list(targets)
    sub = p.restrict(targets)
    conj = u @ sub.to_matrix() @ u.conj().T
    q = pauli_from_matrix(conj, tol)
    if q is None:
        raise NotCliffordError("conjugation does not return a Pauli operator")
    rest = [i for i in range(n) if i not in targets]
    x = np.zeros(n, np.uint8)
    z = np.zeros(n, np.uint8)
    x[targets], z[targets] = q.x, q.z
    x[rest], z[rest] = p.x[rest], p.z[rest]
    return PauliString(n, x, z, p.phase + q.phase)


def clifford_membership(u, tol: float = 1e-9) -> bool:
    """True iff ``u`` maps every single-qubit X and Z to a phased Pauli string."""
    u = np.asarray(u, dtype=complex)
    k = int(round(np.log2(u.shape[0])))
    if k > 3:
        raise DimensionError("clifford_membership supports at most 3 qubits")
    d = 2**k
    basis = [p.to_matrix() for p in all_paulis(k)]
    for q in range(k):
        for letter in "XZ":
            g = PauliString.single(k, q, letter).to_matrix()
            c = u @ g @ u.conj().T
            coeffs = np.array([abs(np.trace(b.conj().T @ c)) / d for b in basis])
            if coeffs.max() < 1.0 - tol:
                return False
    return True
