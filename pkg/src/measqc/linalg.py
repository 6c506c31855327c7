"""Dense statevector engine.

Qubit 0 is the most significant bit of the amplitude index, i.e. the
leftmost tensor factor.  Every routine in the package follows this ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from .exceptions import (
    DimensionError,
    ImpossibleBranchError,
    InvalidMeasurementError,
    NotUnitaryError,
)

MAX_QUBITS = 20
STRUCT_TOL = 1e-10
IMPOSSIBLE_TOL = 1e-12

_SQRT_HALF = 1.0 / np.sqrt(2.0)

# Standard gates.  PHASE and T follow the exp(-i pi Z / 4) and exp(-i pi Z / 8)
# conventions, so PHASE == T @ T exactly.
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = _SQRT_HALF * np.array([[1, 1], [1, -1]], dtype=complex)
PHASE = np.diag([np.exp(-1j * np.pi / 4), np.exp(1j * np.pi / 4)])
T = np.diag([np.exp(-1j * np.pi / 8), np.exp(1j * np.pi / 8)])
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
SIGMA = (I2, X, Y, Z)

for _m in (I2, X, Y, Z, H, PHASE, T, CNOT, SWAP):
    _m.setflags(write=False)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PureState:
    """Normalized pure state of ``num_qubits`` qubits."""

    num_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise DimensionError(
                f"num_qubits must be in [1, {MAX_QUBITS}], got {self.num_qubits}"
            )
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != 2**self.num_qubits:
            raise DimensionError(
                f"expected {2**self.num_qubits} amplitudes, got {amps.shape[0]}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > STRUCT_TOL:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        object.__setattr__(self, "amplitudes", _freeze(amps))

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize: bool = False) -> "PureState":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.shape[0])))
        if 2**n != amps.shape[0]:
            raise DimensionError(f"length {amps.shape[0]} is not a power of two")
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(n, amps)

    @classmethod
    def zeros(cls, num_qubits: int) -> "PureState":
        amps = np.zeros(2**num_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(num_qubits, amps)

    @classmethod
    def basis(cls, bits: str) -> "PureState":
        """Computational basis state from a bit string such as ``"0101"``."""
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(len(bits), amps)

    def __len__(self) -> int:
        return self.amplitudes.shape[0]


def random_state(num_qubits: int, rng: np.random.Generator) -> PureState:
    v = rng.normal(size=2**num_qubits) + 1j * rng.normal(size=2**num_qubits)
    return PureState(num_qubits, v / np.linalg.norm(v))


def random_unitary(arity: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random ``2**arity`` unitary (QR of a complex Ginibre matrix)."""
    d = 2**arity
    g = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def is_unitary(u: np.ndarray, tol: float = STRUCT_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


def check_unitary(u, arity: int | None = None) -> np.ndarray:
    """Validate ``u`` as a ``2**k`` unitary and return it as a complex array."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise NotUnitaryError(f"matrix of shape {u.shape} is not square")
    k = int(round(np.log2(u.shape[0])))
    if 2**k != u.shape[0] or k < 1:
        raise DimensionError(f"dimension {u.shape[0]} is not 2**k with k >= 1")
    if arity is not None and k != arity:
        raise DimensionError(f"expected a {arity}-qubit unitary, got {k}-qubit")
    if not is_unitary(u):
        raise NotUnitaryError("matrix is not unitary within 1e-10")
    return u


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def _check_targets(n: int, targets: Sequence[int]) -> tuple[int, ...]:
    targets = tuple(int(t) for t in targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise DimensionError(f"target {t} out of range for {n} qubits")
    return targets


# --- raw-array kernels (no validation) shared by the executor -------------


@lru_cache(maxsize=4096)
def _front_index(n: int, targets: tuple[int, ...]) -> np.ndarray:
    """Flat indices laid out as (target bits, remaining bits)."""
    k = len(targets)
    rest = [q for q in range(n) if q not in targets]
    idx = np.arange(2**n).reshape((2,) * n).transpose(list(targets) + rest)
    out = np.ascontiguousarray(idx.reshape(2**k, 2 ** (n - k)))
    out.setflags(write=False)
    return out


# index tables are cached only for small registers, where they beat transposes
_INDEX_CACHE_QUBITS = 12


def _to_front(vec: np.ndarray, n: int, targets: Sequence[int]) -> np.ndarray:
    """``vec`` as a (2**k, 2**(n-k)) matrix with ``targets`` as rows."""
    if n <= _INDEX_CACHE_QUBITS:
        return vec[_front_index(n, tuple(targets))]
    k = len(targets)
    rest = [q for q in range(n) if q not in targets]
    return vec.reshape((2,) * n).transpose(list(targets) + rest).reshape(2**k, 2 ** (n - k))


def _from_front(mat: np.ndarray, n: int, targets: Sequence[int]) -> np.ndarray:
    if n <= _INDEX_CACHE_QUBITS:
        out = np.empty(2**n, dtype=complex)
        out[_front_index(n, tuple(targets))] = mat
        return out
    order = list(targets) + [q for q in range(n) if q not in targets]
    inv = [0] * n
    for i, q in enumerate(order):
        inv[q] = i
    return mat.reshape((2,) * n).transpose(inv).reshape(-1)


def apply_matrix(vec: np.ndarray, n: int, m: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Apply an arbitrary ``2**k`` matrix to ``targets`` of a raw amplitude vector."""
    front = _to_front(vec, n, targets)
    return _from_front(m @ front, n, targets)


def apply_gate(state: PureState, u, targets: Sequence[int]) -> PureState:
    """Apply the unitary ``u`` to ``targets``; identity on all other qubits."""
    targets = _check_targets(state.num_qubits, targets)
    u = check_unitary(u)
    if u.shape[0] != 2 ** len(targets):
        raise DimensionError(
            f"{int(np.log2(u.shape[0]))}-qubit gate applied to {len(targets)} targets"
        )
    out = apply_matrix(state.amplitudes, state.num_qubits, u, targets)
    return PureState(state.num_qubits, out / np.linalg.norm(out))


def tensor(a: PureState, b: PureState) -> PureState:
    return PureState(a.num_qubits + b.num_qubits, np.kron(a.amplitudes, b.amplitudes))


def _check_same(a: PureState, b: PureState) -> None:
    if a.num_qubits != b.num_qubits:
        raise DimensionError(f"{a.num_qubits}-qubit vs {b.num_qubits}-qubit state")


def fidelity(a: PureState, b: PureState) -> float:
    """|<a|b>|^2, clipped into [0, 1]."""
    _check_same(a, b)
    f = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    return float(min(max(f, 0.0), 1.0))


def equal_up_to_global_phase(a: PureState, b: PureState, tol: float = STRUCT_TOL) -> bool:
    return fidelity(a, b) >= 1.0 - tol


def bell_vector(j: int) -> np.ndarray:
    """Raw amplitudes of the Bell state with index ``j`` (see ``make_bell_state``)."""
    s = _SQRT_HALF
    table = {
        0: (s, 0, 0, s),
        1: (0, s, s, 0),
        2: (0, s, -s, 0),
        3: (s, 0, 0, -s),
    }
    if j not in table:
        raise ValueError(f"Bell index must be 0..3, got {j!r}")
    return np.array(table[j], dtype=complex)


def make_bell_state(j: int) -> PureState:
    """Bell state |Phi_j>, equal to (I (x) sigma_j)|Phi_0> up to a global phase.

    Phi_0 = (|00>+|11>)/sqrt2, Phi_1 = (|01>+|10>)/sqrt2,
    Phi_2 = (|01>-|10>)/sqrt2, Phi_3 = (|00>-|11>)/sqrt2.
    """
    return PureState(2, bell_vector(j))


# --- measurement ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeasurementSpec:
    """A projective measurement on ``arity`` qubits.

    Three kinds are supported:

    ``basis``
        a complete orthonormal basis; outcome ``j`` is the row index.
    ``observable``
        a Hermitian Pauli operator; outcomes are ``+1`` and ``-1``.
    ``projectors``
        orthogonal projectors summing to identity (possibly of rank > 1);
        outcome ``j`` is the list index.

    ``label`` and ``descriptor`` are informational and used for reports and
    program files; they never influence the simulation.
    """

    kind: str
    arity: int
    vectors: np.ndarray | None = field(default=None, repr=False)
    pauli: object | None = None
    projectors: tuple | None = field(default=None, repr=False)
    label: str = ""
    descriptor: dict | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "basis":
            v = np.asarray(self.vectors, dtype=complex)
            d = 2**self.arity
            if v.shape != (d, d):
                raise InvalidMeasurementError(f"basis must be {d}x{d}, got {v.shape}")
            gram = v.conj() @ v.T
            if np.max(np.abs(gram - np.eye(d))) > STRUCT_TOL:
                raise InvalidMeasurementError("basis vectors are not orthonormal")
            object.__setattr__(self, "vectors", _freeze(v))
        elif self.kind == "observable":
            p = self.pauli
            if p is None or p.num_qubits != self.arity:
                raise InvalidMeasurementError("observable width does not match arity")
            if not p.is_hermitian():
                raise InvalidMeasurementError(f"observable {p} is not Hermitian")
            m = p.to_matrix()
            d = 2**self.arity
            projs = ((np.eye(d) + m) / 2, (np.eye(d) - m) / 2)
            object.__setattr__(self, "projectors", tuple(_freeze(q) for q in projs))
        elif self.kind == "projectors":
            projs = tuple(_freeze(q) for q in self.projectors)
            d = 2**self.arity
            total = np.zeros((d, d), dtype=complex)
            for q in projs:
                if q.shape != (d, d):
                    raise InvalidMeasurementError("projector has wrong shape")
                if np.max(np.abs(q @ q - q)) > STRUCT_TOL:
                    raise InvalidMeasurementError("projector is not idempotent")
                if np.max(np.abs(q - q.conj().T)) > STRUCT_TOL:
                    raise InvalidMeasurementError("projector is not Hermitian")
                total = total + q
            if np.max(np.abs(total - np.eye(d))) > STRUCT_TOL:
                raise InvalidMeasurementError("projectors do not sum to identity")
            object.__setattr__(self, "projectors", projs)
        else:
            raise InvalidMeasurementError(f"unknown measurement kind {self.kind!r}")

    @cached_property
    def outcomes(self) -> tuple:
        if self.kind == "basis":
            return tuple(range(2**self.arity))
        if self.kind == "observable":
            return (1, -1)
        return tuple(range(len(self.projectors)))

    def index_of(self, outcome) -> int:
        try:
            return self.outcomes.index(outcome)
        except ValueError:
            raise InvalidMeasurementError(
                f"{outcome!r} is not an outcome of this measurement"
            ) from None

    def projector(self, outcome) -> np.ndarray:
        i = self.index_of(outcome)
        if self.kind == "basis":
            v = self.vectors[i]
            return np.outer(v, v.conj())
        return self.projectors[i]

    # raw kernels ---------------------------------------------------------

    @cached_property
    def _bra(self) -> np.ndarray:
        return self.vectors.conj()

    def branch_weights(self, front: np.ndarray):
        """Return (probabilities, per-outcome data) for a front-reshaped state."""
        if self.kind == "basis":
            coeffs = self._bra @ front
            probs = (coeffs.real**2 + coeffs.imag**2).sum(axis=1)
            return probs, coeffs
        projected = [p @ front for p in self.projectors]
        probs = np.array([np.vdot(x, x).real for x in projected])
        return probs, projected

    def branch_state(self, index: int, data) -> np.ndarray:
        if self.kind == "basis":
            return self.vectors[index][:, None] * data[index][None, :]
        return data[index]


def basis_spec(vectors, label: str = "", descriptor: dict | None = None) -> MeasurementSpec:
    v = np.asarray(vectors, dtype=complex)
    k = int(round(np.log2(v.shape[0])))
    return MeasurementSpec("basis", k, vectors=v, label=label, descriptor=descriptor)


def observable_spec(pauli, label: str = "") -> MeasurementSpec:
    return MeasurementSpec("observable", pauli.num_qubits, pauli=pauli, label=label or str(pauli))


def projector_spec(projectors, label: str = "", descriptor: dict | None = None) -> MeasurementSpec:
    projs = [np.asarray(p, dtype=complex) for p in projectors]
    k = int(round(np.log2(projs[0].shape[0])))
    return MeasurementSpec(
        "projectors", k, projectors=tuple(projs), label=label, descriptor=descriptor
    )


def bell_basis_spec() -> MeasurementSpec:
    return basis_spec(np.array([bell_vector(j) for j in range(4)]), label="B")


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Cumulative-probability inversion over outcomes in ascending index order."""
    return sample_from_cdf(np.cumsum(probs), probs, rng)


def sample_from_cdf(cdf: np.ndarray, probs: np.ndarray, rng: np.random.Generator) -> int:
    """:func:`sample_index` with a precomputed cumulative sum."""
    u = rng.random() * cdf[-1]
    i = int(np.searchsorted(cdf, u, side="right"))
    i = min(i, len(probs) - 1)
    # never land on a zero-probability outcome through rounding at the boundary
    while probs[i] <= 0.0 and i > 0:
        i -= 1
    return i


def measure_array(vec, n, spec: MeasurementSpec, targets, rng=None, forced=None):
    """Measure a raw amplitude vector; returns (outcome, probability, post_vector).

    Exactly one of ``rng`` (sample) or ``forced`` (post-select) is used.
    """
    front = _to_front(vec, n, targets)
    probs, data = spec.branch_weights(front)
    total = probs.sum()
    if forced is None:
        idx = sample_index(probs, rng)
    else:
        idx = spec.index_of(forced)
    p = float(probs[idx] / total)
    if p < IMPOSSIBLE_TOL:
        raise ImpossibleBranchError(spec.outcomes[idx], p)
    post = spec.branch_state(idx, data) / np.sqrt(probs[idx])
    post = _from_front(post, n, targets)
    return spec.outcomes[idx], p, post


def _check_measurement(state: PureState, spec: MeasurementSpec, targets) -> tuple[int, ...]:
    if not isinstance(spec, MeasurementSpec):
        raise InvalidMeasurementError("spec must be a MeasurementSpec")
    targets = _check_targets(state.num_qubits, targets)
    if len(targets) != spec.arity:
        raise DimensionError(f"{spec.arity}-qubit measurement on {len(targets)} targets")
    return targets


def measure(state: PureState, spec: MeasurementSpec, targets, rng: np.random.Generator):
    """Sample a measurement outcome with Born probabilities.

    Returns ``(outcome, probability, post_state)``.
    """
    targets = _check_measurement(state, spec, targets)
    outcome, p, post = measure_array(state.amplitudes, state.num_qubits, spec, targets, rng=rng)
    return outcome, p, PureState(state.num_qubits, post)


def post_select(state: PureState, spec: MeasurementSpec, targets, outcome):
    """Force ``outcome``; returns ``(probability, post_state)``.

    Raises ImpossibleBranchError when the outcome probability is below 1e-12.
    """
    targets = _check_measurement(state, spec, targets)
    _, p, post = measure_array(
        state.amplitudes, state.num_qubits, spec, targets, forced=outcome
    )
    return p, PureState(state.num_qubits, post)


def outcome_probabilities(state: PureState, spec: MeasurementSpec, targets) -> dict:
    targets = _check_measurement(state, spec, targets)
    front = _to_front(state.amplitudes, state.num_qubits, targets)
    probs, _ = spec.branch_weights(front)
    probs = probs / probs.sum()
    return dict(zip(spec.outcomes, (float(p) for p in probs)))


def extract_subsystem(vec: np.ndarray, n: int, keep: Sequence[int], tol: float = 1e-8) -> np.ndarray:
    """Return the state of ``keep`` assuming it is unentangled from the rest.

    Raises ValueError when the reduced state is not pure within ``tol``.
    """
    keep = list(keep)
    m = _to_front(vec, n, keep)
    norms = np.einsum("ij,ij->j", m.conj(), m).real
    col = int(np.argmax(norms))
    u = m[:, col] / np.sqrt(norms[col])
    residual = m - np.outer(u, u.conj() @ m)
    if np.linalg.norm(residual) > tol:
        raise ValueError("subsystem is entangled with the discarded qubits")
    return u
