"""Stabilizer-only tableau engine.

Only the n stabilizer generators are stored (no destabilizers).  When a
measured Pauli commutes with every generator its value is recovered by
solving a GF(2) linear system, which is ample for the widths used here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg
from .exceptions import (
    ContradictoryOutcomeError,
    DimensionError,
    NotHermitianError,
)
from .linalg import PureState
from .pauli import CliffordGate, PauliString, conjugate_by_clifford, pauli_commutes, pauli_mul


def gf2_rank(m: np.ndarray) -> int:
    m = (np.asarray(m, dtype=np.uint8) & 1).copy()
    rows, cols = m.shape
    rank = 0
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if m[r, c]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(rows):
            if r != rank and m[r, c]:
                m[r] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def gf2_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Solve ``a @ c = b`` over GF(2); returns one solution or ``None``."""
    a = (np.asarray(a, dtype=np.uint8) & 1)
    b = (np.asarray(b, dtype=np.uint8) & 1)
    rows, cols = a.shape
    aug = np.concatenate([a, b.reshape(-1, 1)], axis=1).copy()
    pivots = []
    r = 0
    for c in range(cols):
        p = next((i for i in range(r, rows) if aug[i, c]), None)
        if p is None:
            continue
        aug[[r, p]] = aug[[p, r]]
        for i in range(rows):
            if i != r and aug[i, c]:
                aug[i] ^= aug[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    if np.any(aug[r:, -1]):
        return None
    sol = np.zeros(cols, dtype=np.uint8)
    for i, c in enumerate(pivots):
        sol[c] = aug[i, -1]
    return sol


@dataclass(frozen=True)
class StabilizerTableau:
    """``num_qubits`` independent, commuting, Hermitian Pauli generators."""

    generators: tuple[PauliString, ...]

    def __post_init__(self):
        gens = tuple(self.generators)
        if not gens:
            raise ValueError("a tableau needs at least one generator")
        n = gens[0].num_qubits
        if len(gens) != n:
            raise DimensionError(f"{len(gens)} generators for {n} qubits")
        for g in gens:
            if g.num_qubits != n:
                raise DimensionError("generators have different widths")
            if g.phase not in (0, 2):
                raise NotHermitianError(f"generator {g} must carry sign +1 or -1")
        for i in range(n):
            for j in range(i + 1, n):
                if not pauli_commutes(gens[i], gens[j]):
                    raise ValueError(f"generators {gens[i]} and {gens[j]} anticommute")
        if gf2_rank(self._symplectic(gens)) != n:
            raise ValueError("generators are not independent")
        object.__setattr__(self, "generators", gens)

    @staticmethod
    def _symplectic(gens) -> np.ndarray:
        return np.array([np.concatenate([g.x, g.z]) for g in gens], dtype=np.uint8)

    @classmethod
    def from_labels(cls, labels: Sequence[str]) -> "StabilizerTableau":
        return cls(tuple(PauliString.from_label(s.replace(" ", "")) for s in labels))

    @classmethod
    def zero_state(cls, n: int) -> "StabilizerTableau":
        return cls(tuple(PauliString.single(n, q, "Z") for q in range(n)))

    @property
    def num_qubits(self) -> int:
        return self.generators[0].num_qubits

    @property
    def labels(self) -> list[str]:
        return [str(g) for g in self.generators]

    def __str__(self) -> str:
        return "{" + ", ".join(self.labels) + "}"


def tableau_apply_clifford(t: StabilizerTableau, g: CliffordGate) -> StabilizerTableau:
    return StabilizerTableau(tuple(conjugate_by_clifford(p, g) for p in t.generators))


def _group_element(t: StabilizerTableau, m: PauliString) -> PauliString | None:
    """The element of the stabilizer group equal to +-m, or None if absent."""
    gens = t.generators
    a = StabilizerTableau._symplectic(gens).T
    b = np.concatenate([m.x, m.z])
    c = gf2_solve(a, b)
    if c is None:
        return None
    prod = PauliString.identity(t.num_qubits)
    for bit, g in zip(c, gens):
        if bit:
            prod = pauli_mul(prod, g)
    return prod


def _draw_sign(rng) -> int:
    # cumulative inversion over outcomes (+1, -1), each with probability 1/2
    return 1 if rng.random() < 0.5 else -1


def tableau_measure(t: StabilizerTableau, m: PauliString, forced_outcome: int | None = None,
                    rng: np.random.Generator | None = None):
    """Measure the Hermitian Pauli ``m``.

    Returns ``(outcome, new_tableau, deterministic)``.  When some generator
    anticommutes with ``m``, the lowest-index such generator N1 is replaced by
    ``outcome * m`` and every other anticommuting generator Nk by ``N1 Nk``.
    """
    if m.num_qubits != t.num_qubits:
        raise DimensionError(f"{m.num_qubits}-qubit observable on {t.num_qubits}-qubit tableau")
    if not m.is_hermitian():
        raise NotHermitianError(f"{m} is not Hermitian")
    if forced_outcome not in (None, 1, -1):
        raise ValueError("forced_outcome must be +1, -1 or None")
    gens = list(t.generators)
    anti = [i for i, g in enumerate(gens) if not pauli_commutes(g, m)]
    if not anti:
        elem = _group_element(t, m)
        if elem is None:  # impossible for a full-rank tableau
            raise AssertionError("commuting observable outside the stabilizer group")
        rel = (elem.phase - m.phase) % 4
        assert rel in (0, 2), "imaginary relative phase for Hermitian operators"
        outcome = 1 if rel == 0 else -1
        if forced_outcome is not None and forced_outcome != outcome:
            raise ContradictoryOutcomeError(
                f"measuring {m} is deterministic with outcome {outcome:+d}"
            )
        return outcome, t, True
    outcome = forced_outcome if forced_outcome is not None else _draw_sign(rng)
    pivot = anti[0]
    n1 = gens[pivot]
    for i in anti[1:]:
        gens[i] = pauli_mul(n1, gens[i])
        assert gens[i].phase in (0, 2)
    gens[pivot] = m if outcome == 1 else -m
    return outcome, StabilizerTableau(tuple(gens)), False


def stabilizer_equal(t1: StabilizerTableau, t2: StabilizerTableau) -> bool:
    """True iff both tableaus generate the same signed stabilizer group."""
    if t1.num_qubits != t2.num_qubits:
        return False
    for g in t2.generators:
        if not all(pauli_commutes(g, h) for h in t1.generators):
            return False
        elem = _group_element(t1, g)
        if elem is None or elem.phase != g.phase:
            return False
    return True


def tableau_to_state(t: StabilizerTableau) -> PureState:
    """Dense +1 common eigenstate of all generators (global phase arbitrary)."""
    n = t.num_qubits
    if n > 12:
        raise DimensionError("tableau_to_state supports at most 12 qubits")
    for b in range(2**n):
        v = np.zeros(2**n, dtype=complex)
        v[b] = 1.0
        for g in t.generators:
            v = 0.5 * (v + g.apply_to(v))
        norm = np.linalg.norm(v)
        if norm > 1e-6:
            return PureState(n, v / norm)
    raise AssertionError("projection annihilated every computational basis state")


def state_is_stabilized(state: PureState, t: StabilizerTableau, tol: float = linalg.STRUCT_TOL) -> bool:
    v = state.amplitudes
    return all(np.max(np.abs(g.apply_to(v) - v)) <= tol for g in t.generators)
