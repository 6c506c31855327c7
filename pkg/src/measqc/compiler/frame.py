"""Pauli frame: the classical record of Pauli corrections not yet applied.

Convention: ``physical = F . ideal``.  Flushing applies ``F^dagger`` to the
physical state, which recovers the ideal one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..exceptions import NotCliffordError
from ..gadgets import rotated_bell_spec
from ..linalg import MeasurementSpec, check_unitary
from ..pauli import PauliString, clifford_membership, conjugate_by_unitary, pauli_mul


class PauliFrame:
    """Per-qubit (x, z) flags plus a global phase exponent, stored as one PauliString."""

    def __init__(self, num_qubits: int, pauli: PauliString | None = None):
        self.num_qubits = num_qubits
        self.pauli = pauli if pauli is not None else PauliString.identity(num_qubits)

    def copy(self) -> "PauliFrame":
        return PauliFrame(self.num_qubits, self.pauli)

    def restrict(self, qubits: Sequence[int]) -> PauliString:
        """Frame on ``qubits`` with the phase dropped."""
        return self.pauli.restrict(qubits)

    def is_identity(self, qubits: Sequence[int] | None = None) -> bool:
        if qubits is None:
            return self.pauli.is_identity()
        qubits = list(qubits)
        return not (self.pauli.x[qubits].any() or self.pauli.z[qubits].any())

    def multiply(self, qubits: Sequence[int], p: PauliString) -> None:
        """F <- F . p (p acts on ``qubits``)."""
        self.pauli = pauli_mul(self.pauli, p.embed(self.num_qubits, qubits))

    def left_multiply(self, qubits: Sequence[int], p: PauliString) -> None:
        """F <- p . F."""
        self.pauli = pauli_mul(p.embed(self.num_qubits, qubits), self.pauli)

    def clear(self, qubits: Sequence[int]) -> None:
        qubits = list(qubits)
        if not (self.pauli.x[qubits].any() or self.pauli.z[qubits].any()):
            return
        x = self.pauli.x.copy()
        z = self.pauli.z.copy()
        x[qubits] = 0
        z[qubits] = 0
        self.pauli = PauliString(self.num_qubits, x, z, self.pauli.phase)

    def set(self, qubits: Sequence[int], p: PauliString) -> None:
        self.clear(qubits)
        self.multiply(qubits, p.with_phase(0))

    def compose(self, other: "PauliFrame") -> "PauliFrame":
        """Frame of ``other`` applied after ``self``: ``other.F . self.F``."""
        return PauliFrame(self.num_qubits, pauli_mul(other.pauli, self.pauli))

    def flush(self, vec: np.ndarray) -> np.ndarray:
        """Apply ``F^dagger`` to an amplitude vector over all frame qubits."""
        inv = PauliString(self.num_qubits, self.pauli.x, self.pauli.z, 0)
        out = inv.apply_to(vec, self.num_qubits)
        # F = i^phase * letters, so F^dagger = i^(-phase) * letters
        return out * (1j) ** (-self.pauli.phase % 4)

    def __repr__(self) -> str:
        return f"PauliFrame({self.pauli})"


@dataclass
class AbsorbResult:
    """What to perform next and the frame left afterwards.

    ``gate`` is the unitary to execute physically; ``measurement`` is the
    rotated Bell measurement performing it when the gate is not Clifford.
    """

    gate: np.ndarray
    frame: PauliFrame
    measurement: MeasurementSpec | None


def absorb_frame(frame: PauliFrame, gate, targets: Sequence[int]) -> AbsorbResult:
    """Fold the pending frame into the next gate.

    Clifford gates run unchanged and the frame is conjugated through them
    (``G F = F' G``).  A non-Clifford one-qubit gate ``G`` is replaced by
    ``G F^dagger`` so the frame on its qubit is consumed.
    """
    g = check_unitary(gate, len(targets))
    targets = list(targets)
    if clifford_membership(g):
        out = frame.copy()
        out.pauli = conjugate_by_unitary(frame.pauli, g, targets)
        return AbsorbResult(g, out, None)
    if len(targets) != 1:
        raise NotCliffordError("only one-qubit non-Clifford gates can absorb a frame")
    f = frame.restrict(targets)
    new = g @ f.to_matrix().conj().T
    out = frame.copy()
    out.clear(targets)
    return AbsorbResult(new, out, rotated_bell_spec(new))
