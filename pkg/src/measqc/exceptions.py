"""Exception hierarchy for measqc."""

from __future__ import annotations


class MeasQCError(Exception):
    """Base class for all package errors."""


class DimensionError(MeasQCError, ValueError):
    """Operands have incompatible sizes or qubit counts."""


class InvalidMeasurementError(MeasQCError, ValueError):
    """A measurement description violates its invariants."""


class ImpossibleBranchError(MeasQCError):
    """A forced measurement outcome has (numerically) zero probability."""

    def __init__(self, outcome, probability: float):
        self.outcome = outcome
        self.probability = probability
        super().__init__(f"outcome {outcome!r} has probability {probability:.3e} < 1e-12")


class NotUnitaryError(MeasQCError, ValueError):
    """A matrix expected to be unitary is not."""


class NotHermitianError(MeasQCError, ValueError):
    """A Pauli operator used as an observable is not Hermitian."""


class ContradictoryOutcomeError(MeasQCError):
    """A forced outcome disagrees with a deterministic stabilizer measurement."""


class NonTerminationError(MeasQCError):
    """A repeat-until-success loop exceeded its iteration budget."""


class NotCliffordError(MeasQCError, ValueError):
    """An operation required a Clifford unitary."""


class UnsupportedGateError(MeasQCError):
    """A gate cannot be expressed under the requested compilation mode."""


class QubitBudgetError(MeasQCError):
    """A program would need more physical qubits than allowed."""


class ProgramError(MeasQCError):
    """A measurement program is malformed (e.g. reads an unwritten register)."""
