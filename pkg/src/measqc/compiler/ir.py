"""Gate circuits in, measurement programs out."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .. import linalg
from ..exceptions import DimensionError, ProgramError
from ..linalg import MeasurementSpec, PureState, apply_gate, check_unitary
from ..measurement_sets import SpecialU
from ..pauli import PauliString

GATE_ARITY = {
    "X": 1, "Y": 1, "Z": 1, "H": 1, "P": 1, "T": 1, "U1": 1,
    "CNOT": 2, "SWAP": 2, "U2": 2,
}
_FIXED = {
    "X": linalg.X, "Y": linalg.Y, "Z": linalg.Z, "H": linalg.H,
    "P": linalg.PHASE, "T": linalg.T, "CNOT": linalg.CNOT, "SWAP": linalg.SWAP,
}
PAULI_GATES = {"X": 1, "Y": 2, "Z": 3}


@dataclass(frozen=True, eq=False)
class Gate:
    name: str
    targets: tuple[int, ...]
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.name not in GATE_ARITY:
            raise ValueError(f"unknown gate {self.name!r}")
        t = tuple(int(q) for q in self.targets)
        if len(t) != GATE_ARITY[self.name]:
            raise DimensionError(f"{self.name} acts on {GATE_ARITY[self.name]} qubit(s), got {t}")
        if len(set(t)) != len(t):
            raise DimensionError(f"{self.name} has repeated targets {t}")
        object.__setattr__(self, "targets", t)
        if self.name in ("U1", "U2"):
            if self.matrix is None:
                raise ValueError(f"{self.name} needs a matrix")
            object.__setattr__(self, "matrix", check_unitary(self.matrix, len(t)))
        elif self.matrix is not None:
            raise ValueError(f"{self.name} takes no matrix")

    @property
    def unitary(self) -> np.ndarray:
        return self.matrix if self.matrix is not None else _FIXED[self.name]


@dataclass
class GateCircuit:
    num_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        if not 1 <= self.num_qubits <= linalg.MAX_QUBITS:
            raise DimensionError(f"num_qubits must be in 1..{linalg.MAX_QUBITS}")
        for g in self.gates:
            if any(q < 0 or q >= self.num_qubits for q in g.targets):
                raise DimensionError(f"{g.name} targets {g.targets} out of range")

    def apply(self, state: PureState | None = None) -> PureState:
        """Dense application of the whole circuit (default input ``|0...0>``)."""
        state = state or PureState.zeros(self.num_qubits)
        for g in self.gates:
            state = apply_gate(state, g.unitary, g.targets)
        return state

    @classmethod
    def from_list(cls, num_qubits: int, gates) -> "GateCircuit":
        """Build from ``[(name, targets), (name, targets, matrix), ...]``."""
        return cls(num_qubits, [g if isinstance(g, Gate) else Gate(*g) for g in gates])


# --- program -----------------------------------------------------------------


@dataclass(frozen=True)
class ProgramMeasurement:
    """One measurement on qubit labels.

    ``role`` is ``"init"`` for a Z measurement that prepares ``|0>`` (the
    frame absorbs an X on outcome -1), ``"fresh"`` when the targets hold no
    tracked state so the physical outcome is used as is, and ``"normal"``
    otherwise.  ``tag`` names the gadget step for resource accounting.
    """

    spec: MeasurementSpec
    targets: tuple[int, ...]
    register: str
    role: str = "normal"
    tag: str = ""

    def __post_init__(self):
        t = tuple(int(q) for q in self.targets)
        if len(set(t)) != len(t):
            raise ProgramError(f"duplicate targets {t}")
        if len(t) != self.spec.arity:
            raise ProgramError(f"{self.spec.arity}-qubit measurement on {len(t)} targets")
        if self.role not in ("init", "fresh", "normal"):
            raise ProgramError(f"unknown role {self.role!r}")
        object.__setattr__(self, "targets", t)


@dataclass(frozen=True)
class RepeatBlock:
    """A measurement-only loop whose length depends on outcomes.

    kinds:
      ``bell-flush``  remove the frame on ``data[0]`` with the recursive Bell
                      gadget; ``pool`` holds two scratch qubits.
      ``walk``        primitive-1 random walk applying ``U^dagger target U``.
      ``walk-flush``  primitive-2 random walk removing the frame on ``data``.
    ``optional`` blocks run only under the eager frame policy.
    """

    kind: str
    data: tuple[int, ...]
    pool: tuple[int, ...]
    target: PauliString | None = None
    optional: bool = False
    max_iters: int = 512
    tag: str = ""

    def __post_init__(self):
        sizes = {"bell-flush": (1, 2), "walk": (2, 4), "walk-flush": (2, 4)}
        if self.kind not in sizes:
            raise ProgramError(f"unknown repeat kind {self.kind!r}")
        if (len(self.data), len(self.pool)) != sizes[self.kind]:
            raise ProgramError(f"{self.kind} needs data/pool sizes {sizes[self.kind]}")
        if self.kind == "walk" and (self.target is None or self.target.num_qubits != 2):
            raise ProgramError("walk needs a two-qubit target Pauli")


Instruction = Union[ProgramMeasurement, RepeatBlock]


@dataclass(frozen=True)
class FrameRule:
    """After instruction ``after``: frame[qubits] <- frame[qubits] * table[register values]."""

    after: int
    qubits: tuple[int, ...]
    registers: tuple[str, ...]
    table: dict

    def lookup(self, values: tuple) -> PauliString:
        try:
            return self.table[values]
        except KeyError:
            raise ProgramError(f"no frame entry for outcomes {values}") from None


@dataclass(frozen=True, eq=False)
class AbsorbRule:
    """Before instruction ``before``: measure ``B_{(gate F^dagger)^dagger}`` and clear F on ``qubits``."""

    before: int
    gate: np.ndarray
    qubits: tuple[int, ...]


FeedForward = Union[FrameRule, AbsorbRule]


@dataclass
class MeasurementProgram:
    num_physical_qubits: int
    instructions: list[Instruction]
    feedforward: list[FeedForward]
    output_map: dict[int, int]
    mode: str
    frame_policy: str = "deferred"
    metadata: dict = field(default_factory=dict)

    def validate(self) -> None:
        """Structural checks: labels in range, registers written before read."""
        n = self.num_physical_qubits
        written: dict[str, int] = {}
        for i, ins in enumerate(self.instructions):
            qs = ins.targets if isinstance(ins, ProgramMeasurement) else ins.data + ins.pool
            if any(q < 0 or q >= n for q in qs):
                raise ProgramError(f"instruction {i} uses a label outside 0..{n - 1}")
            if isinstance(ins, ProgramMeasurement):
                written.setdefault(ins.register, i)
        for rule in self.feedforward:
            if isinstance(rule, FrameRule):
                for r in rule.registers:
                    if r not in written or written[r] > rule.after:
                        raise ProgramError(f"register {r!r} read before it is written")
        if sorted(self.output_map) != list(range(len(self.output_map))):
            raise ProgramError("output_map must cover logical qubits 0..k-1")

    def measurements(self):
        for ins in self.instructions:
            if isinstance(ins, ProgramMeasurement):
                yield ins
