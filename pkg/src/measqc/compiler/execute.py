"""Dense execution of measurement programs.

The executor holds the physical amplitude vector, a Pauli frame over
physical qubits and a label-to-physical map.  A measurement's physical
outcome is translated to the outcome the ideal (frame-free) state would
have produced, which is what the program's registers record.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .. import linalg
from ..exceptions import NonTerminationError, ProgramError
from ..linalg import MeasurementSpec, PureState
from ..measurement_sets import SpecialU, pauli_code, step_code
from ..pauli import PauliString
from .frame import PauliFrame
from .ir import AbsorbRule, FrameRule, MeasurementProgram, ProgramMeasurement, RepeatBlock
from .specs import spec_bell, spec_init, spec_rotated

_PERM_TOL = 1e-8


@dataclass(frozen=True)
class TraceEntry:
    """One performed measurement; ``outcome`` is physical, ``value`` the register value."""

    register: str
    targets: tuple[int, ...]
    outcome: object
    value: object
    probability: float


@dataclass
class ExecutionResult:
    """Outcome of one run.

    ``state`` is the output register with the frame flushed classically;
    ``physical_state`` is what the qubits actually hold and
    ``residual_frame`` the Pauli relating the two.
    """

    state: PureState
    physical_state: PureState
    residual_frame: PauliString
    trace: list[TraceEntry]
    registers: dict
    resource_counts: dict
    frame_policy: str


@dataclass
class _Counts:
    by_tag: Counter = field(default_factory=Counter)
    bell: int = 0
    four_qubit: int = 0
    flush_bell: list = field(default_factory=list)
    walk_lengths: list = field(default_factory=list)
    walk_flush_lengths: list = field(default_factory=list)

    def as_dict(self, total: int) -> dict:
        return {
            "measurements": total,
            "bell_measurements": self.bell,
            "four_qubit_measurements": self.four_qubit,
            "by_tag": dict(sorted(self.by_tag.items())),
            "pauli_flush_bell_measurements": list(self.flush_bell),
            "walk_lengths": list(self.walk_lengths),
            "walk_flush_lengths": list(self.walk_flush_lengths),
        }


def _pauli_key(p: PauliString) -> tuple:
    return p.key(with_phase=False)


_PERM_CACHE: dict = {}


def outcome_permutation(spec: MeasurementSpec, frame: PauliString) -> tuple[int, ...]:
    """``perm[o]`` is the outcome index ``o'`` with ``F^dagger Pi_o F = Pi_o'``.

    Raises ProgramError when the frame does not permute the measurement, which
    means the program needed an absorb rule at this point.
    """
    key = (id(spec), _pauli_key(frame))
    hit = _PERM_CACHE.get(key)
    if hit is not None and hit[0] is spec:
        return hit[1]
    m = frame.to_matrix()
    n_out = len(spec.outcomes)
    if spec.kind == "basis":
        overlaps = np.abs(spec.vectors.conj() @ (m.conj().T @ spec.vectors.T))
        perm = []
        for o in range(n_out):
            o2 = int(np.argmax(overlaps[:, o]))
            if abs(overlaps[o2, o] - 1) > _PERM_TOL:
                raise ProgramError(f"frame {frame} does not permute measurement {spec.label!r}")
            perm.append(o2)
    else:
        projs = [spec.projector(o) for o in spec.outcomes]
        perm = []
        for o in range(n_out):
            conj = m.conj().T @ projs[o] @ m
            match = [i for i, q in enumerate(projs) if np.max(np.abs(conj - q)) < _PERM_TOL]
            if not match:
                raise ProgramError(f"frame {frame} does not permute measurement {spec.label!r}")
            perm.append(match[0])
    perm = tuple(perm)
    if len(_PERM_CACHE) > 8192:
        _PERM_CACHE.clear()
    _PERM_CACHE[key] = (spec, perm)
    return perm


class _Machine:
    def __init__(self, program: MeasurementProgram, rng, policy: str, forced: dict | None):
        self.p = program
        self.n = program.num_physical_qubits
        self.rng = rng
        self.policy = policy
        self.forced = forced or {}
        # every qubit starts in an arbitrary product state; initialization must fix it
        vec = np.ones(1, dtype=complex)
        for _ in range(self.n):
            vec = np.kron(vec, linalg.random_state(1, rng).amplitudes)
        self.vec = vec
        self.frame = PauliFrame(self.n)
        self.phys = list(range(self.n))  # label -> physical qubit
        self.registers: dict = {}
        self.trace: list[TraceEntry] = []
        self.counts = _Counts()
        self.su = self._special_u()
        self.spec_u = spec_rotated(self.su.matrix, "B_U+") if self.su is not None else None

    def _special_u(self):
        mode = self.p.metadata.get("mode", {})
        if self.p.mode == "single-measurement":
            return SpecialU(float(mode["theta"]), float(mode["phi"]))
        return None

    # primitives ---------------------------------------------------------

    def _phys(self, labels) -> list[int]:
        return [self.phys[q] for q in labels]

    def _raw(self, spec: MeasurementSpec, qs, forced_index=None):
        forced = None if forced_index is None else spec.outcomes[forced_index]
        out, prob, self.vec = linalg.measure_array(
            self.vec, self.n, spec, qs, rng=self.rng if forced is None else None, forced=forced
        )
        return spec.index_of(out), prob

    def _count(self, spec: MeasurementSpec, tag: str) -> None:
        self.counts.by_tag[tag or spec.label] += 1
        fam = (spec.descriptor or {}).get("family")
        if fam in ("bell", "rotated-bell") and spec.arity == 2:
            self.counts.bell += 1
        if spec.arity == 4:
            self.counts.four_qubit += 1

    def measure(self, spec, labels, register, role="normal", tag="", absorb_frame=None):
        """Measure and return the register value.

        ``absorb_frame`` is a Pauli on ``labels`` already folded into ``spec``;
        it is excluded from outcome translation.
        """
        qs = self._phys(labels)
        self._count(spec, tag)
        if role == "init":
            idx, prob = self._raw(spec, qs)
            out = spec.outcomes[idx]
            self.frame.set(qs, PauliString.from_label("X" if out == -1 else "I"))
            value = 1
        elif role == "fresh":
            idx, prob = self._raw(spec, qs)
            self.frame.clear(qs)
            value = out = spec.outcomes[idx]
        else:
            f = self.frame.restrict(qs)
            if absorb_frame is not None:
                f = PauliString(f.num_qubits, f.x ^ absorb_frame.x, f.z ^ absorb_frame.z, 0)
            perm = outcome_permutation(spec, f)
            forced = None
            if register in self.forced:
                want = spec.index_of(self.forced[register])
                forced = perm.index(want)
            idx, prob = self._raw(spec, qs, forced)
            out = spec.outcomes[idx]
            value = spec.outcomes[perm[idx]]
        self.registers[register] = value
        self.trace.append(TraceEntry(register, tuple(qs), out, value, prob))
        return value

    def swap_labels(self, a: int, b: int) -> None:
        self.phys[a], self.phys[b] = self.phys[b], self.phys[a]

    # instructions -------------------------------------------------------

    def run(self):
        rules_after: dict[int, list[FrameRule]] = {}
        absorbs: dict[int, AbsorbRule] = {}
        for r in self.p.feedforward:
            if isinstance(r, FrameRule):
                rules_after.setdefault(r.after, []).append(r)
            else:
                absorbs[r.before] = r
        for i, ins in enumerate(self.p.instructions):
            if isinstance(ins, ProgramMeasurement):
                rule = absorbs.get(i)
                if rule is None:
                    self.measure(ins.spec, ins.targets, ins.register, ins.role, ins.tag)
                else:
                    self._absorbed(ins, rule)
            else:
                self._block(ins, i)
            for r in rules_after.get(i, ()):
                self._apply_rule(r)

    def _apply_rule(self, rule: FrameRule) -> None:
        missing = [r for r in rule.registers if r not in self.registers]
        if missing:
            raise ProgramError(f"feedforward reads unwritten register(s) {missing}")
        values = tuple(self.registers[r] for r in rule.registers)
        self.frame.multiply(self._phys(rule.qubits), rule.lookup(values))

    def _absorbed(self, ins: ProgramMeasurement, rule: AbsorbRule) -> None:
        """Measure ``B_{(G F^dagger)^dagger}`` so the frame on ``rule.qubits`` is consumed."""
        qs = self._phys(rule.qubits)
        f = self.frame.restrict(qs)
        spec = spec_rotated(rule.gate @ f.to_matrix().conj().T, label=ins.spec.label)
        pos = [ins.targets.index(q) for q in rule.qubits]
        absorbed = f.embed(len(ins.targets), pos)
        self.measure(spec, ins.targets, ins.register, ins.role, ins.tag, absorb_frame=absorbed)
        self.frame.clear(qs)

    def _block(self, blk: RepeatBlock, index: int) -> None:
        if blk.optional and self.policy != "eager":
            return
        if blk.kind == "bell-flush":
            self._bell_flush(blk, index)
        elif blk.kind == "walk":
            self._walk(blk, index)
        else:
            self._walk_flush(blk, index)

    def _bell_flush(self, blk: RepeatBlock, index: int) -> None:
        """Recursive Pauli gadget: teleport through ``B_{sigma}`` until the frame is gone."""
        d = blk.data[0]
        b, c = blk.pool
        rounds = 0
        bells = 0
        while not self.frame.is_identity(self._phys([d])):
            if rounds >= blk.max_iters:
                raise NonTerminationError(f"Pauli flush exceeded {blk.max_iters} rounds")
            reg = f"{blk.tag}{index}.{rounds}"
            sigma = self.frame.restrict(self._phys([d]))
            self.measure(spec_init(), (b,), f"{reg}.init0", "init", "init")
            self.measure(spec_init(), (c,), f"{reg}.init1", "init", "init")
            k = self.measure(spec_bell(), (b, c), f"{reg}.k", tag="flush-bell")
            self.frame.multiply(self._phys([c]), PauliString.from_sigma_indices([k]))
            # the data frame becomes the gate: undo sigma physically
            self.frame.clear(self._phys([d]))
            j = self.measure(spec_rotated(sigma.with_phase(0).to_matrix()), (d, b), f"{reg}.j", tag="flush-bell")
            self.frame.multiply(self._phys([c]), PauliString.from_sigma_indices([j]))
            self.frame.clear(self._phys([d, b]))
            self.swap_labels(d, c)
            rounds += 1
            bells += 2
        if rounds:
            self.counts.flush_bell.append(bells)

    def _prep_pool(self, pool, order, reg: str) -> int:
        """Rank-one measurement ``B_{U^dagger}`` on the pool prepares ancilla C or D."""
        return self.measure(self.spec_u, order, reg, "fresh", "walk-prep")

    def _walk(self, blk: RepeatBlock, index: int) -> None:
        """Primitive-1 walk: apply ``U^dagger P_k P_j U`` until the product equals the target."""
        d0, d1 = blk.data
        p0, p1, p2, p3 = blk.pool
        if not self.frame.is_identity(self._phys(blk.data)):
            raise ProgramError("walk needs an empty frame on its data qubits")
        acc = 0
        goal = pauli_code(blk.target)
        iters = 0
        while True:
            if iters >= blk.max_iters:
                raise NonTerminationError(f"walk exceeded {blk.max_iters} iterations")
            reg = f"{blk.tag}{index}.{iters}"
            k = self._prep_pool(blk.pool, (p2, p3, p0, p1), f"{reg}.k")
            j = self.measure(self.spec_u, (d0, d1, p0, p1), f"{reg}.j", "fresh", "walk-core")
            acc ^= step_code(k, j)
            self.swap_labels(d0, p2)
            self.swap_labels(d1, p3)
            iters += 1
            if acc == goal:
                break
        self.counts.walk_lengths.append(iters)

    def _walk_flush(self, blk: RepeatBlock, index: int) -> None:
        """Primitive-2 walk: multiply the data frame by ``P_k P_j`` until it vanishes."""
        d0, d1 = blk.data
        p0, p1, p2, p3 = blk.pool
        code = pauli_code(self.frame.restrict(self._phys(blk.data)))
        self.frame.clear(self._phys(blk.data))
        iters = 0
        while code:
            if iters >= blk.max_iters:
                raise NonTerminationError(f"walk flush exceeded {blk.max_iters} iterations")
            reg = f"{blk.tag}{index}.{iters}"
            k = self._prep_pool(blk.pool, (p0, p1, p2, p3), f"{reg}.k")
            j = self.measure(self.spec_u, (p0, p1, d0, d1), f"{reg}.j", "fresh", "walk-core")
            code ^= step_code(k, j)
            self.swap_labels(d0, p2)
            self.swap_labels(d1, p3)
            iters += 1
        if iters:
            self.counts.walk_flush_lengths.append(iters)

    # output -------------------------------------------------------------

    def result(self) -> ExecutionResult:
        k = len(self.p.output_map)
        qs = [self.phys[self.p.output_map[q]] for q in range(k)]
        phys = linalg.extract_subsystem(self.vec, self.n, qs)
        residual = self.frame.restrict(qs)
        flushed = PauliFrame(k, residual).flush(phys)
        return ExecutionResult(
            PureState(k, flushed),
            PureState(k, phys),
            residual,
            self.trace,
            self.registers,
            self.counts.as_dict(len(self.trace)),
            self.policy,
        )


def execute(program: MeasurementProgram, rng: np.random.Generator | int | None = None,
            frame_policy: str | None = None, forced: dict | None = None) -> ExecutionResult:
    """Run ``program`` once on a dense statevector.

    Parameters
    ----------
    program
        A validated measurement program.
    rng
        Generator or integer seed; the same seed gives the same trace.
    frame_policy
        ``"eager"`` runs the optional flush blocks so the residual frame on
        the outputs is the identity; ``"deferred"`` skips them and reports
        the residual frame.  Defaults to the program's own policy.
    forced
        Optional ``{register: value}`` of register values to post-select.
    """
    policy = frame_policy or program.frame_policy
    if policy not in ("eager", "deferred"):
        raise ValueError("frame_policy must be 'eager' or 'deferred'")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    program.validate()
    m = _Machine(program, rng, policy, forced)
    m.run()
    return m.result()
