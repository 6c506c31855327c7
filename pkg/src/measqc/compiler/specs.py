"""Measurement specs used by compiled programs, tagged for serialization."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..gadgets import p_plus_minus_spec, rotated_bell_basis
from ..linalg import MeasurementSpec, basis_spec, bell_vector
from ..measurement_sets import rotated_bell_observables
from ..pauli import PauliString


@lru_cache(maxsize=None)
def spec_pauli(label: str) -> MeasurementSpec:
    p = PauliString.from_label(label)
    return MeasurementSpec("observable", p.num_qubits, pauli=p, label=str(p),
                           descriptor={"family": "pauli", "pauli": str(p)})


def spec_init() -> MeasurementSpec:
    return spec_pauli("Z")


@lru_cache(maxsize=None)
def spec_bell() -> MeasurementSpec:
    return basis_spec(
        np.array([bell_vector(j) for j in range(4)]),
        label="B",
        descriptor={"family": "bell", "observables": ["+XX", "+ZZ"]},
    )


@lru_cache(maxsize=None)
def spec_p_plus_minus() -> MeasurementSpec:
    base = p_plus_minus_spec()
    return MeasurementSpec("projectors", 2, projectors=base.projectors, label="P+-",
                           descriptor={"family": "p-plus-minus"})


_ROTATED: dict[bytes, MeasurementSpec] = {}


def spec_rotated(gate: np.ndarray, label: str = "") -> MeasurementSpec:
    """``B_{gate^dagger}``; cached by the exact matrix bytes."""
    g = np.ascontiguousarray(np.asarray(gate, dtype=complex))
    key = g.tobytes()
    spec = _ROTATED.get(key)
    if spec is None:
        desc = {"family": "rotated-bell", "gate": g.copy()}
        if g.shape == (2, 2):
            desc["observables"] = [o.text for o in rotated_bell_observables(g)]
        spec = basis_spec(rotated_bell_basis(g), label=label or "B_U+", descriptor=desc)
        if len(_ROTATED) > 4096:
            _ROTATED.clear()
        _ROTATED[key] = spec
    return spec
