"""Measurement-only quantum computation: gadgets, measurement sets and a compiler."""

from .exceptions import MeasQCError
from .linalg import PureState, MeasurementSpec, apply_gate, fidelity, measure, post_select
from .pauli import PauliString, pauli
from .stabilizer import StabilizerTableau, stabilizer_equal, tableau_measure

__version__ = "0.1.0"
