"""Exact gate synthesis over small alphabets, up to global phase and a trailing Pauli.

A trailing Pauli is free in every mode because it only updates the frame.
Searches are breadth first, so the shortest word is returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import linalg
from ..pauli import PauliString, all_paulis

MATCH_TOL = 1e-9


def _phase_key(m: np.ndarray) -> bytes:
    flat = m.reshape(-1)
    i = int(np.argmax(np.abs(flat) > 1e-6))
    ph = flat[i] / abs(flat[i])
    return np.round(m / ph, 8).tobytes()


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = MATCH_TOL) -> bool:
    d = a.shape[0]
    return abs(abs(np.trace(a.conj().T @ b)) - d) <= tol * d


def pauli_prefix(target: np.ndarray, m: np.ndarray) -> PauliString | None:
    """Pauli ``s`` with ``target == s . m`` up to phase, if any."""
    k = int(round(np.log2(m.shape[0])))
    rel = target @ m.conj().T
    for p in all_paulis(k):
        if equal_up_to_phase(rel, p.to_matrix()):
            return p
    return None


@dataclass(frozen=True)
class Word:
    """Letters in time order followed by a Pauli: ``target ~ pauli . L_n ... L_1``."""

    letters: tuple[str, ...]
    pauli: PauliString


def _bfs(letters: dict[str, np.ndarray], max_depth: int, accept):
    d = next(iter(letters.values())).shape[0]
    start = np.eye(d, dtype=complex)
    hit = accept((), start)
    if hit is not None:
        return hit
    frontier = [((), start)]
    seen = {_phase_key(start)}
    for _ in range(max_depth):
        nxt = []
        for word, m in frontier:
            for name, lm in letters.items():
                w = word + (name,)
                mm = lm @ m
                key = _phase_key(mm)
                if key in seen:
                    continue
                seen.add(key)
                hit = accept(w, mm)
                if hit is not None:
                    return hit
                nxt.append((w, mm))
        frontier = nxt
    return None


_WORD_CACHE: dict[tuple, Word | None] = {}


def find_word(target: np.ndarray, letters: dict[str, np.ndarray], max_depth: int = 8) -> Word | None:
    """Shortest word over ``letters`` equal to ``target`` up to phase and a trailing Pauli."""
    target = np.asarray(target, dtype=complex)
    key = (_phase_key(target), tuple((n, _phase_key(m)) for n, m in sorted(letters.items())), max_depth)
    if key in _WORD_CACHE:
        return _WORD_CACHE[key]

    def accept(w, m):
        p = pauli_prefix(target, m)
        return Word(w, p) if p is not None else None

    out = _bfs(letters, max_depth, accept)
    _WORD_CACHE[key] = out
    return out


def find_conjugator(axis_op: np.ndarray, letters: dict[str, np.ndarray], max_depth: int = 8):
    """Shortest word ``w`` with ``w X w^dagger == +-axis_op``; returns ``(letters, sign)``."""

    def accept(w, m):
        c = m @ linalg.X @ m.conj().T
        for s in (1, -1):
            if np.max(np.abs(c - s * axis_op)) <= MATCH_TOL:
                return w, s
        return None

    return _bfs(letters, max_depth, accept)


def word_matrix(letters: tuple[str, ...], alphabet: dict[str, np.ndarray]) -> np.ndarray:
    d = next(iter(alphabet.values())).shape[0]
    m = np.eye(d, dtype=complex)
    for name in letters:
        m = alphabet[name] @ m
    return m
