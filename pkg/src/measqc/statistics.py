"""Monte Carlo checks of hitting-time claims against a geometric model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .gadgets import gadget_pauli_recursive
from .measurement_sets import SpecialU, random_walk_to_target
from .pauli import PauliString

# a 3-sigma two-sided test
THREE_SIGMA_P = 2 * stats.norm.sf(3.0)


@dataclass
class MeanCheck:
    """Sample mean against an expected value with a z-score."""

    mean: float
    stderr: float
    expected: float
    model_sigma: float

    @property
    def z(self) -> float:
        return (self.mean - self.expected) / self.model_sigma if self.model_sigma else 0.0

    @property
    def ok(self) -> bool:
        return abs(self.z) <= 3.0

    def as_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "expected": self.expected,
                "model_sigma_of_mean": self.model_sigma, "z": self.z, "within_3_sigma": self.ok}


def geometric_mean_check(samples, p: float, scale: float = 1.0) -> MeanCheck:
    """Compare ``mean(samples)`` with ``scale / p`` for geometric hitting times scaled by ``scale``."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    sigma = scale * np.sqrt(1 - p) / p / np.sqrt(n)
    stderr = float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return MeanCheck(float(x.mean()), stderr, scale / p, float(sigma))


@dataclass
class ChiSquare:
    statistic: float
    dof: int
    p_value: float

    @property
    def rejected(self) -> bool:
        return self.p_value < THREE_SIGMA_P

    def as_dict(self) -> dict:
        return {"statistic": self.statistic, "dof": self.dof, "p_value": self.p_value,
                "rejected_at_3_sigma": self.rejected}


def geometric_chi_square(samples, p: float, min_expected: float = 5.0) -> ChiSquare:
    """Pearson goodness of fit to Geometric(p) on {1, 2, ...}.

    Bins are 1, 2, ..., K and a tail bin ``> K``, with K the largest value
    whose expected count is at least ``min_expected``.
    """
    x = np.asarray(samples, dtype=int)
    n = len(x)
    k = 1
    while n * stats.geom.pmf(k + 1, p) >= min_expected and n * stats.geom.sf(k + 1, p) >= min_expected:
        k += 1
    observed = np.array([np.sum(x == i) for i in range(1, k + 1)] + [np.sum(x > k)], dtype=float)
    expected = n * np.append(stats.geom.pmf(np.arange(1, k + 1), p), stats.geom.sf(k, p))
    res = stats.chisquare(observed, expected)
    return ChiSquare(float(res.statistic), len(observed) - 1, float(res.pvalue))


def histogram(samples) -> dict[int, int]:
    values, counts = np.unique(np.asarray(samples, dtype=int), return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


def pauli_gadget_samples(trials: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Rounds and Bell-measurement counts of the recursive Pauli gadget.

    Each trial applies a uniformly random non-identity Pauli to |0>.
    """
    rng = np.random.default_rng(seed)
    rounds = np.empty(trials, dtype=int)
    bells = np.empty(trials, dtype=int)
    for i in range(trials):
        run = gadget_pauli_recursive(int(rng.integers(1, 4)), rng, max_rounds=512)
        rounds[i] = run.rounds
        bells[i] = run.bell_measurements
    return rounds, bells


def walk_samples(trials: int, seed: int, target: str = "IZ", primitive: int = 1,
                 su: SpecialU | None = None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    t = PauliString.from_label(target)
    return np.array([
        random_walk_to_target(t, primitive, rng, max_iters=4096, su=su).iterations
        for _ in range(trials)
    ])
