"""Seeded random instances for audits and property checks: connected rate
matrices, strictly positive laws, reversible stochastic matrices, masks."""

from __future__ import annotations

import numpy as np

from .mutation import MutationModel, SiteRateMatrix
from .spaces import AlphabetSpec, Distribution, SubsetMask


def random_site_matrix(
    k: int, rng: np.random.Generator, low: float = 0.1, high: float = 2.0
) -> SiteRateMatrix:
    """All off-diagonal intensities uniform in [low, high]: connected."""
    off = rng.uniform(low, high, size=(k, k))
    return SiteRateMatrix.from_off_diagonal(off)


def random_mutation_model(
    spec: AlphabetSpec, rng: np.random.Generator, low: float = 0.1, high: float = 2.0
) -> MutationModel:
    sites = [random_site_matrix(spec.k, rng, low, high) for _ in range(spec.n)]
    return MutationModel(spec, sites)


def random_distribution(
    spec: AlphabetSpec, rng: np.random.Generator, concentration: float = 1.0
) -> Distribution:
    """Dirichlet draw; strictly positive with probability one."""
    return Distribution(spec, rng.dirichlet(np.full(spec.size, concentration)))


def random_reversible_chain(
    size: int, rng: np.random.Generator
) -> tuple[np.ndarray, Distribution]:
    """Row-stochastic matrix in detailed balance with its returned law.

    Built from a symmetric positive weight matrix W: rows normalize to the
    transition matrix and row sums normalize to the invariant law.
    """
    w = rng.uniform(0.1, 1.0, size=(size, size))
    w = 0.5 * (w + w.T)
    row_sums = w.sum(axis=1)
    matrix = w / row_sums[:, None]
    invariant = Distribution(AlphabetSpec(size, 1), row_sums / row_sums.sum())
    return matrix, invariant


def random_mask(
    n: int, rng: np.random.Generator, nonempty: bool = True, proper: bool = False
) -> SubsetMask:
    lo = 1 if nonempty else 0
    hi = (1 << n) - 1 if proper else (1 << n)
    return SubsetMask(int(rng.integers(lo, hi)), n)
