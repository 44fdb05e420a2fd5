"""Cluster/structure detection through pairwise Hamming-distance statistics.

A structured population (distinct subspecies) would show a pairwise
distance histogram that deviates from the analytic prediction under the
structureless product law; the divergence score quantifies that deviation
as a total variation distance, avoiding any ad-hoc cluster definition.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .mutation import MutationModel
from .population import PopulationState
from .spaces import Distribution, digit_table


def hamming_histogram(source: Distribution | PopulationState) -> np.ndarray:
    """Law of the Hamming distance between two independent draws.

    For a distribution the double sum is exact; for a population it counts
    all unordered pairs of distinct individuals with multiplicity.
    """
    if isinstance(source, Distribution):
        probs = source.probs
        spec = source.spec
        pair_weight = np.outer(probs, probs)
    elif isinstance(source, PopulationState):
        counts = source.counts.astype(np.float64)
        spec = source.spec
        pair_weight = np.outer(counts, counts)
        np.fill_diagonal(pair_weight, counts * (counts - 1))
        total = pair_weight.sum()
        if total <= 0:
            raise ValidationError("population has no pairs of distinct individuals")
        pair_weight /= total
    else:
        raise ValidationError(f"unsupported source type {type(source).__name__}")
    digits = digit_table(spec)
    hist = np.zeros(spec.n + 1)
    # row-chunked to keep the distance matrix small on larger spaces
    chunk = max(1, 2**22 // max(1, spec.size))
    for start in range(0, spec.size, chunk):
        stop = min(start + chunk, spec.size)
        dist = (digits[start:stop, None, :] != digits[None, :, :]).sum(axis=2)
        for d in range(spec.n + 1):
            hist[d] += pair_weight[start:stop][dist == d].sum()
    return hist


def product_law_hamming_prediction(mut: MutationModel) -> np.ndarray:
    """Hamming-distance law of two independent draws from the stationary
    product law: a Poisson-binomial with per-site mismatch probabilities
    1 - sum_a q_i(a)^2, computed by exact convolution."""
    hist = np.ones(1)
    for law in mut.site_laws:
        p_match = float(np.dot(law.probs, law.probs))
        hist = np.convolve(hist, [p_match, 1.0 - p_match])
    return hist


def structure_score(observed: np.ndarray, predicted: np.ndarray) -> float:
    """Total variation distance between two distance histograms, in [0, 1].

    Zero means the observed population is indistinguishable, at this
    summary, from the structureless product law.
    """
    obs = np.asarray(observed, dtype=np.float64)
    pred = np.asarray(predicted, dtype=np.float64)
    if obs.shape != pred.shape:
        raise ValidationError(
            f"histogram supports differ: {obs.shape} vs {pred.shape}"
        )
    return float(0.5 * np.abs(obs - pred).sum())
