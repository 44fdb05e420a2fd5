"""Similarity-weighted homologous recombination: the similarity function,
the weighted family of position subsets, the nonlinear part of the kinetics
right-hand side, and the single-subset small-step transition kernel.

For a subset I of positions, a recombination event replaces a genome's
I-substring by a donor substring drawn from the current marginal law on I,
weighted by the similarity of the two substrings.  The mean-field derivative
for one subset is

    gain(x) = mu_I(x_I) * sum_y phi(y, x_I) * mu(x with I-substring y)
    loss(x) = mu(x)     * sum_y phi(x_I, y) * mu_I(y)

scaled by the global intensity and the subset's family weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import PreconditionError, ValidationError
from .spaces import (
    AlphabetSpec,
    Distribution,
    SubsetMask,
    all_subset_masks,
    digit_table,
    interval_masks,
    marginal_values,
)

_SYMMETRY_TOL = 0.0  # construction-time symmetry is exact for built-in kinds


@dataclass(frozen=True)
class Similarity:
    """Non-negative similarity weight on pairs of equal-length substrings.

    Kinds:
      - ``constant``: phi = value, independent of the pair.
      - ``exponential``: phi = exp(-decay * hamming(x, y)).
      - ``table``: explicit per-length matrices, keyed by substring length.

    Explicit tables must be symmetric unless ``allow_asymmetric`` is set;
    theorem-checking operations refuse to certify when it is.
    """

    kind: str
    value: float = 1.0
    decay: float = 1.0
    tables: Mapping[int, np.ndarray] | None = None
    allow_asymmetric: bool = False

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "exponential", "table"):
            raise ValidationError(f"unknown similarity kind {self.kind!r}")
        if self.kind == "constant" and self.value < 0:
            raise ValidationError("constant similarity must be non-negative")
        if self.kind == "exponential" and self.decay < 0:
            raise ValidationError("exponential similarity decay must be non-negative")
        if self.kind == "table":
            if not self.tables:
                raise ValidationError("table similarity needs at least one table")
            frozen = {}
            for m, tbl in self.tables.items():
                arr = np.array(tbl, dtype=np.float64)
                if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                    raise ValidationError(
                        f"similarity table for length {m} must be square, got {arr.shape}"
                    )
                if arr.min() < 0:
                    raise ValidationError(f"similarity table for length {m} has negative entries")
                if not self.allow_asymmetric and not np.array_equal(arr, arr.T):
                    raise ValidationError(
                        f"similarity table for length {m} is asymmetric; "
                        "set allow_asymmetric to accept it"
                    )
                arr.flags.writeable = False
                frozen[int(m)] = arr
            object.__setattr__(self, "tables", frozen)

    @classmethod
    def constant(cls, value: float = 1.0) -> "Similarity":
        return cls(kind="constant", value=value)

    @classmethod
    def exponential(cls, decay: float = 1.0) -> "Similarity":
        return cls(kind="exponential", decay=decay)

    @classmethod
    def from_tables(cls, tables: Mapping[int, np.ndarray], allow_asymmetric: bool = False) -> "Similarity":
        return cls(kind="table", tables=dict(tables), allow_asymmetric=allow_asymmetric)

    @property
    def is_certifiably_symmetric(self) -> bool:
        return not self.allow_asymmetric

    def matrix(self, k: int, m: int) -> np.ndarray:
        """Dense ``k^m x k^m`` table of phi over substring index pairs."""
        size = k**m
        if self.kind == "constant":
            return np.full((size, size), self.value)
        if self.kind == "exponential":
            digits = digit_table(AlphabetSpec(k, m))
            dist = (digits[:, None, :] != digits[None, :, :]).sum(axis=2)
            return np.exp(-self.decay * dist)
        assert self.tables is not None
        if m not in self.tables:
            raise ValidationError(f"similarity has no table for substring length {m}")
        tbl = self.tables[m]
        if tbl.shape != (size, size):
            raise ValidationError(
                f"similarity table for length {m} has shape {tbl.shape}, expected {(size, size)}"
            )
        return tbl

    def evaluate(self, x_sub: Sequence[int], y_sub: Sequence[int], k: int) -> float:
        """phi on one substring pair (sequences of symbol indices)."""
        if len(x_sub) != len(y_sub):
            raise ValidationError("substrings must have equal length")
        for d in (*x_sub, *y_sub):
            if not 0 <= int(d) < k:
                raise ValidationError(f"symbol index {d} out of range [0, {k})")
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "exponential":
            dist = sum(1 for a, b in zip(x_sub, y_sub) if a != b)
            return float(np.exp(-self.decay * dist))
        m = len(x_sub)
        matrix = self.matrix(k, m)
        ix = iy = 0
        for a, b in zip(x_sub, y_sub):
            ix = ix * k + int(a)
            iy = iy * k + int(b)
        return float(matrix[ix, iy])


class RecombinationModel:
    """Global intensity, weighted subset family, and similarity function."""

    __slots__ = ("spec", "kappa", "family", "similarity", "_phi_cache")

    def __init__(
        self,
        spec: AlphabetSpec,
        kappa: float,
        family: Sequence[SubsetMask | tuple[SubsetMask, float]],
        similarity: Similarity,
    ):
        if kappa < 0:
            raise ValidationError("recombination intensity must be non-negative")
        normalized: list[tuple[SubsetMask, float]] = []
        for entry in family:
            if isinstance(entry, SubsetMask):
                mask, weight = entry, 1.0
            else:
                mask, weight = entry
            if mask.n != spec.n:
                raise ValidationError(
                    f"mask {mask} does not match genome length {spec.n}"
                )
            if weight <= 0:
                raise ValidationError(f"family weight for {mask} must be positive")
            normalized.append((mask, float(weight)))
        bits_seen = [m.bits for m, _ in normalized]
        if len(set(bits_seen)) != len(bits_seen):
            raise ValidationError("recombination family has duplicate masks")
        normalized.sort(key=lambda mw: mw[0].bits)
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "kappa", float(kappa))
        object.__setattr__(self, "family", tuple(normalized))
        object.__setattr__(self, "similarity", similarity)
        object.__setattr__(self, "_phi_cache", {})

    def __setattr__(self, name, value):
        raise AttributeError("RecombinationModel is immutable")

    @classmethod
    def intervals(
        cls,
        spec: AlphabetSpec,
        kappa: float,
        similarity: Similarity,
        min_len: int = 1,
        max_len: int | None = None,
        weight: float = 1.0,
    ) -> "RecombinationModel":
        masks = interval_masks(spec.n, min_len, max_len)
        return cls(spec, kappa, [(m, weight) for m in masks], similarity)

    @classmethod
    def all_subsets(
        cls,
        spec: AlphabetSpec,
        kappa: float,
        similarity: Similarity,
        weight: float = 1.0,
    ) -> "RecombinationModel":
        masks = all_subset_masks(spec.n)
        return cls(spec, kappa, [(m, weight) for m in masks], similarity)

    @property
    def degenerate_masks(self) -> tuple[SubsetMask, ...]:
        """Empty and full masks: permitted, dynamically inert, worth flagging."""
        return tuple(m for m, _ in self.family if m.is_empty or m.is_full)

    def phi_matrix(self, m: int) -> np.ndarray:
        if m not in self._phi_cache:
            self._phi_cache[m] = self.similarity.matrix(self.spec.k, m)
        return self._phi_cache[m]


def _grouped_view(probs: np.ndarray, spec: AlphabetSpec, mask: SubsetMask):
    """Reshape to (contexts, substrings): complement positions group rows."""
    pos = mask.positions
    cpos = mask.complement.positions
    tensor = probs.reshape((spec.k,) * spec.n)
    perm = cpos + pos
    grouped = np.transpose(tensor, perm).reshape(
        spec.k ** len(cpos), spec.k ** len(pos)
    )
    return grouped, perm


def _ungroup(grouped: np.ndarray, spec: AlphabetSpec, perm: tuple[int, ...]) -> np.ndarray:
    tensor = grouped.reshape((spec.k,) * spec.n)
    return np.transpose(tensor, np.argsort(perm)).ravel()


def recombination_rhs(mu: Distribution, model: RecombinationModel) -> np.ndarray:
    """Time derivative of ``mu`` under recombination alone (signed table).

    Sums the per-subset terms, each scaled by kappa times its family weight.
    Subset order is fixed ascending to keep results bit-reproducible.
    """
    spec = model.spec
    if mu.spec != spec:
        raise ValidationError("distribution and recombination model live on different spaces")
    out = np.zeros(spec.size)
    if model.kappa == 0.0:
        return out
    for mask, weight in model.family:
        if mask.is_empty:
            continue  # substitutes nothing
        grouped, perm = _grouped_view(mu.probs, spec, mask)
        marg = grouped.sum(axis=0)
        phi = model.phi_matrix(mask.size)
        gain = (grouped @ phi) * marg[None, :]
        loss = grouped * (phi @ marg)[None, :]
        out += model.kappa * weight * _ungroup(gain - loss, spec, perm)
    return out


def max_admissible_dt(mu: Distribution, mask: SubsetMask, model: RecombinationModel) -> float:
    """Largest dt keeping every diagonal entry of the step kernel non-negative."""
    grouped, _ = _grouped_view(mu.probs, model.spec, mask)
    marg = grouped.sum(axis=0)
    phi = model.phi_matrix(mask.size)
    exit_rates = model.kappa * (phi @ marg - np.diag(phi) * marg)
    worst = exit_rates.max()
    return float("inf") if worst <= 0.0 else float(1.0 / worst)


def transition_matrix(
    mu: Distribution, mask: SubsetMask, model: RecombinationModel, dt: float
) -> np.ndarray:
    """Row-stochastic small-step kernel of recombination on one subset.

    Off-diagonal: kappa * phi(x_I, y_I) * mu_I(y_I) * dt whenever x and y
    agree off the subset; the diagonal absorbs the remainder.  Errors out
    when dt is too large for every diagonal to stay non-negative.
    """
    spec = model.spec
    if mu.spec != spec:
        raise ValidationError("distribution and recombination model live on different spaces")
    if mask.n != spec.n:
        raise ValidationError(f"mask {mask} does not match genome length {spec.n}")
    if dt <= 0:
        raise ValidationError("dt must be positive")
    if mask.is_empty:
        return np.eye(spec.size)
    dt_max = max_admissible_dt(mu, mask, model)
    if dt > dt_max:
        raise PreconditionError(
            f"dt={dt!r} makes a diagonal entry negative; maximal admissible dt is {dt_max!r}"
        )
    grouped, _ = _grouped_view(mu.probs, spec, mask)
    marg = grouped.sum(axis=0)
    phi = model.phi_matrix(mask.size)
    block = model.kappa * dt * phi * marg[None, :]
    np.fill_diagonal(block, 0.0)
    np.fill_diagonal(block, 1.0 - block.sum(axis=1))

    digits = digit_table(spec)
    pos = np.array(mask.positions, dtype=np.int64)
    cpos = np.array(mask.complement.positions, dtype=np.int64)
    k = spec.k
    sub_idx = np.zeros(spec.size, dtype=np.int64)
    for p in pos:
        sub_idx = sub_idx * k + digits[:, p]
    ctx_idx = np.zeros(spec.size, dtype=np.int64)
    for p in cpos:
        ctx_idx = ctx_idx * k + digits[:, p]

    matrix = np.zeros((spec.size, spec.size))
    same_ctx = ctx_idx[:, None] == ctx_idx[None, :]
    matrix[same_ctx] = block[sub_idx[:, None], sub_idx[None, :]][same_ctx]
    return matrix


def split_product_law(mu: Distribution, mask: SubsetMask) -> Distribution:
    """Product of the complementary marginals: the kernel's invariant law.

    For the full mask this degenerates to ``mu`` itself; for the empty mask
    it is also ``mu`` (nothing is factored out).
    """
    if mask.is_empty or mask.is_full:
        return Distribution(mu.spec, mu.probs)
    spec = mu.spec
    grouped, perm = _grouped_view(mu.probs, spec, mask)
    sub_marg = grouped.sum(axis=0)
    ctx_marg = grouped.sum(axis=1)
    paired = np.multiply.outer(ctx_marg, sub_marg)
    return Distribution(spec, _ungroup(paired, spec, perm))


def subset_marginal_derivatives(
    rhs_table: np.ndarray, spec: AlphabetSpec, masks: Sequence[SubsetMask]
) -> list[float]:
    """Max-abs derivative of each masked marginal along a signed rhs table."""
    return [float(np.abs(marginal_values(rhs_table, spec, m)).max()) for m in masks]
