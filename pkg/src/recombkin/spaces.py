"""Genome-space combinatorics: index codec, subset masks, splicing,
marginalization, product measures, and entropy functionals.

A genome is a word of length ``n`` over an alphabet of size ``k``.  Dense
tables over the genome space are indexed big-endian: position 0 is the most
significant digit, so ``index = sum(symbol[i] * k**(n-1-i))``.  Marginal
tables over a subset of positions use the same codec with the retained
positions in ascending order.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .errors import ValidationError

# Dense indices must fit in a signed 64-bit platform index.
_MAX_STATES = 2**62

#: Renormalize silently below this drift, hard-error above _DRIFT_HARD.
_DRIFT_SOFT = 1e-12
_DRIFT_HARD = 1e-6


def _default_symbols(k: int) -> tuple[str, ...]:
    if k <= 26:
        return tuple(string.ascii_uppercase[:k])
    return tuple(f"s{i}" for i in range(k))


@dataclass(frozen=True)
class AlphabetSpec:
    """The genome space ``K^n``: alphabet size, word length, symbol labels."""

    k: int
    n: int
    symbols: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValidationError(f"alphabet size must be >= 2, got {self.k}")
        if self.n < 1:
            raise ValidationError(f"genome length must be >= 1, got {self.n}")
        if self.k**self.n > _MAX_STATES:
            raise ValidationError(
                f"state space k^n = {self.k}**{self.n} exceeds the platform index range"
            )
        symbols = tuple(self.symbols) if self.symbols else _default_symbols(self.k)
        if len(symbols) != self.k:
            raise ValidationError(
                f"expected {self.k} symbol labels, got {len(symbols)}"
            )
        if len(set(symbols)) != len(symbols):
            raise ValidationError("symbol labels must be distinct")
        object.__setattr__(self, "symbols", symbols)

    @property
    def size(self) -> int:
        return self.k**self.n

    def subspace(self, m: int) -> "AlphabetSpec":
        """The space ``K^m`` of substrings over m retained positions."""
        return AlphabetSpec(self.k, m, self.symbols)

    def format_genome(self, index: int) -> str:
        sep = "" if all(len(s) == 1 for s in self.symbols) else ","
        return sep.join(self.symbols[d] for d in decode(index, self))

    def parse_genome(self, text: str) -> int:
        lookup = {s: i for i, s in enumerate(self.symbols)}
        parts = list(text) if all(len(s) == 1 for s in self.symbols) else text.split(",")
        if len(parts) != self.n:
            raise ValidationError(
                f"genome {text!r} has {len(parts)} symbols, expected {self.n}"
            )
        try:
            return encode([lookup[p] for p in parts], self)
        except KeyError as exc:
            raise ValidationError(f"unknown symbol {exc.args[0]!r} in {text!r}") from None


@lru_cache(maxsize=64)
def position_weights(spec: AlphabetSpec) -> np.ndarray:
    """Big-endian digit weights: ``weights[i] = k**(n-1-i)``."""
    return (spec.k ** np.arange(spec.n - 1, -1, -1)).astype(np.int64)


@lru_cache(maxsize=32)
def digit_table(spec: AlphabetSpec) -> np.ndarray:
    """(size, n) array of digits for every genome index. Read-only."""
    idx = np.arange(spec.size, dtype=np.int64)
    digits = (idx[:, None] // position_weights(spec)[None, :]) % spec.k
    digits.flags.writeable = False
    return digits


def encode(genome: Sequence[int], spec: AlphabetSpec) -> int:
    """Genome (sequence of symbol indices) -> dense index, big-endian."""
    if len(genome) != spec.n:
        raise ValidationError(f"genome has {len(genome)} positions, expected {spec.n}")
    index = 0
    for d in genome:
        d = int(d)
        if not 0 <= d < spec.k:
            raise ValidationError(f"symbol index {d} out of range [0, {spec.k})")
        index = index * spec.k + d
    return index


def decode(index: int, spec: AlphabetSpec) -> tuple[int, ...]:
    """Dense index -> genome as a tuple of symbol indices."""
    index = int(index)
    if not 0 <= index < spec.size:
        raise ValidationError(f"genome index {index} out of range [0, {spec.size})")
    out = []
    for _ in range(spec.n):
        index, d = divmod(index, spec.k)
        out.append(d)
    return tuple(reversed(out))


@dataclass(frozen=True)
class SubsetMask:
    """A subset of genome positions as an n-bit mask (bit i = position i)."""

    bits: int
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError("mask length must be >= 1")
        if not 0 <= self.bits < (1 << self.n):
            raise ValidationError(
                f"mask bits {self.bits:#x} has bits set at positions >= n={self.n}"
            )

    @classmethod
    def from_positions(cls, positions: Iterable[int], n: int) -> "SubsetMask":
        bits = 0
        for p in positions:
            if not 0 <= p < n:
                raise ValidationError(f"position {p} out of range [0, {n})")
            bits |= 1 << p
        return cls(bits, n)

    @classmethod
    def empty(cls, n: int) -> "SubsetMask":
        return cls(0, n)

    @classmethod
    def full(cls, n: int) -> "SubsetMask":
        return cls((1 << n) - 1, n)

    @property
    def positions(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if self.bits >> i & 1)

    @property
    def size(self) -> int:
        return bin(self.bits).count("1")

    @property
    def complement(self) -> "SubsetMask":
        return SubsetMask(((1 << self.n) - 1) ^ self.bits, self.n)

    @property
    def is_empty(self) -> bool:
        return self.bits == 0

    @property
    def is_full(self) -> bool:
        return self.bits == (1 << self.n) - 1

    def __repr__(self) -> str:  # 0b-literal reads better than decimal in logs
        return f"SubsetMask({bin(self.bits)}, n={self.n})"


def interval_masks(n: int, min_len: int = 1, max_len: int | None = None) -> list[SubsetMask]:
    """All contiguous position intervals with length in [min_len, max_len]."""
    if max_len is None:
        max_len = n
    if not 1 <= min_len <= max_len <= n:
        raise ValidationError(
            f"invalid interval length range [{min_len}, {max_len}] for n={n}"
        )
    out = []
    for length in range(min_len, max_len + 1):
        for start in range(n - length + 1):
            out.append(SubsetMask.from_positions(range(start, start + length), n))
    return out


def all_subset_masks(n: int, include_empty: bool = False) -> list[SubsetMask]:
    """Every subset of positions; exponential, guarded at n <= 12."""
    if n > 12:
        raise ValidationError(f"all-subsets family is limited to n <= 12, got n={n}")
    start = 0 if include_empty else 1
    return [SubsetMask(bits, n) for bits in range(start, 1 << n)]


def splice(x: int, y: int, mask: SubsetMask, spec: AlphabetSpec) -> int:
    """Index of the genome equal to y on the masked positions and to x elsewhere."""
    if mask.n != spec.n:
        raise ValidationError(f"mask length {mask.n} does not match genome length {spec.n}")
    if not 0 <= x < spec.size:
        raise ValidationError(f"genome index {x} out of range [0, {spec.size})")
    if not 0 <= y < spec.size:
        raise ValidationError(f"genome index {y} out of range [0, {spec.size})")
    weights = position_weights(spec)
    k = spec.k
    out = x
    for p in mask.positions:
        w = int(weights[p])
        out += ((y // w) % k - (out // w) % k) * w
    return out


class Distribution:
    """A probability law on ``K^n`` as a dense table of ``k^n`` reals.

    Immutable once constructed; the backing array is read-only.  Construction
    renormalizes silently for drift up to 1e-6 (beyond 1e-12 it rescales) and
    rejects anything worse, which signals integrator misuse upstream.
    """

    __slots__ = ("spec", "probs")

    def __init__(self, spec: AlphabetSpec, probs, *, normalize: bool = False):
        arr = np.array(probs, dtype=np.float64)
        if arr.shape != (spec.size,):
            raise ValidationError(
                f"probability table has shape {arr.shape}, expected ({spec.size},)"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("probability table has non-finite entries")
        if arr.min(initial=0.0) < 0.0:
            raise ValidationError("probability table has negative entries")
        total = float(arr.sum())
        if normalize:
            if total <= 0.0:
                raise ValidationError("cannot normalize a table with zero total mass")
            arr /= total
        else:
            drift = abs(total - 1.0)
            if drift > _DRIFT_HARD:
                raise ValidationError(
                    f"probability table sums to {total!r}; drift {drift:.3e} exceeds "
                    f"the hard bound {_DRIFT_HARD:g}"
                )
            if drift > _DRIFT_SOFT:
                arr /= total
        arr.flags.writeable = False
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "probs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Distribution is immutable")

    def __repr__(self) -> str:
        return f"Distribution(k={self.spec.k}, n={self.spec.n}, size={self.spec.size})"

    @classmethod
    def uniform(cls, spec: AlphabetSpec) -> "Distribution":
        return cls(spec, np.full(spec.size, 1.0 / spec.size))

    @classmethod
    def point_mass(cls, spec: AlphabetSpec, index: int) -> "Distribution":
        if not 0 <= index < spec.size:
            raise ValidationError(f"genome index {index} out of range [0, {spec.size})")
        probs = np.zeros(spec.size)
        probs[index] = 1.0
        return cls(spec, probs)

    @classmethod
    def from_weights(cls, spec: AlphabetSpec, weights) -> "Distribution":
        return cls(spec, weights, normalize=True)

    def normalize(self) -> "Distribution":
        return Distribution(self.spec, self.probs, normalize=True)

    def same_space(self, other: "Distribution") -> bool:
        return self.spec == other.spec


def _require_same_space(mu: Distribution, nu: Distribution) -> None:
    if not mu.same_space(nu):
        raise ValidationError(
            f"distributions live on different spaces: {mu.spec} vs {nu.spec}"
        )


def marginal_values(values: np.ndarray, spec: AlphabetSpec, mask: SubsetMask) -> np.ndarray:
    """Sum a dense (possibly signed) table over the complement of ``mask``.

    Works on raw arrays so it applies to time-derivative tables as well as
    probabilities.  Retained positions keep ascending order in the result.
    """
    if mask.n != spec.n:
        raise ValidationError(f"mask length {mask.n} does not match genome length {spec.n}")
    if mask.is_empty:
        raise ValidationError("cannot marginalize onto the empty position set")
    tensor = np.asarray(values).reshape((spec.k,) * spec.n)
    drop = tuple(p for p in range(spec.n) if not (mask.bits >> p & 1))
    return tensor.sum(axis=drop).ravel()


def marginalize(mu: Distribution, mask: SubsetMask) -> Distribution:
    """Marginal law of the masked positions, over ``K^|I|``."""
    values = marginal_values(mu.probs, mu.spec, mask)
    return Distribution(mu.spec.subspace(mask.size), values)


def product_measure(site_laws: Sequence[Distribution]) -> Distribution:
    """The product law ``result(x) = prod_i site_laws[i](x_i)`` on ``K^n``."""
    if len(site_laws) < 1:
        raise ValidationError("product_measure needs at least one site law")
    k = site_laws[0].spec.k
    symbols = site_laws[0].spec.symbols
    for i, law in enumerate(site_laws):
        if law.spec.n != 1:
            raise ValidationError(f"site law {i} is not a single-position law")
        if law.spec.k != k:
            raise ValidationError(f"site law {i} has alphabet size {law.spec.k}, expected {k}")
    table = site_laws[0].probs
    for law in site_laws[1:]:
        table = np.multiply.outer(table, law.probs)
    spec = AlphabetSpec(k, len(site_laws), symbols)
    return Distribution(spec, table.ravel())


def neg_entropy(mu: Distribution) -> float:
    """``sum_x mu(x) ln mu(x)`` with the 0 ln 0 = 0 convention (<= 0)."""
    return float(special.xlogy(mu.probs, mu.probs).sum())


def relative_entropy(mu: Distribution, q: Distribution) -> float:
    """Kullback-Leibler divergence D(mu|q); requires q > 0 everywhere."""
    _require_same_space(mu, q)
    if q.probs.min() <= 0.0:
        raise ValidationError("relative entropy reference law must be strictly positive")
    return float(special.rel_entr(mu.probs, q.probs).sum())


def l1_distance(mu: Distribution, nu: Distribution) -> float:
    """``sum_x |mu(x) - nu(x)|``; total variation is half this value."""
    _require_same_space(mu, nu)
    return float(np.abs(mu.probs - nu.probs).sum())


def total_variation(mu: Distribution, nu: Distribution) -> float:
    return 0.5 * l1_distance(mu, nu)
