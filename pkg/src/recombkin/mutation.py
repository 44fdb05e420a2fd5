"""Per-site continuous-time mutation chains, their stationary laws, and the
linear part of the kinetics right-hand side.

Each site carries a k x k rate matrix whose off-diagonal entry (a, b) is the
intensity of the letter change a -> b and whose diagonal makes rows sum to
zero.  Site matrices may differ; the product of the per-site stationary laws
is the stationary law of the full mutation flow on ``K^n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericError, ValidationError
from .spaces import AlphabetSpec, Distribution, product_measure

_ROW_SUM_TOL = 1e-12
_STATIONARY_RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class SiteRateMatrix:
    """Rate matrix of one site's letter-mutation chain.

    Construction checks only shape and finiteness; semantic validity
    (non-negativity, zero row sums, strong connectivity) is reported by
    :func:`validate_sites` so that broken inputs can be diagnosed rather
    than rejected blindly.
    """

    rates: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.rates, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError(f"rate matrix must be square, got shape {arr.shape}")
        if arr.shape[0] < 2:
            raise ValidationError("rate matrix needs at least 2 letters")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("rate matrix has non-finite entries")
        arr.flags.writeable = False
        object.__setattr__(self, "rates", arr)

    @property
    def k(self) -> int:
        return self.rates.shape[0]

    @classmethod
    def symmetric(cls, k: int, rate: float) -> "SiteRateMatrix":
        if rate <= 0:
            raise ValidationError("symmetric mutation rate must be positive")
        arr = np.full((k, k), float(rate))
        np.fill_diagonal(arr, -(k - 1) * float(rate))
        return cls(arr)

    @classmethod
    def from_off_diagonal(cls, off: np.ndarray) -> "SiteRateMatrix":
        """Build from off-diagonal intensities; the diagonal is filled in."""
        arr = np.array(off, dtype=np.float64)
        np.fill_diagonal(arr, 0.0)
        np.fill_diagonal(arr, -arr.sum(axis=1))
        return cls(arr)

    def problems(self) -> list[str]:
        """Semantic defects, empty when the matrix is a valid connected chain."""
        out = []
        off = self.rates.copy()
        np.fill_diagonal(off, 0.0)
        if off.min() < 0.0:
            a, b = np.unravel_index(np.argmin(off), off.shape)
            out.append(f"negative off-diagonal rate at ({a},{b}): {off[a, b]!r}")
        row_sums = self.rates.sum(axis=1)
        worst = int(np.argmax(np.abs(row_sums)))
        if abs(row_sums[worst]) > _ROW_SUM_TOL:
            out.append(f"row {worst} sums to {row_sums[worst]!r}, expected 0")
        if not out and not _strongly_connected(off > 0.0):
            out.append("positive-rate graph is not strongly connected")
        return out


def _strongly_connected(adj: np.ndarray) -> bool:
    """Reachability in both directions from node 0; no rate thresholding."""
    k = adj.shape[0]

    def reach(a: np.ndarray) -> np.ndarray:
        seen = np.zeros(k, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = a[frontier].any(axis=0) & ~seen
            seen |= nxt
            frontier = list(np.nonzero(nxt)[0])
        return seen

    return bool(reach(adj).all() and reach(adj.T).all())


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    site_problems: tuple[tuple[int, str], ...]

    def __str__(self) -> str:
        if self.passed:
            return "mutation model: all sites valid"
        lines = [f"site {i}: {msg}" for i, msg in self.site_problems]
        return "mutation model invalid:\n  " + "\n  ".join(lines)


def validate_sites(sites: Sequence[SiteRateMatrix]) -> ValidationReport:
    """Check row sums, non-negativity, and strong connectivity per site."""
    problems = []
    for i, site in enumerate(sites):
        for msg in site.problems():
            problems.append((i, msg))
    return ValidationReport(passed=not problems, site_problems=tuple(problems))


def site_stationary(alpha: SiteRateMatrix, symbols: tuple[str, ...] = ()) -> Distribution:
    """The unique strictly positive row vector q with q A = 0, sum q = 1.

    Solves the singular system with one equation replaced by the
    normalization constraint, then checks the residual post hoc.
    """
    k = alpha.k
    m = alpha.rates.T.copy()
    m[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    try:
        q = np.linalg.solve(m, b)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"stationary-law solve failed: {exc}") from exc
    residual = np.abs(q @ alpha.rates).max()
    if residual > _STATIONARY_RESIDUAL_TOL:
        # one step of iterative refinement, then re-check
        q = q - np.linalg.lstsq(m, m @ q - b, rcond=None)[0]
        residual = np.abs(q @ alpha.rates).max()
        if residual > _STATIONARY_RESIDUAL_TOL:
            raise NumericError(
                f"stationary-law residual {residual:.3e} exceeds {_STATIONARY_RESIDUAL_TOL:g}"
            )
    if q.min() <= 0.0:
        raise NumericError("stationary law has a non-positive entry; chain not connected?")
    spec = AlphabetSpec(k, 1, symbols or ())
    return Distribution(spec, q)


class MutationModel:
    """Per-site rate matrices with eagerly cached stationary laws.

    The per-site laws and their product over ``K^n`` are computed at
    construction so later reads are contention-free.
    """

    __slots__ = ("spec", "sites", "site_laws", "stationary_law")

    def __init__(self, spec: AlphabetSpec, sites: Sequence[SiteRateMatrix]):
        sites = tuple(sites)
        if len(sites) != spec.n:
            raise ValidationError(f"expected {spec.n} site matrices, got {len(sites)}")
        for i, site in enumerate(sites):
            if site.k != spec.k:
                raise ValidationError(
                    f"site {i} rate matrix is {site.k}x{site.k}, expected {spec.k}x{spec.k}"
                )
        report = validate_sites(sites)
        if not report.passed:
            raise ValidationError(str(report))
        site_laws = tuple(site_stationary(site, spec.symbols) for site in sites)
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "site_laws", site_laws)
        object.__setattr__(self, "stationary_law", product_measure(site_laws))

    def __setattr__(self, name, value):
        raise AttributeError("MutationModel is immutable")

    @classmethod
    def replicate(cls, spec: AlphabetSpec, site: SiteRateMatrix) -> "MutationModel":
        """Convenience constructor using one rate matrix at every site."""
        return cls(spec, (site,) * spec.n)

    def validate(self) -> ValidationReport:
        return validate_sites(self.sites)

    def rate_array(self) -> np.ndarray:
        """(n, k, k) stacked site rate matrices, for compiled kernels."""
        return np.stack([s.rates for s in self.sites])


def stationary_product_law(model: MutationModel) -> Distribution:
    """Product of the per-site stationary laws; strictly positive on ``K^n``."""
    return model.stationary_law


def mutation_rhs(mu: Distribution, model: MutationModel) -> np.ndarray:
    """Time derivative of ``mu`` under the pure mutation flow (signed table).

    Contracts each tensor axis with its site's rate matrix:
    ``rhs[..., b, ...] = sum_a T[..., a, ...] alpha_i(a, b)``.
    """
    spec = model.spec
    if mu.spec != spec:
        raise ValidationError("distribution and mutation model live on different spaces")
    tensor = mu.probs.reshape((spec.k,) * spec.n)
    out = np.zeros_like(tensor)
    for i, site in enumerate(model.sites):
        contracted = np.tensordot(tensor, site.rates, axes=([i], [0]))
        out += np.moveaxis(contracted, -1, i)
    return out.ravel()
