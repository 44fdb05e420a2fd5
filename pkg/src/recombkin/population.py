"""Event-driven simulation of a finite population of genomes under
mutation and recombination, with empirical-law extraction.

Two recombination event modes exist.  In replacement mode ("I") one
individual's subset substring is overwritten by a partner's, the partner
unchanged; partner sampling includes the individual itself, so the
per-capita replacement law is exactly the empirical marginal.  In exchange
mode ("I/I") a pair of distinct individuals swaps subset substrings.  Both
modes use per-ordered-pair rates of kappa * weight * phi / N, the
density-dependent scaling under which empirical fractions follow the
mean-field kinetics as N grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import NumericError, ValidationError
from .mutation import MutationModel
from .recombination import RecombinationModel
from .spaces import AlphabetSpec, Distribution, digit_table, position_weights, splice

MODE_REPLACEMENT = "I"
MODE_EXCHANGE = "I/I"
_MODES = (MODE_REPLACEMENT, MODE_EXCHANGE)


@dataclass(frozen=True)
class PopulationState:
    """A population of N genomes as a dense count table over the space."""

    spec: AlphabetSpec
    counts: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        arr = np.array(self.counts, dtype=np.int64)
        if arr.shape != (self.spec.size,):
            raise ValidationError(
                f"count table has shape {arr.shape}, expected ({self.spec.size},)"
            )
        if arr.min(initial=0) < 0:
            raise ValidationError("counts must be non-negative")
        if arr.sum() < 1:
            raise ValidationError("population must have at least one individual")
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)

    @property
    def size(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def monomorphic(cls, spec: AlphabetSpec, genome: int, n: int) -> "PopulationState":
        counts = np.zeros(spec.size, dtype=np.int64)
        counts[genome] = n
        return cls(spec, counts)

    @classmethod
    def sample_iid(
        cls, law: Distribution, n: int, rng: np.random.Generator
    ) -> "PopulationState":
        counts = rng.multinomial(n, law.probs)
        return cls(law.spec, counts.astype(np.int64))

    @classmethod
    def proportional(cls, law: Distribution, n: int) -> "PopulationState":
        """Deterministic rounding of n * law; largest remainders get the slack."""
        ideal = law.probs * n
        counts = np.floor(ideal).astype(np.int64)
        short = n - int(counts.sum())
        if short > 0:
            order = np.argsort(ideal - counts)[::-1]
            counts[order[:short]] += 1
        return cls(law.spec, counts)


def empirical_distribution(state: PopulationState) -> Distribution:
    """The fraction of the population carrying each genome."""
    return Distribution(state.spec, state.counts / state.size)


@dataclass(frozen=True)
class SimConfig:
    """Event-simulation parameters for one run (and its replicates)."""

    seed: int
    t_max: float
    mode: str = MODE_EXCHANGE
    burn_in: float = 0.0
    sample_every: float = 1.0
    replicate_count: int = 1
    incremental_rates: bool = True
    refresh_every: int = 4096

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValidationError(f"mode must be one of {_MODES}, got {self.mode!r}")
        # t_max == burn_in is allowed and yields an empty sample window
        if not self.t_max >= self.burn_in >= 0.0:
            raise ValidationError("need t_max >= burn_in >= 0")
        if self.sample_every <= 0:
            raise ValidationError("sample_every must be positive")
        if self.replicate_count < 1:
            raise ValidationError("replicate_count must be >= 1")
        if self.refresh_every < 1:
            raise ValidationError("refresh_every must be >= 1")


@dataclass(frozen=True)
class RateSummary:
    """Aggregate event intensities for a population state."""

    mutation_total: float
    recombination_per_subset: np.ndarray
    recombination_total: float

    @property
    def total(self) -> float:
        return self.mutation_total + self.recombination_total


def _genome_exit_rates(spec: AlphabetSpec, mut: MutationModel | None) -> np.ndarray:
    if mut is None:
        return np.zeros(spec.size)
    digits = digit_table(spec)
    site_exit = -np.stack([np.diag(s.rates) for s in mut.sites])  # (n, k)
    return np.take_along_axis(
        site_exit, digits.T, axis=1
    ).sum(axis=0)


def _subset_tables(spec: AlphabetSpec, rec: RecombinationModel | None):
    """Per-subset substring indices, sizes, positions, weights, phi tables."""
    masks = []
    if rec is not None and rec.kappa > 0.0:
        masks = [(m, w) for m, w in rec.family if not m.is_empty]
    if not masks:
        return (
            np.zeros((0, spec.size), dtype=np.int64),
            np.zeros((0, 1), dtype=np.int64),
            np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=np.int64),
            np.zeros(0),
            np.zeros((0, 1, 1)),
        )
    digits = digit_table(spec)
    k = spec.k
    km = np.array([k**m.size for m, _ in masks], dtype=np.int64)
    max_km = int(km.max())
    max_m = max(m.size for m, _ in masks)
    sub_idx = np.zeros((len(masks), spec.size), dtype=np.int64)
    pos_list = np.zeros((len(masks), max_m), dtype=np.int64)
    m_sizes = np.zeros(len(masks), dtype=np.int64)
    weights = np.array([w for _, w in masks])
    phis = np.zeros((len(masks), max_km, max_km))
    for j, (mask, _) in enumerate(masks):
        sub = np.zeros(spec.size, dtype=np.int64)
        for p in mask.positions:
            sub = sub * k + digits[:, p]
        sub_idx[j] = sub
        m_sizes[j] = mask.size
        pos_list[j, : mask.size] = mask.positions
        phis[j, : km[j], : km[j]] = rec.phi_matrix(mask.size)
    return sub_idx, pos_list, m_sizes, km, weights, phis


def event_rates(
    state: PopulationState,
    mut: MutationModel | None,
    rec: RecombinationModel | None,
    mode: str = MODE_EXCHANGE,
) -> RateSummary:
    """Total mutation and per-subset recombination intensities.

    Recombination counts ordered pairs of individuals at kappa * w * phi / N
    each; replacement mode includes self-pairs (dynamically inert no-ops
    that align the per-capita donor law with the empirical marginal), while
    exchange mode requires the pair to be distinct individuals.
    """
    if mode not in _MODES:
        raise ValidationError(f"mode must be one of {_MODES}, got {mode!r}")
    spec = state.spec
    n_pop = state.size
    counts = state.counts.astype(np.float64)
    mutation_total = float(counts @ _genome_exit_rates(spec, mut))
    sub_idx, _, _, km, weights, phis = _subset_tables(spec, rec)
    per_subset = np.zeros(len(km))
    for j in range(len(km)):
        c_sub = np.bincount(sub_idx[j], weights=counts, minlength=km[j])
        phi = phis[j, : km[j], : km[j]]
        pair_sum = float(c_sub @ phi @ c_sub)
        if mode == MODE_EXCHANGE:
            pair_sum -= float(c_sub @ np.diag(phi))
        per_subset[j] = rec.kappa * weights[j] * pair_sum / n_pop
    return RateSummary(
        mutation_total=mutation_total,
        recombination_per_subset=per_subset,
        recombination_total=float(per_subset.sum()),
    )


def step(
    state: PopulationState,
    mut: MutationModel | None,
    rec: RecombinationModel | None,
    rng: np.random.Generator,
    mode: str = MODE_EXCHANGE,
) -> tuple[PopulationState, float]:
    """One exact event: exponential waiting time, then a rate-proportional
    choice of mutation or recombination.  Reference implementation in plain
    numpy; the bulk simulator runs the compiled equivalent.

    With zero total rate returns the state unchanged and elapsed = inf.
    """
    spec = state.spec
    summary = event_rates(state, mut, rec, mode)
    if summary.total <= 0.0:
        return state, math.inf
    elapsed = rng.exponential(1.0 / summary.total)
    counts = state.counts.copy()
    n_pop = state.size
    u = rng.uniform(0.0, summary.total)
    if u < summary.mutation_total:
        exit_rates = _genome_exit_rates(spec, mut)
        genome_weights = counts * exit_rates
        x = _weighted_pick(genome_weights, rng)
        digits = digit_table(spec)[x]
        site_exit = np.array([-mut.sites[i].rates[digits[i], digits[i]] for i in range(spec.n)])
        i = _weighted_pick(site_exit, rng)
        a = digits[i]
        letter_rates = mut.sites[i].rates[a].copy()
        letter_rates[a] = 0.0
        b = _weighted_pick(letter_rates, rng)
        y = x + (b - a) * int(position_weights(spec)[i])
        counts[x] -= 1
        counts[y] += 1
    else:
        sub_idx, _, _, km, weights, phis = _subset_tables(spec, rec)
        j = _weighted_pick(summary.recombination_per_subset, rng)
        mask = [m for m, _ in rec.family if not m.is_empty][j]
        c_sub = np.bincount(sub_idx[j], weights=counts, minlength=km[j]).astype(np.int64)
        phi = phis[j, : km[j], : km[j]]
        pair_w = np.outer(c_sub, c_sub) * phi
        if mode == MODE_EXCHANGE:
            pair_w[np.diag_indices_from(pair_w)] -= c_sub * np.diag(phi)
        flat = _weighted_pick(pair_w.ravel(), rng)
        s_pick, t_pick = divmod(flat, int(km[j]))
        class_s = counts * (sub_idx[j] == s_pick)
        ga = _weighted_pick(class_s.astype(np.float64), rng)
        class_t = counts * (sub_idx[j] == t_pick)
        if mode == MODE_EXCHANGE and sub_idx[j][ga] == t_pick:
            class_t = class_t.copy()
            class_t[ga] -= 1  # the donor must be a distinct individual
        gb = _weighted_pick(class_t.astype(np.float64), rng)
        ga_new = splice(ga, gb, mask, spec)
        counts[ga] -= 1
        counts[ga_new] += 1
        if mode == MODE_EXCHANGE:
            gb_new = splice(gb, ga, mask, spec)
            counts[gb] -= 1
            counts[gb_new] += 1
    assert counts.sum() == n_pop, "population size must be conserved"
    return PopulationState(spec, counts, state.t + elapsed), elapsed


def _weighted_pick(weights: np.ndarray, rng: np.random.Generator) -> int:
    total = float(weights.sum())
    if total <= 0.0:
        raise NumericError("cannot pick from an all-zero weight vector")
    u = rng.uniform(0.0, total)
    acc = np.cumsum(weights)
    return int(np.searchsorted(acc, u, side="right").clip(0, len(weights) - 1))


@dataclass
class SimulationResult:
    """One replicate's sampled trajectory and summary laws."""

    samples: list[PopulationState]
    time_averaged: Distribution | None
    final: PopulationState
    events: int
    seed_entropy: int


def simulate(
    state0: PopulationState,
    mut: MutationModel | None,
    rec: RecombinationModel | None,
    cfg: SimConfig,
    *,
    _seed_seq: np.random.SeedSequence | None = None,
) -> SimulationResult:
    """Run one replicate to t_max; snapshots start after the burn-in.

    Fully reproducible from the config seed.  ``time_averaged`` is the
    exact time-weighted mean of the empirical law over (burn_in, t_max],
    None when that window is empty.
    """
    spec = state0.spec
    seed_seq = _seed_seq if _seed_seq is not None else np.random.SeedSequence(cfg.seed)
    rng = np.random.default_rng(np.random.Philox(seed_seq))

    site_rates = mut.rate_array() if mut is not None else np.zeros((1, spec.k, spec.k))
    site_exit = -np.stack(
        [np.diag(s.rates) for s in mut.sites]
    ) if mut is not None else np.zeros((1, spec.k))
    exit_rates = _genome_exit_rates(spec, mut)
    sub_idx, pos_list, m_sizes, km, weights, phis = _subset_tables(spec, rec)
    kappa = rec.kappa if rec is not None else 0.0

    window = cfg.t_max - cfg.burn_in
    n_samples_max = int(math.floor(window / cfg.sample_every + 1e-12))
    samples_out = np.zeros((n_samples_max, spec.size), dtype=np.int64)
    sample_times = np.zeros(n_samples_max)
    avg_out = np.zeros(spec.size)

    counts = state0.counts.copy()
    n_events, n_samples, conserved = _kernels.gillespie_run(
        counts,
        state0.t,
        cfg.t_max,
        cfg.burn_in,
        cfg.sample_every,
        np.ascontiguousarray(site_rates),
        np.ascontiguousarray(site_exit),
        exit_rates,
        np.ascontiguousarray(position_weights(spec)),
        spec.k,
        kappa,
        weights,
        km,
        sub_idx,
        pos_list,
        m_sizes,
        phis,
        cfg.mode == MODE_EXCHANGE,
        cfg.incremental_rates,
        cfg.refresh_every,
        rng,
        samples_out,
        sample_times,
        avg_out,
    )
    if not conserved:
        raise NumericError("population size was not conserved across events")

    samples = [
        PopulationState(spec, samples_out[i], float(sample_times[i]))
        for i in range(n_samples)
    ]
    time_averaged = None
    if window > 0:
        time_averaged = Distribution(spec, avg_out / (window * state0.size), normalize=True)
    return SimulationResult(
        samples=samples,
        time_averaged=time_averaged,
        final=PopulationState(spec, counts, cfg.t_max),
        events=int(n_events),
        seed_entropy=int(seed_seq.entropy),
    )


def run_replicates(
    state0: PopulationState,
    mut: MutationModel | None,
    rec: RecombinationModel | None,
    cfg: SimConfig,
) -> list[SimulationResult]:
    """Independent replicates on spawned PRNG streams, deterministic in
    the root seed regardless of execution order."""
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.replicate_count)
    return [
        simulate(state0, mut, rec, cfg, _seed_seq=stream) for stream in streams
    ]
