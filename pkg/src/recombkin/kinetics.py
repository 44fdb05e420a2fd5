"""Deterministic integration of the mean-field kinetics, Lyapunov
monitoring, fixed-point detection, and the numerical entropy checks.

The combined right-hand side is the mutation part plus the recombination
part; trajectories are advanced with a classical fixed-step 4th-order
method (reproducible, clean monotonicity audits) and monitored through the
negative entropy, the relative entropy to the mutation-stationary product
law, and the l1 distance to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from . import _kernels
from .errors import NumericError, PreconditionError, ValidationError
from .mutation import MutationModel, mutation_rhs
from .recombination import (
    RecombinationModel,
    recombination_rhs,
    split_product_law,
    transition_matrix,
)
from .spaces import (
    AlphabetSpec,
    Distribution,
    SubsetMask,
    digit_table,
    l1_distance,
    marginalize,
    neg_entropy,
    position_weights,
    relative_entropy,
)


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integration parameters."""

    dt: float
    t_max: float
    record_every: int = 100
    fixed_point_eps: float = 1e-10
    renorm_tol: float = 1e-12
    store_snapshots: bool = False

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if self.t_max <= 0:
            raise ValidationError("t_max must be positive")
        if self.record_every < 1:
            raise ValidationError("record_every must be >= 1")
        if self.fixed_point_eps <= 0:
            raise ValidationError("fixed_point_eps must be positive")
        if self.renorm_tol <= 0:
            raise ValidationError("renorm_tol must be positive")


@dataclass
class TrajectoryRecord:
    """Monitored quantities along one integration run.

    ``h_values`` is the negative Shannon entropy, ``d_values`` the relative
    entropy to the reference law and ``l1_values`` the l1 distance to it
    (NaN when integrating without a mutation model, where no reference
    exists).
    """

    times: np.ndarray
    h_values: np.ndarray
    d_values: np.ndarray
    l1_values: np.ndarray
    converged: bool
    convergence_time: float | None
    final: Distribution
    snapshots: list[Distribution] | None = None

    def __post_init__(self) -> None:
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("record times must be strictly increasing")


def total_rhs(
    mu: Distribution,
    mut: MutationModel | None,
    rec: RecombinationModel | None,
) -> np.ndarray:
    """Combined time derivative; either part may be absent, not both."""
    if mut is None and rec is None:
        raise ValidationError("need at least one of mutation / recombination model")
    out = np.zeros(mu.spec.size)
    if mut is not None:
        out += mutation_rhs(mu, mut)
    if rec is not None:
        out += recombination_rhs(mu, rec)
    return out


def _compiled_args(spec: AlphabetSpec, mut: MutationModel | None, rec: RecombinationModel | None):
    """Pack model data into the plain arrays the compiled kernels take."""
    k = spec.k
    pows = position_weights(spec)
    if mut is not None:
        site_rates = np.ascontiguousarray(mut.rate_array())
        has_mut = True
    else:
        site_rates = np.zeros((1, k, k))
        has_mut = False
    masks = []
    if rec is not None and rec.kappa > 0.0:
        masks = [(m, w) for m, w in rec.family if not m.is_empty]
    if masks:
        has_rec = True
        kappa = rec.kappa
        weights = np.array([w for _, w in masks])
        km = np.array([k**m.size for m, _ in masks], dtype=np.int64)
        max_km = int(km.max())
        phis = np.zeros((len(masks), max_km, max_km))
        ungroup = np.zeros((len(masks), spec.size), dtype=np.int64)
        digits = digit_table(spec)
        for j, (mask, _) in enumerate(masks):
            phis[j, : km[j], : km[j]] = rec.phi_matrix(mask.size)
            sub = np.zeros(spec.size, dtype=np.int64)
            for p in mask.positions:
                sub = sub * k + digits[:, p]
            ctx = np.zeros(spec.size, dtype=np.int64)
            for p in mask.complement.positions:
                ctx = ctx * k + digits[:, p]
            grouped = ctx * km[j] + sub
            ungroup[j, grouped] = np.arange(spec.size, dtype=np.int64)
    else:
        has_rec = False
        kappa = 0.0
        weights = np.zeros(1)
        km = np.ones(1, dtype=np.int64)
        phis = np.zeros((1, 1, 1))
        ungroup = np.zeros((1, spec.size), dtype=np.int64)
    return (
        has_mut,
        site_rates,
        np.ascontiguousarray(pows),
        k,
        has_rec,
        kappa,
        weights,
        km,
        ungroup,
        phis,
    )


def compiled_rhs(
    mu: Distribution, mut: MutationModel | None, rec: RecombinationModel | None
) -> np.ndarray:
    """Kernel-evaluated right-hand side; differentially tested against
    :func:`total_rhs`."""
    args = _compiled_args(mu.spec, mut, rec)
    out = np.empty(mu.spec.size)
    _kernels.eval_rhs(mu.probs.copy(), out, *args)
    return out


def integrate(
    mu0: Distribution,
    mut: MutationModel | None,
    rec: RecombinationModel | None,
    cfg: IntegratorConfig,
    *,
    reference: Distribution | None = None,
) -> TrajectoryRecord:
    """Advance the kinetics from ``mu0`` until t_max or a fixed point.

    Stops early once the l1 norm of the right-hand side drops below
    ``cfg.fixed_point_eps``.  Entries more negative than the clamp
    tolerance abort with advice to reduce dt; milder negativity is clamped
    to exact zero.  Records land every ``record_every`` steps.
    """
    if mut is None and rec is None:
        raise ValidationError("need at least one of mutation / recombination model")
    spec = mu0.spec
    if mut is not None and mut.spec != spec:
        raise ValidationError("initial law and mutation model live on different spaces")
    if rec is not None and rec.spec != spec:
        raise ValidationError("initial law and recombination model live on different spaces")
    if reference is None and mut is not None:
        reference = mut.stationary_law
    if reference is not None and reference.spec != spec:
        raise ValidationError("reference law lives on a different space")

    args = _compiled_args(spec, mut, rec)
    p = mu0.probs.copy()
    t = 0.0
    steps_total = math.ceil(cfg.t_max / cfg.dt - 1e-9)

    times = [0.0]
    h_vals = [neg_entropy(mu0)]
    ref_probs = reference.probs if reference is not None else None
    d_vals = [_d_monitor(p, ref_probs)]
    l1_vals = [_l1_monitor(p, ref_probs)]
    snapshots = [Distribution(spec, p)] if cfg.store_snapshots else None

    converged = False
    convergence_time: float | None = None
    steps_done = 0
    while steps_done < steps_total:
        chunk = min(cfg.record_every, steps_total - steps_done)
        status, taken, t, _ = _kernels.rk4_chunk(
            p, t, cfg.dt, chunk, cfg.fixed_point_eps, cfg.renorm_tol, 1e-6, *args
        )
        steps_done += taken
        if status == _kernels.NEGATIVE_ENTRY:
            raise NumericError(
                f"integration produced an entry below -{_kernels.NEG_TOL:g} at t={t!r}; "
                "reduce dt"
            )
        if status == _kernels.NONFINITE:
            raise NumericError(f"integration produced a non-finite value at t={t!r}")
        if status == _kernels.DRIFT:
            raise NumericError(
                f"probability mass drifted by more than 1e-6 at t={t!r}; "
                "this signals integrator misuse (reduce dt)"
            )
        if taken > 0:
            times.append(t)
            h_vals.append(float(special.xlogy(p, p).sum()))
            d_vals.append(_d_monitor(p, ref_probs))
            l1_vals.append(_l1_monitor(p, ref_probs))
            if snapshots is not None:
                snapshots.append(Distribution(spec, p))
        if status == _kernels.CONVERGED:
            converged = True
            convergence_time = t
            break

    return TrajectoryRecord(
        times=np.array(times),
        h_values=np.array(h_vals),
        d_values=np.array(d_vals),
        l1_values=np.array(l1_vals),
        converged=converged,
        convergence_time=convergence_time,
        final=Distribution(spec, p),
        snapshots=snapshots,
    )


def _d_monitor(p: np.ndarray, ref: np.ndarray | None) -> float:
    if ref is None:
        return float("nan")
    return float(special.rel_entr(p, ref).sum())


def _l1_monitor(p: np.ndarray, ref: np.ndarray | None) -> float:
    if ref is None:
        return float("nan")
    return float(np.abs(p - ref).sum())


def relative_entropy_rate_mutation(p: Distribution, mut: MutationModel) -> float:
    """Exact time derivative of D(p | stationary law) under pure mutation.

    Always <= 0; zero exactly when p equals the stationary law.  Returns
    -inf when mass flows into a state where p vanishes (the divergence
    drops at infinite initial rate there).
    """
    spec = mut.spec
    if p.spec != spec:
        raise ValidationError("distribution and mutation model live on different spaces")
    q = mut.stationary_law.probs
    f = (p.probs / q).reshape((spec.k,) * spec.n)
    q_tensor = q.reshape((spec.k,) * spec.n)
    total = 0.0
    for i, site in enumerate(mut.sites):
        f_front = np.moveaxis(f, i, 0).reshape(spec.k, -1)
        q_front = np.moveaxis(q_tensor, i, 0).reshape(spec.k, -1)
        rates = site.rates
        for a in range(spec.k):
            for b in range(spec.k):
                if a == b or rates[a, b] == 0.0:
                    continue
                u = f_front[a]
                v = f_front[b]
                if np.any((v == 0.0) & (u > 0.0)):
                    return float("-inf")
                with np.errstate(divide="ignore", invalid="ignore"):
                    bregman = np.where(
                        u > 0.0,
                        u * np.log(np.where(u > 0.0, u, 1.0) / np.where(v > 0.0, v, 1.0))
                        - u
                        + v,
                        v,
                    )
                # mathematically >= 0; clip float cancellation noise
                bregman = np.maximum(bregman, 0.0)
                total += rates[a, b] * float(np.dot(q_front[a], bregman))
    return -total


@dataclass(frozen=True)
class EntropyContractionReport:
    """Both sides of the one-step relative-entropy contraction check."""

    lhs: float
    rhs: float
    slack: float
    passed: bool


def check_entropy_contraction(
    transition: np.ndarray,
    invariant: Distribution,
    mu: Distribution,
    *,
    slack_tol: float = 1e-12,
    invariance_tol: float = 1e-10,
    row_tol: float = 1e-12,
) -> EntropyContractionReport:
    """Check that one application of a stochastic matrix does not increase
    relative entropy with respect to its strictly positive invariant law."""
    p = np.asarray(transition, dtype=np.float64)
    size = invariant.spec.size
    if p.shape != (size, size):
        raise ValidationError(f"transition matrix has shape {p.shape}, expected {(size, size)}")
    if mu.spec.size != size:
        raise ValidationError("test law and invariant law have different sizes")
    if p.min() < 0.0 or np.abs(p.sum(axis=1) - 1.0).max() > row_tol:
        raise PreconditionError("matrix is not row-stochastic")
    if invariant.probs.min() <= 0.0:
        raise PreconditionError("invariant law must be strictly positive")
    invariance_err = np.abs(invariant.probs @ p - invariant.probs).max()
    if invariance_err > invariance_tol:
        raise PreconditionError(
            f"claimed invariant law moves by {invariance_err:.3e} under the matrix "
            f"(tolerance {invariance_tol:g})"
        )
    after = mu.probs @ p
    lhs = float(special.rel_entr(after, invariant.probs).sum())
    rhs = float(special.rel_entr(mu.probs, invariant.probs).sum())
    slack = rhs - lhs
    return EntropyContractionReport(lhs=lhs, rhs=rhs, slack=slack, passed=slack >= -slack_tol)


@dataclass(frozen=True)
class RecombinationStepReport:
    """Audit of one small recombination step on a single subset.

    The cross term is the mean of the log of the paired-marginal product
    law, which the step must keep exactly constant; the entropy inequality
    says the step cannot increase ``sum p ln p``; and both the subset and
    complement marginals must be preserved.
    """

    cross_before: float
    cross_after: float
    cross_residual: float
    entropy_before: float
    entropy_after: float
    entropy_slack: float
    marginal_error_subset: float
    marginal_error_complement: float
    passed: bool


def check_recombination_step(
    mu: Distribution,
    mask: SubsetMask,
    model: RecombinationModel,
    dt: float,
    *,
    eq_tol: float = 1e-10,
    slack_tol: float = 1e-12,
) -> RecombinationStepReport:
    """Build the one-subset step kernel at ``dt`` and audit its entropy
    properties; requires a certifiably symmetric similarity."""
    if not model.similarity.is_certifiably_symmetric:
        raise PreconditionError(
            "similarity allows asymmetry: entropy certification refused "
            "(use invariance_violation to measure the defect)"
        )
    matrix = transition_matrix(mu, mask, model, dt)
    mu_hat = split_product_law(mu, mask)
    after = mu.probs @ matrix

    with np.errstate(divide="ignore", invalid="ignore"):
        log_hat = np.where(mu_hat.probs > 0.0, np.log(np.where(mu_hat.probs > 0.0, mu_hat.probs, 1.0)), -np.inf)
    cross_before = float(_masked_dot(mu.probs, log_hat))
    cross_after = float(_masked_dot(after, log_hat))
    cross_residual = abs(cross_after - cross_before)

    entropy_before = float(special.xlogy(mu.probs, mu.probs).sum())
    entropy_after = float(special.xlogy(after, after).sum())
    entropy_slack = entropy_before - entropy_after

    after_dist = Distribution(mu.spec, after)
    if mask.is_full:
        err_sub = l1_distance(after_dist, mu)
        err_ctx = 0.0
    else:
        err_sub = l1_distance(marginalize(after_dist, mask), marginalize(mu, mask))
        err_ctx = l1_distance(
            marginalize(after_dist, mask.complement), marginalize(mu, mask.complement)
        )

    passed = (
        cross_residual <= eq_tol
        and entropy_slack >= -slack_tol
        and err_sub <= eq_tol
        and err_ctx <= eq_tol
    )
    return RecombinationStepReport(
        cross_before=cross_before,
        cross_after=cross_after,
        cross_residual=cross_residual,
        entropy_before=entropy_before,
        entropy_after=entropy_after,
        entropy_slack=entropy_slack,
        marginal_error_subset=err_sub,
        marginal_error_complement=err_ctx,
        passed=passed,
    )


def _masked_dot(weights: np.ndarray, log_values: np.ndarray) -> float:
    """sum w * log_values with the 0 * (-inf) = 0 convention."""
    out = np.where(weights > 0.0, weights * log_values, 0.0)
    return float(out.sum())


def invariance_violation(
    mu: Distribution, mask: SubsetMask, model: RecombinationModel, dt: float
) -> float:
    """Max-abs movement of the paired-marginal product law under the step
    kernel.  Zero for symmetric similarity; measures the defect otherwise."""
    matrix = transition_matrix(mu, mask, model, dt)
    mu_hat = split_product_law(mu, mask)
    return float(np.abs(mu_hat.probs @ matrix - mu_hat.probs).max())


@dataclass(frozen=True)
class MonotonicityReport:
    passed: bool
    max_increase: float
    worst_index: int
    worst_time: float


def lyapunov_monotonicity_audit(
    traj: TrajectoryRecord, *, budget: float = 1e-10
) -> MonotonicityReport:
    """Verify the relative-entropy series is non-increasing within a
    per-step numerical noise budget."""
    if len(traj.times) < 2:
        raise ValidationError("monotonicity audit needs at least 2 records")
    series = traj.d_values
    if np.any(np.isnan(series)):
        raise ValidationError("trajectory has no reference law; no divergence to audit")
    increases = np.diff(series)
    worst = int(np.argmax(increases))
    max_increase = float(increases[worst])
    return MonotonicityReport(
        passed=max_increase <= budget,
        max_increase=max_increase,
        worst_index=worst + 1,
        worst_time=float(traj.times[worst + 1]),
    )
