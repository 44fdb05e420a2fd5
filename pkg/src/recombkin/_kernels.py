"""Compiled inner loops: right-hand-side evaluation, fixed-step 4th-order
integration chunks, and the event-driven population simulator.

Everything here works on plain arrays prepared by the public modules; the
public numpy implementations stay the reference, and differential tests pin
these kernels to them.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# rk4_chunk statuses
OK = 0
CONVERGED = 1
NEGATIVE_ENTRY = 2
NONFINITE = 3
DRIFT = 4

#: entries more negative than this abort integration; milder ones clamp to 0
NEG_TOL = 1e-13


@njit(cache=True, nogil=True)
def eval_rhs(
    p,
    out,
    has_mut,
    site_rates,  # (n, k, k)
    pows,  # (n,) big-endian digit weights
    k,
    has_rec,
    kappa,
    weights,  # (n_subsets,)
    km,  # (n_subsets,) substring-space sizes
    ungroup,  # (n_subsets, size) grouped index -> state index
    phis,  # (n_subsets, max_km, max_km), zero-padded
):
    size = p.shape[0]
    for x in range(size):
        out[x] = 0.0
    if has_mut:
        n_sites = site_rates.shape[0]
        for i in range(n_sites):
            w = pows[i]
            for x in range(size):
                d = (x // w) % k
                base = x - d * w
                acc = 0.0
                for a in range(k):
                    acc += p[base + a * w] * site_rates[i, a, d]
                out[x] += acc
    if has_rec:
        n_subsets = km.shape[0]
        max_km = phis.shape[1]
        marg = np.empty(max_km)
        phim = np.empty(max_km)
        row = np.empty(max_km)
        for j in range(n_subsets):
            m = km[j]
            n_ctx = size // m
            coef = kappa * weights[j]
            for t in range(m):
                marg[t] = 0.0
            for g in range(size):
                marg[g % m] += p[ungroup[j, g]]
            for a in range(m):
                s = 0.0
                for b in range(m):
                    s += phis[j, a, b] * marg[b]
                phim[a] = s
            for c in range(n_ctx):
                base = c * m
                for t in range(m):
                    row[t] = p[ungroup[j, base + t]]
                for a in range(m):
                    s = 0.0
                    for b in range(m):
                        s += row[b] * phis[j, b, a]
                    out[ungroup[j, base + a]] += coef * (marg[a] * s - row[a] * phim[a])


@njit(cache=True, nogil=True)
def rk4_chunk(
    p,
    t,
    dt,
    n_steps,
    eps,
    renorm_tol,
    drift_hard,
    has_mut,
    site_rates,
    pows,
    k,
    has_rec,
    kappa,
    weights,
    km,
    ungroup,
    phis,
):
    """Advance up to n_steps classical 4th-order steps in place.

    Returns (status, steps_taken, t, last_rhs_l1).  Convergence is checked
    before each step on the current state, so a converged state is returned
    unmodified.
    """
    size = p.shape[0]
    k1 = np.empty(size)
    k2 = np.empty(size)
    k3 = np.empty(size)
    k4 = np.empty(size)
    ytmp = np.empty(size)
    norm = 0.0
    for s in range(n_steps):
        eval_rhs(p, k1, has_mut, site_rates, pows, k, has_rec, kappa, weights, km, ungroup, phis)
        norm = 0.0
        for x in range(size):
            norm += abs(k1[x])
        if norm < eps:
            return CONVERGED, s, t, norm
        half = 0.5 * dt
        for x in range(size):
            ytmp[x] = p[x] + half * k1[x]
        eval_rhs(ytmp, k2, has_mut, site_rates, pows, k, has_rec, kappa, weights, km, ungroup, phis)
        for x in range(size):
            ytmp[x] = p[x] + half * k2[x]
        eval_rhs(ytmp, k3, has_mut, site_rates, pows, k, has_rec, kappa, weights, km, ungroup, phis)
        for x in range(size):
            ytmp[x] = p[x] + dt * k3[x]
        eval_rhs(ytmp, k4, has_mut, site_rates, pows, k, has_rec, kappa, weights, km, ungroup, phis)
        sixth = dt / 6.0
        total = 0.0
        low = 0.0
        for x in range(size):
            v = p[x] + sixth * (k1[x] + 2.0 * (k2[x] + k3[x]) + k4[x])
            if v < low:
                low = v
            p[x] = v
        t += dt
        if low < -NEG_TOL:
            return NEGATIVE_ENTRY, s + 1, t, norm
        for x in range(size):
            if p[x] < 0.0:
                p[x] = 0.0
            total += p[x]
        if not np.isfinite(total):
            return NONFINITE, s + 1, t, norm
        drift = abs(total - 1.0)
        if drift > drift_hard:
            return DRIFT, s + 1, t, norm
        if drift > renorm_tol:
            for x in range(size):
                p[x] /= total
    return OK, n_steps, t, norm


@njit(cache=True, nogil=True)
def _splice_substring(x, sub, j, pos_list, m_sizes, pows, k):
    """Place substring index ``sub`` (big-endian over the subset's ascending
    positions) onto genome index ``x``."""
    m = m_sizes[j]
    spw = 1
    for _ in range(m - 1):
        spw *= k
    out = x
    for slot in range(m):
        p = pos_list[j, slot]
        w = pows[p]
        want = (sub // spw) % k
        cur = (out // w) % k
        out += (want - cur) * w
        spw //= k
    return out


@njit(cache=True, nogil=True)
def _recompute_rates(
    counts, exit_rates, sub_idx, phis, km, sub_counts, pair_sums, diag_sums,
):
    """Refill the mutation total and per-subset bookkeeping from counts."""
    size = counts.shape[0]
    n_subsets = km.shape[0]
    mut_total = 0.0
    for x in range(size):
        mut_total += counts[x] * exit_rates[x]
    for j in range(n_subsets):
        m = km[j]
        for s in range(m):
            sub_counts[j, s] = 0
        for x in range(size):
            sub_counts[j, sub_idx[j, x]] += counts[x]
        ps = 0.0
        ds = 0.0
        for s in range(m):
            cs = sub_counts[j, s]
            if cs == 0:
                continue
            acc = 0.0
            for tt in range(m):
                acc += sub_counts[j, tt] * phis[j, s, tt]
            ps += cs * acc
            ds += cs * phis[j, s, s]
        pair_sums[j] = ps
        diag_sums[j] = ds
    return mut_total


@njit(cache=True, nogil=True)
def _apply_count_change(
    x, delta, counts, exit_rates, sub_idx, phis, km, sub_counts, pair_sums, diag_sums,
):
    """Update counts plus incremental rate bookkeeping; returns d(mut_total)."""
    counts[x] += delta
    n_subsets = km.shape[0]
    for j in range(n_subsets):
        s = sub_idx[j, x]
        m = km[j]
        acc = 0.0
        for tt in range(m):
            acc += sub_counts[j, tt] * (phis[j, s, tt] + phis[j, tt, s])
        pair_sums[j] += delta * acc + delta * delta * phis[j, s, s]
        diag_sums[j] += delta * phis[j, s, s]
        sub_counts[j, s] += delta
    return delta * exit_rates[x]


@njit(cache=True, nogil=True)
def gillespie_run(
    counts,  # (size,) int64, modified in place
    t0,
    t_end,
    burn_in,
    sample_every,
    site_rates,  # (n, k, k)
    site_exit,  # (n, k) per-site exit rate by letter
    exit_rates,  # (size,) per-genome total mutation exit rate
    pows,
    k,
    kappa,
    weights,
    km,
    sub_idx,  # (n_subsets, size)
    pos_list,  # (n_subsets, max_m) subset positions, ascending, padded
    m_sizes,  # (n_subsets,)
    phis,
    mode_ii,  # True: pair exchange between distinct individuals
    incremental,  # rate bookkeeping mode
    refresh_every,
    rng,
    samples_out,  # (n_samples_max, size) int64
    sample_times_out,  # (n_samples_max,)
    avg_out,  # (size,) float64 time-weighted count integral over [burn_in, t_end]
):
    """Exact event-driven simulation of one replicate.

    Returns (n_events, n_samples, population_conserved).
    """
    size = counts.shape[0]
    n_subsets = km.shape[0]
    n_sites = site_rates.shape[0]
    n_pop = 0
    for x in range(size):
        n_pop += counts[x]
    max_km = phis.shape[1]
    sub_counts = np.zeros((n_subsets, max_km), dtype=np.int64)
    pair_sums = np.zeros(n_subsets)
    diag_sums = np.zeros(n_subsets)
    mut_total = _recompute_rates(
        counts, exit_rates, sub_idx, phis, km, sub_counts, pair_sums, diag_sums,
    )

    t = t0
    n_events = 0
    n_samples = 0
    n_samples_max = samples_out.shape[0]
    next_sample = burn_in + sample_every
    since_refresh = 0

    while t < t_end:
        total = mut_total
        for j in range(n_subsets):
            r = pair_sums[j]
            if mode_ii:
                r -= diag_sums[j]
            total += kappa * weights[j] * r / n_pop
        if total <= 0.0:
            tau = t_end - t + 1.0  # no further events
        else:
            tau = rng.exponential(1.0) / total
        t_next = t + tau
        # snapshots fall inside the inter-event interval
        while (
            n_samples < n_samples_max
            and next_sample <= t_end + 1e-12
            and next_sample <= t_next
        ):
            for x in range(size):
                samples_out[n_samples, x] = counts[x]
            sample_times_out[n_samples] = next_sample
            n_samples += 1
            next_sample += sample_every
        # time-weighted average accumulation over [burn_in, t_end]
        lo = t if t > burn_in else burn_in
        hi = t_next if t_next < t_end else t_end
        if hi > lo:
            span = hi - lo
            for x in range(size):
                avg_out[x] += counts[x] * span
        if t_next >= t_end or total <= 0.0:
            t = t_end
            break
        t = t_next

        u = rng.random() * total
        if u < mut_total:
            # mutation: genome ~ counts*exit, then site, then target letter
            acc = 0.0
            x = size - 1
            for cand in range(size):
                acc += counts[cand] * exit_rates[cand]
                if u < acc:
                    x = cand
                    break
            v = rng.random() * exit_rates[x]
            acc = 0.0
            site = n_sites - 1
            for i in range(n_sites):
                acc += site_exit[i, (x // pows[i]) % k]
                if v < acc:
                    site = i
                    break
            a = (x // pows[site]) % k
            w2 = rng.random() * site_exit[site, a]
            acc = 0.0
            b = a
            for cand in range(k):
                if cand == a:
                    continue
                acc += site_rates[site, a, cand]
                if w2 < acc:
                    b = cand
                    break
            if b == a:  # fp round-off at the scan boundary: take any open channel
                for cand in range(k):
                    if cand != a and site_rates[site, a, cand] > 0.0:
                        b = cand
                        break
            y = x + (b - a) * pows[site]
            mut_total += _apply_count_change(
                x, -1, counts, exit_rates, sub_idx, phis, km, sub_counts, pair_sums, diag_sums
            )
            mut_total += _apply_count_change(
                y, 1, counts, exit_rates, sub_idx, phis, km, sub_counts, pair_sums, diag_sums
            )
        else:
            u -= mut_total
            jj = n_subsets - 1
            for j in range(n_subsets):
                r = pair_sums[j]
                if mode_ii:
                    r -= diag_sums[j]
                u -= kappa * weights[j] * r / n_pop
                if u < 0.0:
                    jj = j
                    break
            m = km[jj]
            # ordered substring pair (s, t) ~ C(s)C(t)phi, minus the diagonal
            # self-pair correction in exchange mode
            wtot = pair_sums[jj]
            if mode_ii:
                wtot -= diag_sums[jj]
            v = rng.random() * wtot
            acc = 0.0
            s_pick = 0
            t_pick = 0
            done = False
            for s in range(m):
                cs = sub_counts[jj, s]
                if cs == 0:
                    continue
                for tt in range(m):
                    ct = sub_counts[jj, tt]
                    if mode_ii and tt == s:
                        ct -= 1
                    if ct <= 0:
                        continue
                    acc += cs * ct * phis[jj, s, tt]
                    if v < acc:
                        s_pick = s
                        t_pick = tt
                        done = True
                        break
                if done:
                    break
            # target genome in substring class s_pick, ~ counts
            v2 = rng.random() * sub_counts[jj, s_pick]
            acc = 0.0
            ga = -1
            for cand in range(size):
                if sub_idx[jj, cand] == s_pick:
                    acc += counts[cand]
                    if v2 < acc:
                        ga = cand
                        break
            if ga < 0:  # fp boundary fallback
                for cand in range(size):
                    if sub_idx[jj, cand] == s_pick and counts[cand] > 0:
                        ga = cand
                        break
            # donor genome in class t_pick; in exchange mode the donor is a
            # distinct individual, so the target's own count drops by one
            ct_total = sub_counts[jj, t_pick]
            if mode_ii and t_pick == s_pick:
                ct_total -= 1
            v3 = rng.random() * ct_total
            acc = 0.0
            gb = -1
            for cand in range(size):
                if sub_idx[jj, cand] == t_pick:
                    c_eff = counts[cand]
                    if mode_ii and cand == ga:
                        c_eff -= 1
                    acc += c_eff
                    if v3 < acc:
                        gb = cand
                        break
            if gb < 0:  # fp boundary fallback; an eligible donor is guaranteed
                for cand in range(size):
                    if sub_idx[jj, cand] != t_pick:
                        continue
                    c_eff = counts[cand]
                    if mode_ii and cand == ga:
                        c_eff -= 1
                    if c_eff > 0:
                        gb = cand
                        break
            ga_new = _splice_substring(ga, t_pick, jj, pos_list, m_sizes, pows, k)
            if mode_ii:
                gb_new = _splice_substring(gb, s_pick, jj, pos_list, m_sizes, pows, k)
                if ga_new != ga or gb_new != gb:
                    mut_total += _apply_count_change(
                        ga, -1, counts, exit_rates, sub_idx, phis, km, sub_counts, pair_sums, diag_sums
                    )
                    mut_total += _apply_count_change(
                        gb, -1, counts, exit_rates, sub_idx, phis, km, sub_counts, pair_sums, diag_sums
                    )
                    mut_total += _apply_count_change(
                        ga_new, 1, counts, exit_rates, sub_idx, phis, km, sub_counts, pair_sums, diag_sums
                    )
                    mut_total += _apply_count_change(
                        gb_new, 1, counts, exit_rates, sub_idx, phis, km, sub_counts, pair_sums, diag_sums
                    )
            else:
                if ga_new != ga:
                    mut_total += _apply_count_change(
                        ga, -1, counts, exit_rates, sub_idx, phis, km, sub_counts, pair_sums, diag_sums
                    )
                    mut_total += _apply_count_change(
                        ga_new, 1, counts, exit_rates, sub_idx, phis, km, sub_counts, pair_sums, diag_sums
                    )

        n_events += 1
        since_refresh += 1
        if not incremental or since_refresh >= refresh_every:
            mut_total = _recompute_rates(
                counts, exit_rates, sub_idx, phis, km, sub_counts, pair_sums, diag_sums,
            )
            since_refresh = 0

    check = 0
    for x in range(size):
        check += counts[x]
    return n_events, n_samples, check == n_pop
