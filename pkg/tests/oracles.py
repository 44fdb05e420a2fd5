"""Independent brute-force reference implementations.

Everything here evaluates defining sums literally with nested Python
loops and shares no code with the package paths it checks.
"""

import itertools

import numpy as np


def digits_of(x, k, n):
    out = []
    for _ in range(n):
        x, d = divmod(x, k)
        out.append(d)
    return list(reversed(out))


def index_of(digits, k):
    ix = 0
    for d in digits:
        ix = ix * k + d
    return ix


def literal_mutation_rhs(probs, k, n, site_rates):
    """Term-by-term evaluation of the mutation sum.

    site_rates: indexable (n, k, k), entry [i][a][b] the intensity of
    a -> b at position i (diagonal irrelevant here).
    """
    size = k**n
    out = np.zeros(size)
    for x in range(size):
        dx = digits_of(x, k, n)
        acc = 0.0
        for i in range(n):
            for y in range(k):
                if y == dx[i]:
                    continue
                dy = list(dx)
                dy[i] = y
                acc += site_rates[i][y][dx[i]] * probs[index_of(dy, k)]
                acc -= site_rates[i][dx[i]][y] * probs[x]
        out[x] = acc
    return out


def literal_marginal(probs, k, n, positions):
    """mu_I by its definition: sum over genomes agreeing on the subset."""
    m = len(positions)
    out = {}
    for sub in itertools.product(range(k), repeat=m):
        total = 0.0
        for z in range(size_of(k, n)):
            dz = digits_of(z, k, n)
            if tuple(dz[p] for p in positions) == sub:
                total += probs[z]
        out[sub] = total
    return out


def size_of(k, n):
    return k**n


def literal_recombination_rhs(probs, k, n, kappa, family, phi):
    """Term-by-term evaluation of the recombination sum.

    family: iterable of (positions tuple, weight); phi: callable on two
    letter tuples.
    """
    size = k**n
    out = np.zeros(size)
    marginals = {
        positions: literal_marginal(probs, k, n, positions)
        for positions, _ in family
        if len(positions) > 0
    }
    for x in range(size):
        dx = digits_of(x, k, n)
        acc = 0.0
        for positions, w in family:
            m = len(positions)
            if m == 0:
                continue
            mu_sub = marginals[positions]
            x_sub = tuple(dx[p] for p in positions)
            for y_sub in itertools.product(range(k), repeat=m):
                dmix = list(dx)
                for p, letter in zip(positions, y_sub):
                    dmix[p] = letter
                gain = phi(y_sub, x_sub) * mu_sub[x_sub] * probs[index_of(dmix, k)]
                loss = phi(x_sub, y_sub) * mu_sub[y_sub] * probs[x]
                acc += w * (gain - loss)
        out[x] = kappa * acc
    return out


def null_space_stationary(rates):
    """Stationary law of a rate matrix via an eigen decomposition."""
    rates = np.asarray(rates, dtype=np.float64)
    vals, vecs = np.linalg.eig(rates.T)
    idx = int(np.argmin(np.abs(vals)))
    q = np.real(vecs[:, idx])
    q = q / q.sum()
    return q


def literal_hamming_histogram(probs, k, n):
    """Double sum over independent pairs, distances counted letterwise."""
    size = k**n
    hist = np.zeros(n + 1)
    for x in range(size):
        dx = digits_of(x, k, n)
        for y in range(size):
            dy = digits_of(y, k, n)
            d = sum(1 for a, b in zip(dx, dy) if a != b)
            hist[d] += probs[x] * probs[y]
    return hist


def literal_neg_entropy(probs):
    total = 0.0
    for p in probs:
        if p > 0.0:
            total += p * np.log(p)
    return total


def literal_relative_entropy(p, q):
    total = 0.0
    for a, b in zip(p, q):
        if a > 0.0:
            total += a * np.log(a / b)
    return total


def rk4_step_literal(probs, h, rhs):
    """One classical 4th-order step used to build finite-difference oracles."""
    p = np.asarray(probs, dtype=np.float64)
    k1 = rhs(p)
    k2 = rhs(p + 0.5 * h * k1)
    k3 = rhs(p + 0.5 * h * k2)
    k4 = rhs(p + h * k3)
    return p + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
