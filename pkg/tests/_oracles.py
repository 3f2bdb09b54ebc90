"""Slow, loop-based reference implementations used as test oracles.

Nothing here shares code with the package: block sums are built with
explicit loops, the gene prior is a product of sequential predictive
probabilities and the spot prior is normalised by full enumeration.
"""
import itertools
import math

import numpy as np
from scipy import integrate, stats


def block_sums(Y, s, g, z, rho, K, R):
    p, n = Y.shape
    Yb = np.zeros((R + 1, K))
    Sb = np.zeros((R + 1, K))
    for j in range(p):
        for i in range(n):
            Yb[rho[j], z[i]] += Y[j, i]
            Sb[rho[j], z[i]] += g[j] * s[i]
    return Yb, Sb


def gamma_poisson_marginal(y, e, a, b):
    """log of int Ga(mu | a, b) exp(-e mu) mu^y dmu (without the per-cell constant)."""
    return a * math.log(b) - math.lgamma(a) + math.lgamma(a + y) - (a + y) * math.log(b + e)


def sequential_urn_log_prior(rho, R, gamma=1.0, a_pi=1.0, b_pi=1.0):
    """Labeled zero-inflated urn, built gene by gene from predictive probabilities."""
    out = 0.0
    seen = []
    for j, r in enumerate(rho):
        p0 = sum(1 for x in seen if x == 0)
        n_dg = j - p0
        sizes = {k: sum(1 for x in seen if x == k) for k in range(1, R + 1)}
        empty = sum(1 for k in sizes if sizes[k] == 0)
        denom = a_pi + b_pi + j
        if r == 0:
            out += math.log((a_pi + p0) / denom)
        else:
            share = sizes[r] if sizes[r] > 0 else gamma / empty
            out += math.log((b_pi + n_dg) / denom * share / (gamma + n_dg))
        seen.append(int(r))
    return out


def mrf_log_prior(z, adjacency, b, h):
    n = len(z)
    out = sum(b[z[i]] for i in range(n))
    for i in range(n):
        for j in range(i + 1, n):
            if adjacency[i][j] and z[i] == z[j]:
                out += h
    return out


def collapsed_log_joint(Y, s, g, z, rho, K, R, adjacency, hyper=None):
    """Unnormalised log posterior of (z, rho) with rates and pi0 integrated out."""
    hp = dict(alpha_mu=1.0, beta_mu=1.0, alpha_0=1.0, beta_0=1.0,
              alpha_pi=1.0, beta_pi=1.0, gamma=1.0, h=1.0)
    hp.update(hyper or {})
    b = np.ones(K)
    Yb, Sb = block_sums(Y, s, g, z, rho, K, R)
    out = mrf_log_prior(z, adjacency, b, hp["h"])
    out += sequential_urn_log_prior(rho, R, hp["gamma"], hp["alpha_pi"], hp["beta_pi"])
    for r in range(1, R + 1):
        for k in range(K):
            out += gamma_poisson_marginal(Yb[r, k], Sb[r, k], hp["alpha_mu"], hp["beta_mu"])
    out += gamma_poisson_marginal(Yb[0].sum(), Sb[0].sum(), hp["alpha_0"], hp["beta_0"])
    return out


def enumerate_posterior(Y, s, g, K, R, adjacency, hyper=None):
    """Exact posterior over every labeled (z, rho); returns (states, probabilities)."""
    p, n = Y.shape
    states, logp = [], []
    for z in itertools.product(range(K), repeat=n):
        for rho in itertools.product(range(R + 1), repeat=p):
            states.append((z, rho))
            logp.append(collapsed_log_joint(Y, s, g, np.array(z), np.array(rho), K, R, adjacency, hyper))
    logp = np.array(logp)
    prob = np.exp(logp - logp.max())
    return states, prob / prob.sum()


def path_adjacency(n):
    A = np.zeros((n, n), dtype=np.int64)
    for i in range(n - 1):
        A[i, i + 1] = A[i + 1, i] = 1
    return A


def random_graph(n, rng, density=0.5):
    A = np.triu((rng.random((n, n)) < density).astype(np.int64), 1)
    return A + A.T


def quad_log_marginal(y, e, a, b):
    """log of int prod Poi(y_c | e_c mu) Ga(mu | a, b) dmu by adaptive quadrature."""
    y, e = np.asarray(y, float), np.asarray(e, float)

    def logf(mu):
        return stats.gamma.logpdf(mu, a, scale=1 / b) + stats.poisson.logpmf(y, e * mu).sum()

    shape, rate = a + y.sum(), b + e.sum()
    mode = max(shape - 1, 0) / rate
    sd = math.sqrt(shape) / rate
    ref = logf(mode) if mode > 0 else logf(sd * 1e-3)
    f = lambda mu: math.exp(logf(mu) - ref) if mu > 0 else 0.0
    pieces = [(0, mode), (mode, mode + 10 * sd), (mode + 10 * sd, mode + 60 * sd)]
    total = sum(integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-12, limit=200)[0]
                for lo, hi in pieces if hi > lo)
    return ref + math.log(total)
