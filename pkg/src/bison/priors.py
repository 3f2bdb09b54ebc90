"""Priors on gene memberships (zero-inflated Polya urn) and spot memberships (MRF).

The null-gene probability is integrated out against its Beta prior, so the
gene prior is a Beta-Binomial term times the Polya urn partition probability.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammaln, logsumexp


@dataclass(frozen=True)
class UrnState:
    sizes: tuple  # p_1 .. p_R
    p0: int
    gamma: float = 1.0
    alpha_pi: float = 1.0
    beta_pi: float = 1.0

    @classmethod
    def from_labels(cls, rho, R, gamma=1.0, alpha_pi=1.0, beta_pi=1.0):
        counts = np.bincount(np.asarray(rho, dtype=np.int64), minlength=R + 1)
        return cls(tuple(int(c) for c in counts[1:]), int(counts[0]), gamma, alpha_pi, beta_pi)

    @property
    def p(self) -> int:
        return self.p0 + sum(self.sizes)


def log_urn_prior(rho, gamma=1.0, alpha_pi=1.0, beta_pi=1.0, n_labels=None) -> float:
    """Log prior of a gene labelling.

    Only the partition matters: occupied groups are exchangeable and empty
    labels are ignored. When ``n_labels`` (the fixed number of gene groups R)
    is given, the probability is additionally spread evenly over the
    ``R! / (R - R_occ)!`` ways of placing the occupied groups on labels, which
    is the prior the fixed-R Gibbs sampler actually targets. Partitions with
    more than R groups are then impossible, so for ``p > R`` the values sum to
    less than one; the missing mass is a constant that cancels in every
    conditional.
    """
    rho = np.asarray(rho, dtype=np.int64)
    p = rho.size
    p0 = int(np.sum(rho == 0))
    out = betaln(alpha_pi + p0, beta_pi + p - p0) - betaln(alpha_pi, beta_pi)
    sizes = np.bincount(rho[rho > 0]) if p0 < p else np.zeros(0, dtype=np.int64)
    sizes = sizes[sizes > 0]
    if sizes.size:
        out += sizes.size * math.log(gamma) + gammaln(sizes).sum()
        out -= np.log(gamma + np.arange(p - p0)).sum()
    if n_labels is not None:
        if sizes.size > n_labels:
            return -math.inf
        out -= math.lgamma(n_labels + 1) - math.lgamma(n_labels - sizes.size + 1)
    return float(out)


def gene_prior_log_weights(rho_minus_j, R, gamma=1.0, alpha_pi=1.0, beta_pi=1.0) -> np.ndarray:
    """Unnormalised log prior weights of labels ``0..R`` for a held-out gene.

    The factor ``1 / (alpha_pi + beta_pi + p - 1)`` shared by every label is
    dropped.
    """
    rho_minus_j = np.asarray(rho_minus_j, dtype=np.int64)
    sizes = np.bincount(rho_minus_j, minlength=R + 1)
    p0 = sizes[0]
    n_dg = rho_minus_j.size - p0
    n_empty = int(np.sum(sizes[1:] == 0))
    logw = np.empty(R + 1)
    logw[0] = math.log(alpha_pi + p0)
    with np.errstate(divide="ignore"):
        urn = np.where(sizes[1:] > 0, np.log(np.maximum(sizes[1:], 1)),
                       math.log(gamma / max(n_empty, 1)))
    logw[1:] = math.log(beta_pi + n_dg) - math.log(gamma + n_dg) + urn
    return logw


def gene_prior_conditional(rho_minus_j, R, gamma=1.0, alpha_pi=1.0, beta_pi=1.0) -> np.ndarray:
    """Prior probabilities of labels ``0..R`` for one gene given all others.

    Null: proportional to ``alpha_pi + p0``. Group ``r``: proportional to
    ``(beta_pi + m) / (gamma + m)`` times the urn share, where ``m`` counts the
    other DGs and the share is the group size for occupied groups and
    ``gamma / E`` for each of the ``E`` empty ones.
    """
    logw = gene_prior_log_weights(rho_minus_j, R, gamma, alpha_pi, beta_pi)
    return np.exp(logw - logsumexp(logw))


def log_mrf_prior_unnormalized(z, adjacency, b, h) -> float:
    """``sum_k b_k n_k + h * #(neighbour pairs sharing a label)``."""
    z = np.asarray(z, dtype=np.int64)
    b = np.asarray(b, dtype=float)
    adj = np.asarray(adjacency)
    abundance = float(b[z].sum())
    same = z[:, None] == z[None, :]
    agree = np.sum(np.triu(adj * same, k=1))
    return abundance + h * float(agree)


def spot_prior_log_weights(i, z, adjacency, b, h) -> np.ndarray:
    z = np.asarray(z, dtype=np.int64)
    b = np.asarray(b, dtype=float)
    row = np.asarray(adjacency)[i].astype(bool).copy()
    row[i] = False
    neigh = np.bincount(z[row], minlength=b.size)
    return b + h * neigh


def spot_prior_conditional(i, z, adjacency, b, h) -> np.ndarray:
    """MRF conditional of spot ``i`` over labels ``0..K-1``; ``z[i]`` is ignored."""
    logw = spot_prior_log_weights(i, z, adjacency, b, h)
    return np.exp(logw - logsumexp(logw))
