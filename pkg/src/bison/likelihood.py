"""Plug-in effect estimators and collapsed Gamma-Poisson marginals."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

from .data import CountMatrix, InputError


@dataclass(frozen=True)
class ScalingFactors:
    """Spot size factors ``s`` (summing to one) and gene effects ``g``."""

    s: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if np.any(~np.isfinite(s)) or np.any(s <= 0):
            raise InputError("size factors must be positive")
        if np.any(~np.isfinite(g)) or np.any(g <= 0):
            raise InputError("gene effects must be positive")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "g", g)

    @classmethod
    def from_counts(cls, counts: CountMatrix) -> "ScalingFactors":
        return cls(estimate_size_factors(counts), estimate_gene_effects(counts))


def _values(counts) -> np.ndarray:
    return counts.values if isinstance(counts, CountMatrix) else np.asarray(counts)


def estimate_size_factors(counts) -> np.ndarray:
    """Column totals divided by the grand total."""
    Y = _values(counts)
    col = Y.sum(axis=0).astype(float)
    return col / col.sum()


def estimate_gene_effects(counts) -> np.ndarray:
    """Row totals."""
    return _values(counts).sum(axis=1).astype(float)


def log_block_marginal(y_sum, s_sum, alpha, beta, logconst=0.0) -> float:
    """Log marginal likelihood of a Poisson block with its rate integrated out.

    The block's cells share one rate ``mu ~ Gamma(alpha, beta)`` (rate
    parametrisation) and cell means ``s_i g_j mu``. ``y_sum`` and ``s_sum`` are
    the summed counts and exposures; ``logconst`` is the data-only term
    ``sum(y log(s g) - lgamma(y + 1))``, which may be left at zero whenever it
    cancels.
    """
    vals = (y_sum, s_sum, alpha, beta, logconst)
    if not all(math.isfinite(v) for v in vals):
        raise InputError(f"non-finite input to log_block_marginal: {vals}")
    if y_sum < 0 or s_sum < 0 or alpha <= 0 or beta <= 0:
        raise InputError(f"invalid block marginal arguments: {vals}")
    return (
        alpha * math.log(beta)
        - math.lgamma(alpha)
        + math.lgamma(alpha + y_sum)
        - (alpha + y_sum) * math.log(beta + s_sum)
        + logconst
    )


def block_logconst(y, exposure) -> float:
    """Data-only part of the Poisson log likelihood, ``sum(y log e - log y!)``."""
    y = np.asarray(y, dtype=float)
    return float(np.sum(xlogy(y, exposure) - gammaln(y + 1)))


def poisson_logpmf(y, lam) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return xlogy(y, lam) - lam - gammaln(y + 1)


def loglik_plugin(counts, s, g, z, rho, mu_hat, mu0_hat) -> np.ndarray:
    """Per-gene Poisson log likelihood at plug-in rates.

    Genes with ``rho[j] = r > 0`` use ``mu_hat[r-1, z_i]``; null genes use
    ``mu0_hat`` at every spot.
    """
    Y = _values(counts)
    s = np.asarray(s, dtype=float)
    g = np.asarray(g, dtype=float)
    z = np.asarray(z, dtype=np.int64)
    rho = np.asarray(rho, dtype=np.int64)
    mu_hat = np.atleast_2d(np.asarray(mu_hat, dtype=float))
    if np.any(mu_hat <= 0) or not mu0_hat > 0:
        raise InputError("plug-in rates must be positive")
    rates = np.vstack([np.full(mu_hat.shape[1], float(mu0_hat)), mu_hat])
    mu_cell = rates[rho][:, z]
    lam = np.outer(g, s) * mu_cell
    return poisson_logpmf(Y, lam).sum(axis=1)
