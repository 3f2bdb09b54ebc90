"""Choosing the numbers of gene groups R and spot clusters K by modified ICL."""
from __future__ import annotations

import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .data import Hyperparameters
from .likelihood import ScalingFactors, loglik_plugin
from .sampler import McmcConfig, run_mcmc
from .summary import FitSummary, summarize_fit

logger = logging.getLogger(__name__)

PARAMS_PER_BLOCK = 1


def compute_micl(counts, factors, fit: FitSummary, hyper=None, R=None, K=None, nu=PARAMS_PER_BLOCK) -> float:
    """Modified integrated completed likelihood of a fitted (R, K) model; lower is better.

    DG genes contribute their plug-in Poisson log likelihood plus the log share
    of their group among DGs; null genes contribute their likelihood at the
    pooled null rate. Penalties follow the usual ICL form with ``nu`` rates per
    block, plus ``p0/2 log n`` for the null set.
    """
    R = fit.R if R is None else R
    K = fit.K if K is None else K
    Y = counts.values
    p, n = Y.shape
    rho = fit.rho_hat
    ll = loglik_plugin(counts, factors.s, factors.g, fit.z_hat, rho, fit.mu_hat, fit.mu0_hat)
    null = rho == 0
    p0 = int(null.sum())
    n_dg = p - p0

    value = -float(ll[null].sum()) + 0.5 * p0 * math.log(n)
    if n_dg == 0:
        if R > 1:
            warnings.warn(f"every gene is null; R={R} is vacuous", RuntimeWarning, stacklevel=2)
        return value
    sizes = np.bincount(rho, minlength=R + 1)
    mix = np.log(sizes[rho[~null]] / n_dg)
    value -= float(ll[~null].sum() + mix.sum())
    value += 0.5 * (K - 1) * math.log(n) + 0.5 * (R - 1) * math.log(n_dg)
    value += 0.5 * K * R * nu * math.log(n * n_dg)
    return value


@dataclass
class GridCell:
    R: int
    K: int
    micl: float = math.nan
    p0_hat: Optional[int] = None
    runtime_seconds: float = 0.0
    fit: Optional[FitSummary] = field(default=None, repr=False)
    error: Optional[str] = None


@dataclass
class MiclGrid:
    cells: list

    @property
    def best(self) -> Optional[GridCell]:
        ok = [c for c in self.cells if c.error is None and np.isfinite(c.micl)]
        if not ok:
            return None
        return min(ok, key=lambda c: (c.micl, c.R + c.K, c.K))

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("R,K,mICL,p0_hat,runtime_seconds\n")
            for c in self.cells:
                micl = "NA" if c.error or not np.isfinite(c.micl) else repr(float(c.micl))
                p0 = "NA" if c.p0_hat is None else str(c.p0_hat)
                fh.write(f"{c.R},{c.K},{micl},{p0},{c.runtime_seconds:.3f}\n")


def fit_and_summarize(counts, layout, K, R, hyper, config, factors=None, n_jobs=1) -> FitSummary:
    factors = factors or ScalingFactors.from_counts(counts)
    samples = run_mcmc(counts, layout, K, R, hyper, config, factors, n_jobs=n_jobs)
    fit = summarize_fit(samples, counts, factors, hyper)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit.micl = compute_micl(counts, factors, fit, hyper, R, K)
    return fit


def cell_seed(seed: int, R: int, K: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(R), int(K)]).generate_state(1, np.uint64)[0])


def grid_search(counts, layout, Ks, Rs, hyper=None, config=None, factors=None, n_jobs=1) -> MiclGrid:
    """Fit every (R, K) pair and score it by mICL.

    Each cell runs with its own seed derived from ``(config.seed, R, K)`` so
    the result does not depend on evaluation order or ``n_jobs``. Failures are
    recorded on the cell instead of aborting the grid.
    """
    Ks, Rs = list(Ks), list(Rs)
    if not Ks or not Rs:
        raise ValueError("grids must be nonempty")
    hyper = hyper or Hyperparameters()
    config = config or McmcConfig(iterations=4000, burn_in=2000)
    factors = factors or ScalingFactors.from_counts(counts)
    pairs = [(R, K) for R in Rs for K in Ks]

    def run(pair):
        R, K = pair
        cell = GridCell(R=R, K=K)
        start = time.perf_counter()
        try:
            cfg = replace(config, seed=cell_seed(config.seed, R, K))
            hyp = hyper if hyper.b is None or len(hyper.b) == K else replace(hyper, b=None)
            cell.fit = fit_and_summarize(counts, layout, K, R, hyp, cfg, factors)
            cell.micl = cell.fit.micl
            cell.p0_hat = cell.fit.p0_hat
        except Exception as exc:  # recorded per cell, grid continues
            logger.warning("grid cell R=%d K=%d failed: %s", R, K, exc)
            cell.error = f"{type(exc).__name__}: {exc}"
        cell.runtime_seconds = time.perf_counter() - start
        return cell

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            cells = list(pool.map(run, pairs))
    else:
        cells = [run(pr) for pr in pairs]
    return MiclGrid(cells)
