"""Posterior summaries: co-clustering matrices, Dahl point partitions, rates."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .data import Hyperparameters

_CHUNK = 512


def _cooccurrence_counts(draws) -> np.ndarray:
    """Integer-valued matrix of how often each pair shares a label."""
    draws = np.asarray(draws)
    if draws.ndim == 1:
        draws = draws[None, :]
    U, m = draws.shape
    base = draws.min()
    L = int(draws.max() - base) + 1
    out = np.zeros((m, m))
    for start in range(0, U, _CHUNK):
        block = draws[start:start + _CHUNK] - base
        onehot = np.zeros((m, block.shape[0] * L))
        cols = (np.arange(block.shape[0])[None, :] * L + block.T)
        onehot[np.arange(m)[:, None], cols] = 1.0
        out += onehot @ onehot.T
    return out


def compute_ppm(draws) -> np.ndarray:
    """Fraction of draws in which each pair of units shares a label."""
    draws = np.asarray(draws)
    if draws.size == 0:
        raise ValueError("need at least one draw")
    U = 1 if draws.ndim == 1 else draws.shape[0]
    return _cooccurrence_counts(draws) / U


def _pair_losses(draws, target, scale):
    """``scale^2 * sum_pairs I + sum target^2 - 2 * scale * sum_pairs I*target`` per draw.

    Computed once per distinct draw. Summing over the full matrix counts each
    off-diagonal pair twice and the diagonal terms cancel, hence the final
    halving.
    """
    uniq, inverse = np.unique(draws, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    m = draws.shape[1]
    target_sq = float(np.sum(target ** 2))
    losses = np.empty(len(uniq))
    for q, labels in enumerate(uniq):
        _, lab = np.unique(labels, return_inverse=True)
        onehot = np.zeros((m, lab.max() + 1))
        onehot[np.arange(m), lab] = 1.0
        same = float(np.sum(np.bincount(lab) ** 2))
        cross = float(np.sum((target @ onehot) * onehot))
        losses[q] = 0.5 * (scale * scale * same - 2.0 * scale * cross + target_sq)
    return losses[inverse]


def dahl_losses(draws, ppm) -> np.ndarray:
    """Least-squares distance of each draw's co-clustering indicator to ``ppm`` (pairs i < i')."""
    return _pair_losses(np.asarray(draws), np.asarray(ppm, dtype=float), 1.0)


def dahl_point_estimate(draws, ppm=None):
    """Index and labels of the draw closest to the PPM; ties go to the earliest draw.

    When ``ppm`` is a co-occurrence frequency over these same draws the loss is
    evaluated on integer counts, so ties are exact.
    """
    draws = np.asarray(draws)
    U = draws.shape[0]
    if ppm is None:
        ppm = compute_ppm(draws)
    counts = np.rint(np.asarray(ppm, dtype=float) * U)
    if np.array_equal(counts / U, ppm):
        losses = _pair_losses(draws, counts, float(U))
    else:
        losses = dahl_losses(draws, ppm)
    u = int(np.argmin(losses))
    return u, draws[u].copy()


@dataclass
class FitSummary:
    K: int
    R: int
    z_hat: np.ndarray
    rho_hat: np.ndarray
    dahl_index_spot: int
    dahl_index_gene: int
    mu_hat: np.ndarray
    mu0_hat: float
    pi0_hat: float
    ppm_spot: np.ndarray = field(repr=False)
    ppm_gene: np.ndarray = field(repr=False)
    n_draws: int = 0
    diagnostics: list = field(default_factory=list)
    micl: float | None = None

    @property
    def p0_hat(self) -> int:
        return int(np.sum(self.rho_hat == 0))

    @property
    def realized_K(self) -> int:
        return int(np.unique(self.z_hat).size)

    @property
    def realized_R(self) -> int:
        return int(np.unique(self.rho_hat[self.rho_hat > 0]).size)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "R": self.R,
            "realized_K": self.realized_K,
            "realized_R": self.realized_R,
            "n_draws": self.n_draws,
            "dahl_index_spot": self.dahl_index_spot,
            "dahl_index_gene": self.dahl_index_gene,
            "z_hat": [int(v) + 1 for v in self.z_hat],
            "rho_hat": [int(v) for v in self.rho_hat],
            "p0_hat": self.p0_hat,
            "pi0_hat": float(self.pi0_hat),
            "mu_hat": [[float(x) for x in row] for row in self.mu_hat],
            "mu0_hat": float(self.mu0_hat),
            "micl": None if self.micl is None else float(self.micl),
            "diagnostics": self.diagnostics,
        }


def _chain_diagnostics(chain) -> dict:
    lp = np.asarray(chain.kept_log_posterior, dtype=float)
    half = lp.size // 2
    return {
        "chain": int(chain.chain),
        "kept_draws": int(lp.size),
        "log_posterior_mean": float(lp.mean()) if lp.size else None,
        "log_posterior_sd": float(lp.std()) if lp.size else None,
        "log_posterior_final": float(chain.trace[-1]),
        "log_posterior_first_half_mean": float(lp[:half].mean()) if half else None,
        "log_posterior_second_half_mean": float(lp[half:].mean()) if half else None,
    }


def summarize_fit(samples, counts, factors, hyper=None) -> FitSummary:
    """Pool kept draws across chains and summarise them."""
    from .sampler import posterior_rate_estimates

    hyper = hyper or Hyperparameters()
    z_draws = samples.z_draws
    rho_draws = samples.rho_draws
    if z_draws.shape[0] == 0:
        raise ValueError("no kept draws to summarise")
    ppm_spot = compute_ppm(z_draws)
    ppm_gene = compute_ppm(rho_draws)
    u_z, z_hat = dahl_point_estimate(z_draws, ppm_spot)
    u_r, rho_hat = dahl_point_estimate(rho_draws, ppm_gene)
    z_hat = z_hat.astype(np.int64)
    rho_hat = rho_hat.astype(np.int64)
    mu, mu0 = posterior_rate_estimates(counts, factors, z_hat, rho_hat, samples.K, samples.R, hyper)
    p = rho_hat.size
    p0 = int(np.sum(rho_hat == 0))
    pi0 = (hyper.alpha_pi + p0) / (hyper.alpha_pi + hyper.beta_pi + p)
    return FitSummary(
        K=samples.K, R=samples.R, z_hat=z_hat, rho_hat=rho_hat,
        dahl_index_spot=u_z, dahl_index_gene=u_r,
        mu_hat=mu, mu0_hat=mu0, pi0_hat=pi0,
        ppm_spot=ppm_spot, ppm_gene=ppm_gene, n_draws=int(z_draws.shape[0]),
        diagnostics=[_chain_diagnostics(c) for c in samples.chains],
    )


def _fmt(x) -> str:
    return repr(float(x))


def export_summary(summary: FitSummary, outdir, counts, coords, write_ppm=False) -> list:
    """Write summary.json plus flat CSV tables; returns the written paths."""
    from pathlib import Path

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "summary.json"
    path.write_text(json.dumps(summary.to_dict(), indent=1, sort_keys=True) + "\n")
    written.append(path)

    path = out / "spots.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["spot_id", "x", "y", "z_hat"])
        for i, sid in enumerate(counts.spot_ids):
            w.writerow([sid, _fmt(coords[i, 0]), _fmt(coords[i, 1]), int(summary.z_hat[i]) + 1])
    written.append(path)

    path = out / "genes.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gene_id", "rho_hat"])
        for j, gid in enumerate(counts.gene_ids):
            w.writerow([gid, int(summary.rho_hat[j])])
    written.append(path)

    path = out / "mu.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gene_group"] + [f"k{k + 1}" for k in range(summary.K)])
        w.writerow(["0"] + [_fmt(summary.mu0_hat)] * summary.K)
        for r in range(summary.R):
            w.writerow([str(r + 1)] + [_fmt(v) for v in summary.mu_hat[r]])
    written.append(path)

    if write_ppm:
        for name, mat, ids in (("ppm_spot.csv", summary.ppm_spot, counts.spot_ids),
                               ("ppm_gene.csv", summary.ppm_gene, counts.gene_ids)):
            path = out / name
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["id", *ids])
                for a, row in zip(ids, mat):
                    w.writerow([a, *(_fmt(v) for v in row)])
            written.append(path)
    return written
