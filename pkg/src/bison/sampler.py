"""Collapsed Gibbs sampler over spot and gene memberships.

Rates and the null-gene probability are integrated out, so the chain moves
only on ``(z, rho)``. Each iteration updates every gene and then every spot,
each in a fresh random order. All randomness is drawn on the Python side from
a per-chain ``numpy.random.Generator`` seeded by ``(seed, chain)``, which
makes draws independent of how chains are scheduled onto threads.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from . import _kernels as kern
from .data import CountMatrix, Hyperparameters, InputError, ModelState, SpatialLayout
from .likelihood import ScalingFactors

logger = logging.getLogger(__name__)

DRAWS_MAGIC = "# bison-draws v1"


@dataclass
class McmcConfig:
    iterations: int = 10_000
    burn_in: int = 5_000
    chains: int = 1
    seed: int = 0
    thin: int = 1
    init: str = "random"
    z0: Optional[np.ndarray] = None
    rho0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.iterations < 1 or self.chains < 1 or self.thin < 1:
            raise InputError("iterations, chains and thin must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise InputError(f"need 0 <= burn_in < iterations, got {self.burn_in}, {self.iterations}")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise InputError("seed must be a non-negative 64-bit integer")
        if self.init not in ("random", "data", "warm"):
            raise InputError(f"unknown init {self.init!r}")
        if self.init == "warm" and (self.z0 is None or self.rho0 is None):
            raise InputError("warm start needs z0 and rho0")

    @property
    def kept(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def as_dict(self) -> dict:
        return {"iterations": self.iterations, "burn_in": self.burn_in, "chains": self.chains,
                "seed": int(self.seed), "thin": self.thin, "init": self.init}


@dataclass
class ChainResult:
    chain: int
    z_draws: np.ndarray    # (U, n), 0-based spot labels
    rho_draws: np.ndarray  # (U, p), 0 = null
    kept_iterations: np.ndarray
    kept_log_posterior: np.ndarray
    trace: np.ndarray      # collapsed log posterior after every iteration
    final_state: ModelState = field(repr=False)


@dataclass
class McmcSamples:
    chains: list
    K: int
    R: int
    n: int
    p: int
    config: McmcConfig

    @property
    def z_draws(self) -> np.ndarray:
        return np.concatenate([c.z_draws for c in self.chains])

    @property
    def rho_draws(self) -> np.ndarray:
        return np.concatenate([c.rho_draws for c in self.chains])

    @property
    def log_posterior(self) -> np.ndarray:
        return np.concatenate([c.kept_log_posterior for c in self.chains])


class _Workspace:
    """Arrays the compiled kernels need beyond the model state."""

    def __init__(self, counts, layout, factors, hyper, K, R):
        Y = counts.values if isinstance(counts, CountMatrix) else np.asarray(counts, dtype=np.int64)
        self.Y = np.ascontiguousarray(Y, dtype=np.int64)
        self.Yt = np.ascontiguousarray(self.Y.T)
        self.s = np.ascontiguousarray(factors.s, dtype=np.float64)
        self.g = np.ascontiguousarray(factors.g, dtype=np.float64)
        self.nptr, self.nidx = layout.neighbor_lists()
        self.b = np.ascontiguousarray(hyper.mrf_abundance(K), dtype=np.float64)
        self.hyper = kern.hyper_vector(hyper)
        self.acc = np.zeros(R + 1, dtype=np.int64)
        self.rowk = np.zeros(K, dtype=np.int64)
        self.logw_gene = np.zeros(R + 1)
        self.logw_spot = np.zeros(K)
        p, n = self.Y.shape
        if layout.n != n or self.s.shape != (n,) or self.g.shape != (p,):
            raise InputError("counts, layout and scaling factors disagree on dimensions")


def initial_state(counts, factors, hyper, K, R, rng) -> ModelState:
    """Spatially blind start: uniform spot labels, prior-predictive gene labels."""
    Y = counts.values if isinstance(counts, CountMatrix) else np.asarray(counts)
    p, n = Y.shape
    z = rng.integers(0, K, size=n)
    null = rng.random(p) < hyper.alpha_pi / (hyper.alpha_pi + hyper.beta_pi)
    rho = np.where(null, 0, rng.integers(1, R + 1, size=p))
    return ModelState.from_labels(counts, factors.s, factors.g, z, rho, K, R)


def data_driven_state(counts, factors, K, R, rng) -> ModelState:
    """Start from k-means spot clusters with every gene in the null set.

    Spots are clustered on the leading principal components of log normalised
    expression. Starting genes in the null set lets the first gene sweep pull
    out only genes whose profiles actually differ across those clusters.
    """
    from scipy.cluster.vq import kmeans2

    Y = counts.values if isinstance(counts, CountMatrix) else np.asarray(counts)
    p, n = Y.shape
    norm = np.log1p(Y / np.outer(factors.g, factors.s))
    norm -= norm.mean(axis=1, keepdims=True)
    u, sv, _ = np.linalg.svd(norm.T, full_matrices=False)
    emb = u[:, :min(10, n - 1, p)] * sv[:min(10, n - 1, p)]
    seed = int(rng.integers(2 ** 31))
    _, z = kmeans2(emb, K, minit="++", seed=seed) if K > 1 else (None, np.zeros(n, dtype=np.int64))

    rho = np.zeros(p, dtype=np.int64)
    return ModelState.from_labels(counts, factors.s, factors.g, z, rho, K, R)


def _state_args(state):
    return (state.z, state.rho, state.block_counts, state.group_effect,
            state.cluster_size_factor, state.gene_sizes, state.spot_sizes)


def spot_log_conditional(i, state, layout, factors, hyper, ws=None, counts=None) -> np.ndarray:
    """Normalised log full conditional of spot ``i`` over ``0..K-1``; ``state`` is unchanged."""
    ws = ws or _Workspace(counts, layout, factors, hyper, state.K, state.R)
    z, rho, Yb, G, sC, pr, nk = _state_args(state)
    old = z[i]
    kern.spot_remove(i, ws.Yt, ws.s, z, rho, Yb, sC, nk, ws.acc)
    kern.spot_log_weights(i, ws.s, z, Yb, G, sC, pr, ws.nptr, ws.nidx, ws.b, ws.hyper, ws.acc, ws.logw_spot)
    kern.spot_add(i, old, ws.s, z, Yb, sC, nk, ws.acc)
    lw = ws.logw_spot.copy()
    return lw - logsumexp(lw)


def gene_log_conditional(j, state, factors, hyper, counts, ws=None, layout=None) -> np.ndarray:
    """Normalised log full conditional of gene ``j`` over ``0..R``; ``state`` is unchanged."""
    if ws is None:
        layout = layout or SpatialLayout(np.zeros((state.z.size, 2)), np.zeros((state.z.size,) * 2))
        ws = _Workspace(counts, layout, factors, hyper, state.K, state.R)
    z, rho, Yb, G, sC, pr, nk = _state_args(state)
    old = rho[j]
    kern.gene_remove(j, ws.Y, ws.g, z, rho, Yb, G, pr, ws.rowk)
    kern.gene_log_weights(j, ws.g, Yb, G, sC, pr, ws.hyper, ws.rowk, ws.logw_gene)
    kern.gene_add(j, old, ws.g, rho, Yb, G, pr, ws.rowk)
    lw = ws.logw_gene.copy()
    return lw - logsumexp(lw)


def update_spot(i, state, layout, factors, hyper, rng, counts=None, ws=None) -> int:
    """Draw a new label for spot ``i`` and update ``state`` in place."""
    ws = ws or _Workspace(counts, layout, factors, hyper, state.K, state.R)
    z, rho, Yb, G, sC, pr, nk = _state_args(state)
    kern.spot_remove(i, ws.Yt, ws.s, z, rho, Yb, sC, nk, ws.acc)
    kern.spot_log_weights(i, ws.s, z, Yb, G, sC, pr, ws.nptr, ws.nidx, ws.b, ws.hyper, ws.acc, ws.logw_spot)
    k = kern._draw(ws.logw_spot, rng.random())
    kern.spot_add(i, k, ws.s, z, Yb, sC, nk, ws.acc)
    return int(k)


def update_gene(j, state, factors, hyper, rng, counts, layout=None, ws=None) -> int:
    """Draw a new label for gene ``j`` and update ``state`` in place."""
    if ws is None:
        layout = layout or SpatialLayout(np.zeros((state.z.size, 2)), np.zeros((state.z.size,) * 2))
        ws = _Workspace(counts, layout, factors, hyper, state.K, state.R)
    z, rho, Yb, G, sC, pr, nk = _state_args(state)
    kern.gene_remove(j, ws.Y, ws.g, z, rho, Yb, G, pr, ws.rowk)
    kern.gene_log_weights(j, ws.g, Yb, G, sC, pr, ws.hyper, ws.rowk, ws.logw_gene)
    r = kern._draw(ws.logw_gene, rng.random())
    kern.gene_add(j, r, ws.g, rho, Yb, G, pr, ws.rowk)
    return int(r)


def collapsed_log_posterior(state, layout, factors, hyper, counts) -> float:
    ws = _Workspace(counts, layout, factors, hyper, state.K, state.R)
    z, rho, Yb, G, sC, pr, nk = _state_args(state)
    return float(kern.log_posterior(z, Yb, G, sC, pr, nk, ws.nptr, ws.nidx, ws.b, ws.hyper))


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(chain)]))


def run_chain(counts, layout, K, R, hyper=None, config=None, factors=None, chain=0) -> ChainResult:
    """Run one chain; fully determined by ``(config.seed, chain)``."""
    hyper = hyper or Hyperparameters()
    config = config or McmcConfig()
    factors = factors or ScalingFactors.from_counts(counts)
    ws = _Workspace(counts, layout, factors, hyper, K, R)
    p, n = ws.Y.shape
    rng = chain_rng(config.seed, chain)
    if config.init == "warm":
        state = ModelState.from_labels(counts, factors.s, factors.g, config.z0, config.rho0, K, R)
    elif config.init == "data":
        state = data_driven_state(counts, factors, K, R, rng)
    else:
        state = initial_state(counts, factors, hyper, K, R, rng)

    U = config.kept
    label_dtype = np.int16 if max(K, R) < 2 ** 15 else np.int32
    z_draws = np.empty((U, n), dtype=label_dtype)
    rho_draws = np.empty((U, p), dtype=label_dtype)
    kept_it = np.empty(U, dtype=np.int64)
    trace = np.empty(config.iterations)
    z, rho, Yb, G, sC, pr, nk = _state_args(state)
    u = 0
    for it in range(config.iterations):
        gene_order = rng.permutation(p)
        spot_order = rng.permutation(n)
        u_gene = rng.random(p)
        u_spot = rng.random(n)
        lp = kern.sweep(ws.Y, ws.Yt, ws.s, ws.g, z, rho, Yb, G, sC, pr, nk, ws.nptr, ws.nidx,
                        ws.b, ws.hyper, gene_order, spot_order, u_gene, u_spot,
                        ws.acc, ws.rowk, ws.logw_gene, ws.logw_spot)
        if not np.isfinite(lp):
            raise FloatingPointError(f"non-finite log posterior at iteration {it} of chain {chain}")
        trace[it] = lp
        if it >= config.burn_in and (it - config.burn_in + 1) % config.thin == 0 and u < U:
            z_draws[u] = z
            rho_draws[u] = rho
            kept_it[u] = it + 1
            u += 1
    logger.debug("chain %d finished, final log posterior %.3f", chain, trace[-1])
    return ChainResult(chain, z_draws, rho_draws, kept_it, trace[kept_it - 1], trace, state)


def run_mcmc(counts, layout, K, R, hyper=None, config=None, factors=None, n_jobs=1) -> McmcSamples:
    """Run ``config.chains`` chains, optionally on a thread pool."""
    hyper = hyper or Hyperparameters()
    config = config or McmcConfig()
    factors = factors or ScalingFactors.from_counts(counts)
    Y = counts.values if isinstance(counts, CountMatrix) else np.asarray(counts)

    def one(c):
        return run_chain(counts, layout, K, R, hyper, config, factors, chain=c)

    if n_jobs > 1 and config.chains > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            chains = list(pool.map(one, range(config.chains)))
    else:
        chains = [one(c) for c in range(config.chains)]
    return McmcSamples(chains, K, R, Y.shape[1], Y.shape[0], config)


def posterior_rate_estimates(counts, factors, z, rho, K, R, hyper=None):
    """Posterior-mean block rates ``(R x K)`` and null rate at a fixed partition."""
    from .data import recompute_stats

    hyper = hyper or Hyperparameters()
    st = recompute_stats(counts, factors.s, factors.g, z, rho, K, R)
    mu = (hyper.alpha_mu + st.Y) / (hyper.beta_mu + st.S)
    mu0 = (hyper.alpha_0 + st.Y0) / (hyper.beta_0 + st.S0)
    return mu, float(mu0)


def _fmt_labels(v, offset=0) -> str:
    return " ".join(str(int(x) + offset) for x in v)


def write_draws(path, result: ChainResult, samples: McmcSamples) -> None:
    """Plain-text draws file.

    Lines starting with ``#`` form the header. Each record is one kept draw:
    ``iteration<TAB>log_posterior<TAB>z<TAB>rho`` with the label vectors
    space-separated; ``z`` is written 1-based and ``rho`` as 0 (null) .. R.
    """
    cfg = samples.config
    with open(path, "w") as fh:
        fh.write(DRAWS_MAGIC + "\n")
        fh.write(f"# n={samples.n} p={samples.p} K={samples.K} R={samples.R} "
                 f"iterations={cfg.iterations} burn_in={cfg.burn_in} thin={cfg.thin} "
                 f"seed={cfg.seed} chain={result.chain}\n")
        fh.write("# iteration\tlog_posterior\tz\trho\n")
        for u in range(result.z_draws.shape[0]):
            fh.write(f"{int(result.kept_iterations[u])}\t{float(result.kept_log_posterior[u])!r}\t"
                     f"{_fmt_labels(result.z_draws[u], 1)}\t{_fmt_labels(result.rho_draws[u])}\n")


def read_draws(path):
    """Inverse of :func:`write_draws`: returns ``(header, iterations, log_post, z, rho)``."""
    header = {}
    its, lps, zs, rhos = [], [], [], []
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != DRAWS_MAGIC:
            raise InputError(f"{path}: not a draws file")
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        header[key] = int(val)
                continue
            it, lp, z, rho = line.split("\t")
            its.append(int(it))
            lps.append(float(lp))
            zs.append([int(x) - 1 for x in z.split()])
            rhos.append([int(x) for x in rho.split()])
    return (header, np.array(its, dtype=np.int64), np.array(lps),
            np.array(zs, dtype=np.int64).reshape(-1, header.get("n", 0)),
            np.array(rhos, dtype=np.int64).reshape(-1, header.get("p", 0)))
