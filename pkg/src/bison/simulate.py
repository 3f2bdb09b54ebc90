"""Synthetic spatial count data with known domains and gene groups."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import CountMatrix, InputError, SpatialLayout
from .ingest import build_adjacency, square_lattice, write_coords, write_counts

NOISE_HALF_WIDTH = 0.1


def banded_domains(side: int = 16, K: int = 4) -> np.ndarray:
    """Row-major labels ``0..K-1`` of a ``side x side`` grid cut into K horizontal bands."""
    rows = np.repeat(np.arange(side), side)
    return (rows * K) // side


@dataclass
class SimConfig:
    p: int = 500
    pi0: float = 0.2
    delta: float = 1.0
    K: int = 4
    R: int = 3
    side: int = 16
    domain_map: Optional[np.ndarray] = None  # 0-based labels, requires coords
    coords: Optional[np.ndarray] = None
    noise: float = NOISE_HALF_WIDTH
    family: str = "poisson"
    nb_dispersion_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.p < 1 or self.K < 1 or self.R < 1:
            raise InputError("p, K and R must be positive")
        if not 0 <= self.pi0 < 1:
            raise InputError(f"pi0 must lie in [0, 1), got {self.pi0}")
        if not self.delta > 0:
            raise InputError("delta must be positive")
        if self.family not in ("poisson", "negative-binomial"):
            raise InputError(f"unknown family {self.family!r}")
        if not self.nb_dispersion_rate > 0:
            raise InputError("nb_dispersion_rate must be positive")
        if not 0 <= self.noise < 2:
            raise InputError("noise half-width must keep means positive (< 2)")
        if self.domain_map is not None:
            dm = np.asarray(self.domain_map, dtype=np.int64)
            if self.coords is None or len(self.coords) != dm.size:
                raise InputError("a custom domain_map needs matching coords")
            if set(np.unique(dm).tolist()) != set(range(self.K)):
                raise InputError("domain_map must use every label 0..K-1")
            self.domain_map = dm

    def as_dict(self) -> dict:
        return {"p": self.p, "pi0": self.pi0, "delta": self.delta, "K": self.K, "R": self.R,
                "side": self.side, "noise": self.noise, "family": self.family,
                "nb_dispersion_rate": self.nb_dispersion_rate, "seed": int(self.seed),
                "custom_domain_map": self.domain_map is not None}


@dataclass
class Truth:
    z: np.ndarray       # 0-based
    rho: np.ndarray     # 0 = null
    s: np.ndarray
    g: np.ndarray
    mu: np.ndarray      # R x K
    mu0: np.ndarray     # per gene, NaN for DGs
    dispersion: Optional[np.ndarray] = None


@dataclass
class SimulatedDataset:
    counts: CountMatrix
    layout: SpatialLayout
    truth: Truth
    config: SimConfig = field(repr=False)


def block_means(K: int, R: int, delta: float) -> np.ndarray:
    """``4 + (k-1) delta + (r-1) delta`` for groups r and domains k (1-based)."""
    return 4.0 + delta * (np.arange(R)[:, None] + np.arange(K)[None, :])


def generate_dataset(cfg: SimConfig) -> SimulatedDataset:
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed)))
    if cfg.domain_map is None:
        coords = square_lattice(cfg.side, cfg.side)
        z = banded_domains(cfg.side, cfg.K)
        if set(np.unique(z).tolist()) != set(range(cfg.K)):
            raise InputError(f"a {cfg.side}x{cfg.side} grid cannot hold {cfg.K} bands")
        adjacency = build_adjacency(coords, "square", 1.0)
    else:
        coords = np.asarray(cfg.coords, dtype=float)
        z = cfg.domain_map
        from .ingest import nominal_spacing
        adjacency = build_adjacency(coords, "square", nominal_spacing(coords))
    n, p = z.size, cfg.p

    null = rng.random(p) < cfg.pi0
    rho = np.where(null, 0, rng.integers(1, cfg.R + 1, size=p))
    mu = block_means(cfg.K, cfg.R, cfg.delta)
    mu0 = np.where(null, rng.uniform(2.0, 6.0, size=p), np.nan)
    s = rng.uniform(0.5, 1.5, size=n)
    g = rng.uniform(0.5, 1.5, size=p)
    eps = rng.uniform(-cfg.noise, cfg.noise, size=(p, n))

    rate = np.where(null[:, None], mu0[:, None], mu[np.maximum(rho, 1) - 1][:, z])
    mean = np.outer(g, s) * (rate + eps)
    assert np.all(mean > 0)
    dispersion = None
    if cfg.family == "poisson":
        y = rng.poisson(mean)
    else:
        dispersion = rng.exponential(1.0 / cfg.nb_dispersion_rate, size=p)
        size = dispersion[:, None]
        y = rng.negative_binomial(np.broadcast_to(size, mean.shape), size / (size + mean))

    counts = CountMatrix(y.astype(np.int64),
                         tuple(f"gene{j + 1}" for j in range(p)),
                         tuple(f"spot{i + 1}" for i in range(n)))
    truth = Truth(z=z.astype(np.int64), rho=rho.astype(np.int64), s=s, g=g, mu=mu, mu0=mu0,
                  dispersion=dispersion)
    return SimulatedDataset(counts, SpatialLayout(coords, adjacency), truth, cfg)


def write_dataset(ds: SimulatedDataset, outdir, count_format="dense-csv") -> list:
    """Write counts, coordinates and truth tables in the formats ``ingest`` reads."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    counts_name = "counts.csv" if count_format == "dense-csv" else "counts.triplet"
    paths = [out / counts_name, out / "coords.csv", out / "truth_spots.csv",
             out / "truth_genes.csv", out / "truth_mu.csv"]
    write_counts(ds.counts, paths[0], count_format)
    write_coords(paths[1], ds.counts.spot_ids, ds.layout.coords)
    t = ds.truth
    with open(paths[2], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["spot_id", "z_true", "s_true"])
        for i, sid in enumerate(ds.counts.spot_ids):
            w.writerow([sid, int(t.z[i]) + 1, repr(float(t.s[i]))])
    with open(paths[3], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gene_id", "rho_true", "g_true", "mu0_true", "dispersion"])
        for j, gid in enumerate(ds.counts.gene_ids):
            mu0 = "NA" if np.isnan(t.mu0[j]) else repr(float(t.mu0[j]))
            disp = "NA" if t.dispersion is None else repr(float(t.dispersion[j]))
            w.writerow([gid, int(t.rho[j]), repr(float(t.g[j])), mu0, disp])
    with open(paths[4], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gene_group"] + [f"k{k + 1}" for k in range(t.mu.shape[1])])
        for r, row in enumerate(t.mu):
            w.writerow([r + 1] + [repr(float(v)) for v in row])
    return paths
