"""Core value types shared across the package.

Orientation is genes x spots throughout: ``CountMatrix.values[j, i]`` is the
count of gene ``j`` in spot ``i``.

Label conventions used by every in-memory array:

* spot labels ``z`` are 0-based, ``0 .. K-1``;
* gene labels ``rho`` are ``0 .. R`` where ``0`` marks the null
  (non-discriminating) set and ``1 .. R`` are the gene groups.

Files written by the CLI use 1-based spot labels so that both label vectors
read naturally next to each other.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class InputError(ValueError):
    """Raised when user-supplied data violates a documented invariant."""


@dataclass(frozen=True)
class CountMatrix:
    values: np.ndarray
    gene_ids: tuple = ()
    spot_ids: tuple = ()

    def __post_init__(self):
        raw = np.asarray(self.values)
        if raw.ndim != 2:
            raise InputError(f"count matrix must be 2-D, got shape {raw.shape}")
        if raw.dtype.kind == "f":
            if not np.all(np.isfinite(raw)) or np.any(raw != np.round(raw)):
                raise InputError("count matrix contains non-integer values")
        elif raw.dtype.kind not in "iub":
            raise InputError(f"unsupported count dtype {raw.dtype}")
        if np.any(raw < 0):
            j, i = np.argwhere(raw < 0)[0]
            raise InputError(f"negative count at gene row {j}, spot column {i}")
        values = np.ascontiguousarray(raw, dtype=np.int64)
        p, n = values.shape
        if p < 1 or n < 2:
            raise InputError(f"need p >= 1 genes and n >= 2 spots, got p={p}, n={n}")

        gene_ids = tuple(str(g) for g in self.gene_ids) or tuple(f"gene{j + 1}" for j in range(p))
        spot_ids = tuple(str(s) for s in self.spot_ids) or tuple(f"spot{i + 1}" for i in range(n))
        if len(gene_ids) != p or len(spot_ids) != n:
            raise InputError("id lists do not match the matrix shape")

        zero_rows = np.flatnonzero(values.sum(axis=1) == 0)
        if zero_rows.size:
            raise InputError(f"gene {gene_ids[zero_rows[0]]!r} has no positive count")
        zero_cols = np.flatnonzero(values.sum(axis=0) == 0)
        if zero_cols.size:
            raise InputError(f"spot {spot_ids[zero_cols[0]]!r} has no positive count")

        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gene_ids", gene_ids)
        object.__setattr__(self, "spot_ids", spot_ids)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def total(self) -> int:
        return int(self.values.sum())

    def __eq__(self, other):
        if not isinstance(other, CountMatrix):
            return NotImplemented
        return (
            self.gene_ids == other.gene_ids
            and self.spot_ids == other.spot_ids
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class SpatialLayout:
    coords: np.ndarray
    adjacency: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        adj = np.asarray(self.adjacency)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise InputError(f"coords must be n x 2, got {coords.shape}")
        n = coords.shape[0]
        if adj.shape != (n, n):
            raise InputError(f"adjacency must be {n} x {n}, got {adj.shape}")
        adj = (adj != 0).astype(np.int8)
        if np.any(np.diag(adj)):
            raise InputError("adjacency diagonal must be zero")
        if not np.array_equal(adj, adj.T):
            raise InputError("adjacency must be symmetric")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "adjacency", adj)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def neighbor_lists(self):
        """CSR-style ``(indptr, indices)`` neighbor arrays."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        rows, cols = np.nonzero(self.adjacency)
        np.add.at(indptr, rows + 1, 1)
        return np.cumsum(indptr), cols.astype(np.int64)


@dataclass
class Hyperparameters:
    """Prior hyperparameters; defaults give weakly informative priors."""

    alpha_mu: float = 1.0
    beta_mu: float = 1.0
    alpha_0: float = 1.0
    beta_0: float = 1.0
    alpha_pi: float = 1.0
    beta_pi: float = 1.0
    gamma: float = 1.0
    b: Optional[Sequence[float]] = None
    h: float = 1.0

    def __post_init__(self):
        for name in ("alpha_mu", "beta_mu", "alpha_0", "beta_0", "alpha_pi", "beta_pi", "gamma"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InputError(f"{name} must be a positive real, got {value}")
        if not (np.isfinite(self.h) and self.h >= 0):
            raise InputError(f"h must be non-negative, got {self.h}")
        if self.b is not None:
            b = np.asarray(self.b, dtype=float)
            if b.ndim != 1 or np.any(~np.isfinite(b)) or np.any(b <= 0):
                raise InputError("b must be a vector of positive reals")
            self.b = tuple(float(v) for v in b)

    def mrf_abundance(self, K: int) -> np.ndarray:
        """Per-cluster MRF abundance vector of length ``K`` (default all ones)."""
        if self.b is None:
            return np.ones(K)
        if len(self.b) != K:
            raise InputError(f"b has {len(self.b)} entries but K={K}")
        return np.asarray(self.b, dtype=float)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in
               ("alpha_mu", "beta_mu", "alpha_0", "beta_0", "alpha_pi", "beta_pi", "gamma", "h")}
        out["b"] = None if self.b is None else list(self.b)
        return out


@dataclass
class BlockStats:
    """Sufficient statistics of the collapsed Gamma-Poisson model.

    ``Y[r-1, k]`` and ``S[r-1, k]`` hold count and exposure sums for gene
    group ``r`` and spot cluster ``k``; ``Y0``/``S0`` pool the null genes over
    all spots.
    """

    Y: np.ndarray
    S: np.ndarray
    Y0: int
    S0: float
    gene_sizes: np.ndarray  # length R + 1, entry 0 is the null set size
    spot_sizes: np.ndarray  # length K

    @property
    def p0(self) -> int:
        return int(self.gene_sizes[0])

    def equals(self, other: "BlockStats", rtol: float = 1e-12) -> bool:
        return (
            np.array_equal(self.Y, other.Y)
            and self.Y0 == other.Y0
            and np.array_equal(self.gene_sizes, other.gene_sizes)
            and np.array_equal(self.spot_sizes, other.spot_sizes)
            and np.allclose(self.S, other.S, rtol=rtol, atol=0)
            and np.isclose(self.S0, other.S0, rtol=rtol, atol=0)
        )


def check_labels(z, rho, n: int, p: int, K: int, R: int):
    z = np.asarray(z)
    rho = np.asarray(rho)
    if z.shape != (n,):
        raise InputError(f"z must have length n={n}, got shape {z.shape}")
    if rho.shape != (p,):
        raise InputError(f"rho must have length p={p}, got shape {rho.shape}")
    if K < 1 or R < 1:
        raise InputError(f"K and R must be positive, got K={K}, R={R}")
    if z.size and (z.min() < 0 or z.max() >= K):
        raise InputError(f"spot labels must lie in 0..{K - 1}")
    if rho.size and (rho.min() < 0 or rho.max() > R):
        raise InputError(f"gene labels must lie in 0..{R}")
    return z.astype(np.int64), rho.astype(np.int64)


def recompute_stats(counts, s, g, z, rho, K: int, R: int) -> BlockStats:
    """Block sufficient statistics computed from scratch."""
    Y = counts.values if isinstance(counts, CountMatrix) else np.asarray(counts)
    p, n = Y.shape
    s = np.asarray(s, dtype=float)
    g = np.asarray(g, dtype=float)
    if s.shape != (n,) or g.shape != (p,):
        raise InputError(f"factor shapes {s.shape}, {g.shape} do not match counts {Y.shape}")
    z, rho = check_labels(z, rho, n, p, K, R)

    # (R+1) x n group-by-spot sums, then fold spots into clusters
    by_group = np.zeros((R + 1, n), dtype=np.int64)
    np.add.at(by_group, rho, Y)
    full = np.zeros((R + 1, K), dtype=np.int64)
    np.add.at(full.T, z, by_group.T)

    g_group = np.bincount(rho, weights=g, minlength=R + 1)
    s_cluster = np.bincount(z, weights=s, minlength=K)
    return BlockStats(
        Y=full[1:].copy(),
        S=np.outer(g_group[1:], s_cluster),
        Y0=int(full[0].sum()),
        S0=float(g_group[0] * s.sum()),
        gene_sizes=np.bincount(rho, minlength=R + 1).astype(np.int64),
        spot_sizes=np.bincount(z, minlength=K).astype(np.int64),
    )


@dataclass
class ModelState:
    """Current assignments plus incrementally maintained block statistics.

    ``block_counts`` is ``(R + 1) x K`` with row 0 holding null-gene counts
    split by spot cluster; ``group_effect[r]`` is the summed gene effect of
    group ``r`` and ``cluster_size_factor[k]`` the summed spot factor of
    cluster ``k``, so exposures are their outer product.
    """

    z: np.ndarray
    rho: np.ndarray
    K: int
    R: int
    block_counts: np.ndarray = field(repr=False)
    group_effect: np.ndarray = field(repr=False)
    cluster_size_factor: np.ndarray = field(repr=False)
    gene_sizes: np.ndarray = field(repr=False)
    spot_sizes: np.ndarray = field(repr=False)

    @classmethod
    def from_labels(cls, counts, s, g, z, rho, K: int, R: int) -> "ModelState":
        Y = counts.values if isinstance(counts, CountMatrix) else np.asarray(counts)
        z, rho = check_labels(z, rho, Y.shape[1], Y.shape[0], K, R)
        by_group = np.zeros((R + 1, Y.shape[1]), dtype=np.int64)
        np.add.at(by_group, rho, Y)
        full = np.zeros((R + 1, K), dtype=np.int64)
        np.add.at(full.T, z, by_group.T)
        return cls(
            z=z.copy(),
            rho=rho.copy(),
            K=K,
            R=R,
            block_counts=full,
            group_effect=np.bincount(rho, weights=np.asarray(g, float), minlength=R + 1),
            cluster_size_factor=np.bincount(z, weights=np.asarray(s, float), minlength=K),
            gene_sizes=np.bincount(rho, minlength=R + 1).astype(np.int64),
            spot_sizes=np.bincount(z, minlength=K).astype(np.int64),
        )

    @property
    def stats(self) -> BlockStats:
        G = np.where(self.gene_sizes > 0, self.group_effect, 0.0)
        sc = np.where(self.spot_sizes > 0, self.cluster_size_factor, 0.0)
        return BlockStats(
            Y=self.block_counts[1:].copy(),
            S=np.outer(G[1:], sc),
            Y0=int(self.block_counts[0].sum()),
            S0=float(G[0] * sc.sum()),
            gene_sizes=self.gene_sizes.copy(),
            spot_sizes=self.spot_sizes.copy(),
        )

    def copy(self) -> "ModelState":
        return ModelState(
            z=self.z.copy(), rho=self.rho.copy(), K=self.K, R=self.R,
            block_counts=self.block_counts.copy(),
            group_effect=self.group_effect.copy(),
            cluster_size_factor=self.cluster_size_factor.copy(),
            gene_sizes=self.gene_sizes.copy(),
            spot_sizes=self.spot_sizes.copy(),
        )
