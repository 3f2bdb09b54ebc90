"""Reading and writing count matrices, coordinates and lattice adjacency.

Two count formats are supported, both genes x spots:

``dense-csv``
    header row ``gene_id,<spot ids...>``, then one row per gene.
``triplet``
    first line ``p n nnz``, then ``nnz`` lines ``gene_index spot_index count``
    with 1-based indices, separated by whitespace or commas. Entries that are
    not listed are zero.
"""
from __future__ import annotations

import csv
import os
import re
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .data import CountMatrix, InputError, SpatialLayout

NEIGHBOR_TOLERANCE = 0.05

_MAX_NEIGHBORS = {"square": 4, "triangular": 6}


class LatticeKind(str, Enum):
    SQUARE = "square"
    TRIANGULAR = "triangular"
    EXPLICIT = "explicit"


def infer_format(path) -> str:
    name = os.fspath(path).lower()
    if name.endswith((".triplet", ".mtx", ".txt", ".tri")):
        return "triplet"
    return "dense-csv"


def _parse_count(token: str, where: str) -> int:
    try:
        value = float(token)
    except ValueError:
        raise InputError(f"{where}: cannot parse count {token!r}") from None
    if not np.isfinite(value) or value != int(value):
        raise InputError(f"{where}: non-integer count {token!r}")
    if value < 0:
        raise InputError(f"{where}: negative count {token!r}")
    return int(value)


def _read_dense_csv(path) -> CountMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        spot_ids = [h.strip() for h in header[1:]]
        gene_ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            gene_ids.append(row[0].strip())
            rows.append([_parse_count(c, f"{path}:{lineno}") for c in row[1:]])
    if not rows:
        raise InputError(f"{path}: no gene rows")
    return CountMatrix(np.array(rows, dtype=np.int64), tuple(gene_ids), tuple(spot_ids))


def _read_triplet(path) -> CountMatrix:
    split = re.compile(r"[,\s]+")
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln and not ln.startswith(("#", "%"))]
    if not lines:
        raise InputError(f"{path}: empty file")
    try:
        p, n, nnz = (int(t) for t in split.split(lines[0]))
    except ValueError:
        raise InputError(f"{path}: header must be 'p n nnz', got {lines[0]!r}") from None
    if len(lines) - 1 != nnz:
        raise InputError(f"{path}: header announces {nnz} entries, found {len(lines) - 1}")
    values = np.zeros((p, n), dtype=np.int64)
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        parts = split.split(line)
        if len(parts) != 3:
            raise InputError(f"{path}: entry {lineno - 1}: expected 3 fields, got {line!r}")
        j, i = int(parts[0]), int(parts[1])
        if not (1 <= j <= p and 1 <= i <= n):
            raise InputError(f"{path}: entry {lineno - 1}: index ({j}, {i}) out of range")
        if (j, i) in seen:
            raise InputError(f"{path}: duplicate entry for gene {j}, spot {i}")
        seen.add((j, i))
        values[j - 1, i - 1] = _parse_count(parts[2], f"{path}: entry {lineno - 1}")
    return CountMatrix(values)


def read_counts(path, format: str | None = None) -> CountMatrix:
    """Read a genes x spots count matrix from ``path``."""
    fmt = format or infer_format(path)
    if fmt == "dense-csv":
        return _read_dense_csv(path)
    if fmt == "triplet":
        return _read_triplet(path)
    raise InputError(f"unknown count format {fmt!r}")


def write_counts(counts: CountMatrix, path, format: str | None = None) -> None:
    fmt = format or infer_format(path)
    if fmt == "dense-csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["gene_id", *counts.spot_ids])
            for gid, row in zip(counts.gene_ids, counts.values):
                writer.writerow([gid, *row.tolist()])
    elif fmt == "triplet":
        rows, cols = np.nonzero(counts.values)
        with open(path, "w") as fh:
            fh.write(f"{counts.p} {counts.n} {rows.size}\n")
            for j, i in zip(rows.tolist(), cols.tolist()):
                fh.write(f"{j + 1} {i + 1} {counts.values[j, i]}\n")
    else:
        raise InputError(f"unknown count format {fmt!r}")


def read_coords(path, spot_ids=None):
    """Read ``spot_id,x,y`` rows; reorder to ``spot_ids`` when given."""
    ids, xy = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader)]
        if header[:1] != ["spot_id"] or "x" not in header or "y" not in header:
            raise InputError(f"{path}: header must start with spot_id and contain x, y")
        ix, iy = header.index("x"), header.index("y")
        for row in reader:
            if not row:
                continue
            ids.append(row[0].strip())
            xy.append((float(row[ix]), float(row[iy])))
    coords = np.array(xy, dtype=float).reshape(-1, 2)
    if spot_ids is None:
        return tuple(ids), coords
    pos = {s: k for k, s in enumerate(ids)}
    missing = [s for s in spot_ids if s not in pos]
    if missing:
        raise InputError(f"{path}: no coordinates for spot {missing[0]!r}")
    order = [pos[s] for s in spot_ids]
    return tuple(spot_ids), coords[order]


def write_coords(path, spot_ids, coords, labels=None, label_name="z") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["spot_id", "x", "y"] + ([label_name] if labels is not None else []))
        for k, sid in enumerate(spot_ids):
            row = [sid, repr(float(coords[k, 0])), repr(float(coords[k, 1]))]
            if labels is not None:
                row.append(int(labels[k]))
            writer.writerow(row)


def read_edges(path, spot_ids) -> np.ndarray:
    """Adjacency from an edge list of spot-id pairs (or 1-based indices)."""
    n = len(spot_ids)
    pos = {s: k for k, s in enumerate(spot_ids)}
    adj = np.zeros((n, n), dtype=np.int8)
    split = re.compile(r"[,\s]+")
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            a, b = split.split(line)[:2]
            if a in pos and b in pos:
                u, v = pos[a], pos[b]
            elif a.isdigit() and b.isdigit():
                u, v = int(a) - 1, int(b) - 1
                if not (0 <= u < n and 0 <= v < n):
                    raise InputError(f"{path}:{lineno}: index out of range")
            else:
                if lineno == 1:
                    continue  # header
                raise InputError(f"{path}:{lineno}: unknown spot in edge {line!r}")
            if u == v:
                raise InputError(f"{path}:{lineno}: self-loop on spot {spot_ids[u]!r}")
            adj[u, v] = adj[v, u] = 1
    return adj


def nominal_spacing(coords) -> float:
    """Median nearest-neighbour distance, a default for the lattice unit."""
    coords = np.asarray(coords, dtype=float)
    if len(coords) < 2:
        return 1.0
    dist, _ = cKDTree(coords).query(coords, k=2)
    return float(np.median(dist[:, 1]))


def build_adjacency(coords, kind="square", unit: float = 1.0, tol: float = NEIGHBOR_TOLERANCE) -> np.ndarray:
    """Neighbours are spots whose distance lies within ``unit * (1 +/- tol)``.

    Raises when some spot ends up with more neighbours than the lattice allows,
    which almost always means the wrong ``kind`` or ``unit``.
    """
    kind = LatticeKind(kind)
    if kind is LatticeKind.EXPLICIT:
        raise InputError("explicit lattices need an edge list, see read_edges")
    if not unit > 0:
        raise InputError(f"unit must be positive, got {unit}")
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    n = len(coords)
    adj = np.zeros((n, n), dtype=np.int8)
    if n < 2:
        return adj
    tree = cKDTree(coords)
    pairs = tree.query_pairs(unit * (1 + tol), output_type="ndarray")
    if pairs.size:
        d = np.linalg.norm(coords[pairs[:, 0]] - coords[pairs[:, 1]], axis=1)
        if np.any(d == 0):
            raise InputError("duplicate spot coordinates")
        pairs = pairs[d >= unit * (1 - tol)]
        adj[pairs[:, 0], pairs[:, 1]] = 1
        adj[pairs[:, 1], pairs[:, 0]] = 1
    limit = _MAX_NEIGHBORS[kind.value]
    degree = adj.sum(axis=1)
    if degree.max() > limit:
        i = int(np.argmax(degree))
        raise InputError(
            f"spot {i} has {int(degree[i])} neighbours, more than a {kind.value} lattice allows "
            f"({limit}); check the lattice kind and unit"
        )
    return adj


def load_layout(spot_ids, coords_path=None, edges_path=None, kind="square", unit=None):
    """Assemble a SpatialLayout for the given spots from coordinate and/or edge files."""
    if coords_path is None and edges_path is None:
        raise InputError("need coordinates or an edge list")
    if coords_path is not None:
        _, coords = read_coords(coords_path, spot_ids)
    else:
        coords = np.zeros((len(spot_ids), 2))
    if edges_path is not None:
        adj = read_edges(edges_path, spot_ids)
    else:
        adj = build_adjacency(coords, kind, unit or nominal_spacing(coords))
    return SpatialLayout(coords, adj)


def square_lattice(rows: int, cols: int, unit: float = 1.0) -> np.ndarray:
    """Coordinates of a ``rows x cols`` grid, row-major, as ``(x, y)``."""
    yy, xx = np.mgrid[0:rows, 0:cols]
    return np.column_stack([xx.ravel(), yy.ravel()]).astype(float) * unit


def triangular_lattice(rows: int, cols: int, unit: float = 1.0) -> np.ndarray:
    """Offset-row hexagonal packing where every interior spot has six neighbours."""
    yy, xx = np.mgrid[0:rows, 0:cols].astype(float)
    xx = xx + 0.5 * (yy % 2)
    yy = yy * np.sqrt(3) / 2
    return np.column_stack([xx.ravel(), yy.ravel()]) * unit
