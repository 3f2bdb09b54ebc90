"""Agreement metrics between estimated and reference partitions."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1) / 2


def adjusted_rand_index(a, b) -> float:
    """Hubert-Arabie adjusted Rand index.

    Two identical trivial partitions (both a single cluster, or both all
    singletons) make the formula 0/0; those return 1.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"label vectors must have equal length, got {a.shape} and {b.shape}")
    if a.size < 2:
        raise ValueError("need at least two elements")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    index = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(a.size)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))


def dg_detection_metrics(rho_hat, rho_true):
    """Sensitivity and specificity of calling a gene discriminating (label != 0).

    A rate whose denominator is empty is returned as ``None``.
    """
    pred = np.asarray(rho_hat) != 0
    true = np.asarray(rho_true) != 0
    if pred.shape != true.shape:
        raise ValueError("label vectors must have equal length")
    tp = int(np.sum(pred & true))
    fn = int(np.sum(~pred & true))
    tn = int(np.sum(~pred & ~true))
    fp = int(np.sum(pred & ~true))
    sens = tp / (tp + fn) if tp + fn else None
    spec = tn / (tn + fp) if tn + fp else None
    return sens, spec


@dataclass
class MetricReport:
    ari_spot: Optional[float]
    ari_gene: Optional[float]
    dg_sensitivity: Optional[float]
    dg_specificity: Optional[float]


def evaluate(z_hat=None, z_true=None, rho_hat=None, rho_true=None) -> MetricReport:
    ari_spot = adjusted_rand_index(z_hat, z_true) if z_hat is not None else None
    if rho_hat is not None:
        ari_gene = adjusted_rand_index(rho_hat, rho_true)
        sens, spec = dg_detection_metrics(rho_hat, rho_true)
    else:
        ari_gene = sens = spec = None
    return MetricReport(ari_spot, ari_gene, sens, spec)


METRIC_COLUMNS = ["ari_spot", "ari_gene", "sensitivity", "specificity", "seed"]


def _cell(v):
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics_csv(path, rows, param_names) -> None:
    """Long-format metrics table, one row per replicate."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(param_names) + METRIC_COLUMNS)
        for params, report, seed in rows:
            d = asdict(report)
            w.writerow([_cell(params[k]) for k in param_names]
                       + [_cell(d["ari_spot"]), _cell(d["ari_gene"]),
                          _cell(d["dg_sensitivity"]), _cell(d["dg_specificity"]), str(seed)])
