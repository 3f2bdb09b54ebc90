"""Batch simulation studies described by an INI file.

Example::

    [scenarios]
    p = 500, 1000
    pi0 = 0, 0.2, 0.4, 0.6, 0.8
    delta = 0.5, 1, 1.5
    family = poisson
    replicates = 50
    seed = 1

    [fit]
    K = 4
    R = 3
    iterations = 10000
    burn_in = 5000

Every combination of the comma-separated values in ``[scenarios]`` is a
scenario; each replicate gets a seed derived from ``(seed, scenario index,
replicate)``.
"""
from __future__ import annotations

import configparser
import itertools
import logging

import numpy as np

from .data import Hyperparameters
from .evaluate import evaluate, write_metrics_csv
from .sampler import McmcConfig
from .selection import fit_and_summarize
from .simulate import SimConfig, generate_dataset

logger = logging.getLogger(__name__)

SCENARIO_KEYS = {"p": int, "pi0": float, "delta": float, "family": str, "K": int, "R": int,
                 "side": int, "noise": float, "nb_dispersion_rate": float}
FIT_KEYS = {"K": int, "R": int, "iterations": int, "burn_in": int, "chains": int, "thin": int}
HYPER_KEYS = ("alpha_mu", "beta_mu", "alpha_0", "beta_0", "alpha_pi", "beta_pi", "gamma", "h")


def _values(raw: str, cast):
    return [cast(v.strip()) for v in raw.split(",") if v.strip()]


def load_sweep_config(path) -> dict:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if not parser.read(path):
        raise FileNotFoundError(path)
    if "scenarios" not in parser:
        raise ValueError(f"{path}: missing [scenarios] section")
    sc = parser["scenarios"]
    grid = {}
    for key, cast in SCENARIO_KEYS.items():
        if key in sc:
            grid[key] = _values(sc[key], cast)
    unknown = set(sc) - set(SCENARIO_KEYS) - {"replicates", "seed"}
    if unknown:
        raise ValueError(f"{path}: unknown scenario keys {sorted(unknown)}")
    fit = {}
    if "fit" in parser:
        for key, raw in parser["fit"].items():
            if key in FIT_KEYS:
                fit[key] = FIT_KEYS[key](raw)
            elif key in HYPER_KEYS:
                fit[key] = float(raw)
            else:
                raise ValueError(f"{path}: unknown fit key {key!r}")
    return {"grid": grid, "replicates": int(sc.get("replicates", "1")),
            "seed": int(sc.get("seed", "0")), "fit": fit}


def scenarios(grid: dict) -> list:
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def replicate_seed(seed: int, scenario: int, replicate: int) -> int:
    ss = np.random.SeedSequence([int(seed), int(scenario), int(replicate)])
    return int(ss.generate_state(1, np.uint32)[0])


def run_sweep(cfg: dict, metrics_path, replicates=None, progress=None) -> list:
    """Simulate, fit and score every (scenario, replicate); writes a long-format CSV."""
    reps = cfg["replicates"] if replicates is None else replicates
    fit_cfg = dict(cfg["fit"])
    hyper = Hyperparameters(**{k: fit_cfg.pop(k) for k in list(fit_cfg) if k in HYPER_KEYS})
    cells = scenarios(cfg["grid"])
    rows = []
    for si, params in enumerate(cells):
        sim_params = {k: v for k, v in params.items()}
        for rep in range(reps):
            seed = replicate_seed(cfg["seed"], si, rep)
            ds = generate_dataset(SimConfig(seed=seed, **sim_params))
            K = fit_cfg.get("K", ds.config.K)
            R = fit_cfg.get("R", ds.config.R)
            mc = McmcConfig(iterations=fit_cfg.get("iterations", 10_000),
                            burn_in=fit_cfg.get("burn_in", 5_000),
                            chains=fit_cfg.get("chains", 1),
                            thin=fit_cfg.get("thin", 1), seed=seed)
            fit = fit_and_summarize(ds.counts, ds.layout, K, R, hyper, mc)
            report = evaluate(fit.z_hat, ds.truth.z, fit.rho_hat, ds.truth.rho)
            row_params = dict(params, scenario=si, replicate=rep)
            rows.append((row_params, report, seed))
            logger.info("scenario %d %s replicate %d: %s", si, params, rep, report)
            if progress:
                progress(row_params, report)
    names = ["scenario", "replicate"] + list(cfg["grid"])
    write_metrics_csv(metrics_path, rows, names)
    return rows
