"""Command-line interface.

Exit codes: 0 success, 1 internal error, 2 invalid input or usage.
Every output directory receives a ``manifest.json`` recording the command,
resolved configuration, seed, input digests, software version and timing;
``bison replay manifest.json`` re-runs it.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import Hyperparameters, InputError
from .evaluate import evaluate, write_metrics_csv
from .ingest import load_layout, read_counts
from .likelihood import ScalingFactors
from .sampler import McmcConfig, run_mcmc, write_draws
from .selection import compute_micl, grid_search
from .simulate import SimConfig, generate_dataset, write_dataset
from .summary import export_summary, summarize_fit

logger = logging.getLogger("bison")

OUTPUT_ROOT_ENV = "BISON_OUTPUT_ROOT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list:
    """Parse ``2,3,4`` or ``2-6`` (or a mix) into a sorted list of ints."""
    out = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.update(range(int(lo), int(hi) + 1))
        else:
            out.add(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return sorted(out)


def _float_list(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _outdir(args) -> Path:
    if args.out:
        return Path(args.out)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    return Path(root) / args.command if root else Path(f"bison-{args.command}")


def _write_manifest(outdir: Path, args, argv, inputs, started, extra=None):
    config = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _digest(p) for p in inputs if p},
        "software_version": __version__,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "wall_clock_seconds": round(time.time() - started, 3),
    }
    if extra:
        manifest.update(extra)
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=1, default=str) + "\n")


def _add_data_args(p):
    p.add_argument("--counts", required=True, help="genes x spots count matrix")
    p.add_argument("--format", choices=["dense-csv", "triplet"], help="count file format (default: by extension)")
    p.add_argument("--coords", help="CSV with spot_id,x,y")
    p.add_argument("--edges", help="explicit neighbour list, one pair of spot ids per line")
    p.add_argument("--lattice", choices=["square", "triangular"], default="square")
    p.add_argument("--unit", type=float, help="lattice spacing (default: median nearest-neighbour distance)")


def _add_model_args(p):
    g = p.add_argument_group("hyperparameters")
    for name in ("alpha-mu", "beta-mu", "alpha-0", "beta-0", "alpha-pi", "beta-pi", "gamma"):
        g.add_argument(f"--{name}", type=float, default=1.0)
    g.add_argument("--b", type=_float_list, help="comma-separated MRF abundances, one per spot cluster")
    g.add_argument("--h", type=float, default=1.0, help="MRF smoothing strength")


def _add_mcmc_args(p, iterations=10_000, burn_in=5_000):
    g = p.add_argument_group("MCMC")
    g.add_argument("--iterations", type=int, default=iterations)
    g.add_argument("--burn-in", type=int, default=burn_in)
    g.add_argument("--chains", type=int, default=1)
    g.add_argument("--thin", type=int, default=1)
    g.add_argument("--threads", type=int, default=1, help="run chains / grid cells on this many threads")
    g.add_argument("--init", choices=["random", "data"], default="random",
                   help="random: uniform spot labels and prior gene labels; "
                        "data: k-means spot labels with every gene null")


def _hyper(args) -> Hyperparameters:
    return Hyperparameters(args.alpha_mu, args.beta_mu, args.alpha_0, args.beta_0,
                           args.alpha_pi, args.beta_pi, args.gamma, args.b, args.h)


def _load_inputs(args):
    if not args.coords and not args.edges:
        raise InputError("one of --coords or --edges is required")
    counts = read_counts(args.counts, args.format)
    layout = load_layout(counts.spot_ids, args.coords, args.edges, args.lattice, args.unit)
    return counts, layout


def _write_fit(outdir, counts, layout, samples, summary, write_ppm):
    outdir.mkdir(parents=True, exist_ok=True)
    for chain in samples.chains:
        write_draws(outdir / f"draws_chain{chain.chain + 1}.txt", chain, samples)
    with open(outdir / "trace.csv", "w") as fh:
        fh.write("chain,iteration,log_posterior\n")
        for chain in samples.chains:
            for it, lp in enumerate(chain.trace, start=1):
                fh.write(f"{chain.chain + 1},{it},{float(lp)!r}\n")
    export_summary(summary, outdir, counts, layout.coords, write_ppm=write_ppm)


def _fit_once(counts, layout, K, R, hyper, mcmc, threads):
    factors = ScalingFactors.from_counts(counts)
    samples = run_mcmc(counts, layout, K, R, hyper, mcmc, factors, n_jobs=threads)
    summary = summarize_fit(samples, counts, factors, hyper)
    summary.micl = compute_micl(counts, factors, summary, hyper, R, K)
    return samples, summary


def cmd_fit(args, argv) -> int:
    started = time.time()
    counts, layout = _load_inputs(args)
    hyper = _hyper(args)
    hyper.mrf_abundance(args.K)
    mcmc = McmcConfig(args.iterations, args.burn_in, args.chains, args.seed, args.thin, args.init)
    outdir = _outdir(args)
    outdir.mkdir(parents=True, exist_ok=True)
    samples, summary = _fit_once(counts, layout, args.K, args.R, hyper, mcmc, args.threads)
    _write_fit(outdir, counts, layout, samples, summary, args.write_ppm)
    _write_manifest(outdir, args, argv, [args.counts, args.coords, args.edges], started)
    print(f"fit K={args.K} R={args.R}: p0_hat={summary.p0_hat} mICL={summary.micl:.3f} -> {outdir}")
    return 0


def cmd_select(args, argv) -> int:
    started = time.time()
    counts, layout = _load_inputs(args)
    hyper = _hyper(args)
    outdir = _outdir(args)
    outdir.mkdir(parents=True, exist_ok=True)
    grid_cfg = McmcConfig(args.grid_iterations, args.grid_burn_in, 1, args.seed, init=args.init)
    grid = grid_search(counts, layout, args.K_grid, args.R_grid, hyper, grid_cfg, n_jobs=args.threads)
    grid.write_csv(outdir / "grid.csv")
    best = grid.best
    if best is None:
        print("every grid cell failed; see grid.csv", file=sys.stderr)
        return 1
    extra = {"best": {"R": best.R, "K": best.K, "mICL": best.micl}}
    print(f"selected R={best.R} K={best.K} (mICL={best.micl:.3f})")
    if not args.no_refit:
        mcmc = McmcConfig(args.iterations, args.burn_in, args.chains, args.seed, args.thin, args.init)
        hyp = hyper if hyper.b is None or len(hyper.b) == best.K else Hyperparameters(
            **{**hyper.as_dict(), "b": None})
        samples, summary = _fit_once(counts, layout, best.K, best.R, hyp, mcmc, args.threads)
        _write_fit(outdir / "best", counts, layout, samples, summary, args.write_ppm)
        extra["refit_mICL"] = summary.micl
    _write_manifest(outdir, args, argv, [args.counts, args.coords, args.edges], started, extra)
    return 0


def cmd_simulate(args, argv) -> int:
    started = time.time()
    cfg = SimConfig(p=args.p, pi0=args.pi0, delta=args.delta, K=args.K, R=args.R, side=args.side,
                    noise=args.noise, family=args.family,
                    nb_dispersion_rate=args.nb_dispersion_rate, seed=args.seed)
    ds = generate_dataset(cfg)
    outdir = _outdir(args)
    write_dataset(ds, outdir, args.format)
    _write_manifest(outdir, args, argv, [], started, {"simulation": cfg.as_dict()})
    print(f"simulated p={ds.counts.p} genes x n={ds.counts.n} spots -> {outdir}")
    return 0


def _read_labels(path, names):
    """``{id: label}`` from a CSV whose first column is the id."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        col = next((header.index(n) for n in names if n in header), len(header) - 1)
        return {row[0]: int(row[col]) for row in reader if row}


def _aligned(pred, true, what):
    if set(pred) != set(true):
        missing = sorted(set(pred) ^ set(true))[:3]
        raise InputError(f"{what} ids differ between prediction and reference, e.g. {missing}")
    ids = list(true)
    return np.array([pred[i] for i in ids]), np.array([true[i] for i in ids])


def cmd_evaluate(args, argv) -> int:
    started = time.time()
    pred_spots = args.pred_spots or (args.fit and os.path.join(args.fit, "spots.csv"))
    pred_genes = args.pred_genes or (args.fit and os.path.join(args.fit, "genes.csv"))
    true_spots = args.true_spots or (args.truth and os.path.join(args.truth, "truth_spots.csv"))
    true_genes = args.true_genes or (args.truth and os.path.join(args.truth, "truth_genes.csv"))
    spot_names = ["z_hat", "z_true", "label"]
    gene_names = ["rho_hat", "rho_true", "label"]
    z_hat = z_true = rho_hat = rho_true = None
    used = []
    if pred_spots and true_spots:
        z_hat, z_true = _aligned(_read_labels(pred_spots, spot_names),
                                 _read_labels(true_spots, spot_names), "spot")
        used += [pred_spots, true_spots]
    if pred_genes and true_genes and os.path.exists(pred_genes) and os.path.exists(true_genes):
        rho_hat, rho_true = _aligned(_read_labels(pred_genes, gene_names),
                                     _read_labels(true_genes, gene_names), "gene")
        used += [pred_genes, true_genes]
    if z_hat is None and rho_hat is None:
        raise InputError("nothing to evaluate: give --fit/--truth or explicit label files")
    report = evaluate(z_hat, z_true, rho_hat, rho_true)
    outdir = _outdir(args)
    outdir.mkdir(parents=True, exist_ok=True)
    params = {"fit": args.fit or pred_spots or pred_genes, "truth": args.truth or true_spots or true_genes}
    write_metrics_csv(outdir / "metrics.csv", [(params, report, args.seed)], ["fit", "truth"])
    _write_manifest(outdir, args, argv, used, started)
    print(" ".join(f"{k}={v}" for k, v in vars(report).items()))
    return 0


def cmd_sweep(args, argv) -> int:
    from .sweep import load_sweep_config, run_sweep

    started = time.time()
    try:
        cfg = load_sweep_config(args.config)
    except (ValueError, FileNotFoundError) as exc:
        raise InputError(str(exc)) from exc
    if args.seed is not None:
        cfg["seed"] = args.seed
    outdir = _outdir(args)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(cfg, outdir / "metrics.csv", replicates=args.replicates,
                     progress=lambda p, r: print(p, r, flush=True))
    _write_manifest(outdir, args, argv, [args.config], started, {"sweep": cfg, "rows": len(rows)})
    return 0


def cmd_replay(args, argv) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    replay_argv = list(manifest["argv"])
    if args.out:
        if "--out" in replay_argv:
            replay_argv[replay_argv.index("--out") + 1] = args.out
        else:
            replay_argv += ["--out", args.out]
    return main(replay_argv)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bison", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="run the Gibbs sampler at fixed K, R and summarise")
    _add_data_args(p)
    p.add_argument("--K", type=int, required=True, help="number of spot clusters")
    p.add_argument("--R", type=int, required=True, help="number of gene groups")
    _add_model_args(p)
    _add_mcmc_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--write-ppm", action="store_true", help="also export the n x n and p x p PPMs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select", help="choose (R, K) by mICL over a grid, then refit")
    _add_data_args(p)
    p.add_argument("--K-grid", type=_int_list, default=_int_list("2-7"))
    p.add_argument("--R-grid", type=_int_list, default=_int_list("1-7"))
    p.add_argument("--grid-iterations", type=int, default=4000)
    p.add_argument("--grid-burn-in", type=int, default=2000)
    p.add_argument("--no-refit", action="store_true")
    _add_model_args(p)
    _add_mcmc_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--write-ppm", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("simulate", help="generate a synthetic dataset with ground truth")
    p.add_argument("--p", type=int, default=500)
    p.add_argument("--pi0", type=float, default=0.2)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--R", type=int, default=3)
    p.add_argument("--side", type=int, default=16, help="side length of the square spot grid")
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--family", choices=["poisson", "negative-binomial"], default="poisson")
    p.add_argument("--nb-dispersion-rate", type=float, default=0.1)
    p.add_argument("--format", choices=["dense-csv", "triplet"], default="dense-csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="score estimated labels against reference labels")
    p.add_argument("--fit", help="fit output directory (spots.csv, genes.csv)")
    p.add_argument("--truth", help="simulation directory (truth_spots.csv, truth_genes.csv)")
    p.add_argument("--pred-spots")
    p.add_argument("--true-spots")
    p.add_argument("--pred-genes")
    p.add_argument("--true-genes")
    p.add_argument("--seed", type=int, default=None, help="recorded in metrics.csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="batch simulate/fit/evaluate from an INI config")
    p.add_argument("--config", required=True)
    p.add_argument("--replicates", type=int, help="override the replicate count")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except InputError as exc:
        print(f"bison {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"bison {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        logger.exception("internal error")
        print(f"bison {args.command}: internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
