import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bison.likelihood import ScalingFactors
from bison.sampler import ChainResult, McmcConfig, McmcSamples, run_mcmc
from bison.simulate import SimConfig, generate_dataset
from bison.summary import compute_ppm, dahl_losses, dahl_point_estimate, export_summary, summarize_fit

draw_sets = arrays(np.int64, st.tuples(st.integers(1, 12), st.integers(2, 7)), elements=st.integers(0, 3))


def brute_ppm(draws):
    U, m = draws.shape
    out = np.zeros((m, m))
    for d in draws:
        for a in range(m):
            for b in range(m):
                out[a, b] += d[a] == d[b]
    return out / U


def brute_loss(d, ppm):
    m = len(d)
    return sum(((d[a] == d[b]) - ppm[a, b]) ** 2 for a in range(m) for b in range(a + 1, m))


def test_ppm_small_cases():
    assert compute_ppm(np.array([[0, 0, 1]])).tolist() == [[1, 1, 0], [1, 1, 0], [0, 0, 1]]
    assert compute_ppm(np.array([[0, 0], [0, 1]]))[0, 1] == 0.5


@settings(max_examples=40, deadline=None)
@given(draw_sets)
def test_ppm_matches_double_loop(draws):
    ppm = compute_ppm(draws)
    np.testing.assert_allclose(ppm, brute_ppm(draws), atol=1e-15)
    assert np.array_equal(ppm, ppm.T) and np.all(np.diag(ppm) == 1)


@settings(max_examples=40, deadline=None)
@given(draw_sets, st.permutations([0, 1, 2, 3]))
def test_ppm_relabel_invariance(draws, perm):
    relabeled = draws.copy()
    relabeled[0] = np.asarray(perm)[draws[0]]
    np.testing.assert_array_equal(compute_ppm(relabeled), compute_ppm(draws))


def test_dahl_example():
    A, B = [0, 0, 1, 1], [0, 1, 0, 1]
    draws = np.array([A, A, B])
    losses = dahl_losses(draws, compute_ppm(draws))
    np.testing.assert_allclose(losses, [4 / 9, 4 / 9, 16 / 9])
    u, labels = dahl_point_estimate(draws)
    assert u == 0 and labels.tolist() == A


def test_single_draw():
    u, labels = dahl_point_estimate(np.array([[2, 0, 2, 1]]))
    assert u == 0 and labels.tolist() == [2, 0, 2, 1]


@settings(max_examples=40, deadline=None)
@given(draw_sets)
def test_dahl_is_minimal_and_duplication_invariant(draws):
    ppm = compute_ppm(draws)
    u, labels = dahl_point_estimate(draws, ppm)
    losses = [brute_loss(d, ppm) for d in draws]
    assert losses[u] <= min(losses) + 1e-12
    assert u == int(np.argmin(np.round(np.array(losses) * draws.shape[0] ** 2)))
    u2, labels2 = dahl_point_estimate(np.vstack([draws, draws]))
    assert np.array_equal(labels2, labels)


def test_null_genes_co_cluster():
    ppm = compute_ppm(np.array([[0, 0, 1, 2], [0, 0, 2, 1]]))
    assert ppm[0, 1] == 1.0
    assert ppm[2, 3] == 0.0


def _stuck_chain(chain, z, rho, U=4):
    return ChainResult(chain, np.tile(z, (U, 1)), np.tile(rho, (U, 1)), np.arange(1, U + 1),
                       np.zeros(U), np.zeros(U), None)


def test_stuck_chain_and_pooling_identity():
    ds = generate_dataset(SimConfig(p=40, side=6, seed=3))
    f = ScalingFactors.from_counts(ds.counts)
    z, rho = ds.truth.z, ds.truth.rho
    cfg = McmcConfig(iterations=4, burn_in=0)
    one = summarize_fit(McmcSamples([_stuck_chain(0, z, rho)], 4, 3, 36, 40, cfg), ds.counts, f)
    three = summarize_fit(McmcSamples([_stuck_chain(c, z, rho) for c in range(3)], 4, 3, 36, 40, cfg),
                          ds.counts, f)
    assert np.array_equal(one.z_hat, z) and np.array_equal(one.rho_hat, rho)
    assert np.array_equal(one.ppm_spot, three.ppm_spot)
    assert np.array_equal(one.z_hat, three.z_hat) and np.array_equal(one.rho_hat, three.rho_hat)
    np.testing.assert_array_equal(one.mu_hat, three.mu_hat)
    p0 = int(np.sum(rho == 0))
    assert one.pi0_hat == pytest.approx((1 + p0) / (2 + 40))
    assert one.realized_K == 4


def test_export(tmp_path):
    ds = generate_dataset(SimConfig(p=30, side=4, seed=5))
    f = ScalingFactors.from_counts(ds.counts)
    samples = run_mcmc(ds.counts, ds.layout, 2, 2, config=McmcConfig(iterations=20, burn_in=10, seed=1))
    fit = summarize_fit(samples, ds.counts, f)
    paths = export_summary(fit, tmp_path, ds.counts, ds.layout.coords, write_ppm=True)
    assert sorted(p.name for p in paths) == ["genes.csv", "mu.csv", "ppm_gene.csv", "ppm_spot.csv",
                                             "spots.csv", "summary.json"]
    info = json.loads((tmp_path / "summary.json").read_text())
    assert info["z_hat"] == [int(v) + 1 for v in fit.z_hat]
    assert len((tmp_path / "spots.csv").read_text().splitlines()) == 17
    assert (tmp_path / "mu.csv").read_text().splitlines()[0] == "gene_group,k1,k2"
