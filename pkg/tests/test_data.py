import numpy as np
import pytest

from bison.data import (
    CountMatrix, Hyperparameters, InputError, ModelState, SpatialLayout, recompute_stats,
)
from bison.likelihood import ScalingFactors
from bison.sampler import _Workspace, update_gene, update_spot
from bison.ingest import build_adjacency, square_lattice

from _oracles import block_sums


def test_all_ones_single_block():
    st = recompute_stats(np.ones((2, 2), dtype=int), [0.5, 0.5], [2, 2], [0, 0], [1, 1], 1, 1)
    assert st.Y.tolist() == [[4]]
    assert st.S.tolist() == [[4.0]]
    assert st.Y0 == 0 and st.S0 == 0.0


def test_all_null_puts_everything_in_y0():
    Y = np.arange(1, 13).reshape(3, 4)
    st = recompute_stats(Y, np.full(4, 0.25), np.ones(3), [0, 1, 0, 1], [0, 0, 0], 2, 2)
    assert not st.Y.any()
    assert st.Y0 == Y.sum()
    assert st.S0 == pytest.approx(3.0)
    assert st.gene_sizes.tolist() == [3, 0, 0]


@pytest.mark.parametrize("seed", range(5))
def test_matches_double_loop(seed):
    rng = np.random.default_rng(seed)
    Y = rng.poisson(3.0, size=(6, 8))
    s, g = rng.uniform(0.2, 2, 8), rng.uniform(0.2, 2, 6)
    z, rho = rng.integers(0, 3, 8), rng.integers(0, 3, 6)
    st = recompute_stats(Y, s, g, z, rho, 3, 2)
    Yb, Sb = block_sums(Y, s, g, z, rho, 3, 2)
    assert np.array_equal(st.Y, Yb[1:])
    assert st.Y0 == Yb[0].sum()
    np.testing.assert_allclose(st.S, Sb[1:], rtol=1e-12)
    assert st.S0 == pytest.approx(Sb[0].sum(), rel=1e-12)


def test_incremental_updates_match_recompute():
    rng = np.random.default_rng(11)
    Y = rng.poisson(4.0, size=(12, 9)) + 1
    counts = CountMatrix(Y)
    layout = SpatialLayout(square_lattice(3, 3), build_adjacency(square_lattice(3, 3)))
    f = ScalingFactors.from_counts(counts)
    hyper = Hyperparameters()
    K, R = 3, 2
    state = ModelState.from_labels(counts, f.s, f.g, rng.integers(0, K, 9), rng.integers(0, R + 1, 12), K, R)
    ws = _Workspace(counts, layout, f, hyper, K, R)
    for _ in range(200):
        if rng.random() < 0.5:
            update_spot(int(rng.integers(9)), state, layout, f, hyper, rng, counts, ws)
        else:
            update_gene(int(rng.integers(12)), state, f, hyper, rng, counts, layout, ws)
    fresh = recompute_stats(counts, f.s, f.g, state.z, state.rho, K, R)
    assert state.stats.equals(fresh, rtol=1e-12)


def test_count_matrix_validation():
    with pytest.raises(InputError, match="gene2"):
        CountMatrix(np.array([[1, 2], [0, 0]]), ("gene1", "gene2"), ("a", "b"))
    with pytest.raises(InputError, match="'b'"):
        CountMatrix(np.array([[1, 0], [3, 0]]), (), ("a", "b"))
    with pytest.raises(InputError):
        CountMatrix(np.array([[1.5, 2.0]]))
    with pytest.raises(InputError):
        CountMatrix(np.array([[-1, 2]]))
    with pytest.raises(InputError):
        CountMatrix(np.array([[1], [2]]))  # one spot


def test_layout_validation():
    with pytest.raises(InputError, match="symmetric"):
        SpatialLayout(np.zeros((2, 2)), np.array([[0, 1], [0, 0]]))
    with pytest.raises(InputError, match="diagonal"):
        SpatialLayout(np.zeros((2, 2)), np.eye(2))
    indptr, idx = SpatialLayout(np.zeros((3, 2)), np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]])).neighbor_lists()
    assert indptr.tolist() == [0, 2, 3, 4]
    assert idx.tolist() == [1, 2, 0, 0]


def test_hyperparameter_validation():
    assert Hyperparameters().mrf_abundance(3).tolist() == [1.0, 1.0, 1.0]
    Hyperparameters(h=0.0)
    for bad in (dict(gamma=0.0), dict(alpha_mu=-1.0), dict(h=-0.1), dict(b=[1.0, 0.0])):
        with pytest.raises(InputError):
            Hyperparameters(**bad)
    with pytest.raises(InputError):
        Hyperparameters(b=[1.0, 2.0]).mrf_abundance(3)


def test_label_range_checked():
    with pytest.raises(InputError):
        recompute_stats(np.ones((2, 2), int), [1, 1], [1, 1], [0, 2], [0, 0], 2, 1)
    with pytest.raises(InputError):
        recompute_stats(np.ones((2, 2), int), [1, 1], [1, 1], [0, 1], [0, 2], 2, 1)


def test_empty_clusters_are_representable():
    st = recompute_stats(np.ones((2, 3), int), np.ones(3), np.ones(2), [0, 0, 0], [1, 1], 3, 2)
    assert st.spot_sizes.tolist() == [3, 0, 0]
    assert st.Y[:, 1:].sum() == 0 and st.S[:, 1:].sum() == 0
