import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bison.data import CountMatrix, InputError
from bison.ingest import (
    build_adjacency, load_layout, nominal_spacing, read_coords, read_counts, read_edges,
    square_lattice, triangular_lattice, write_coords, write_counts,
)


def test_triplet_example(tmp_path):
    path = tmp_path / "m.triplet"
    path.write_text("2 2 3\n1 1 5\n2 2 7\n1 2 1\n")
    m = read_counts(path)
    assert m.values.tolist() == [[5, 1], [0, 7]]


def test_triplet_accepts_commas_and_comments(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("% comment\n2,2,3\n1,1,5\n2,2,7\n1,2,1\n")
    assert read_counts(path, "triplet").values.tolist() == [[5, 1], [0, 7]]


@pytest.mark.parametrize("body,match", [
    ("2 2 2\n1 1 5\n1 1 2\n", "duplicate"),
    ("2 2 1\n3 1 5\n", "out of range"),
    ("2 2 2\n1 1 5\n2 2 1.5\n", "non-integer"),
    ("2 2 2\n1 1 5\n2 2 -1\n", "negative"),
    ("2 2 3\n1 1 5\n", "announces"),
])
def test_triplet_errors(tmp_path, body, match):
    path = tmp_path / "bad.triplet"
    path.write_text(body)
    with pytest.raises(InputError, match=match):
        read_counts(path)


def test_zero_row_names_gene(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("gene_id,s1,s2\nActb,1,2\nGapdh,0,0\n")
    with pytest.raises(InputError, match="Gapdh"):
        read_counts(path)


@settings(max_examples=25, deadline=None)
@given(arrays(np.int64, st.tuples(st.integers(1, 5), st.integers(2, 6)), elements=st.integers(0, 50)),
       st.sampled_from(["dense-csv", "triplet"]))
def test_round_trip(tmp_path_factory, values, fmt):
    values = values.copy()
    values[:, 0] += 1
    values[0, :] += 1
    m = CountMatrix(values)
    path = tmp_path_factory.mktemp("rt") / ("m.csv" if fmt == "dense-csv" else "m.triplet")
    write_counts(m, path, fmt)
    assert read_counts(path, fmt) == m


def test_square_grid_degrees():
    adj = build_adjacency(square_lattice(3, 3), "square", 1.0)
    deg = adj.sum(axis=1).reshape(3, 3)
    assert deg[1, 1] == 4
    assert deg[0, 0] == deg[0, 2] == deg[2, 0] == deg[2, 2] == 2
    assert np.array_equal(adj, adj.T)


def test_triangular_interior_has_six():
    coords = triangular_lattice(5, 5)
    deg = build_adjacency(coords, "triangular", 1.0).sum(axis=1).reshape(5, 5)
    assert deg[2, 2] == 6
    assert deg.max() == 6


def test_wrong_kind_is_rejected():
    with pytest.raises(InputError, match="neighbours"):
        build_adjacency(triangular_lattice(5, 5), "square", 1.0)


def test_single_spot_has_no_edges():
    assert build_adjacency(np.zeros((1, 2))).tolist() == [[0]]


def test_jitter_keeps_edges():
    coords = square_lattice(8, 8)
    rng = np.random.default_rng(3)
    jittered = coords + rng.uniform(-0.02, 0.02, coords.shape) / np.sqrt(2)
    assert np.array_equal(build_adjacency(coords), build_adjacency(jittered))


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(-100, 100), st.floats(-100, 100))
def test_rigid_motion_invariance(theta, dx, dy):
    coords = triangular_lattice(4, 5)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    moved = coords @ rot.T + [dx, dy]
    assert np.array_equal(build_adjacency(coords, "triangular"), build_adjacency(moved, "triangular"))


def test_coords_and_edges(tmp_path):
    ids = ("a", "b", "c")
    write_coords(tmp_path / "xy.csv", ids, np.array([[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]]))
    got_ids, coords = read_coords(tmp_path / "xy.csv", ("c", "a", "b"))
    assert got_ids == ("c", "a", "b")
    assert coords[:, 0].tolist() == [4.0, 0.0, 2.0]
    assert nominal_spacing(coords) == 2.0
    layout = load_layout(ids, tmp_path / "xy.csv")
    assert layout.adjacency.sum(axis=1).tolist() == [1, 2, 1]

    (tmp_path / "e.txt").write_text("from,to\na,c\n")
    adj = read_edges(tmp_path / "e.txt", ids)
    assert adj[0, 2] == adj[2, 0] == 1 and adj.sum() == 2
    with pytest.raises(InputError, match="no coordinates"):
        read_coords(tmp_path / "xy.csv", ("a", "zz"))
