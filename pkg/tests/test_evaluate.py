import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import adjusted_rand_score

from bison.evaluate import (
    MetricReport, adjusted_rand_index, dg_detection_metrics, evaluate, write_metrics_csv,
)

labels = st.lists(st.integers(0, 4), min_size=2, max_size=40)


def test_ari_example():
    assert adjusted_rand_index([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(-0.5)


def test_ari_degenerate_cases():
    assert adjusted_rand_index([0, 0, 0], [5, 5, 5]) == 1.0
    assert adjusted_rand_index([0, 1, 2], [2, 0, 1]) == 1.0
    assert adjusted_rand_index([0, 0, 1, 1], [0, 0, 0, 0]) == 0.0
    with pytest.raises(ValueError):
        adjusted_rand_index([0, 1], [0, 1, 2])


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_ari_against_sklearn(data):
    a = data.draw(labels)
    b = data.draw(st.lists(st.integers(0, 4), min_size=len(a), max_size=len(a)))
    assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)
    assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_index(b, a), abs=1e-12)
    assert adjusted_rand_index(a, b) <= 1 + 1e-12


@settings(max_examples=50, deadline=None)
@given(labels, st.permutations(range(5)))
def test_ari_label_permutation(a, perm):
    mapped = [perm[x] for x in a]
    assert adjusted_rand_index(a, mapped) == 1.0


def test_dg_metrics():
    assert dg_detection_metrics([0, 1, 2, 0], [0, 1, 2, 0]) == (1.0, 1.0)
    assert dg_detection_metrics([0, 0, 0, 0], [0, 1, 0, 2]) == (0.0, 1.0)
    assert dg_detection_metrics([1, 1], [1, 2]) == (1.0, None)
    assert dg_detection_metrics([0, 0], [0, 0]) == (None, 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_dg_metrics_confusion_oracle(seed):
    rng = np.random.default_rng(seed)
    pred, true = rng.integers(0, 3, 50), rng.integers(0, 3, 50)
    tp = sum(1 for a, b in zip(pred, true) if a and b)
    fn = sum(1 for a, b in zip(pred, true) if not a and b)
    tn = sum(1 for a, b in zip(pred, true) if not a and not b)
    fp = sum(1 for a, b in zip(pred, true) if a and not b)
    assert dg_detection_metrics(pred, true) == pytest.approx((tp / (tp + fn), tn / (tn + fp)))


def test_gene_ari_counts_null_as_cluster():
    r = evaluate(rho_hat=[0, 0, 1, 1], rho_true=[0, 0, 1, 1])
    assert r.ari_gene == 1.0 and r.ari_spot is None


def test_metrics_csv(tmp_path):
    rows = [({"pi0": 0.2}, MetricReport(1.0, 0.5, None, 0.25), 3)]
    write_metrics_csv(tmp_path / "m.csv", rows, ["pi0"])
    assert (tmp_path / "m.csv").read_text().splitlines() == [
        "pi0,ari_spot,ari_gene,sensitivity,specificity,seed", "0.2,1.0,0.5,NA,0.25,3"]
