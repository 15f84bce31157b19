"""Multi-label metrics against hand tallies and an independent implementation."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn import metrics as skm

import fixtures as fx
from mipreduce.metrics import (
    evaluate, hamming_loss, jaccard_index, mlcm_confusion, precision_recall_f1, sample_accuracy,
)


def _close(a, b):
    return a == pytest.approx(float(b), rel=1e-12, abs=1e-15)


def test_fixture_sample_metrics():
    assert _close(hamming_loss(fx.TRUE, fx.PRED), fx.HAMMING)
    assert _close(jaccard_index(fx.TRUE, fx.PRED), fx.JACCARD)
    assert _close(sample_accuracy(fx.TRUE, fx.PRED), fx.SAMPLE_ACCURACY)


def test_fixture_label_metrics():
    prf = precision_recall_f1(fx.TRUE, fx.PRED)
    for name, (p, r, f, s) in fx.PER_LABEL.items():
        sc = prf["per_label"][name]
        assert _close(sc.precision, p) and _close(sc.recall, r) and _close(sc.f1, f)
        assert sc.support == s
    for key, want in (("micro", fx.MICRO), ("macro", fx.MACRO), ("weighted", fx.WEIGHTED),
                      ("sample", fx.SAMPLE)):
        sc = prf[key]
        assert _close(sc.precision, want[0]) and _close(sc.recall, want[1]) and _close(sc.f1, want[2])
    assert _close(prf["label_mean_f1"], fx.LABEL_MEAN_F1)


def test_fixture_mlcm():
    m = mlcm_confusion(fx.TRUE, fx.PRED)
    assert np.array_equal(m.counts, fx.mlcm_counts())
    assert m.row_names[-1] == "NTL" and m.col_names[-1] == "NPL"
    norm = m.normalized()
    assert np.allclose(norm[m.counts.sum(axis=1) > 0].sum(axis=1), 1.0)


def test_report_outputs():
    rep = evaluate(fx.TRUE, fx.PRED)
    d = rep.to_dict()
    assert d["n_samples"] == 6 and set(d["per_label"]) == set(fx.PER_LABEL)
    lines = rep.table().splitlines()
    assert lines[0] == "class,precision,recall,f1-score,weight"
    assert lines[1].startswith("m1,0.7500,1.0000,0.8571,3")
    assert len(lines) == 1 + 7 + 4


def test_input_validation():
    with pytest.raises(ValueError):
        hamming_loss(np.zeros((2, 3)), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        hamming_loss(np.full((2, 3), 2), np.zeros((2, 3)))


def test_empty_sets_conventions():
    z = np.zeros((3, 7), dtype=int)
    assert jaccard_index(z, z) == 1.0
    assert sample_accuracy(z, z) == 1.0
    prf = precision_recall_f1(z, z)
    assert prf["micro"].f1 == 0.0 and prf["per_label"]["m1"].precision == 0.0
    m = mlcm_confusion(z, z)
    assert m.counts[7, 7] == 3 and m.counts.sum() == 3


label_matrices = st.integers(1, 12).flatmap(
    lambda n: st.tuples(arrays(np.int64, (n, 7), elements=st.integers(0, 1)),
                        arrays(np.int64, (n, 7), elements=st.integers(0, 1))))


@settings(max_examples=80, deadline=None)
@given(label_matrices)
def test_agrees_with_sklearn(pair):
    t, p = pair
    assert hamming_loss(t, p) == pytest.approx(skm.hamming_loss(t, p))
    assert sample_accuracy(t, p) == pytest.approx(skm.accuracy_score(t, p))
    assert jaccard_index(t, p) == pytest.approx(
        skm.jaccard_score(t, p, average="samples", zero_division=1.0))
    prf = precision_recall_f1(t, p)
    P, R, F1, S = skm.precision_recall_fscore_support(t, p, average=None, zero_division=0)
    for j, name in enumerate(prf["per_label"]):
        sc = prf["per_label"][name]
        assert (sc.precision, sc.recall, sc.f1, sc.support) == pytest.approx((P[j], R[j], F1[j], S[j]))
    for avg in ("micro", "macro", "weighted", "samples"):
        sp, sr, sf, _ = skm.precision_recall_fscore_support(t, p, average=avg, zero_division=0)
        sc = prf["sample" if avg == "samples" else avg]
        assert (sc.precision, sc.recall) == pytest.approx((sp, sr))
        if avg == "micro":
            assert sc.f1 == pytest.approx(sf)
        if avg == "macro":
            assert prf["label_mean_f1"] == pytest.approx(sf)


@settings(max_examples=80, deadline=None)
@given(label_matrices)
def test_mlcm_row_sums(pair):
    t, p = pair
    m = mlcm_confusion(t, p)
    assert np.allclose(m.counts[:7].sum(axis=1), t.sum(axis=0))
    empty = t.sum(axis=1) == 0
    assert m.counts[7].sum() == np.maximum(p[empty].sum(axis=1), 1).sum()
    assert np.allclose(np.diag(m.counts)[:7], (t & p).sum(axis=0))
