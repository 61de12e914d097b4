import itertools

import numpy as np
import pytest
from conftest import make_blobs, separated_centers
from hypothesis import given, settings
from hypothesis import strategies as st

from emgtoken import (
    PipelineConfig,
    align_labels,
    cohens_kappa,
    overlap_rate,
    run_consistency_experiment,
    tolerant_agreement,
)
from emgtoken.consistency import compare_labelings, confusion_matrix
from emgtoken.exceptions import LabelOutOfRange, LengthMismatch


def brute_force_alignment_score(a, b, k):
    return max(np.sum(a == np.asarray(p)[b]) for p in itertools.permutations(range(k)))


def test_align_identity():
    a = np.array([0, 1, 2, 2, 1, 0, 3])
    np.testing.assert_array_equal(align_labels(a, a, 4), np.arange(4))


def test_align_swap():
    a = np.array([0, 0, 1, 2, 1, 0])
    b = np.where(a == 0, 1, np.where(a == 1, 0, a))
    pi = align_labels(a, b, 3)
    np.testing.assert_array_equal(pi, [1, 0, 2])
    assert overlap_rate(a, pi[b]) == 1.0


def test_align_hand_built_three_labels():
    # co-occurrence (rows b, cols a): [[1,5,0],[4,0,1],[0,2,6]]
    pairs = [(0, 0)] * 1 + [(0, 1)] * 5 + [(1, 0)] * 4 + [(1, 2)] * 1 + [(2, 1)] * 2 + [(2, 2)] * 6
    b = np.array([p[0] for p in pairs])
    a = np.array([p[1] for p in pairs])
    pi = align_labels(a, b, 3)
    np.testing.assert_array_equal(pi, [1, 0, 2])
    assert np.sum(a == pi[b]) == brute_force_alignment_score(a, b, 3) == 15


def test_align_matches_brute_force_random():
    rng = np.random.default_rng(0)
    for i in range(100):
        k = int(rng.integers(2, 7))
        n = int(rng.integers(5, 60))
        a = rng.integers(0, k, n)
        b = rng.integers(0, k, n)
        pi = align_labels(a, b, k)
        assert sorted(pi) == list(range(k))
        assert np.sum(a == pi[b]) == brute_force_alignment_score(a, b, k)


def test_align_errors():
    with pytest.raises(LengthMismatch):
        align_labels([0, 1], [0], 2)
    with pytest.raises(LabelOutOfRange):
        align_labels([0, 2], [0, 1], 2)


def test_overlap():
    assert overlap_rate([1, 2, 3], [1, 2, 3]) == 1.0
    assert overlap_rate([0, 1, 2, 3], [0, 1, 2, 0]) == 0.75
    rng = np.random.default_rng(1)
    a, b = rng.integers(0, 13, 10_000), rng.integers(0, 13, 10_000)
    assert overlap_rate(a, b) == sum(1 for x, y in zip(a, b) if x == y) / 10_000


def test_kappa_examples():
    assert cohens_kappa([0, 1, 2, 1], [0, 1, 2, 1], 3) == 1.0
    assert cohens_kappa([0, 0, 1, 1], [0, 0, 1, 0], 2) == pytest.approx(0.5, abs=1e-15)
    assert cohens_kappa([2, 2, 2], [2, 2, 2], 3) == 1.0


def test_kappa_chance_level():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        a, b = rng.integers(0, 13, 100_000), rng.integers(0, 13, 100_000)
        assert abs(cohens_kappa(a, b, 13)) < 0.02


def test_kappa_one_iff_perfect():
    rng = np.random.default_rng(2)
    for _ in range(200):
        a = rng.integers(0, 4, 12)
        b = a.copy()
        if rng.random() < 0.5:
            b[rng.integers(12)] = (b[0] + 1) % 4
        if len(np.unique(a)) < 2:
            continue
        assert (cohens_kappa(a, b, 4) == 1.0) == (overlap_rate(a, b) == 1.0)


def test_tolerant():
    assert tolerant_agreement([3, 3], [4, 2], 1) == 1.0
    rng = np.random.default_rng(3)
    a, b = rng.integers(0, 13, 500), rng.integers(0, 13, 500)
    assert tolerant_agreement(a, b, 0) == overlap_rate(a, b)
    vals = [tolerant_agreement(a, b, t) for t in range(13)]
    assert all(x <= y for x, y in zip(vals, vals[1:])) and vals[-1] == 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=50))
def test_confusion_marginals(pairs):
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    rep = compare_labelings(a, b, 6)
    assert rep.confusion.sum() == len(a)
    np.testing.assert_array_equal(rep.confusion.sum(axis=0), np.bincount(a, minlength=6))
    np.testing.assert_array_equal(rep.confusion.sum(axis=1), np.bincount(rep.labels_b, minlength=6))
    assert rep.overlap_rate == pytest.approx(np.trace(rep.confusion) / len(a))
    assert rep.tolerant_agreement >= rep.overlap_rate
    assert -1 <= rep.kappa <= 1


def test_confusion_orientation():
    m = confusion_matrix([0, 0, 1], [1, 1, 1], 2)
    # rows = B, columns = A
    np.testing.assert_array_equal(m, [[0, 0], [2, 1]])


def blob_populations(seed, k=4, spacing=25.0):
    centers = separated_centers(k, spacing=spacing, seed=seed)
    train, _ = make_blobs(150, centers, seed=seed)
    test, _ = make_blobs(60, centers, seed=seed + 500)
    return train, test


def test_experiment_same_distribution():
    train, test = blob_populations(0)
    rep = run_consistency_experiment(train, test, PipelineConfig(k_clusters=4, kmeans_restarts=5))
    assert rep.kappa >= 0.9 and rep.overlap_rate >= 0.9


def test_experiment_identical_sets():
    X = np.random.default_rng(4).standard_normal((300, 10))
    rep = run_consistency_experiment(X, X, PipelineConfig(k_clusters=5, kmeans_restarts=5))
    assert rep.overlap_rate >= 0.99


def test_experiment_two_separable_clusters():
    train, test = blob_populations(1, k=2)
    rep = run_consistency_experiment(train, test, PipelineConfig(k_clusters=2, kmeans_restarts=3))
    assert rep.kappa == 1.0


def test_report_outputs(tmp_path):
    rep = compare_labelings([0, 1, 1, 2], [1, 0, 0, 2], 3)
    assert rep.summary_line().startswith("overlap=1.000000 kappa=1.000000")
    assert rep.summary_line().endswith("alignment=1 0 2")
    rep.confusion_to_csv(tmp_path / "c.csv", "ABC")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "B\\A,A,B,C" and lines[1] == "A,1,0,0"
