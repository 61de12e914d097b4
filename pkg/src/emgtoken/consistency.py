"""Agreement between two independent tokenizations of the same segments.

Strategy A assigns test segments with a codebook trained on the training
set; strategy B clusters the test set on its own. B's labels are matched to
A's with the Hungarian method before any agreement is measured.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .codebook import KMeansCodebook
from .config import PipelineConfig
from .exceptions import EmptySequence, LabelOutOfRange, LengthMismatch


def _pair(a, b):
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"label sequences have shapes {a.shape} and {b.shape}")
    if a.size == 0:
        raise EmptySequence("empty label sequence")
    return a, b


def confusion_matrix(labels_a, labels_b, k) -> np.ndarray:
    """Counts with rows indexed by B's label and columns by A's label."""
    a, b = _pair(labels_a, labels_b)
    if a.min() < 0 or b.min() < 0 or a.max() >= k or b.max() >= k:
        raise LabelOutOfRange(f"labels must lie in [0, {k})")
    m = np.zeros((k, k), dtype=np.int64)
    np.add.at(m, (b, a), 1)
    return m


def align_labels(labels_a, labels_b, k) -> np.ndarray:
    """Permutation ``pi`` of ``range(k)`` maximizing ``sum(a[t] == pi[b[t]])``."""
    m = confusion_matrix(labels_a, labels_b, k)
    rows, cols = linear_sum_assignment(m, maximize=True)
    pi = np.empty(k, dtype=int)
    pi[rows] = cols
    return pi


def overlap_rate(labels_a, labels_b_aligned) -> float:
    a, b = _pair(labels_a, labels_b_aligned)
    return float(np.count_nonzero(a == b)) / a.size


def cohens_kappa(labels_a, labels_b_aligned, k=None) -> float:
    a, b = _pair(labels_a, labels_b_aligned)
    k = k or int(max(a.max(), b.max())) + 1
    n = a.size
    p_o = np.count_nonzero(a == b) / n
    p_e = float(np.dot(np.bincount(a, minlength=k) / n, np.bincount(b, minlength=k) / n))
    if p_e >= 1.0:
        return 1.0
    return float((p_o - p_e) / (1.0 - p_e))


def tolerant_agreement(labels_a, labels_b_aligned, tolerance=1) -> float:
    """Fraction of positions whose activation-ranked labels differ by at most ``tolerance``."""
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    a, b = _pair(labels_a, labels_b_aligned)
    return float(np.count_nonzero(np.abs(a - b) <= tolerance)) / a.size


@dataclass
class ConsistencyReport:
    confusion: np.ndarray  # rows: strategy B (aligned), columns: strategy A
    alignment: np.ndarray
    overlap_rate: float
    kappa: float
    tolerant_agreement: float
    labels_a: np.ndarray
    labels_b: np.ndarray  # aligned

    def summary_line(self) -> str:
        perm = " ".join(str(int(i)) for i in self.alignment)
        return (
            f"overlap={self.overlap_rate:.6f} kappa={self.kappa:.6f} "
            f"tolerant_agreement={self.tolerant_agreement:.6f} alignment={perm}"
        )

    def confusion_to_csv(self, path, alphabet=None) -> None:
        k = self.confusion.shape[0]
        names = list(alphabet[:k]) if alphabet else [str(i) for i in range(k)]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["B\\A", *names])
            for i in range(k):
                w.writerow([names[i], *(int(v) for v in self.confusion[i])])


def compare_labelings(labels_a, labels_b, k, tolerance=1) -> ConsistencyReport:
    """Align B to A, then score the aligned pair."""
    a, b = _pair(labels_a, labels_b)
    pi = align_labels(a, b, k)
    b_al = pi[b]
    return ConsistencyReport(
        confusion=confusion_matrix(a, b_al, k),
        alignment=pi,
        overlap_rate=overlap_rate(a, b_al),
        kappa=cohens_kappa(a, b_al, k),
        tolerant_agreement=tolerant_agreement(a, b_al, tolerance),
        labels_a=a,
        labels_b=b_al,
    )


def run_consistency_experiment(train_features, test_features, cfg: PipelineConfig,
                               tolerance=1) -> ConsistencyReport:
    def fit(X):
        return KMeansCodebook(
            n_clusters=cfg.k_clusters,
            n_restarts=cfg.kmeans_restarts,
            max_iter=cfg.kmeans_max_iter,
            rel_tol=cfg.kmeans_rel_tol,
            random_state=cfg.rng_seed,
        ).fit(X, config=cfg.to_dict())

    labels_a = fit(train_features).predict(test_features)
    labels_b = fit(test_features).labels_
    return compare_labelings(labels_a, labels_b, cfg.k_clusters, tolerance)
