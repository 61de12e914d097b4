"""Choosing K: SSE and PNMI over a cross-validated sweep."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codebook import Codebook, nearest, train_codebook
from .config import PipelineConfig
from .exceptions import EmptySequence, InvalidConfig, LengthMismatch, MissingReference
from .features import _check_features


def compute_sse(features, cb: Codebook) -> float:
    """Sum of squared standardized distances to the assigned centroids."""
    Z = cb.normalize(_check_features(features))
    return float(nearest(Z, cb.centroids)[1].sum())


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def joint_distribution(reference, predicted) -> np.ndarray:
    """Co-occurrence frequencies ``p[i, j]`` of reference label i and predicted label j."""
    y = np.asarray(reference)
    t = np.asarray(predicted)
    if y.shape != t.shape or y.ndim != 1:
        raise LengthMismatch(f"sequences have lengths {y.shape} and {t.shape}")
    if y.size == 0:
        raise EmptySequence("PNMI of an empty sequence")
    _, yi = np.unique(y, return_inverse=True)
    _, ti = np.unique(t, return_inverse=True)
    counts = np.zeros((yi.max() + 1, ti.max() + 1))
    np.add.at(counts, (yi, ti), 1.0)
    return counts / y.size


def pnmi_detail(reference, predicted) -> tuple[float, bool]:
    """``(PNMI, degenerate)``; degenerate means a constant reference (PNMI := 1)."""
    p = joint_distribution(reference, predicted)
    h_y = _entropy(p.sum(axis=1))
    if h_y == 0:
        return 1.0, True
    # column-wise conditional entropy, exact 0 when t determines y
    cond = p / p.sum(axis=0)
    nz = p > 0
    h_y_given_t = float(-(p[nz] * np.log(cond[nz])).sum())
    value = 1.0 - h_y_given_t / h_y
    return float(min(1.0, max(0.0, value))), False


def compute_pnmi(reference, predicted) -> float:
    """Phone-normalized mutual information ``I(y; t) / H(y)``, natural log."""
    return pnmi_detail(reference, predicted)[0]


@dataclass
class KSweepReport:
    k_values: list
    sse: np.ndarray  # (n_k, n_folds)
    pnmi: np.ndarray | None  # (n_k, n_folds) or None for an SSE-only sweep
    codebooks: dict = field(default_factory=dict, repr=False)

    @property
    def sse_mean(self):
        return self.sse.mean(axis=1)

    @property
    def sse_std(self):
        return self.sse.std(axis=1)

    @property
    def pnmi_mean(self):
        return None if self.pnmi is None else self.pnmi.mean(axis=1)

    @property
    def pnmi_std(self):
        return None if self.pnmi is None else self.pnmi.std(axis=1)

    def best_k_by_pnmi(self, atol=1e-9) -> int:
        """Smallest K whose mean PNMI is within ``atol`` of the maximum."""
        if self.pnmi is None:
            raise MissingReference("sweep ran without reference labels")
        m = self.pnmi_mean
        return int(self.k_values[int(np.flatnonzero(m >= m.max() - atol)[0])])

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["K", "fold", "sse", "pnmi"])
            for a, k in enumerate(self.k_values):
                for f in range(self.sse.shape[1]):
                    pn = "" if self.pnmi is None else repr(float(self.pnmi[a, f]))
                    w.writerow([k, f, repr(float(self.sse[a, f])), pn])

    def summary_to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["K", "sse_mean", "sse_std", "pnmi_mean", "pnmi_std"])
            for a, k in enumerate(self.k_values):
                row = [k, repr(float(self.sse_mean[a])), repr(float(self.sse_std[a]))]
                if self.pnmi is None:
                    row += ["", ""]
                else:
                    row += [repr(float(self.pnmi_mean[a])), repr(float(self.pnmi_std[a]))]
                w.writerow(row)


def sweep_k(features_by_fold, reference_labels_by_fold=None, k_min=2, k_max=25,
            cfg: PipelineConfig | None = None, keep_codebooks=False) -> KSweepReport:
    """Cross-validated SSE/PNMI sweep.

    Fold ``f`` is the validation set; the codebook is trained on every other
    fold concatenated. SSE is measured on the validation features and PNMI
    compares the validation tokens with ``reference_labels_by_fold[f]``.
    """
    cfg = cfg or PipelineConfig()
    folds = [_check_features(f) for f in features_by_fold]
    if len(folds) < 2:
        raise InvalidConfig("sweep_k needs at least 2 folds")
    if k_min < 2 or k_max < k_min or k_max > 26:
        raise InvalidConfig(f"need 2 <= k_min <= k_max <= 26, got {k_min}..{k_max}")
    refs = None
    if reference_labels_by_fold is not None:
        refs = [np.asarray(r) for r in reference_labels_by_fold]
        if len(refs) != len(folds):
            raise LengthMismatch("one reference sequence per fold is required")
        for f, r in zip(folds, refs):
            if len(r) != len(f):
                raise LengthMismatch("reference labels must match fold sizes")

    ks = list(range(k_min, k_max + 1))
    sse = np.zeros((len(ks), len(folds)))
    pnmi = None if refs is None else np.zeros_like(sse)
    books = {}
    for f, val in enumerate(folds):
        train = np.vstack([x for g, x in enumerate(folds) if g != f])
        for a, k in enumerate(ks):
            cb = train_codebook(train, cfg.replace(k_clusters=k))
            sse[a, f] = compute_sse(val, cb)
            if refs is not None:
                pnmi[a, f] = compute_pnmi(refs[f], cb.assign(val))
            if keep_codebooks:
                books[(k, f)] = cb
    return KSweepReport(ks, sse, pnmi, books)
