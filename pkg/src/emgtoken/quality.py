"""Token-sequence analyses: DTW movement-quality scoring and descriptive statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codebook import ALPHABET, Codebook, TokenSequence
from .exceptions import ChannelMismatch, CodebookMismatch, EmptySequence, LengthMismatch


def activation_value(token_ids, k):
    """Numeric activation of a token id: the rest token maps to 0, token A to ``k - 1``."""
    return (k - 1) - np.asarray(token_ids, dtype=int)


@dataclass(frozen=True, eq=False)
class ActionTokenMatrix:
    tokens: np.ndarray  # (T, C) token ids
    k: int
    channel_labels: tuple = ()
    fingerprint: str = ""

    @property
    def values(self) -> np.ndarray:
        return activation_value(self.tokens, self.k)

    @property
    def n_steps(self) -> int:
        return self.tokens.shape[0]

    @property
    def n_channels(self) -> int:
        return self.tokens.shape[1]

    def select(self, labels) -> "ActionTokenMatrix":
        idx = [self.channel_labels.index(lab) for lab in labels]
        return ActionTokenMatrix(self.tokens[:, idx], self.k, tuple(labels), self.fingerprint)


def encode_action(sequences, k=None) -> ActionTokenMatrix:
    """Stack per-channel token sequences into a ``(T, C)`` matrix ordered by channel index."""
    if not sequences:
        raise EmptySequence("no token sequences")
    seqs = sorted(sequences, key=lambda s: s.channel_index)
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise LengthMismatch(f"channel sequences have different lengths: {sorted(lengths)}")
    if lengths == {0}:
        raise EmptySequence("empty token sequences")
    prints = {s.fingerprint for s in seqs}
    if len(prints) != 1:
        raise CodebookMismatch("sequences come from different codebooks")
    k = k if k is not None else seqs[0].k
    if k is None:
        raise ValueError("token count k is unknown")
    tokens = np.column_stack([np.asarray(s.tokens, dtype=int) for s in seqs])
    if tokens.min() < 0 or tokens.max() >= k:
        raise ValueError(f"token ids must lie in [0, {k})")
    labels = tuple(s.channel_label or str(s.channel_index) for s in seqs)
    return ActionTokenMatrix(tokens, k, labels, prints.pop())


def _values(x) -> np.ndarray:
    if isinstance(x, ActionTokenMatrix):
        return x.values
    v = np.asarray(x, dtype=np.float64)
    return v[:, None] if v.ndim == 1 else v


def dtw_distance(a, b):
    """Multichannel DTW with L1 pointwise cost.

    ``a`` and ``b`` are :class:`ActionTokenMatrix` instances or numeric arrays
    of shape ``(T, C)`` (1-d arrays are single-channel). Returns
    ``(distance, path_length, path)`` where ``path`` lists ``(i, j)`` pairs
    from ``(0, 0)`` to ``(L_A - 1, L_B - 1)``. Backtracking prefers the
    diagonal predecessor, then ``(i - 1, j)``.
    """
    va, vb = _values(a), _values(b)
    if va.shape[0] == 0 or vb.shape[0] == 0:
        raise EmptySequence("DTW of an empty sequence")
    if va.shape[1] != vb.shape[1]:
        raise ChannelMismatch(f"{va.shape[1]} vs {vb.shape[1]} channels")
    cost = np.abs(va[:, None, :] - vb[None, :, :]).sum(axis=2)
    n, m = cost.shape
    D = np.empty((n, m))
    c = cost.tolist()
    prev = [0.0] * m
    for i in range(n):
        row = [0.0] * m
        ci = c[i]
        for j in range(m):
            if i == 0 and j == 0:
                best = 0.0
            elif i == 0:
                best = row[j - 1]
            elif j == 0:
                best = prev[j]
            else:
                best = min(prev[j - 1], prev[j], row[j - 1])
            row[j] = ci[j] + best
        D[i] = row
        prev = row

    i, j = n - 1, m - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, up, left = D[i - 1, j - 1], D[i - 1, j], D[i, j - 1]
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return float(D[-1, -1]), len(path), path


@dataclass
class SimilarityReport:
    dtw_distance: float
    path_length: int
    similarity_score: float
    channel_mean_abs_diff: np.ndarray = field(repr=False)
    channel_labels: tuple = ()
    path: list = field(default_factory=list, repr=False)

    @property
    def similarity_percent(self) -> float:
        return 100.0 * self.similarity_score

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["dtw_distance", "path_length", "similarity_score"])
            w.writerow([repr(self.dtw_distance), self.path_length, repr(self.similarity_score)])
            w.writerow([])
            w.writerow(["channel", "mean_abs_token_diff"])
            labels = self.channel_labels or tuple(range(len(self.channel_mean_abs_diff)))
            for lab, v in zip(labels, self.channel_mean_abs_diff):
                w.writerow([lab, repr(float(v))])


def similarity_score(a, b, k=None) -> SimilarityReport:
    """``1 - DTW / ((k - 1) * C * path_length)``, clamped to [0, 1]."""
    if k is None:
        k = a.k if isinstance(a, ActionTokenMatrix) else None
    if k is None or k < 2:
        raise ValueError("similarity_score needs k >= 2")
    if isinstance(a, ActionTokenMatrix) and isinstance(b, ActionTokenMatrix):
        if a.fingerprint != b.fingerprint:
            raise CodebookMismatch("actions were tokenized with different codebooks")
    dist, length, path = dtw_distance(a, b)
    va, vb = _values(a), _values(b)
    n_ch = va.shape[1]
    score = 1.0 - dist / ((k - 1) * n_ch * length)
    ii, jj = np.array(path).T
    diag = np.abs(va[ii] - vb[jj]).mean(axis=0)
    labels = a.channel_labels if isinstance(a, ActionTokenMatrix) else ()
    return SimilarityReport(dist, length, min(1.0, max(0.0, score)), diag, labels, path)


# -- statistics ------------------------------------------------------------------


def _tokens(seq) -> np.ndarray:
    t = np.asarray(seq.tokens if isinstance(seq, TokenSequence) else seq, dtype=int)
    if t.size == 0:
        raise EmptySequence("empty token sequence")
    return t


def run_lengths(tokens) -> tuple[np.ndarray, np.ndarray]:
    """Values and lengths of the maximal constant runs."""
    t = np.asarray(tokens)
    starts = np.flatnonzero(np.r_[True, t[1:] != t[:-1]])
    lengths = np.diff(np.r_[starts, t.size])
    return t[starts], lengths


@dataclass
class TokenStatistics:
    ratios: np.ndarray
    transition_frequency: float
    mean_run_length: np.ndarray
    max_run_length: np.ndarray
    mean: float
    variance: float
    skewness: float
    kurtosis: float
    degenerate: bool

    def as_vector(self) -> np.ndarray:
        """Flat descriptor: ratios, transition frequency, run stats, four moments."""
        return np.concatenate([
            self.ratios,
            [self.transition_frequency],
            self.mean_run_length,
            self.max_run_length,
            [self.mean, self.variance, self.skewness, self.kurtosis],
        ])

    @staticmethod
    def column_names(k) -> list:
        letters = ALPHABET[:k]
        return (
            [f"ratio_{c}" for c in letters]
            + ["transition_frequency"]
            + [f"mean_run_{c}" for c in letters]
            + [f"max_run_{c}" for c in letters]
            + ["mean", "variance", "skewness", "kurtosis"]
        )


def token_statistics(seq, k) -> TokenStatistics:
    """Descriptors of one token sequence; moments use activation values."""
    t = _tokens(seq)
    n = t.size
    counts = np.bincount(t, minlength=k)
    ratios = counts / n
    changes = np.count_nonzero(t[1:] != t[:-1])
    trans = changes / (n - 1) if n > 1 else 0.0

    vals, lens = run_lengths(t)
    mean_run = np.zeros(k)
    max_run = np.zeros(k)
    for tok in np.unique(vals):
        sel = lens[vals == tok]
        mean_run[tok] = sel.mean()
        max_run[tok] = sel.max()

    s = activation_value(t, k).astype(np.float64)
    mean = s.mean()
    dev = s - mean
    var = np.mean(dev**2)
    if var > 0:
        skew = np.mean(dev**3) / var**1.5
        kurt = np.mean(dev**4) / var**2 - 3.0
        degenerate = False
    else:
        skew = kurt = 0.0
        degenerate = True
    return TokenStatistics(ratios, float(trans), mean_run, max_run, float(mean), float(var),
                           float(skew), float(kurt), degenerate)


def replication_pad(seq, length):
    """Pad by repeating the last token, or truncate, to ``length`` tokens."""
    t = _tokens(seq)
    if length < 1:
        raise ValueError("target length must be >= 1")
    if t.size >= length:
        out = t[:length]
    else:
        out = np.concatenate([t, np.full(length - t.size, t[-1])])
    return seq.with_tokens(out) if isinstance(seq, TokenSequence) else out


def transition_matrix(sequences, k) -> tuple[np.ndarray, np.ndarray]:
    """Pooled row-stochastic transition matrix and a mask of rows with no outgoing counts.

    Rows without observations are set to uniform.
    """
    counts = np.zeros((k, k))
    seen = False
    for seq in sequences:
        t = _tokens(seq)
        seen = True
        np.add.at(counts, (t[:-1], t[1:]), 1.0)
    if not seen:
        raise EmptySequence("no sequences")
    totals = counts.sum(axis=1)
    empty = totals == 0
    probs = np.where(empty[:, None], 1.0 / k, counts / np.where(empty, 1.0, totals)[:, None])
    return probs, empty


def report_centroid_distances(cb: Codebook) -> np.ndarray:
    """Pairwise Euclidean distances between centroids in standardized space."""
    c = cb.centroids
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(d, 0.0)
    return d


def dimension_reduction(n_tokens: int, n_samples: int) -> float:
    """Fraction of values removed when ``n_samples`` raw samples become ``n_tokens`` tokens."""
    return 1.0 - n_tokens / n_samples


def samples_spanned(n_tokens: int, window_ms: float, stride_ms: float, sample_rate_hz: float) -> float:
    """Raw samples covered by ``n_tokens`` windows: ``((L - 1) * stride + window) * fs``."""
    return ((n_tokens - 1) * stride_ms + window_ms) / 1000.0 * sample_rate_hz
