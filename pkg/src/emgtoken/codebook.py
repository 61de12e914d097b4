"""K-means codebook of muscle-state tokens.

Training standardizes the features, runs Lloyd's algorithm from k-means++
seeds over several restarts and keeps the lowest-SSE run. Clusters are then
relabelled so that token ``A`` (id 0) has the highest centroid RMS and the
last token is the rest state.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import string
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .config import PipelineConfig
from .exceptions import (
    ConfigMismatch,
    CorruptCodebook,
    NonFiniteFeature,
    TooFewSamples,
    VersionMismatch,
)
from .features import (
    FEATURE_NAMES,
    MAV,
    RMS,
    Normalizer,
    _check_features,
    recording_features,
)
from .recording import Recording

FORMAT_VERSION = 1
ALPHABET = string.ascii_uppercase

_CHUNK = 8192


def squared_distances(Z: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Exact ``||z - c||^2`` for every row/centroid pair, shape ``(n, k)``."""
    out = np.empty((Z.shape[0], centroids.shape[0]))
    for lo in range(0, Z.shape[0], _CHUNK):
        diff = Z[lo : lo + _CHUNK, None, :] - centroids[None, :, :]
        out[lo : lo + _CHUNK] = np.sum(diff * diff, axis=2)
    return out


def nearest(Z: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels (ties to the lowest index) and squared distances."""
    d = squared_distances(Z, centroids)
    labels = np.argmin(d, axis=1)
    return labels, d[np.arange(len(labels)), labels]


def kmeans_plusplus(Z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = Z.shape[0]
    centers = np.empty((k, Z.shape[1]))
    centers[0] = Z[rng.integers(n)]
    d2 = np.sum((Z - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            raise TooFewSamples(f"fewer than {k} distinct feature vectors")
        idx = rng.choice(n, p=d2 / total)
        centers[i] = Z[idx]
        d2 = np.minimum(d2, np.sum((Z - centers[i]) ** 2, axis=1))
    return centers


def _cluster_means(Z, labels, centroids):
    out = centroids.copy()
    for j in range(centroids.shape[0]):
        members = Z[labels == j]
        if len(members):
            out[j] = members.sum(axis=0) / len(members)
    return out


def _repair_empty(Z, labels, dist, centroids):
    """Move each empty centroid onto the point farthest from its own centroid."""
    k = centroids.shape[0]
    while True:
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if not len(empty):
            return labels, dist, centroids
        cand = np.where(counts[labels] > 1, dist, -1.0)
        far = int(np.argmax(cand))
        if cand[far] <= 0:
            raise TooFewSamples(f"fewer than {k} distinct feature vectors")
        centroids = centroids.copy()
        centroids[empty[0]] = Z[far]
        labels, dist = nearest(Z, centroids)


@dataclass
class LloydResult:
    centroids: np.ndarray
    labels: np.ndarray
    sse: float
    sse_history: list
    iterations: int
    seed: int


def lloyd(Z, init, max_iter=300, rel_tol=1e-6, seed=0) -> LloydResult:
    """Lloyd iterations from ``init``.

    ``sse_history[0]`` is the SSE of the initial assignment and each later
    entry follows one update/reassign step; the sequence never increases.
    Stops when the relative SSE improvement falls below ``rel_tol``.
    """
    centroids = np.array(init, dtype=np.float64)
    labels, dist = nearest(Z, centroids)
    labels, dist, centroids = _repair_empty(Z, labels, dist, centroids)
    sse = float(dist.sum())
    history = [sse]
    it = 0
    while it < max_iter:
        it += 1
        centroids = _cluster_means(Z, labels, centroids)
        labels, dist = nearest(Z, centroids)
        labels, dist, centroids = _repair_empty(Z, labels, dist, centroids)
        new_sse = float(dist.sum())
        history.append(new_sse)
        improvement = sse - new_sse
        sse = new_sse
        if sse == 0 or improvement <= rel_tol * history[-2]:
            break
    return LloydResult(centroids, labels, sse, history, it, seed)


def ordering_permutation(rms: np.ndarray, mav: np.ndarray) -> np.ndarray:
    """Indices sorted by descending RMS, then descending MAV, then index."""
    return np.array(sorted(range(len(rms)), key=lambda i: (-rms[i], -mav[i], i)), dtype=int)


@dataclass(frozen=True, eq=False)
class Codebook:
    """Trained centroids (normalized space) with the normalizer that produced them."""

    centroids: np.ndarray
    normalizer: Normalizer
    activation_rank: np.ndarray
    training_sse: float
    rng_seed: int = 0
    restarts: int = 1
    iterations_used: int = 0
    config: dict | None = None

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    token_count = k

    @property
    def alphabet(self) -> str:
        return ALPHABET[: self.k]

    def letter(self, token_id: int) -> str:
        return ALPHABET[int(token_id)]

    def denormalized_centroids(self) -> np.ndarray:
        return self.normalizer.inverse_transform(self.centroids)

    def normalize(self, features) -> np.ndarray:
        return self.normalizer.transform(features)

    def assign(self, features) -> np.ndarray:
        """Token id of every feature row (Euclidean nearest centroid)."""
        return nearest(self.normalize(features), self.centroids)[0]

    def to_dict(self) -> dict:
        body = {
            "format_version": FORMAT_VERSION,
            "k": self.k,
            "feature_names": list(FEATURE_NAMES),
            "centroids": self.centroids.tolist(),
            "normalizer": {
                "mean": self.normalizer.mean.tolist(),
                "scale": self.normalizer.scale.tolist(),
                "constant": [bool(b) for b in self.normalizer.constant],
            },
            "activation_rank": [int(i) for i in self.activation_rank],
            "training_sse": float(self.training_sse),
            "provenance": {
                "rng_seed": int(self.rng_seed),
                "restarts": int(self.restarts),
                "iterations_used": int(self.iterations_used),
            },
            "config": self.config,
        }
        body["content_hash"] = _content_hash(body)
        return body

    @property
    def fingerprint(self) -> str:
        return self.to_dict()["content_hash"]

    @classmethod
    def from_dict(cls, d: dict) -> "Codebook":
        try:
            version = d["format_version"]
            if version != FORMAT_VERSION:
                raise VersionMismatch(f"codebook format {version}, expected {FORMAT_VERSION}")
            stored = d["content_hash"]
            body = {key: v for key, v in d.items() if key != "content_hash"}
            if _content_hash(body) != stored:
                raise CorruptCodebook("content hash mismatch")
            nz = d["normalizer"]
            cb = cls(
                centroids=np.asarray(d["centroids"], dtype=np.float64),
                normalizer=Normalizer(
                    np.asarray(nz["mean"], dtype=np.float64),
                    np.asarray(nz["scale"], dtype=np.float64),
                    np.asarray(nz["constant"], dtype=bool),
                ),
                activation_rank=np.asarray(d["activation_rank"], dtype=int),
                training_sse=float(d["training_sse"]),
                rng_seed=d["provenance"]["rng_seed"],
                restarts=d["provenance"]["restarts"],
                iterations_used=d["provenance"]["iterations_used"],
                config=d["config"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, (VersionMismatch, CorruptCodebook)):
                raise
            raise CorruptCodebook(f"malformed codebook: {exc}") from exc
        if cb.centroids.shape != (d["k"], len(FEATURE_NAMES)):
            raise CorruptCodebook("centroid array has the wrong shape")
        return cb


def _content_hash(body: dict) -> str:
    text = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode()).hexdigest()


def save_codebook(cb: Codebook, path) -> None:
    Path(path).write_text(json.dumps(cb.to_dict(), sort_keys=True, indent=1) + "\n")


def load_codebook(path) -> Codebook:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CorruptCodebook(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(d, dict):
        raise CorruptCodebook(f"{path}: not a codebook document")
    return Codebook.from_dict(d)


def order_tokens(cb: Codebook) -> Codebook:
    """Relabel clusters by descending denormalized RMS (ties: MAV, then index)."""
    raw = cb.denormalized_centroids()
    perm = ordering_permutation(raw[:, RMS], raw[:, MAV])
    return dataclasses.replace(
        cb,
        centroids=cb.centroids[perm],
        activation_rank=np.asarray(cb.activation_rank)[perm],
    )


class KMeansCodebook(ClusterMixin, TransformerMixin, BaseEstimator):
    """Estimator front end to codebook training.

    ``fit`` takes raw (unstandardized) ``(n, 10)`` feature rows; ``predict``
    returns activation-ordered token ids; ``transform`` returns squared
    distances to every centroid in standardized space.
    """

    def __init__(self, n_clusters=13, n_restarts=10, max_iter=300, rel_tol=1e-6, random_state=0):
        self.n_clusters = n_clusters
        self.n_restarts = n_restarts
        self.max_iter = max_iter
        self.rel_tol = rel_tol
        self.random_state = random_state

    def fit(self, X, y=None, config=None):
        X = _check_features(X)
        k = self.n_clusters
        if X.shape[0] < k:
            raise TooFewSamples(f"{X.shape[0]} feature vectors for K={k}")
        normalizer = Normalizer.fit(X)
        Z = normalizer.transform(X)
        if np.unique(Z, axis=0).shape[0] < k:
            raise TooFewSamples(f"fewer than {k} distinct feature vectors")

        best = None
        for r in range(self.n_restarts):
            seed = int(self.random_state) + r
            init = kmeans_plusplus(Z, k, np.random.default_rng(seed))
            run = lloyd(Z, init, self.max_iter, self.rel_tol, seed)
            if best is None or run.sse < best.sse:
                best = run

        raw = Codebook(
            centroids=best.centroids,
            normalizer=normalizer,
            activation_rank=np.arange(k),
            training_sse=best.sse,
            rng_seed=int(self.random_state),
            restarts=self.n_restarts,
            iterations_used=best.iterations,
            config=config,
        )
        cb = order_tokens(raw)
        labels, dist = nearest(Z, cb.centroids)
        cb = dataclasses.replace(cb, training_sse=float(dist.sum()))

        self.codebook_ = cb
        self.cluster_centers_ = cb.centroids
        self.labels_ = labels
        self.inertia_ = cb.training_sse
        self.sse_history_ = best.sse_history
        self.n_iter_ = best.iterations
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "codebook_")
        return self.codebook_.assign(X)

    def transform(self, X):
        check_is_fitted(self, "codebook_")
        return squared_distances(self.codebook_.normalize(X), self.codebook_.centroids)

    def score(self, X, y=None):
        check_is_fitted(self, "codebook_")
        return -compute_sse_normalized(self.codebook_.normalize(X), self.codebook_.centroids)


def compute_sse_normalized(Z, centroids) -> float:
    return float(nearest(Z, centroids)[1].sum())


def train_codebook(features, cfg: PipelineConfig) -> Codebook:
    """Train an activation-ordered codebook with the clustering settings of ``cfg``."""
    est = KMeansCodebook(
        n_clusters=cfg.k_clusters,
        n_restarts=cfg.kmeans_restarts,
        max_iter=cfg.kmeans_max_iter,
        rel_tol=cfg.kmeans_rel_tol,
        random_state=cfg.rng_seed,
    )
    return est.fit(features, config=cfg.to_dict()).codebook_


def assign_token(f, cb: Codebook) -> int:
    values = getattr(f, "values", f)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise NonFiniteFeature("assign_token takes a single feature vector")
    return int(cb.assign(values[None, :])[0])


@dataclass(frozen=True, eq=False)
class TokenSequence:
    tokens: np.ndarray
    channel_index: int = 0
    fingerprint: str = ""
    channel_label: str = ""
    k: int | None = None

    def __len__(self):
        return len(self.tokens)

    @property
    def letters(self) -> str:
        return "".join(ALPHABET[t] for t in self.tokens)

    def with_tokens(self, tokens) -> "TokenSequence":
        return dataclasses.replace(self, tokens=np.asarray(tokens, dtype=int))


def check_config(cb: Codebook, cfg: PipelineConfig) -> None:
    if cb.config is None:
        return
    diffs = [
        key for key in PipelineConfig.FEATURE_KEYS
        if key in cb.config and cb.config[key] != getattr(cfg, key)
    ]
    if diffs:
        raise ConfigMismatch(f"settings differ from the codebook's training config: {diffs}")


def tokenize_recording(rec: Recording, cb: Codebook, cfg: PipelineConfig) -> list[TokenSequence]:
    """Filter, segment, featurize and assign tokens for every channel."""
    check_config(cb, cfg)
    table = recording_features(rec, cfg)
    fp = cb.fingerprint
    tokens = cb.assign(table.values)
    return [
        TokenSequence(tokens[table.channel == c], c, fp, rec.channel_labels[c], cb.k)
        for c in range(rec.n_channels)
    ]


def write_tokens_csv(sequences, path) -> None:
    lines = ["channel,segment_index,token_id,token_letter"]
    for seq in sequences:
        label = seq.channel_label or str(seq.channel_index)
        lines.extend(f"{label},{i},{int(t)},{ALPHABET[t]}" for i, t in enumerate(seq.tokens))
    Path(path).write_text("\n".join(lines) + "\n")


def read_tokens_csv(path) -> list[TokenSequence]:
    """Inverse of :func:`write_tokens_csv`; channels keep first-seen order."""
    by_channel: dict[str, list[tuple[int, int]]] = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            by_channel.setdefault(row["channel"], []).append(
                (int(row["segment_index"]), int(row["token_id"]))
            )
    out = []
    for c, (label, pairs) in enumerate(by_channel.items()):
        pairs.sort()
        out.append(TokenSequence(np.array([t for _, t in pairs], dtype=int), c, "", label))
    return out
