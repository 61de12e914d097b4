"""Per-segment time- and frequency-domain features.

Every feature function works on a 2-d array of segments, one segment per
row, so a whole channel is featurized in one call. The single-segment
wrappers used by the public API call into the same code, which keeps batch
and one-at-a-time results bit-identical.

The feature order is a public contract, see :data:`FEATURE_NAMES`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .config import PipelineConfig
from .exceptions import InsufficientData, NonFiniteFeature, SegmentTooShort
from .preprocess import Segment, bandpass_filter, segment_matrix
from .recording import Recording

FEATURE_NAMES = ("RMS", "ZC", "SSC", "WL", "MAV", "WAMP", "ARC", "MNF", "MDF", "PSR")
N_FEATURES = len(FEATURE_NAMES)
RMS, ZC, SSC, WL, MAV, WAMP, ARC, MNF, MDF, PSR = range(N_FEATURES)


def _as_rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[None, :] if x.ndim == 1 else x


def _segment_values(seg) -> np.ndarray:
    return seg.values if isinstance(seg, Segment) else np.asarray(seg, dtype=np.float64)


def _is_constant(x: np.ndarray) -> np.ndarray:
    return np.ptp(x, axis=1) == 0


# -- time domain ---------------------------------------------------------------


def time_domain_batch(x, zc_threshold=0.0, ssc_threshold=0.0, wamp_threshold=0.02):
    """RMS, ZC, SSC, WL, MAV and WAMP of each row of ``x``; shape ``(n, 6)``."""
    x = _as_rows(x)
    if x.shape[1] < 3:
        raise SegmentTooShort(f"time-domain features need >= 3 samples, got {x.shape[1]}")
    absx = np.abs(x)
    d = np.diff(x, axis=1)
    absd = np.abs(d)
    rms = np.sqrt(np.mean(x * x, axis=1))
    mav = np.mean(absx, axis=1)
    wl = np.sum(absd, axis=1)
    zc = np.count_nonzero(
        (x[:, :-1] * x[:, 1:] < 0) & (absx[:, :-1] > zc_threshold) & (absx[:, 1:] > zc_threshold),
        axis=1,
    )
    ssc = np.count_nonzero((x[:, 1:-1] - x[:, :-2]) * (x[:, 1:-1] - x[:, 2:]) > ssc_threshold, axis=1)
    wamp = np.count_nonzero(absd > wamp_threshold, axis=1)
    return np.column_stack([rms, zc, ssc, wl, mav, wamp]).astype(np.float64)


def time_domain_features(seg, cfg: PipelineConfig) -> np.ndarray:
    """Six time-domain features of one segment, in feature order."""
    return time_domain_batch(
        _segment_values(seg), cfg.zc_threshold, cfg.ssc_threshold, cfg.wamp_threshold
    )[0]


# -- autoregressive coefficient ------------------------------------------------


def levinson_durbin(r: np.ndarray, order: int) -> np.ndarray:
    """AR coefficients from autocorrelations, row-wise.

    ``r`` has shape ``(n, order + 1)``. Returns ``a`` with shape ``(n, order)``
    for the model ``x[t] = sum_k a[k-1] * x[t-k] + e[t]``. Rows whose
    prediction error reaches zero keep the coefficients found so far.
    """
    n = r.shape[0]
    a = np.zeros((n, order + 1))
    err = r[:, 0].copy()
    for m in range(1, order + 1):
        acc = r[:, m] - np.sum(a[:, 1:m] * r[:, m - 1 : 0 : -1], axis=1)
        live = err > 0
        k = np.where(live, acc / np.where(live, err, 1.0), 0.0)
        prev = a.copy()
        a[:, m] = k
        a[:, 1:m] = prev[:, 1:m] - k[:, None] * prev[:, m - 1 : 0 : -1]
        err = np.where(live, err * (1.0 - k * k), 0.0)
    return a[:, 1:]


def ar_batch(x, order=4):
    """First AR coefficient of each mean-removed row, plus a degenerate mask."""
    x = _as_rows(x)
    w = x.shape[1]
    if order < 1 or w <= order:
        raise SegmentTooShort(f"AR order {order} needs more than {order} samples, got {w}")
    flat = _is_constant(x)
    xc = x - x.mean(axis=1, keepdims=True)
    r = np.column_stack([np.sum(xc[:, : w - k] * xc[:, k:], axis=1) / w for k in range(order + 1)])
    flat |= r[:, 0] <= 0
    r[flat] = 0.0
    a1 = levinson_durbin(r, order)[:, 0]
    return np.where(flat, 0.0, a1), flat


def ar_coefficient(seg, order: int = 4) -> tuple[float, bool]:
    """Yule-Walker estimate of ``a_1`` for an AR(``order``) fit.

    Returns ``(a_1, degenerate)``; a zero-variance segment gives ``(0.0, True)``.
    """
    a1, flat = ar_batch(_segment_values(seg), order)
    return float(a1[0]), bool(flat[0])


# -- spectrum ------------------------------------------------------------------


def _nfft(w: int, fft_size: int) -> int:
    n = fft_size
    while n < w:
        n *= 2
    return n


def segment_spectrum(x, sample_rate_hz, fft_size=128):
    """Hann-windowed, zero-padded periodogram of the mean-removed rows.

    Returns ``(freqs, power)`` over the bins ``0 < f <= fs/2``.
    """
    x = _as_rows(x)
    w = x.shape[1]
    nfft = _nfft(w, fft_size)
    xc = x - x.mean(axis=1, keepdims=True)
    coeffs = np.fft.rfft(xc * np.hanning(w), n=nfft, axis=1)[:, 1:]
    power = coeffs.real**2 + coeffs.imag**2
    freqs = np.arange(1, nfft // 2 + 1) * (sample_rate_hz / nfft)
    return freqs, power


def spectral_batch(x, sample_rate_hz, fft_size=128, psr_halfband_hz=10.0):
    """MNF, MDF and PSR of each row, plus a zero-power mask."""
    x = _as_rows(x)
    if x.shape[1] < 8:
        raise SegmentTooShort(f"spectral features need >= 8 samples, got {x.shape[1]}")
    freqs, power = segment_spectrum(x, sample_rate_hz, fft_size)
    total = power.sum(axis=1)
    flat = _is_constant(x) | (total <= 0)
    safe_total = np.where(flat, 1.0, total)

    mnf = (power * freqs).sum(axis=1) / safe_total
    cum = np.cumsum(power, axis=1)
    mdf_bin = np.argmax(cum >= 0.5 * total[:, None], axis=1)
    mdf = freqs[mdf_bin]
    peak = np.argmax(power, axis=1)
    df = sample_rate_hz / _nfft(x.shape[1], fft_size)
    offsets = np.abs(np.arange(freqs.size)[None, :] - peak[:, None]) * df
    in_band = offsets <= psr_halfband_hz * (1 + 1e-12)
    psr = np.where(in_band, power, 0.0).sum(axis=1) / safe_total

    out = np.column_stack([mnf, mdf, psr])
    out[flat] = 0.0
    return out, flat


def spectral_features(seg, cfg: PipelineConfig, sample_rate_hz: float) -> tuple[np.ndarray, bool]:
    """``([MNF, MDF, PSR], degenerate)`` of one segment."""
    out, flat = spectral_batch(_segment_values(seg), sample_rate_hz, cfg.fft_size, cfg.psr_halfband_hz)
    return out[0], bool(flat[0])


# -- full vector -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    degenerate: bool = False

    def __getitem__(self, name):
        return self.values[FEATURE_NAMES.index(name)]


def feature_batch(x, cfg: PipelineConfig, sample_rate_hz: float):
    """``(n, 10)`` feature matrix and degenerate mask for the rows of ``x``."""
    x = _as_rows(x)
    td = time_domain_batch(x, cfg.zc_threshold, cfg.ssc_threshold, cfg.wamp_threshold)
    arc, flat_ar = ar_batch(x, cfg.ar_order)
    sp, flat_sp = spectral_batch(x, sample_rate_hz, cfg.fft_size, cfg.psr_halfband_hz)
    return np.column_stack([td, arc, sp]), flat_ar | flat_sp


def extract_feature_vector(seg, cfg: PipelineConfig, sample_rate_hz: float) -> FeatureVector:
    values, flat = feature_batch(_segment_values(seg), cfg, sample_rate_hz)
    return FeatureVector(values[0], bool(flat[0]))


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Features of every segment of every channel of a recording."""

    values: np.ndarray  # (n_segments_total, 10)
    channel: np.ndarray  # channel index per row
    start_sample: np.ndarray
    degenerate: np.ndarray
    channel_labels: tuple = ()

    def __len__(self):
        return self.values.shape[0]

    def for_channel(self, c: int) -> np.ndarray:
        return self.values[self.channel == c]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["channel", "start_sample", *FEATURE_NAMES, "degenerate"])
            for c, s, row, flag in zip(self.channel, self.start_sample, self.values, self.degenerate):
                label = self.channel_labels[c] if self.channel_labels else int(c)
                w.writerow([label, int(s), *(repr(float(v)) for v in row), int(flag)])


def recording_features(rec: Recording, cfg: PipelineConfig, filtered: bool = False) -> FeatureTable:
    """Filter (unless ``filtered``), segment and featurize every channel."""
    if not filtered:
        rec = bandpass_filter(rec, cfg)
    window = cfg.window_samples(rec.sample_rate_hz)
    stride = cfg.stride_samples(rec.sample_rate_hz)
    blocks, chans, starts, flags = [], [], [], []
    for c in range(rec.n_channels):
        segs = segment_matrix(rec.samples[:, c], window, stride)
        vals, flat = feature_batch(segs, cfg, rec.sample_rate_hz)
        blocks.append(vals)
        flags.append(flat)
        chans.append(np.full(len(vals), c))
        starts.append(np.arange(len(vals)) * stride)
    return FeatureTable(
        np.vstack(blocks),
        np.concatenate(chans),
        np.concatenate(starts),
        np.concatenate(flags),
        rec.channel_labels,
    )


class SegmentFeatures(TransformerMixin, BaseEstimator):
    """Map a ``(n_segments, window)`` array to its ``(n_segments, 10)`` features.

    Stateless; ``fit`` only validates input. Composes with a
    :class:`~emgtoken.codebook.KMeansCodebook` in an sklearn ``Pipeline``.
    """

    def __init__(self, sample_rate_hz=1259.0, zc_threshold=0.0, ssc_threshold=0.0,
                 wamp_threshold=0.02, ar_order=4, fft_size=128, psr_halfband_hz=10.0):
        self.sample_rate_hz = sample_rate_hz
        self.zc_threshold = zc_threshold
        self.ssc_threshold = ssc_threshold
        self.wamp_threshold = wamp_threshold
        self.ar_order = ar_order
        self.fft_size = fft_size
        self.psr_halfband_hz = psr_halfband_hz

    def _config(self):
        return PipelineConfig(
            zc_threshold=self.zc_threshold,
            ssc_threshold=self.ssc_threshold,
            wamp_threshold=self.wamp_threshold,
            ar_order=self.ar_order,
            fft_size=self.fft_size,
            psr_halfband_hz=self.psr_halfband_hz,
        )

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_array(X)
        values, self.degenerate_ = feature_batch(X, self._config(), self.sample_rate_hz)
        return values

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURE_NAMES, dtype=object)


# -- standardization --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Per-dimension z-scoring fitted on training features."""

    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray  # dimensions with zero variance, whose scale was set to 1

    @classmethod
    def fit(cls, features) -> "Normalizer":
        X = _check_features(features)
        if X.shape[0] < 2:
            raise InsufficientData("normalizer needs at least 2 feature vectors")
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        constant = std == 0
        return cls(mean, np.where(constant, 1.0, std), constant)

    def transform(self, features) -> np.ndarray:
        return (_check_features(features) - self.mean) / self.scale

    def inverse_transform(self, z) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.scale + self.mean


def fit_normalizer(features) -> Normalizer:
    return Normalizer.fit(features)


def apply_normalizer(nz: Normalizer, f):
    """Standardize one vector (returned as ``FeatureVector``) or a matrix."""
    if isinstance(f, FeatureVector):
        return FeatureVector(nz.transform(f.values[None, :])[0], f.degenerate)
    f = np.asarray(f, dtype=np.float64)
    out = nz.transform(np.atleast_2d(f))
    return out[0] if f.ndim == 1 else out


def _check_features(features) -> np.ndarray:
    if isinstance(features, FeatureVector):
        features = [features]
    if isinstance(features, (list, tuple)) and features and isinstance(features[0], FeatureVector):
        features = np.vstack([f.values for f in features])
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != N_FEATURES:
        raise NonFiniteFeature(f"expected feature rows of length {N_FEATURES}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("feature matrix contains NaN or infinite values")
    return X
