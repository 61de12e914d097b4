"""Band-pass filtering and sliding-window segmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .config import PipelineConfig
from .exceptions import (
    InvalidBand,
    InvalidRecording,
    RecordingShorterThanWindow,
    RecordingTooShort,
)
from .recording import Recording


@dataclass(frozen=True, eq=False)
class Segment:
    values: np.ndarray
    channel_index: int
    start_sample: int


def butter_bandpass(low_hz, high_hz, order, sample_rate_hz):
    """Butterworth band-pass in second-order sections.

    scipy designs it through the bilinear transform with pre-warped band edges.
    """
    nyquist = sample_rate_hz / 2.0
    if not 0 < low_hz < high_hz < nyquist:
        raise InvalidBand(
            f"band [{low_hz}, {high_hz}] Hz must satisfy 0 < low < high < {nyquist} Hz"
        )
    return signal.butter(order, [low_hz, high_hz], btype="bandpass", fs=sample_rate_hz, output="sos")


def zero_phase_filter(sos, x, padlen):
    """Forward-backward filtering along axis 0.

    Both pass orders (forward-then-backward and backward-then-forward) are run
    and averaged, so the result commutes exactly with time reversal. Each pass
    order alone already has zero phase and the squared magnitude response.
    """
    fb = signal.sosfiltfilt(sos, x, axis=0, padtype="odd", padlen=padlen)
    bf = signal.sosfiltfilt(sos, x[::-1], axis=0, padtype="odd", padlen=padlen)[::-1]
    return 0.5 * (fb + bf)


def bandpass_filter(rec: Recording, cfg: PipelineConfig) -> Recording:
    """Zero-phase Butterworth band-pass of every channel of ``rec``."""
    sos = butter_bandpass(cfg.band_low_hz, cfg.band_high_hz, cfg.filter_order, rec.sample_rate_hz)
    padlen = 3 * (2 * cfg.filter_order)
    if rec.n_samples <= padlen:
        raise RecordingTooShort(
            f"{rec.n_samples} samples; odd-extension padding needs more than {padlen}"
        )
    return rec.with_samples(zero_phase_filter(sos, rec.samples, padlen))


def segment_count(n_samples: int, window: int, stride: int) -> int:
    if n_samples < window:
        return 0
    return (n_samples - window) // stride + 1


def _window_geometry(rec: Recording, cfg: PipelineConfig) -> tuple[int, int]:
    window = cfg.window_samples(rec.sample_rate_hz)
    stride = cfg.stride_samples(rec.sample_rate_hz)
    if window < 1 or stride < 1:
        raise InvalidRecording(
            f"window/stride round to zero samples at {rec.sample_rate_hz} Hz"
        )
    return window, stride


def segment_channel(rec: Recording, channel_index: int, cfg: PipelineConfig) -> list[Segment]:
    """Cut one channel into windows starting at 0; a short tail is dropped."""
    if not 0 <= channel_index < rec.n_channels:
        raise InvalidRecording(f"channel {channel_index} out of range")
    window, stride = _window_geometry(rec, cfg)
    n = segment_count(rec.n_samples, window, stride)
    if n == 0:
        raise RecordingShorterThanWindow(
            f"{rec.n_samples} samples is shorter than the {window}-sample window"
        )
    x = rec.samples[:, channel_index]
    return [Segment(x[i * stride : i * stride + window], channel_index, i * stride) for i in range(n)]


def segment_matrix(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    """All windows of a 1-d array as rows of a read-only ``(n, window)`` view."""
    n = segment_count(len(x), window, stride)
    if n == 0:
        raise RecordingShorterThanWindow(f"{len(x)} samples is shorter than the {window}-sample window")
    return np.lib.stride_tricks.sliding_window_view(x, window)[::stride][:n]
