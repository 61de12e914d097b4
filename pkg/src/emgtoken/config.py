"""Pipeline configuration shared by every stage."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .exceptions import InvalidConfig


@dataclass(frozen=True)
class PipelineConfig:
    """Filter, segmentation, feature and clustering settings.

    Thresholds are in the amplitude units of the recording (millivolts by
    convention). ``ssc_threshold`` compares a product of two differences, so
    it carries squared amplitude units.
    """

    band_low_hz: float = 20.0
    band_high_hz: float = 450.0
    filter_order: int = 4
    window_ms: float = 50.0
    stride_ms: float = 25.0
    zc_threshold: float = 0.0
    ssc_threshold: float = 0.0
    wamp_threshold: float = 0.02
    ar_order: int = 4
    fft_size: int = 128
    psr_halfband_hz: float = 10.0
    k_clusters: int = 13
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 300
    kmeans_rel_tol: float = 1e-6
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.band_low_hz < self.band_high_hz:
            raise InvalidConfig("need 0 < band_low_hz < band_high_hz")
        if self.filter_order < 1:
            raise InvalidConfig("filter_order must be >= 1")
        if not (self.window_ms > 0 and self.stride_ms > 0):
            raise InvalidConfig("window_ms and stride_ms must be positive")
        if self.stride_ms > self.window_ms:
            raise InvalidConfig("stride_ms must not exceed window_ms")
        if min(self.zc_threshold, self.ssc_threshold, self.wamp_threshold) < 0:
            raise InvalidConfig("thresholds must be non-negative")
        if self.ar_order < 1:
            raise InvalidConfig("ar_order must be >= 1")
        if self.fft_size < 8 or self.fft_size & (self.fft_size - 1):
            raise InvalidConfig("fft_size must be a power of two >= 8")
        if self.psr_halfband_hz < 0:
            raise InvalidConfig("psr_halfband_hz must be non-negative")
        if not 2 <= self.k_clusters <= 26:
            raise InvalidConfig("k_clusters must lie in [2, 26]")
        if self.kmeans_restarts < 1 or self.kmeans_max_iter < 1:
            raise InvalidConfig("kmeans_restarts and kmeans_max_iter must be >= 1")
        if self.kmeans_rel_tol < 0:
            raise InvalidConfig("kmeans_rel_tol must be non-negative")

    def window_samples(self, sample_rate_hz: float) -> int:
        return int(sample_rate_hz * self.window_ms // 1000)

    def stride_samples(self, sample_rate_hz: float) -> int:
        return int(sample_rate_hz * self.stride_ms // 1000)

    # Settings a codebook depends on; changing any of them invalidates it.
    FEATURE_KEYS = (
        "band_low_hz",
        "band_high_hz",
        "filter_order",
        "window_ms",
        "stride_ms",
        "zc_threshold",
        "ssc_threshold",
        "wamp_threshold",
        "ar_order",
        "fft_size",
        "psr_halfband_hz",
    )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def load_config(path) -> tuple[PipelineConfig, dict]:
    """Read a JSON config file.

    Returns the pipeline config and the mapping of named channel subsets
    (the optional ``channel_subsets`` key), which is not part of the
    pipeline settings.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InvalidConfig("config must be a JSON object")
    subsets = raw.pop("channel_subsets", {}) or {}
    return PipelineConfig.from_dict(raw), subsets
