"""Synthetic sEMG with known activation levels.

Each channel is band-limited Gaussian noise, normalized to unit RMS and
multiplied sample by sample by ``noise_floor_mv + level * gain_mv``, where
``level`` follows a piecewise-constant profile in [0, 1] that repeats until
the requested duration is filled.

Profiles are stored as INI files::

    [profile]
    noise_floor_mv = 0.01
    gain_mv = 1.0
    carrier_low_hz = 30
    carrier_high_hz = 300
    seed = 7
    # optional, used by the CLI
    sample_rate_hz = 1259
    duration_ms = 4000

    [channel VL]
    levels = 0, 0.5, 1
    durations_ms = 500, 500, 500

One ``[channel <label>]`` section per channel, in file order.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidProfile
from .preprocess import butter_bandpass, segment_matrix, zero_phase_filter
from .recording import Recording


@dataclass(frozen=True)
class ChannelProfile:
    levels: tuple
    durations_ms: tuple


@dataclass(frozen=True)
class ActivationProfile:
    channels: dict  # label -> ChannelProfile, insertion-ordered
    noise_floor_mv: float = 0.01
    gain_mv: float = 1.0
    carrier_low_hz: float = 30.0
    carrier_high_hz: float = 300.0
    seed: int = 0
    extras: dict = field(default_factory=dict)

    def validate(self, sample_rate_hz: float) -> None:
        if not self.channels:
            raise InvalidProfile("profile has no channels")
        for label, ch in self.channels.items():
            if not ch.levels or len(ch.levels) != len(ch.durations_ms):
                raise InvalidProfile(f"channel {label}: levels and durations must pair up")
            if any(not 0 <= v <= 1 for v in ch.levels):
                raise InvalidProfile(f"channel {label}: levels must lie in [0, 1]")
            if any(d <= 0 for d in ch.durations_ms):
                raise InvalidProfile(f"channel {label}: durations must be positive")
        if self.noise_floor_mv < 0 or self.gain_mv < 0:
            raise InvalidProfile("noise_floor_mv and gain_mv must be non-negative")
        if not 0 < self.carrier_low_hz < self.carrier_high_hz < sample_rate_hz / 2:
            raise InvalidProfile("carrier band must lie inside (0, Nyquist)")


def level_track(ch: ChannelProfile, sample_rate_hz: float, n_samples: int) -> np.ndarray:
    """Per-sample activation level, cycling through the profile."""
    bounds = np.cumsum(ch.durations_ms)
    period = bounds[-1]
    t_ms = (np.arange(n_samples) * 1000.0 / sample_rate_hz) % period
    idx = np.searchsorted(bounds, t_ms, side="right")
    return np.asarray(ch.levels, dtype=np.float64)[idx]


def generate(profile: ActivationProfile, sample_rate_hz: float, duration_ms: float):
    """Return ``(recording, levels)``; ``levels`` has the recording's shape."""
    profile.validate(sample_rate_hz)
    n = int(sample_rate_hz * duration_ms // 1000)
    order = 4
    if n <= 6 * order:
        raise InvalidProfile(f"duration gives only {n} samples")
    sos = butter_bandpass(profile.carrier_low_hz, profile.carrier_high_hz, order, sample_rate_hz)
    seeds = np.random.SeedSequence(profile.seed).spawn(len(profile.channels))
    cols, truth = [], []
    for ss, ch in zip(seeds, profile.channels.values()):
        noise = np.random.default_rng(ss).standard_normal(n)
        carrier = zero_phase_filter(sos, noise, 6 * order)
        carrier /= np.sqrt(np.mean(carrier**2))
        lv = level_track(ch, sample_rate_hz, n)
        cols.append(carrier * (profile.noise_floor_mv + lv * profile.gain_mv))
        truth.append(lv)
    rec = Recording(np.column_stack(cols), sample_rate_hz, tuple(profile.channels))
    return rec, np.column_stack(truth)


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def parse_profile(text: str) -> ActivationProfile:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InvalidProfile(f"cannot parse profile: {exc}") from exc
    if not cp.has_section("profile"):
        raise InvalidProfile("missing [profile] section")
    p = cp["profile"]
    channels = {}
    for name in cp.sections():
        if name.startswith("channel "):
            sec = cp[name]
            try:
                channels[name[len("channel "):].strip()] = ChannelProfile(
                    _floats(sec["levels"]), _floats(sec["durations_ms"])
                )
            except (KeyError, ValueError) as exc:
                raise InvalidProfile(f"[{name}]: {exc}") from exc
    known = {"noise_floor_mv", "gain_mv", "carrier_low_hz", "carrier_high_hz", "seed"}
    try:
        kwargs = {key: float(p[key]) for key in known - {"seed"} if key in p}
        if "seed" in p:
            kwargs["seed"] = int(p["seed"])
        extras = {key: float(v) for key, v in p.items() if key not in known}
    except ValueError as exc:
        raise InvalidProfile(f"[profile]: {exc}") from exc
    return ActivationProfile(channels, extras=extras, **kwargs)


def load_profile(path) -> ActivationProfile:
    try:
        with open(path) as fh:
            return parse_profile(fh.read())
    except OSError as exc:
        raise InvalidProfile(f"cannot read profile {path}: {exc}") from exc


def segment_levels(levels: np.ndarray, window: int, stride: int) -> np.ndarray:
    """Mean ground-truth level of each window, per channel; shape ``(n_windows, C)``."""
    return np.column_stack([segment_matrix(levels[:, c], window, stride).mean(axis=1)
                            for c in range(levels.shape[1])])
