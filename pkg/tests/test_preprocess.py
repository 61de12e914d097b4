import numpy as np
import pytest

from emgtoken import PipelineConfig, Recording, bandpass_filter, segment_channel
from emgtoken.exceptions import (
    InvalidBand,
    RecordingShorterThanWindow,
    RecordingTooShort,
)
from emgtoken.preprocess import segment_count

FS = 1259.0


def tone(freq, fs=FS, seconds=2.0, amp=1.0):
    t = np.arange(int(fs * seconds)) / fs
    return amp * np.sin(2 * np.pi * freq * t)


def central_gain_db(freq, cfg=PipelineConfig()):
    x = tone(freq)
    y = bandpass_filter(Recording(x, FS), cfg).samples[:, 0]
    n = len(x)
    mid = slice(n // 4, 3 * n // 4)
    analytic_rms = 1 / np.sqrt(2)
    return 20 * np.log10(np.sqrt(np.mean(y[mid] ** 2)) / analytic_rms)


def test_zero_in_zero_out():
    rec = Recording(np.zeros((500, 3)), FS)
    assert np.all(bandpass_filter(rec, PipelineConfig()).samples == 0)


def test_passband_100hz():
    assert abs(central_gain_db(100)) <= 1.0


@pytest.mark.parametrize("freq", [5, 600])
def test_stopband(freq):
    assert central_gain_db(freq) <= -20.0


def test_shape_preserved():
    rec = Recording(np.random.default_rng(0).standard_normal((300, 4)), FS, list("abcd"))
    out = bandpass_filter(rec, PipelineConfig())
    assert out.samples.shape == (300, 4) and out.channel_labels == rec.channel_labels


def test_zero_phase_time_reversal():
    x = np.random.default_rng(1).standard_normal((2000, 2))
    cfg = PipelineConfig()
    y = bandpass_filter(Recording(x, FS), cfg).samples
    y_rev = bandpass_filter(Recording(x[::-1], FS), cfg).samples[::-1]
    np.testing.assert_allclose(y_rev, y, rtol=1e-9, atol=1e-9 * np.abs(y).max())


def test_zero_phase_no_lag():
    # a passband tone keeps its phase: peak cross-correlation at lag 0
    x = tone(100)
    y = bandpass_filter(Recording(x, FS), PipelineConfig()).samples[:, 0]
    mid = slice(500, 2000)
    lags = range(-5, 6)
    corr = [np.dot(x[mid], np.roll(y, lag)[mid]) for lag in lags]
    assert list(lags)[int(np.argmax(corr))] == 0


def test_invalid_band():
    rec = Recording(np.zeros(500), FS)
    with pytest.raises(InvalidBand):
        bandpass_filter(rec, PipelineConfig(band_high_hz=700))
    with pytest.raises(InvalidBand):
        bandpass_filter(Recording(np.zeros(500), 800), PipelineConfig())


def test_too_short_for_padding():
    with pytest.raises(RecordingTooShort):
        bandpass_filter(Recording(np.zeros(24), FS), PipelineConfig())
    bandpass_filter(Recording(np.zeros(25), FS), PipelineConfig())


def _enumerate_starts(n, window, stride):
    starts, s = [], 0
    while s + window <= n:
        starts.append(s)
        s += stride
    return starts


def test_segment_example_1000_samples():
    rec = Recording(np.arange(1000.0), FS)
    segs = segment_channel(rec, 0, PipelineConfig())
    assert len(segs[0].values) == 62
    assert [s.start_sample for s in segs] == _enumerate_starts(1000, 62, 31)
    assert len(segs) == 31


def test_segment_exact_window_and_too_short():
    cfg = PipelineConfig()
    assert len(segment_channel(Recording(np.zeros(62), FS), 0, cfg)) == 1
    with pytest.raises(RecordingShorterThanWindow):
        segment_channel(Recording(np.zeros(61), FS), 0, cfg)


def test_segment_values_are_exact_slices():
    x = np.random.default_rng(2).standard_normal((777, 2))
    rec = bandpass_filter(Recording(x, FS), PipelineConfig())
    for seg in segment_channel(rec, 1, PipelineConfig()):
        ref = rec.samples[seg.start_sample : seg.start_sample + 62, 1]
        assert seg.values.tobytes() == ref.tobytes()
        assert seg.channel_index == 1


def test_segment_count_formula_randomized():
    rng = np.random.default_rng(3)
    cfg = PipelineConfig()
    for _ in range(1000):
        fs = float(rng.uniform(200, 5000))
        n = int(rng.integers(1, 3000))
        w, s = cfg.window_samples(fs), cfg.stride_samples(fs)
        assert w == int(np.floor(fs * 0.05 + 1e-12)) or w == int(np.floor(fs * 0.05))
        assert segment_count(n, w, s) == len(_enumerate_starts(n, w, s))
