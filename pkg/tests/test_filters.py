from fractions import Fraction

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import make_recording, sinusoid
from tools.edf_reader import Channel, Recording
from tools.filters import (
    FilterSpec,
    InvalidCutoff,
    PreprocessConfig,
    SignalError,
    UpsamplingRequested,
    WindowTooLong,
    highpass,
    notch,
    preprocess_recording,
    resample,
    resample_ratio,
    segment,
    window_count,
)

FS = 250.0


def _steady(x, sample_rate, trim_seconds=5.0):
    trim = int(trim_seconds * sample_rate)
    return x[trim:-trim]


def _amplitude(x):
    return np.sqrt(2.0) * np.sqrt(np.mean(x ** 2))


def test_highpass_removes_dc():
    y = highpass(np.full(int(40 * FS), 7.3), FS, FilterSpec("highpass", 1.0))
    assert np.max(np.abs(_steady(y, FS))) < 1e-3


def test_highpass_keeps_passband_tone():
    y = highpass(sinusoid(10, 40, FS), FS, FilterSpec("highpass", 1.0))
    assert _amplitude(_steady(y, FS)) == pytest.approx(1.0, rel=0.02)


def test_cutoff_above_nyquist():
    with pytest.raises(InvalidCutoff):
        highpass(np.zeros(1000), FS, FilterSpec("highpass", 200.0))


def test_notch_removes_mains_and_keeps_alpha():
    spec = FilterSpec("notch", 50.0, q_factor=30.0)
    residual = notch(sinusoid(50, 40, FS), FS, spec)
    assert _amplitude(_steady(residual, FS)) < 0.04
    kept = notch(sinusoid(10, 40, FS), FS, spec)
    assert _amplitude(_steady(kept, FS)) == pytest.approx(1.0, rel=0.02)
    assert_array_equal(notch(np.zeros(2000), FS, spec), 0.0)


def test_resample_ratio_is_reduced():
    assert resample_ratio(512, 250) == Fraction(125, 256)
    assert resample_ratio(500, 250) == Fraction(1, 2)


def test_resample_unit_ratio_is_identity(rng):
    x = rng.standard_normal(1000)
    assert_array_equal(resample(x, 250, 250), x)


def test_resample_length_and_tone():
    x = sinusoid(5, 10, 512)
    y = resample(x, 512, 250)
    assert y.size == round(x.size * 250 / 512)
    spectrum = np.abs(np.fft.rfft(y)) * 2 / y.size
    frequencies = np.fft.rfftfreq(y.size, 1 / 250)
    assert frequencies[np.argmax(spectrum)] == pytest.approx(5.0)
    assert spectrum.max() == pytest.approx(1.0, rel=0.02)


def test_resample_suppresses_aliases():
    y = _steady(resample(sinusoid(120, 10, 512), 512, 250), 250, 0.2)
    power = np.abs(np.fft.rfft(y * np.hanning(y.size))) ** 2
    frequencies = np.fft.rfftfreq(y.size, 1 / 250)
    off_tone = power[np.abs(frequencies - 120) > 2].sum()
    assert off_tone < 0.01 * power.sum()


def test_upsampling_is_refused():
    with pytest.raises(UpsamplingRequested):
        resample(np.zeros(100), 100, 250)


def test_segment_counts_and_discards_tail(rng):
    windows = segment(make_recording(rng, duration=125.0), 50)
    assert len(windows) == 2
    assert [w.window_index for w in windows] == [0, 1]
    assert windows[0].channels.shape == (5, 12500)
    assert window_count(13 * 3600 * 250, 50) == 936


def test_segment_preserves_samples(rng):
    recording = make_recording(rng, duration=20.0)
    windows = segment(recording, 5)
    assert_array_equal(windows[1].channels[2], recording.channels[2].samples[1250:2500])


def test_segment_errors(rng):
    with pytest.raises(WindowTooLong):
        segment(make_recording(rng, duration=30.0), 50)
    with pytest.raises(SignalError):
        segment(make_recording(rng, duration=30.0), 0.001)
    with pytest.raises(SignalError):
        segment(make_recording(rng, duration=30.0, sample_rate=512.0), 10)


def test_preprocess_recording_runs_full_chain(rng):
    n = 30 * 512
    channels = [Channel(label, 512.0, rng.standard_normal(n) + sinusoid(50, 30, 512))
                for label in ("C4-P4", "F4-C4")]
    prepared, steps = preprocess_recording(Recording("s1", "insomnia", channels), PreprocessConfig())
    assert {c.sample_rate for c in prepared.channels} == {250.0}
    assert all(c.samples.size == 30 * 250 for c in prepared.channels)
    assert any("resample 512 -> 250 Hz (ratio 125/256)" in step for step in steps)
    assert any("notch 50.0 Hz" in step for step in steps)
    assert prepared.class_label == "insomnia"


def test_preprocess_without_notch(rng):
    recording = make_recording(rng, duration=20.0)
    prepared, steps = preprocess_recording(recording, PreprocessConfig(notch_hz=None))
    assert not any("notch" in step for step in steps)
    assert_allclose(prepared.channels[0].samples.mean(), 0.0, atol=0.05)


@pytest.mark.parametrize("spec", [FilterSpec("highpass", 1.0), FilterSpec("notch", 50.0, q_factor=30.0)])
def test_filters_are_linear(rng, spec):
    x = rng.standard_normal(5000)
    y = rng.standard_normal(5000)
    filtered = {"highpass": highpass, "notch": notch}[spec.kind]
    combined = filtered(2.5 * x - 0.7 * y, FS, spec)
    assert_allclose(combined, 2.5 * filtered(x, FS, spec) - 0.7 * filtered(y, FS, spec), rtol=0, atol=1e-9)
