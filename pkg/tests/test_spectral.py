import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import sinusoid
from tools.spectral import (
    BAND_NAMES,
    EmptyBand,
    InvalidBand,
    SegmentTooLong,
    TooFewSegments,
    WelchParams,
    band_mask,
    band_power,
    band_powers,
    clipped_bands,
    coherence_matrix,
    cross_spectrum,
    msc,
    welch_psd,
)

FS = 250.0


def test_welch_params_segments():
    params = WelchParams()
    assert params.segment_samples(FS) == (500, 250)
    assert params.n_segments(2500, FS) == 9
    assert params.n_segments(499, FS) == 0


def test_sinusoid_power_sits_in_alpha():
    psd = welch_psd(sinusoid(10, 50, FS), FS)
    alpha = band_power(psd, (8, 13))
    total = band_power(psd, (0.5, FS / 2))
    assert alpha >= 0.95 * total
    # a unit sinusoid carries variance 1/2
    assert alpha == pytest.approx(0.5, rel=0.05)
    others = [p for name, p in zip(BAND_NAMES, band_powers(psd)) if name != "alpha"]
    assert band_powers(psd)[BAND_NAMES.index("alpha")] >= 20 * max(others)


def test_zero_signal_has_zero_psd():
    psd = welch_psd(np.zeros(5000), FS)
    assert_array_equal(psd.values, 0.0)
    assert_array_equal(band_powers(psd), 0.0)


def test_white_noise_parseval(rng):
    x = rng.standard_normal(int(120 * FS))
    psd = welch_psd(x, FS)
    assert band_power(psd, (0.0, FS / 2)) == pytest.approx(np.var(x), rel=0.05)
    assert psd.resolution == pytest.approx(0.5)


def test_segment_longer_than_signal():
    with pytest.raises(SegmentTooLong):
        welch_psd(np.zeros(100), FS)


def test_msc_of_signal_with_itself(rng):
    x = rng.standard_normal(int(60 * FS))
    coherence = msc(x, x, FS)
    powered = welch_psd(x, FS).values > 1e-20
    assert_allclose(coherence.values[powered], 1.0, atol=1e-9)


def test_msc_of_independent_noise(rng):
    a = rng.standard_normal(int(60 * FS))
    b = rng.standard_normal(int(60 * FS))
    coherence = msc(a, b, FS)
    assert coherence.n_segments_averaged >= 30
    assert coherence.values.mean() < 0.15
    assert np.all((coherence.values >= 0) & (coherence.values <= 1))


def test_msc_of_delayed_copy(rng):
    x = rng.standard_normal(int(60 * FS))
    y = np.roll(x, int(0.02 * FS))
    coherence = msc(x, y, FS)
    mask = band_mask(coherence.frequencies, (1, 45))
    assert coherence.values[mask].min() > 0.9


def test_msc_needs_two_segments(rng):
    x = rng.standard_normal(int(2.5 * FS))
    with pytest.raises(TooFewSegments):
        msc(x, x, FS)


def test_cross_spectrum_of_signal_with_itself_is_psd(rng):
    x = rng.standard_normal(int(20 * FS))
    assert_allclose(np.real(cross_spectrum(x, x, FS).values), welch_psd(x, FS).values, rtol=1e-10, atol=1e-15)


def test_band_power_errors_and_clipping():
    psd = welch_psd(sinusoid(10, 20, FS), FS)
    with pytest.raises(InvalidBand):
        band_power(psd, (5, 5))
    with pytest.raises(EmptyBand):
        band_power(psd, (200, 300))
    assert band_power(psd, (30, 150)) == pytest.approx(band_power(psd, (30, 125)))
    assert clipped_bands(FS) == [{"band": "gamma", "requested": [30.0, 150.0], "integrated": [30.0, 125.0]}]
    assert clipped_bands(512) == []


def test_coherence_matrix(rng):
    shared = rng.standard_normal(int(20 * FS))
    data = np.stack([shared, shared + 0.1 * rng.standard_normal(shared.size), rng.standard_normal(shared.size)])
    matrix = coherence_matrix(data, FS, WelchParams(), (1, 45))
    assert_allclose(matrix, matrix.T)
    assert_allclose(np.diag(matrix), 1.0)
    assert matrix[0, 1] > 0.9
    assert matrix[0, 2] < 0.3


def test_psd_scales_with_amplitude_squared(rng):
    x = rng.standard_normal(int(20 * FS))
    base = welch_psd(x, FS)
    scaled = welch_psd(3.0 * x, FS)
    assert_allclose(scaled.values, 9.0 * base.values, rtol=1e-12, atol=0)


def test_coherence_is_symmetric(rng):
    shared = rng.standard_normal(int(30 * FS))
    a = shared + rng.standard_normal(shared.size)
    b = 0.5 * shared + rng.standard_normal(shared.size)
    assert_allclose(msc(a, b, FS).values, msc(b, a, FS).values, rtol=0, atol=1e-12)
