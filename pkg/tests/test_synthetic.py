import numpy as np
import pytest
from numpy.testing import assert_array_equal

from experiments.synthetic import BETA_BAND, pink_noise, synth_dataset
from network.graph import CHANNELS
from tools.spectral import band_mask, band_power, msc, welch_psd

FS = 250.0


@pytest.fixture(scope="module")
def cohort():
    return synth_dataset(n_subjects_per_class=1, duration=60.0, seed=11, sample_rate=FS, mains_hz=0.0)


def _beta_coherence(recording, a, b):
    coherence = msc(recording.channel(a).samples, recording.channel(b).samples, FS)
    return float(coherence.values[band_mask(coherence.frequencies, (18.0, 28.0))].mean())


def _beta_power(recording, label):
    return band_power(welch_psd(recording.channel(label).samples, FS), BETA_BAND)


def test_pink_noise_is_standardized(rng):
    noise = pink_noise(20000, rng)
    assert noise.mean() == pytest.approx(0.0, abs=1e-9)
    assert noise.std() == pytest.approx(1.0)
    psd = welch_psd(noise, FS)
    # mean density falls roughly twentyfold from 3 Hz to 60 Hz
    assert band_power(psd, (2, 4)) / 2 > 5 * band_power(psd, (40, 80)) / 40


def test_cohort_layout(cohort):
    assert [r.subject_id for r in cohort] == ["synth-control-01", "synth-insomnia-01"]
    assert [r.class_label for r in cohort] == ["control", "insomnia"]
    for recording in cohort:
        assert recording.labels == list(CHANNELS)
        assert {c.sample_rate for c in recording.channels} == {FS}
        assert {c.samples.size for c in recording.channels} == {int(60 * FS)}


def test_generation_is_seeded():
    first = synth_dataset(1, duration=10.0, seed=3)
    second = synth_dataset(1, duration=10.0, seed=3)
    other = synth_dataset(1, duration=10.0, seed=4)
    assert_array_equal(first[1].channels[2].samples, second[1].channels[2].samples)
    assert not np.array_equal(first[1].channels[2].samples, other[1].channels[2].samples)


def test_insomnia_couples_the_central_channels(cohort):
    control, insomnia = cohort
    assert _beta_coherence(insomnia, "C4-P4", "F4-C4") > 0.4
    assert _beta_coherence(control, "C4-P4", "F4-C4") < 0.2
    assert _beta_coherence(insomnia, "Fp2-F4", "P4-O2") < 0.2


def test_insomnia_raises_central_beta_power(cohort):
    control, insomnia = cohort
    assert _beta_power(insomnia, "C4-P4") > 2.5 * _beta_power(control, "C4-P4")


def test_matched_power_leaves_coupling_as_the_only_cue():
    control, insomnia = synth_dataset(1, duration=60.0, seed=11, sample_rate=FS, mains_hz=0.0,
                                      match_control_power=True)
    ratio = _beta_power(insomnia, "C4-P4") / _beta_power(control, "C4-P4")
    assert 0.5 < ratio < 2.0
    assert _beta_coherence(control, "C4-P4", "F4-C4") < 0.2
    assert _beta_coherence(insomnia, "C4-P4", "F4-C4") > 0.4


def test_mains_hum_is_added():
    control = synth_dataset(1, duration=20.0, seed=1, sample_rate=512.0)[0]
    psd = welch_psd(control.channel("C4-A1").samples, 512.0)
    assert band_power(psd, (49, 51)) > band_power(psd, (45, 47))


def test_invalid_arguments():
    with pytest.raises(ValueError):
        synth_dataset(0)
    with pytest.raises(ValueError):
        synth_dataset(1, duration=10.0, coupled_channels=("O1-A2",))
