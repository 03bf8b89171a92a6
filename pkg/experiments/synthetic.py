"""
Synthetic EEG
Desk-scale stand-in cohort with a known, localized insomnia signature
"""

import logging
from typing import List, Sequence

import numpy as np
import scipy.signal as sps

from network.graph import CHANNELS
from tools.edf_reader import Channel, Recording

logger = logging.getLogger(__name__)

COUPLED_CHANNELS = ("C4-P4", "F4-C4")
BETA_BAND = (16.0, 30.0)
NOISE_SCALE_UV = 10.0
BETA_SNR = 4.0
MAINS_AMPLITUDE_UV = 5.0


def pink_noise(n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean unit-variance noise with a 1/f power spectrum"""
    spectrum = np.fft.rfft(rng.standard_normal(n_samples))
    frequencies = np.arange(spectrum.size, dtype=np.float64)
    frequencies[0] = np.inf
    noise = np.fft.irfft(spectrum / np.sqrt(frequencies), n=n_samples)
    return (noise - noise.mean()) / noise.std()


def band_limited_noise(n_samples: int, sample_rate: float, band: Sequence[float],
                       rng: np.random.Generator) -> np.ndarray:
    """Unit-variance white noise passed through a zero-phase band-pass"""
    sos = sps.butter(6, band, btype="bandpass", fs=sample_rate, output="sos")
    signal = sps.sosfiltfilt(sos, rng.standard_normal(n_samples))
    return signal / signal.std()


def _band_variance(x: np.ndarray, sample_rate: float, band: Sequence[float]) -> float:
    sos = sps.butter(6, band, btype="bandpass", fs=sample_rate, output="sos")
    return float(sps.sosfiltfilt(sos, x).var())


def _synth_subject(subject_id: str, class_label: str, n_samples: int, sample_rate: float, mains_hz: float,
                   coupled: Sequence[str], match_control_power: bool, seed_seq: np.random.SeedSequence) -> Recording:
    rng = np.random.default_rng(seed_seq)
    t = np.arange(n_samples) / sample_rate
    background = {label: pink_noise(n_samples, rng) for label in CHANNELS}
    shared_beta = band_limited_noise(n_samples, sample_rate, BETA_BAND, rng)
    gain = rng.uniform(0.9, 1.1)

    channels = []
    for label in CHANNELS:
        x = background[label]
        if label in coupled:
            beta_gain = np.sqrt(BETA_SNR * _band_variance(x, sample_rate, BETA_BAND))
            if class_label == "insomnia":
                x = x + beta_gain * shared_beta
            elif match_control_power:
                x = x + beta_gain * band_limited_noise(n_samples, sample_rate, BETA_BAND, rng)
        x = NOISE_SCALE_UV * gain * x
        if mains_hz:
            x = x + MAINS_AMPLITUDE_UV * np.sin(2 * np.pi * mains_hz * t + rng.uniform(0, 2 * np.pi))
        channels.append(Channel(label=label, sample_rate=sample_rate, samples=x))
    return Recording(subject_id=subject_id, class_label=class_label, channels=tuple(channels))


def synth_dataset(n_subjects_per_class: int = 8, duration: float = 600.0, seed: int = 0,
                  sample_rate: float = 512.0, mains_hz: float = 50.0,
                  coupled_channels: Sequence[str] = COUPLED_CHANNELS,
                  match_control_power: bool = False) -> List[Recording]:
    """
    Generate a two-class cohort of raw recordings

    Control subjects carry independent pink noise on every channel. Insomnia
    subjects additionally share one 16-30 Hz component across the coupled
    channels, raising both their beta power and their mutual coherence.

    Args:
        n_subjects_per_class: Subjects per class
        duration: Recording length in seconds
        seed: Seed of the whole cohort
        sample_rate: Sampling rate of the generated recordings
        mains_hz: Mains-hum frequency added to every channel (0 disables it)
        coupled_channels: Channels receiving the shared beta component
        match_control_power: Give control subjects independent beta components of
            the same power so coupling is the only class cue

    Returns:
        List of Recording, control subjects first
    """
    if n_subjects_per_class < 1:
        raise ValueError(f"Need at least one subject per class, got {n_subjects_per_class}")
    unknown = set(coupled_channels) - set(CHANNELS)
    if unknown:
        raise ValueError(f"Coupled channels {sorted(unknown)} are not graph channels")

    n_samples = int(round(duration * sample_rate))
    seeds = np.random.SeedSequence(seed).spawn(2 * n_subjects_per_class)
    recordings = []
    for c, class_label in enumerate(("control", "insomnia")):
        for i in range(n_subjects_per_class):
            recordings.append(
                _synth_subject(
                    subject_id=f"synth-{class_label}-{i + 1:02d}",
                    class_label=class_label,
                    n_samples=n_samples,
                    sample_rate=sample_rate,
                    mains_hz=mains_hz,
                    coupled=tuple(coupled_channels),
                    match_control_power=match_control_power,
                    seed_seq=seeds[c * n_subjects_per_class + i],
                )
            )
    logger.info(
        f"Generated {len(recordings)} synthetic recordings ({duration:g} s at {sample_rate:g} Hz, "
        f"coupling on {', '.join(coupled_channels)})"
    )
    return recordings
