"""
Spectral Estimation Tool
Welch PSD, cross-spectra, magnitude-squared coherence and band power
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from scipy import signal as sps
from scipy.integrate import trapezoid

from tools.filters import SignalError

# Band order used throughout; Gamma's ceiling is clipped at Nyquist when needed
BANDS: Tuple[Tuple[str, float, float], ...] = (
    ("delta", 1.0, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 13.0),
    ("low_beta", 13.0, 16.0),
    ("high_beta", 16.0, 30.0),
    ("gamma", 30.0, 150.0),
)
BAND_NAMES = tuple(name for name, _, _ in BANDS)


class SegmentTooLong(SignalError):
    pass


class TooFewSegments(SignalError):
    pass


class EmptyBand(SignalError):
    pass


class InvalidBand(SignalError):
    pass


@dataclass(frozen=True)
class WelchParams:
    seg_seconds: float = 2.0
    overlap_fraction: float = 0.5
    taper: str = "hann"

    def segment_samples(self, sample_rate: float) -> Tuple[int, int]:
        nperseg = int(round(self.seg_seconds * sample_rate))
        noverlap = int(round(nperseg * self.overlap_fraction))
        return nperseg, noverlap

    def n_segments(self, n_samples: int, sample_rate: float) -> int:
        nperseg, noverlap = self.segment_samples(sample_rate)
        if n_samples < nperseg:
            return 0
        return 1 + (n_samples - nperseg) // (nperseg - noverlap)


@dataclass(frozen=True)
class SpectralEstimate:
    frequencies: np.ndarray
    values: np.ndarray
    n_segments_averaged: int

    @property
    def resolution(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0]) if self.frequencies.size > 1 else 0.0


def _check_params(params: WelchParams, n_samples: int, sample_rate: float) -> Tuple[int, int]:
    if not 0.0 <= params.overlap_fraction < 1.0:
        raise SignalError(f"Overlap fraction must lie in [0, 1), got {params.overlap_fraction}")
    nperseg, noverlap = params.segment_samples(sample_rate)
    if nperseg < 2:
        raise SignalError(f"Welch segment of {params.seg_seconds} s is too short at {sample_rate} Hz")
    if n_samples < nperseg:
        raise SegmentTooLong(
            f"Signal of {n_samples} samples is shorter than one {params.seg_seconds} s Welch segment"
        )
    return nperseg, noverlap


def welch_psd(x: np.ndarray, sample_rate: float, params: WelchParams = WelchParams()) -> SpectralEstimate:
    """
    One-sided Welch PSD with density scaling

    For a zero-mean signal the integral of the PSD over frequency equals the
    signal variance.
    """
    x = np.asarray(x, dtype=np.float64)
    nperseg, noverlap = _check_params(params, x.size, sample_rate)
    freqs, pxx = sps.welch(
        x, fs=sample_rate, window=params.taper, nperseg=nperseg, noverlap=noverlap,
        scaling="density", return_onesided=True,
    )
    return SpectralEstimate(freqs, np.maximum(pxx, 0.0), params.n_segments(x.size, sample_rate))


def cross_spectrum(a: np.ndarray, b: np.ndarray, sample_rate: float,
                   params: WelchParams = WelchParams()) -> SpectralEstimate:
    """Complex Welch cross-spectral density S_ab"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise SignalError(f"Signals differ in length: {a.size} vs {b.size}")
    nperseg, noverlap = _check_params(params, a.size, sample_rate)
    freqs, pab = sps.csd(
        a, b, fs=sample_rate, window=params.taper, nperseg=nperseg, noverlap=noverlap,
        scaling="density", return_onesided=True,
    )
    return SpectralEstimate(freqs, pab, params.n_segments(a.size, sample_rate))


def _coherence_from_spectra(pab: np.ndarray, paa: np.ndarray, pbb: np.ndarray) -> np.ndarray:
    denominator = paa * pbb
    powered = denominator > 0
    coherence = np.zeros(denominator.shape, dtype=np.float64)
    coherence[powered] = np.abs(pab[powered]) ** 2 / denominator[powered]
    return np.clip(coherence, 0.0, 1.0)


def msc(a: np.ndarray, b: np.ndarray, sample_rate: float,
        params: WelchParams = WelchParams()) -> SpectralEstimate:
    """
    Magnitude-squared coherence |S_ab|^2 / (S_aa S_bb)

    Frequencies where either signal has no power get coherence 0.
    """
    a = np.asarray(a, dtype=np.float64)
    n_segments = params.n_segments(a.size, sample_rate)
    if n_segments < 2:
        raise TooFewSegments(f"Coherence needs at least 2 Welch segments, signal yields {n_segments}")
    pab = cross_spectrum(a, b, sample_rate, params)
    paa = welch_psd(a, sample_rate, params)
    pbb = welch_psd(b, sample_rate, params)
    return SpectralEstimate(pab.frequencies, _coherence_from_spectra(pab.values, paa.values, pbb.values), n_segments)


def band_mask(frequencies: np.ndarray, band: Tuple[float, float]) -> np.ndarray:
    f_lo, f_hi = band
    return (frequencies >= f_lo) & (frequencies <= f_hi)


def coherence_matrix(data: np.ndarray, sample_rate: float, params: WelchParams,
                     band: Tuple[float, float]) -> np.ndarray:
    """
    Band-averaged MSC for every channel pair of a window

    Args:
        data: Array [n_channels x n_samples]
        band: (f_lo, f_hi) range the per-frequency MSC is averaged over

    Returns:
        Symmetric [n_channels x n_channels] matrix with unit diagonal
    """
    data = np.asarray(data, dtype=np.float64)
    n_channels = data.shape[0]
    n_segments = params.n_segments(data.shape[1], sample_rate)
    if n_segments < 2:
        raise TooFewSegments(f"Coherence needs at least 2 Welch segments, window yields {n_segments}")

    auto = [welch_psd(row, sample_rate, params) for row in data]
    mask = band_mask(auto[0].frequencies, band)
    if not mask.any():
        raise EmptyBand(f"No frequency bins inside coherence band {band}")

    result = np.eye(n_channels)
    for i in range(n_channels):
        for j in range(i + 1, n_channels):
            pab = cross_spectrum(data[i], data[j], sample_rate, params)
            coherence = _coherence_from_spectra(pab.values, auto[i].values, auto[j].values)
            result[i, j] = result[j, i] = float(coherence[mask].mean())
    return result


def band_power(psd: SpectralEstimate, band: Tuple[float, float]) -> float:
    """
    Trapezoidal integral of a PSD over [f_lo, f_hi), clipped at Nyquist

    Raises:
        InvalidBand: f_lo >= f_hi
        EmptyBand: band lies entirely above Nyquist
    """
    f_lo, f_hi = band
    if f_lo >= f_hi:
        raise InvalidBand(f"Band lower edge {f_lo} must be below upper edge {f_hi}")
    nyquist = float(psd.frequencies[-1])
    if f_lo >= nyquist:
        raise EmptyBand(f"Band [{f_lo}, {f_hi}) lies above Nyquist {nyquist} Hz")
    mask = band_mask(psd.frequencies, (f_lo, min(f_hi, nyquist)))
    if mask.sum() < 2:
        return 0.0
    return float(trapezoid(np.real(psd.values[mask]), psd.frequencies[mask]))


def clipped_bands(sample_rate: float) -> List[Dict]:
    """Bands whose upper edge exceeds Nyquist, with the limits actually integrated"""
    nyquist = sample_rate / 2.0
    return [
        {"band": name, "requested": [f_lo, f_hi], "integrated": [f_lo, nyquist]}
        for name, f_lo, f_hi in BANDS
        if f_hi > nyquist
    ]


def band_powers(psd: SpectralEstimate) -> np.ndarray:
    """Power in each of the six named bands, in BANDS order"""
    return np.array([band_power(psd, (f_lo, f_hi)) for _, f_lo, f_hi in BANDS])
