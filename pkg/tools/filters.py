"""
Signal Filtering Tool
High-pass and notch filtering, rational resampling and fixed-length windowing
"""

import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np
from scipy import signal as sps

from tools.edf_reader import Channel, Recording

logger = logging.getLogger(__name__)

TARGET_RATE = 250.0
WINDOW_LENGTHS = (10, 30, 50, 70, 90)


class SignalError(ValueError):
    """Base class for filtering, resampling and spectral errors"""


class InvalidCutoff(SignalError):
    pass


class UpsamplingRequested(SignalError):
    pass


class WindowTooLong(SignalError):
    pass


@dataclass(frozen=True)
class FilterSpec:
    kind: str
    frequency: float
    q_factor: float = 30.0
    order: int = 4

    def __post_init__(self):
        if self.kind not in ("highpass", "notch"):
            raise SignalError(f"Unknown filter kind '{self.kind}'")

    def validate(self, sample_rate: float) -> None:
        nyquist = sample_rate / 2.0
        if not 0.0 < self.frequency < nyquist:
            raise InvalidCutoff(
                f"{self.kind} frequency {self.frequency} Hz outside (0, {nyquist}) Hz at {sample_rate} Hz"
            )

    def describe(self) -> str:
        if self.kind == "highpass":
            return f"highpass {self.frequency} Hz, Butterworth order {self.order}, zero phase"
        return f"notch {self.frequency} Hz, Q={self.q_factor}, zero phase"


@dataclass(frozen=True)
class PreprocessConfig:
    highpass_hz: float = 1.0
    highpass_order: int = 4
    notch_hz: Optional[float] = 50.0
    notch_q: float = 30.0
    target_rate: float = TARGET_RATE


@dataclass(frozen=True)
class EpochWindow:
    """One non-overlapping segment of all channels"""
    subject_id: str
    class_label: Optional[str]
    window_index: int
    duration: float
    labels: Tuple[str, ...]
    channels: np.ndarray
    sample_rate: float = TARGET_RATE

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]


def highpass(x: np.ndarray, sample_rate: float, spec: FilterSpec) -> np.ndarray:
    """Butterworth high-pass applied forward-backward"""
    spec.validate(sample_rate)
    sos = sps.butter(spec.order, spec.frequency, btype="highpass", fs=sample_rate, output="sos")
    return sps.sosfiltfilt(sos, np.asarray(x, dtype=np.float64))


def notch(x: np.ndarray, sample_rate: float, spec: FilterSpec) -> np.ndarray:
    """Second-order IIR notch applied forward-backward"""
    spec.validate(sample_rate)
    b, a = sps.iirnotch(spec.frequency, spec.q_factor, fs=sample_rate)
    return sps.filtfilt(b, a, np.asarray(x, dtype=np.float64))


def resample_ratio(from_hz: float, to_hz: float) -> Fraction:
    """Reduced up/down ratio, e.g. 512 -> 250 Hz gives 125/256"""
    return Fraction(to_hz).limit_denominator(100000) / Fraction(from_hz).limit_denominator(100000)


def resample(x: np.ndarray, from_hz: float, to_hz: float = TARGET_RATE) -> np.ndarray:
    """
    Polyphase rational downsampling

    Args:
        x: Input samples
        from_hz: Current sample rate
        to_hz: Target sample rate (must not exceed from_hz)

    Returns:
        Samples at to_hz, length round(len(x) * to_hz / from_hz)
    """
    x = np.asarray(x, dtype=np.float64)
    if from_hz < to_hz:
        raise UpsamplingRequested(f"Cannot resample from {from_hz} Hz up to {to_hz} Hz")
    if from_hz == to_hz:
        return x.copy()

    ratio = resample_ratio(from_hz, to_hz)
    # resample_poly designs its anti-alias low-pass at the lower Nyquist
    y = sps.resample_poly(x, ratio.numerator, ratio.denominator)
    target_length = int(round(x.size * to_hz / from_hz))
    return y[:target_length]


def preprocess_recording(recording: Recording, config: PreprocessConfig) -> Tuple[Recording, List[str]]:
    """
    Filter -> notch -> downsample every channel of a recording

    Returns:
        Tuple of (recording at config.target_rate, descriptions of the steps applied)
    """
    channels = []
    steps: List[str] = []
    hp_spec = FilterSpec("highpass", config.highpass_hz, order=config.highpass_order)
    notch_spec = FilterSpec("notch", config.notch_hz, q_factor=config.notch_q) if config.notch_hz else None

    for channel in recording.channels:
        x = highpass(channel.samples, channel.sample_rate, hp_spec)
        channel_steps = [hp_spec.describe()]
        if notch_spec is not None:
            x = notch(x, channel.sample_rate, notch_spec)
            channel_steps.append(notch_spec.describe())
        if channel.sample_rate != config.target_rate:
            ratio = resample_ratio(channel.sample_rate, config.target_rate)
            x = resample(x, channel.sample_rate, config.target_rate)
            channel_steps.append(
                f"resample {channel.sample_rate:g} -> {config.target_rate:g} Hz "
                f"(ratio {ratio.numerator}/{ratio.denominator})"
            )
        channels.append(Channel(label=channel.label, sample_rate=config.target_rate, samples=x))
        steps.extend(f"{channel.label}: {step}" for step in channel_steps)

    logger.info(f"Preprocessed {len(channels)} channels of subject {recording.subject_id}")
    return replace(recording, channels=tuple(channels)), steps


def segment(recording: Recording, window_seconds: float,
            sample_rate: float = TARGET_RATE) -> List[EpochWindow]:
    """
    Cut a recording into consecutive non-overlapping windows

    The trailing partial window is discarded.
    """
    if window_seconds <= 0:
        raise SignalError(f"Window length must be positive, got {window_seconds}")
    rates = {channel.sample_rate for channel in recording.channels}
    if rates != {sample_rate}:
        raise SignalError(f"All channels must be at {sample_rate} Hz before segmentation, found {sorted(rates)}")
    lengths = {channel.samples.size for channel in recording.channels}
    if len(lengths) != 1:
        raise SignalError(f"Channels differ in length: {sorted(lengths)}")

    window_length = int(round(window_seconds * sample_rate))
    if abs(window_length - window_seconds * sample_rate) > 1e-9:
        raise SignalError(f"{window_seconds} s is not a whole number of samples at {sample_rate} Hz")
    total = lengths.pop()
    n_windows = total // window_length
    if n_windows == 0:
        raise WindowTooLong(
            f"Recording of subject {recording.subject_id} lasts {total / sample_rate:.1f} s, "
            f"shorter than one {window_seconds} s window"
        )

    data = np.stack([channel.samples[:n_windows * window_length] for channel in recording.channels])
    blocks = data.reshape(len(recording.channels), n_windows, window_length)
    labels = tuple(recording.labels)
    windows = []
    for index in range(n_windows):
        block = np.ascontiguousarray(blocks[:, index, :])
        block.setflags(write=False)
        windows.append(
            EpochWindow(
                subject_id=recording.subject_id,
                class_label=recording.class_label,
                window_index=index,
                duration=float(window_seconds),
                labels=labels,
                channels=block,
                sample_rate=sample_rate,
            )
        )
    logger.debug(f"Segmented subject {recording.subject_id} into {n_windows} x {window_seconds} s windows")
    return windows


def window_count(n_samples: int, window_seconds: float, sample_rate: float = TARGET_RATE) -> int:
    return n_samples // int(round(window_seconds * sample_rate))
