"""Test-only EDF/EDF+ byte writer"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass
class SynthSignal:
    label: str
    samples_per_record: int
    samples: np.ndarray
    physical_min: float = -500.0
    physical_max: float = 500.0
    digital_min: int = -32768
    digital_max: int = 32767
    dimension: str = "uV"


def _field(value, width: int) -> bytes:
    text = value if isinstance(value, str) else f"{value:g}"
    return text[:width].ljust(width).encode("latin-1")


def quantize(signal: SynthSignal) -> np.ndarray:
    span = (signal.digital_max - signal.digital_min) / (signal.physical_max - signal.physical_min)
    digital = np.round((np.asarray(signal.samples) - signal.physical_min) * span + signal.digital_min)
    return np.clip(digital, signal.digital_min, signal.digital_max).astype("<i2")


def write_edf(signals: Sequence[SynthSignal], record_duration: float = 1.0,
              patient_info: str = "X M 01-JAN-1970 Test", reserved: str = "",
              n_records_field: Optional[int] = None, start_date: str = "01.01.20",
              start_time: str = "22.30.00") -> bytes:
    """Encode signals as EDF bytes; each signal must hold a whole number of records"""
    n_records = len(signals[0].samples) // signals[0].samples_per_record
    for signal in signals:
        if len(signal.samples) != n_records * signal.samples_per_record:
            raise ValueError(f"{signal.label} does not fill {n_records} whole records")

    ns = len(signals)
    head = b"".join([
        _field("0", 8),
        _field(patient_info, 80),
        _field("Startdate 01-JAN-2020 X X X", 80),
        _field(start_date, 8),
        _field(start_time, 8),
        _field(str(256 + 256 * ns), 8),
        _field(reserved, 44),
        _field(str(n_records if n_records_field is None else n_records_field), 8),
        _field(record_duration, 8),
        _field(str(ns), 4),
    ])
    columns = [
        [_field(s.label, 16) for s in signals],
        [_field("AgAgCl electrode", 80) for _ in signals],
        [_field(s.dimension, 8) for s in signals],
        [_field(s.physical_min, 8) for s in signals],
        [_field(s.physical_max, 8) for s in signals],
        [_field(str(s.digital_min), 8) for s in signals],
        [_field(str(s.digital_max), 8) for s in signals],
        [_field("HP:0.1Hz", 80) for _ in signals],
        [_field(str(s.samples_per_record), 8) for s in signals],
        [_field("", 32) for _ in signals],
    ]
    signal_header = b"".join(b"".join(column) for column in columns)

    digital = [quantize(s).reshape(n_records, s.samples_per_record) for s in signals]
    body = np.concatenate(digital, axis=1).astype("<i2").tobytes()
    return head + signal_header + body


def graph_channel_edf(rng: np.random.Generator, seconds: int, rate: int = 500,
                      labels: Sequence[str] = ("Fp2-F4", "F4-C4", "C4-P4", "P4-O2", "C4-A1"),
                      n_records_field: Optional[int] = None) -> bytes:
    """One-second records of noise on each label"""
    signals = [SynthSignal(label, rate, rng.uniform(-100, 100, size=seconds * rate)) for label in labels]
    return write_edf(signals, n_records_field=n_records_field)
