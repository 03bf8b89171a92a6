"""
EDF Reader Tool
Parses European Data Format recordings into physical-unit channel series
"""

import logging
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import BinaryIO, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

CLASS_LABELS = ("control", "insomnia")
ANNOTATION_LABEL = "EDF Annotations"

# (name, width) of the fixed 256-byte header
_HEADER_FIELDS = (
    ("version", 8),
    ("patient_info", 80),
    ("recording_info", 80),
    ("start_date", 8),
    ("start_time", 8),
    ("header_bytes", 8),
    ("reserved", 44),
    ("n_data_records", 8),
    ("record_duration", 8),
    ("n_signals", 4),
)

# per-signal fields, each stored as n_signals consecutive entries
_SIGNAL_FIELDS = (
    ("label", 16),
    ("transducer", 80),
    ("physical_dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefiltering", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
)


class EdfError(ValueError):
    """Base class for EDF parsing and channel selection errors"""


class TruncatedHeader(EdfError):
    pass


class MalformedField(EdfError):
    def __init__(self, field_name: str, raw: str = "", reason: str = ""):
        self.field_name = field_name
        self.raw = raw
        detail = reason or f"could not parse {raw!r}"
        super().__init__(f"Malformed EDF field '{field_name}': {detail}")


class DegenerateScaling(EdfError):
    pass


class TruncatedRecords(EdfError):
    def __init__(self, recovered_records: int, declared_records: int):
        self.recovered_records = recovered_records
        self.declared_records = declared_records
        super().__init__(
            f"Data stream ends mid-record: recovered {recovered_records} of "
            f"{declared_records} data records"
        )


class MissingChannel(EdfError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"Channel '{label}' not found in recording")


class ManifestError(EdfError):
    pass


@dataclass(frozen=True)
class EdfHeader:
    version: str
    patient_info: str
    recording_info: str
    start_datetime: datetime
    header_bytes: int
    n_data_records: int
    record_duration: float
    n_signals: int
    reserved: str = ""

    @property
    def is_edf_plus(self) -> bool:
        return self.reserved.startswith("EDF+")


@dataclass(frozen=True)
class SignalHeader:
    label: str
    transducer: str
    physical_dimension: str
    physical_min: float
    physical_max: float
    digital_min: int
    digital_max: int
    prefiltering: str
    samples_per_record: int
    reserved: str = ""

    @property
    def is_annotation(self) -> bool:
        return self.label == ANNOTATION_LABEL

    def to_physical(self, digital: np.ndarray) -> np.ndarray:
        """Linear digital -> physical map of the EDF standard"""
        gain = (self.physical_max - self.physical_min) / (self.digital_max - self.digital_min)
        return self.physical_min + (digital.astype(np.float64) - self.digital_min) * gain


@dataclass(frozen=True)
class Channel:
    label: str
    sample_rate: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise EdfError(f"Channel '{self.label}' must hold a nonempty 1-D sample sequence")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class Recording:
    """Labelled multi-channel EEG recording in physical units"""
    subject_id: str
    class_label: Optional[str]
    channels: Tuple[Channel, ...]
    age: Optional[float] = None
    sex: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if self.class_label is not None and self.class_label not in CLASS_LABELS:
            raise EdfError(f"Unknown class label '{self.class_label}' (expected one of {CLASS_LABELS})")

    @property
    def labels(self) -> List[str]:
        return [channel.label for channel in self.channels]

    def channel(self, label: str) -> Channel:
        wanted = normalize_label(label)
        for channel in self.channels:
            if normalize_label(channel.label) == wanted:
                return channel
        raise MissingChannel(label)

    def with_label(self, subject_id: str, class_label: Optional[str]) -> "Recording":
        return replace(self, subject_id=subject_id, class_label=class_label)


@dataclass(frozen=True)
class ManifestEntry:
    file_path: Path
    subject_id: str
    class_label: str
    age: Optional[float] = None
    sex: Optional[str] = None


def normalize_label(label: str) -> str:
    """Case-insensitive, whitespace-free channel label"""
    return "".join(label.split()).lower()


def _field_text(raw: bytes) -> str:
    return raw.decode("latin-1").rstrip(" \x00")


def _parse_int(name: str, text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise MalformedField(name, text) from None


def _parse_float(name: str, text: str) -> float:
    try:
        value = float(text.strip())
    except ValueError:
        raise MalformedField(name, text) from None
    if not np.isfinite(value):
        raise MalformedField(name, text, "value is not finite")
    return value


def _parse_start(date_text: str, time_text: str) -> datetime:
    try:
        day, month, year = (int(part) for part in date_text.strip().split("."))
        hour, minute, second = (int(part) for part in time_text.strip().split("."))
    except ValueError:
        raise MalformedField("start_datetime", f"{date_text} {time_text}") from None
    # EDF clipping date: yy >= 85 is 19yy
    year += 1900 if year >= 85 else 2000
    try:
        return datetime(year, month, day, hour, minute, second)
    except ValueError as e:
        raise MalformedField("start_datetime", f"{date_text} {time_text}", str(e)) from None


def _read_bytes(byte_source: Union[bytes, bytearray, BinaryIO, str, Path]) -> bytes:
    if isinstance(byte_source, (bytes, bytearray, memoryview)):
        return bytes(byte_source)
    if isinstance(byte_source, (str, Path)):
        return Path(byte_source).read_bytes()
    return byte_source.read()


def _parse_header(data: bytes) -> Tuple[EdfHeader, List[SignalHeader]]:
    if len(data) < 256:
        raise TruncatedHeader(f"EDF header needs 256 bytes, only {len(data)} available")

    raw = {}
    offset = 0
    for name, width in _HEADER_FIELDS:
        raw[name] = _field_text(data[offset:offset + width])
        offset += width

    n_signals = _parse_int("n_signals", raw["n_signals"])
    if n_signals < 1:
        raise MalformedField("n_signals", raw["n_signals"], "at least one signal is required")
    expected_bytes = 256 + 256 * n_signals
    if len(data) < expected_bytes:
        raise TruncatedHeader(
            f"EDF header declares {n_signals} signals ({expected_bytes} bytes), "
            f"only {len(data)} available"
        )

    header_bytes = _parse_int("header_bytes", raw["header_bytes"])
    if header_bytes != expected_bytes:
        raise MalformedField(
            "header_bytes", raw["header_bytes"], f"expected {expected_bytes} for {n_signals} signals"
        )
    record_duration = _parse_float("record_duration", raw["record_duration"])
    if record_duration <= 0:
        raise MalformedField("record_duration", raw["record_duration"], "must be positive")
    n_data_records = _parse_int("n_data_records", raw["n_data_records"])
    if n_data_records < -1:
        raise MalformedField("n_data_records", raw["n_data_records"], "must be -1 or nonnegative")
    if raw["reserved"].startswith("EDF+D"):
        raise MalformedField("reserved", raw["reserved"], "discontinuous EDF+D files are not supported")

    header = EdfHeader(
        version=raw["version"],
        patient_info=raw["patient_info"],
        recording_info=raw["recording_info"],
        start_datetime=_parse_start(raw["start_date"], raw["start_time"]),
        header_bytes=header_bytes,
        n_data_records=n_data_records,
        record_duration=record_duration,
        n_signals=n_signals,
        reserved=raw["reserved"],
    )

    columns: Dict[str, List[str]] = {}
    for name, width in _SIGNAL_FIELDS:
        columns[name] = [
            _field_text(data[offset + i * width:offset + (i + 1) * width]) for i in range(n_signals)
        ]
        offset += width * n_signals

    signals = []
    for i in range(n_signals):
        label = columns["label"][i].strip()
        signal = SignalHeader(
            label=label,
            transducer=columns["transducer"][i],
            physical_dimension=columns["physical_dimension"][i],
            physical_min=_parse_float(f"{label}.physical_min", columns["physical_min"][i]),
            physical_max=_parse_float(f"{label}.physical_max", columns["physical_max"][i]),
            digital_min=_parse_int(f"{label}.digital_min", columns["digital_min"][i]),
            digital_max=_parse_int(f"{label}.digital_max", columns["digital_max"][i]),
            prefiltering=columns["prefiltering"][i],
            samples_per_record=_parse_int(f"{label}.samples_per_record", columns["samples_per_record"][i]),
            reserved=columns["reserved"][i],
        )
        if signal.digital_min == signal.digital_max:
            raise DegenerateScaling(f"Signal '{label}': digital_min equals digital_max ({signal.digital_min})")
        if signal.digital_min > signal.digital_max:
            raise MalformedField(f"{label}.digital_min", columns["digital_min"][i], "exceeds digital_max")
        if signal.physical_min == signal.physical_max:
            raise DegenerateScaling(f"Signal '{label}': physical_min equals physical_max ({signal.physical_min})")
        if signal.samples_per_record < 1:
            raise MalformedField(f"{label}.samples_per_record", columns["samples_per_record"][i], "must be >= 1")
        signals.append(signal)

    return header, signals


def _sex_from_patient_field(patient_info: str) -> Optional[str]:
    # EDF+ patient field: "code sex birthdate name"
    parts = patient_info.split()
    if len(parts) >= 2 and parts[1] in ("M", "F"):
        return parts[1]
    return None


def parse_edf(
    byte_source: Union[bytes, bytearray, BinaryIO, str, Path],
    subject_id: Optional[str] = None,
    class_label: Optional[str] = None,
) -> Tuple[EdfHeader, List[SignalHeader], Recording]:
    """
    Parse an EDF/EDF+ byte stream

    Args:
        byte_source: Raw bytes, a binary file object positioned at offset 0, or a path
        subject_id: Identifier from the manifest (defaults to the patient code)
        class_label: Diagnosis from the manifest, never inferred from the signals

    Returns:
        Tuple of (file header, signal headers, recording with annotation signals excluded)
    """
    data = _read_bytes(byte_source)
    header, signals = _parse_header(data)

    samples_per_record = np.array([s.samples_per_record for s in signals])
    record_size = int(samples_per_record.sum()) * 2
    body_length = len(data) - header.header_bytes
    whole_records = body_length // record_size

    if header.n_data_records == -1:
        n_records = whole_records
        logger.debug(f"Unknown record count resolved to {n_records} from byte length")
    else:
        n_records = header.n_data_records
        if whole_records < n_records:
            raise TruncatedRecords(whole_records, n_records)
    if n_records == 0:
        raise TruncatedRecords(0, header.n_data_records)

    body = data[header.header_bytes:header.header_bytes + n_records * record_size]
    digital = np.frombuffer(body, dtype="<i2").reshape(n_records, -1)
    offsets = np.concatenate(([0], np.cumsum(samples_per_record)))

    channels = []
    for i, signal in enumerate(signals):
        if signal.is_annotation:
            continue
        values = digital[:, offsets[i]:offsets[i + 1]].reshape(-1)
        channels.append(
            Channel(
                label=signal.label,
                sample_rate=signal.samples_per_record / header.record_duration,
                samples=signal.to_physical(values),
            )
        )

    recording = Recording(
        subject_id=subject_id if subject_id is not None else (header.patient_info.split() or ["unknown"])[0],
        class_label=class_label,
        channels=tuple(channels),
        sex=_sex_from_patient_field(header.patient_info) if header.is_edf_plus else None,
    )
    logger.info(f"Parsed {len(channels)} signals x {n_records} records for subject {recording.subject_id}")
    return header, signals, recording


def read_edf(path: Union[str, Path], subject_id: Optional[str] = None,
             class_label: Optional[str] = None) -> Tuple[EdfHeader, List[SignalHeader], Recording]:
    with open(path, "rb") as f:
        return parse_edf(f, subject_id=subject_id, class_label=class_label)


def read_edf_header(path: Union[str, Path]) -> Tuple[EdfHeader, List[SignalHeader]]:
    """Read only the header block, without loading any samples"""
    with open(path, "rb") as f:
        head = f.read(256)
        if len(head) < 256:
            raise TruncatedHeader(f"EDF header needs 256 bytes, only {len(head)} available")
        n_signals = _parse_int("n_signals", _field_text(head[252:256]))
        rest = f.read(256 * max(n_signals, 0))
    return _parse_header(head + rest)


def select_channels(recording: Recording, wanted_labels: Sequence[str]) -> Recording:
    """
    Keep only the wanted channels, in the order given

    Label matching ignores case and whitespace. Raises MissingChannel naming the
    first wanted label that is absent.
    """
    if not wanted_labels:
        raise EdfError("wanted_labels must not be empty")
    selected = tuple(recording.channel(label) for label in wanted_labels)
    return replace(recording, channels=selected)


def load_manifest(path: Union[str, Path]) -> List[ManifestEntry]:
    """
    Load the sidecar manifest

    Args:
        path: CSV with header row `file_path,subject_id,class_label` (optional `age,sex`)

    Returns:
        List of manifest entries with paths resolved against the manifest directory.
        A blank file and a header-only file both yield an empty list.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype={"file_path": str, "subject_id": str, "class_label": str})
    except pd.errors.EmptyDataError:
        logger.warning(f"Manifest {path} is blank")
        return []

    required = ["file_path", "subject_id", "class_label"]
    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise ManifestError(f"Manifest {path} is missing columns: {', '.join(missing)}")

    entries = []
    seen = set()
    for row in frame.itertuples(index=False):
        file_path = Path(str(row.file_path).strip())
        if not file_path.is_absolute():
            file_path = path.parent / file_path
        if file_path in seen:
            raise ManifestError(f"Duplicate manifest entry for {file_path}")
        seen.add(file_path)

        class_label = str(row.class_label).strip().lower()
        if class_label not in CLASS_LABELS:
            raise ManifestError(f"Unknown class label '{row.class_label}' for {file_path}")

        age = getattr(row, "age", None)
        sex = getattr(row, "sex", None)
        entries.append(
            ManifestEntry(
                file_path=file_path,
                subject_id=str(row.subject_id).strip(),
                class_label=class_label,
                age=None if age is None or pd.isna(age) else float(age),
                sex=None if sex is None or pd.isna(sex) else str(sex).strip().upper(),
            )
        )
    return entries


def load_recording(entry: ManifestEntry) -> Recording:
    """Read the EDF behind a manifest entry and attach its label and metadata"""
    _, _, recording = read_edf(entry.file_path, subject_id=entry.subject_id, class_label=entry.class_label)
    return replace(
        recording,
        age=entry.age if entry.age is not None else recording.age,
        sex=entry.sex if entry.sex is not None else recording.sex,
    )


def summarize_cohort(entries: Sequence[ManifestEntry]) -> Dict:
    """Subject counts per class, sex counts and age statistics"""
    subjects = {entry.subject_id: entry for entry in entries}
    ages = np.array([e.age for e in subjects.values() if e.age is not None], dtype=float)
    summary = {
        "n_subjects": len(subjects),
        "per_class": {label: sum(e.class_label == label for e in subjects.values()) for label in CLASS_LABELS},
        "sex": {
            "M": sum(e.sex == "M" for e in subjects.values()),
            "F": sum(e.sex == "F" for e in subjects.values()),
        },
        "age_mean": float(ages.mean()) if ages.size else None,
        "age_std": float(ages.std(ddof=1)) if ages.size > 1 else None,
    }
    return summary
