from datetime import datetime

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from edf_synth import SynthSignal, quantize, write_edf
from tools.edf_reader import (
    DegenerateScaling,
    EdfError,
    MalformedField,
    ManifestError,
    MissingChannel,
    TruncatedHeader,
    TruncatedRecords,
    load_manifest,
    parse_edf,
    read_edf,
    read_edf_header,
    select_channels,
    summarize_cohort,
)


def _signals(rng, n_records=10, rates=(256, 128)):
    return [
        SynthSignal(label=f"C{i + 3}-P4", samples_per_record=rate,
                    samples=rng.uniform(-400, 400, size=n_records * rate))
        for i, rate in enumerate(rates)
    ]


def test_round_trip_header_and_samples(rng):
    signals = _signals(rng)
    header, signal_headers, recording = parse_edf(write_edf(signals))

    assert header.n_signals == 2
    assert header.n_data_records == 10
    assert header.record_duration == 1.0
    assert header.header_bytes == 256 * 3
    assert header.start_datetime == datetime(2020, 1, 1, 22, 30, 0)
    assert [s.label for s in signal_headers] == ["C3-P4", "C4-P4"]
    assert [s.samples_per_record for s in signal_headers] == [256, 128]
    assert signal_headers[0].digital_min == -32768
    assert signal_headers[0].physical_max == 500.0

    step = 1000.0 / 65535.0
    for signal, channel in zip(signals, recording.channels):
        assert channel.sample_rate == signal.samples_per_record
        assert channel.samples.size == signal.samples.size
        assert np.max(np.abs(channel.samples - signal.samples)) <= step


def test_physical_mapping_is_affine(rng):
    signal = SynthSignal("Fp2-F4", 4, np.array([-500.0, 500.0, 0.0, 250.0]))
    _, _, recording = parse_edf(write_edf([signal]))
    digital = quantize(signal).astype(float)
    expected = -500.0 + (digital + 32768) * 1000.0 / 65535.0
    assert_allclose(recording.channels[0].samples, expected)
    assert recording.channels[0].samples[0] == pytest.approx(-500.0)
    assert recording.channels[0].samples[1] == pytest.approx(500.0)


def test_unknown_record_count_resolved_from_length(rng):
    data = write_edf(_signals(rng, n_records=7), n_records_field=-1)
    header, _, recording = parse_edf(data)
    assert header.n_data_records == -1
    assert recording.channels[0].samples.size == 7 * 256


def test_truncated_body_reports_recovered_records(rng):
    data = write_edf(_signals(rng, n_records=10))
    record_bytes = (256 + 128) * 2
    with pytest.raises(TruncatedRecords) as info:
        parse_edf(data[:768 + 4 * record_bytes + 100])
    assert info.value.recovered_records == 4
    assert info.value.declared_records == 10


def test_random_truncations_always_raise_typed_errors(rng):
    data = write_edf(_signals(rng, n_records=3, rates=(16, 8)))
    for cut in rng.integers(0, len(data), size=1000):
        with pytest.raises(EdfError):
            parse_edf(data[:cut])


def test_short_header_is_truncated_header():
    with pytest.raises(TruncatedHeader):
        parse_edf(b"0       " * 10)


def test_degenerate_digital_range(rng):
    signal = SynthSignal("C4-A1", 8, np.zeros(16), digital_min=0, digital_max=0)
    with pytest.raises(DegenerateScaling):
        parse_edf(write_edf([signal]))


def test_malformed_record_count(rng):
    data = bytearray(write_edf(_signals(rng)))
    data[236:244] = b"ten     "
    with pytest.raises(MalformedField) as info:
        parse_edf(bytes(data))
    assert info.value.field_name == "n_data_records"


def test_annotation_signal_is_excluded(rng):
    signals = _signals(rng, rates=(256,)) + [SynthSignal("EDF Annotations", 60, np.zeros(600))]
    _, signal_headers, recording = parse_edf(write_edf(signals, reserved="EDF+C"))
    assert len(signal_headers) == 2
    assert recording.labels == ["C3-P4"]


def test_edf_plus_sex_and_discontinuous_rejection(rng):
    _, _, recording = parse_edf(write_edf(_signals(rng), reserved="EDF+C", patient_info="P07 F 02-MAR-1961 X"))
    assert recording.sex == "F"
    assert recording.subject_id == "P07"
    with pytest.raises(MalformedField):
        parse_edf(write_edf(_signals(rng), reserved="EDF+D"))


def test_file_readers(tmp_path, rng):
    path = tmp_path / "rec.edf"
    path.write_bytes(write_edf(_signals(rng)))
    header, signals = read_edf_header(path)
    assert header.n_data_records == 10
    assert len(signals) == 2
    _, _, recording = read_edf(path, subject_id="ins1", class_label="insomnia")
    assert recording.subject_id == "ins1"
    assert recording.class_label == "insomnia"


def test_select_channels_orders_and_matches_loosely(rng):
    _, _, recording = parse_edf(write_edf(_signals(rng)))
    selected = select_channels(recording, ["c4-p4", "C3 - P4"])
    assert selected.labels == ["C4-P4", "C3-P4"]
    with pytest.raises(MissingChannel) as info:
        select_channels(recording, ["P4-O2"])
    assert info.value.label == "P4-O2"


def _manifest(tmp_path, rows):
    path = tmp_path / "manifest.csv"
    path.write_text("file_path,subject_id,class_label,age,sex\n" + "\n".join(rows) + "\n")
    return path


def test_load_manifest_resolves_relative_paths(tmp_path):
    entries = load_manifest(_manifest(tmp_path, ["a.edf,ins1,insomnia,40,F", "b.edf,n1,Control,,M"]))
    assert [e.file_path for e in entries] == [tmp_path / "a.edf", tmp_path / "b.edf"]
    assert [e.class_label for e in entries] == ["insomnia", "control"]
    assert entries[0].age == 40.0
    assert entries[1].age is None


@pytest.mark.parametrize(
    "rows",
    [
        ["a.edf,ins1,narcolepsy,,"],
        ["a.edf,ins1,insomnia,,", "a.edf,ins2,insomnia,,"],
    ],
)
def test_load_manifest_rejects_bad_rows(tmp_path, rows):
    with pytest.raises(ManifestError):
        load_manifest(_manifest(tmp_path, rows))


@pytest.mark.parametrize("content", ["", "\n", "file_path,subject_id,class_label\n"])
def test_empty_manifest_has_no_entries(tmp_path, content):
    path = tmp_path / "manifest.csv"
    path.write_text(content)
    assert load_manifest(path) == []


def test_summarize_cohort(tmp_path):
    entries = load_manifest(_manifest(tmp_path, ["a.edf,i1,insomnia,40,F", "b.edf,i2,insomnia,60,M",
                                                 "c.edf,n1,control,50,F"]))
    summary = summarize_cohort(entries)
    assert summary["n_subjects"] == 3
    assert summary["per_class"] == {"control": 1, "insomnia": 2}
    assert summary["sex"] == {"M": 1, "F": 2}
    assert summary["age_mean"] == pytest.approx(50.0)
    assert summary["age_std"] == pytest.approx(10.0)
    assert_array_equal(sorted(e.subject_id for e in entries), ["i1", "i2", "n1"])
