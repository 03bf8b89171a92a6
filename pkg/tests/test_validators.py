import pytest

from config import RunConfig, apply_ini, apply_overrides
from edf_synth import graph_channel_edf
from tools.edf_reader import ManifestEntry
from validators import ConfigValidator, RecordingValidator


def _entry(tmp_path, name, payload, subject_id="s01", class_label="insomnia"):
    path = tmp_path / f"{name}.edf"
    path.write_bytes(payload)
    return ManifestEntry(file_path=path, subject_id=subject_id, class_label=class_label)


def test_default_config_is_valid():
    ok, message, problems = ConfigValidator().validate_config(RunConfig())
    assert ok
    assert message == ""
    assert problems == []


@pytest.mark.parametrize(
    "overrides, fragment",
    [
        ({"window": 3}, "shorter than"),
        ({"window": 10.001}, "whole number of samples"),
        ({"experiment": "bootstrap"}, "Unknown experiment"),
        ({"omit_channel": "O1-A2"}, "Cannot omit"),
        ({"jobs": 0}, "jobs"),
        ({"manifest": "does-not-exist.csv"}, "does not exist"),
    ],
)
def test_invalid_settings_are_reported(overrides, fragment):
    ok, message, problems = ConfigValidator().validate_config(apply_overrides(RunConfig(), **overrides))
    assert not ok
    assert fragment in message
    assert len(problems) == 1


def test_several_problems_are_collected():
    config = apply_ini(apply_overrides(RunConfig(), window=2), "[model]\nlr0 = 0\n[experiment]\nn_folds = 1\n")
    ok, message, problems = ConfigValidator().validate_config(config)
    assert not ok
    assert len(problems) == 3
    assert message.count(" | ") == 2


def test_manifest_required_for_data_commands():
    ok, message, _ = ConfigValidator().validate_config(RunConfig(), require_manifest=True)
    assert not ok
    assert "No manifest" in message


def test_usable_recording(tmp_path, rng):
    usable, reason, details = RecordingValidator().check_recording(
        _entry(tmp_path, "ok", graph_channel_edf(rng, 60)), window_seconds=50
    )
    assert usable, reason
    assert details["duration_seconds"] == 60
    assert details["sample_rates"] == [500.0]


def test_unknown_record_count_is_resolved(tmp_path, rng):
    usable, _, details = RecordingValidator().check_recording(
        _entry(tmp_path, "open", graph_channel_edf(rng, 12, rate=250, n_records_field=-1)), window_seconds=10
    )
    assert usable
    assert details["duration_seconds"] == 12


@pytest.mark.parametrize(
    "payload_args, window, fragment",
    [
        ({"seconds": 20}, 50, "shorter than one 50 s window"),
        ({"seconds": 60, "rate": 128}, 50, "below 250 Hz"),
        ({"seconds": 60, "labels": ("Fp2-F4", "F4-C4", "C4-P4", "P4-O2")}, 50, "Missing channels: C4-A1"),
    ],
)
def test_unusable_recordings(tmp_path, rng, payload_args, window, fragment):
    entry = _entry(tmp_path, "bad", graph_channel_edf(rng, **payload_args))
    usable, reason, _ = RecordingValidator().check_recording(entry, window_seconds=window)
    assert not usable
    assert fragment in reason


def test_missing_and_corrupt_files(tmp_path):
    validator = RecordingValidator()
    missing = ManifestEntry(file_path=tmp_path / "absent.edf", subject_id="s", class_label="control")
    usable, reason, _ = validator.check_recording(missing)
    assert not usable and "does not exist" in reason
    usable, reason, _ = validator.check_recording(_entry(tmp_path, "junk", b"not an edf"))
    assert not usable and "TruncatedHeader" in reason


def test_check_manifest(tmp_path, rng):
    validator = RecordingValidator()
    assert validator.check_manifest([]) == (False, "no recordings", [])
    entries = [
        _entry(tmp_path, "a", graph_channel_edf(rng, 60), subject_id="a"),
        _entry(tmp_path, "b", graph_channel_edf(rng, 20), subject_id="b", class_label="control"),
    ]
    ok, message, statuses = validator.check_manifest(entries)
    assert not ok
    assert "1 of 2" in message
    assert [s["usable"] for s in statuses] == [True, False]
    ok, _, _ = validator.check_manifest(entries[:1])
    assert ok
