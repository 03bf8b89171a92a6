"""
Input Validation and Guardrails
Checks run configs and recordings before any heavy computation
"""

from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from config import EXPERIMENTS, RunConfig
from network.gcn import GcnError
from network.graph import CHANNELS, GraphError
from tools.edf_reader import EdfError, ManifestEntry, normalize_label, read_edf_header
from tools.filters import TARGET_RATE


class ConfigValidator:
    """Validates numeric ranges and paths of a resolved run config"""

    MIN_WINDOW_SECONDS = 4.0  # two Welch segments of 2 s

    def validate_config(self, config: RunConfig, require_manifest: bool = False) -> Tuple[bool, str, List[str]]:
        """
        Validate a resolved run config

        Args:
            config: Config after defaults, environment, file and flags
            require_manifest: The command reads recordings from the manifest

        Returns:
            Tuple of (is_valid, error_message, list of problems)
        """
        problems = []

        window_valid, window_error = self._validate_window(config.experiment.window_seconds)
        if not window_valid:
            problems.append(window_error)

        connectivity_valid, connectivity_error = self._validate_connectivity(config)
        if not connectivity_valid:
            problems.append(connectivity_error)

        model_valid, model_error = self._validate_model(config)
        if not model_valid:
            problems.append(model_error)

        experiment = config.experiment
        if experiment.name not in EXPERIMENTS:
            problems.append(f"Unknown experiment '{experiment.name}' (choose from {', '.join(EXPERIMENTS)})")
        if experiment.n_folds < 2:
            problems.append(f"At least 2 folds are needed, got {experiment.n_folds}")
        if experiment.jobs < 1:
            problems.append(f"jobs must be >= 1, got {experiment.jobs}")
        if experiment.subjects_per_class < 1 or experiment.duration <= 0:
            problems.append("Synthetic cohort needs >= 1 subject per class and a positive duration")
        if experiment.omit_channel is not None and normalize_label(experiment.omit_channel) not in {
            normalize_label(c) for c in CHANNELS
        }:
            problems.append(f"Cannot omit '{experiment.omit_channel}': not one of {', '.join(CHANNELS)}")

        if config.preprocess.target_rate != TARGET_RATE:
            problems.append(f"Graphs are built at {TARGET_RATE:g} Hz, got target_rate {config.preprocess.target_rate}")
        if not 0 < config.preprocess.highpass_hz < config.preprocess.target_rate / 2:
            problems.append(f"High-pass cutoff {config.preprocess.highpass_hz} Hz is outside (0, Nyquist)")

        manifest = config.data.manifest_path
        if require_manifest and manifest is None:
            problems.append("No manifest given (use --manifest or [data] manifest_path)")
        elif manifest is not None and not Path(manifest).is_file():
            problems.append(f"Manifest {manifest} does not exist")
        if config.data.montage_path is not None and not Path(config.data.montage_path).is_file():
            problems.append(f"Montage file {config.data.montage_path} does not exist")

        if problems:
            return False, " | ".join(problems), problems
        return True, "", []

    def _validate_window(self, window_seconds: float) -> Tuple[bool, str]:
        """Window must hold two Welch segments and a whole number of 250 Hz samples"""
        if window_seconds < self.MIN_WINDOW_SECONDS:
            return False, f"Window {window_seconds} s is shorter than {self.MIN_WINDOW_SECONDS} s"
        samples = window_seconds * TARGET_RATE
        if abs(samples - round(samples)) > 1e-9:
            return False, f"Window {window_seconds} s is not a whole number of samples at {TARGET_RATE:g} Hz"
        return True, ""

    def _validate_connectivity(self, config: RunConfig) -> Tuple[bool, str]:
        try:
            config.connectivity.validate(config.preprocess.target_rate)
        except GraphError as e:
            return False, str(e)
        welch = config.welch
        if welch.seg_seconds <= 0 or not 0 <= welch.overlap_fraction < 1:
            return False, "Welch segments need a positive length and overlap in [0, 1)"
        return True, ""

    def _validate_model(self, config: RunConfig) -> Tuple[bool, str]:
        try:
            config.model.validate()
        except GcnError as e:
            return False, str(e)
        return True, ""


class RecordingValidator:
    """Cheap, header-only usability checks for manifest recordings"""

    def check_recording(self, entry: ManifestEntry, channels: Sequence[str] = CHANNELS,
                        window_seconds: float = 50.0) -> Tuple[bool, str, Dict]:
        """
        Decide whether one recording can enter the experiments

        Returns:
            Tuple of (is_usable, reason, details)
        """
        details = {"subject_id": entry.subject_id, "file_path": str(entry.file_path), "class_label": entry.class_label}
        if not Path(entry.file_path).is_file():
            return False, f"File {entry.file_path} does not exist", details
        try:
            header, signals = read_edf_header(entry.file_path)
        except (EdfError, OSError) as e:
            return False, f"{type(e).__name__}: {e}", details

        available = {normalize_label(s.label): s for s in signals if not s.is_annotation}
        missing = [label for label in channels if normalize_label(label) not in available]
        details["missing_channels"] = missing
        if missing:
            return False, f"Missing channels: {', '.join(missing)}", details

        rates = sorted({available[normalize_label(label)].samples_per_record / header.record_duration
                        for label in channels})
        details["sample_rates"] = rates
        if rates[0] < TARGET_RATE:
            return False, f"Sample rate {rates[0]:g} Hz is below {TARGET_RATE:g} Hz", details

        n_records = header.n_data_records
        if n_records < 0:
            record_bytes = 2 * sum(s.samples_per_record for s in signals)
            n_records = (Path(entry.file_path).stat().st_size - header.header_bytes) // max(record_bytes, 1)
        duration = n_records * header.record_duration
        details["duration_seconds"] = duration
        if duration < window_seconds:
            return False, f"Recording lasts {duration:g} s, shorter than one {window_seconds:g} s window", details
        return True, "", details

    def check_manifest(self, entries: Sequence[ManifestEntry], channels: Sequence[str] = CHANNELS,
                       window_seconds: float = 50.0) -> Tuple[bool, str, List[Dict]]:
        """
        Check every manifest entry

        Returns:
            Tuple of (all_usable, error_message, per-recording statuses)
        """
        if not entries:
            return False, "no recordings", []
        statuses = []
        for entry in entries:
            usable, reason, details = self.check_recording(entry, channels, window_seconds)
            statuses.append({**details, "usable": usable, "reason": reason})
        unusable = [s["subject_id"] for s in statuses if not s["usable"]]
        if unusable:
            return False, f"{len(unusable)} of {len(statuses)} recordings unusable: {', '.join(unusable)}", statuses
        return True, "", statuses
