"""
Report Files
results.csv, summary.json, plot_data.csv and metadata.json for one experiment
"""

import json
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd

from experiments.verifier import ExperimentReport, compare_to_reference, rank_channel_importance
from network.graph_cache import atomic_write_bytes

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "config", "fold", "iteration", "accuracy", "precision", "recall", "f1", "subject_accuracy",
    "train_subjects", "test_subjects", "checkpoint",
]
SUBJECT_SEPARATOR = ";"


def results_frame(reports: Sequence[ExperimentReport]) -> pd.DataFrame:
    rows = [
        {
            "config": report.descriptor.name,
            "fold": run.fold,
            "iteration": run.iteration,
            **run.metrics.to_dict(),
            "subject_accuracy": run.subject_accuracy,
            "train_subjects": SUBJECT_SEPARATOR.join(sorted(run.train_subjects)),
            "test_subjects": SUBJECT_SEPARATOR.join(sorted(run.test_subjects)),
            "checkpoint": run.checkpoint or "",
        }
        for report in reports
        for run in report.runs
    ]
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def plot_data_frame(reports: Sequence[ExperimentReport]) -> pd.DataFrame:
    """Configuration against mean window and subject accuracy, one bar per row"""
    return pd.DataFrame(
        [
            {
                "config": report.descriptor.name,
                "window_accuracy": report.window_accuracy,
                "subject_accuracy": report.subject_accuracy,
            }
            for report in reports
        ]
    )


def summary_dict(experiment: str, reports: Sequence[ExperimentReport], tolerance: float = 0.05) -> Dict:
    configurations = []
    for report in reports:
        entry = report.summary()
        entry["reference"] = compare_to_reference(report, tolerance)
        configurations.append(entry)
    summary = {"experiment": experiment, "configurations": configurations}
    if any(report.descriptor.omitted_channel for report in reports):
        summary["channel_importance"] = [
            {"channel": channel, "accuracy_drop": drop} for channel, drop in rank_channel_importance(reports)
        ]
    return summary


def summary_table(reports: Sequence[ExperimentReport]) -> str:
    frame = pd.DataFrame([report.summary() for report in reports])
    columns = ["config", "accuracy", "precision", "recall", "f1", "subject_accuracy", "n_runs"]
    return frame[columns].to_string(index=False, float_format=lambda v: f"{v:.3f}")


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset, tuple)):
        return sorted(value) if isinstance(value, (set, frozenset)) else list(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_json(path: Union[str, Path], data: Dict) -> None:
    atomic_write_bytes(path, json.dumps(data, indent=2, default=_json_default).encode("utf-8"))


def write_frame(path: Union[str, Path], frame: pd.DataFrame) -> None:
    atomic_write_bytes(path, frame.to_csv(index=False).encode("utf-8"))


def write_reports(output_dir: Union[str, Path], experiment: str, reports: Sequence[ExperimentReport],
                  metadata: Optional[Dict] = None) -> Dict[str, Path]:
    """
    Write every report file of an experiment into output_dir

    Returns:
        Mapping of file role to path
    """
    output_dir = Path(output_dir)
    paths = {
        "results": output_dir / "results.csv",
        "summary": output_dir / "summary.json",
        "plot_data": output_dir / "plot_data.csv",
        "metadata": output_dir / "metadata.json",
    }
    write_frame(paths["results"], results_frame(reports))
    write_json(paths["summary"], summary_dict(experiment, reports))
    write_frame(paths["plot_data"], plot_data_frame(reports))
    write_json(paths["metadata"], metadata or {})
    logger.info(f"Wrote {len(reports)} report(s) for '{experiment}' to {output_dir}")
    return paths
