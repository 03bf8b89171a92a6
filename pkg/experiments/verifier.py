"""
Run Verifier
Scores predictions, aggregates runs into reports and checks them against the full-data reference targets
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from experiments.planner import ExperimentError
from tools.edf_reader import CLASS_LABELS

logger = logging.getLogger(__name__)

POSITIVE_CLASS = "insomnia"
METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


class EmptyInput(ExperimentError):
    pass


class LeakageError(ExperimentError):
    pass


@dataclass(frozen=True)
class WindowMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    confusion: np.ndarray  # [[TN, FP], [FN, TP]], insomnia positive

    def to_dict(self) -> Dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass(frozen=True)
class RunDescriptor:
    """Which graphs a report was computed on"""
    window_seconds: float
    use_distance_term: bool = True
    omitted_channel: Optional[str] = None

    @property
    def name(self) -> str:
        label = f"w{self.window_seconds:g}_{'combined' if self.use_distance_term else 'coherence'}"
        if self.omitted_channel:
            label += f"_omit_{self.omitted_channel}"
        return label

    def to_dict(self) -> Dict:
        return {
            "window_seconds": self.window_seconds,
            "use_distance_term": self.use_distance_term,
            "omitted_channel": self.omitted_channel,
        }


@dataclass(frozen=True)
class WindowPrediction:
    subject_id: str
    window_index: int
    true_label: str
    predicted_label: str

    @property
    def correct(self) -> bool:
        return self.true_label == self.predicted_label


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one (iteration, fold) run, kept as the run log"""
    iteration: int
    fold: int
    seed: int
    metrics: WindowMetrics
    subject_accuracy: float
    train_subjects: FrozenSet[str]
    test_subjects: FrozenSet[str]
    predictions: Tuple[WindowPrediction, ...] = ()
    loss_history: Tuple[float, ...] = ()
    checkpoint: Optional[str] = None


@dataclass
class ExperimentReport:
    descriptor: RunDescriptor
    runs: List[RunRecord] = field(default_factory=list)

    def mean_metrics(self) -> Dict[str, float]:
        if not self.runs:
            raise EmptyInput(f"Report {self.descriptor.name} holds no runs")
        return {name: float(np.mean([getattr(run.metrics, name) for run in self.runs])) for name in METRIC_NAMES}

    @property
    def subject_accuracy(self) -> float:
        if not self.runs:
            raise EmptyInput(f"Report {self.descriptor.name} holds no runs")
        return float(np.mean([run.subject_accuracy for run in self.runs]))

    @property
    def window_accuracy(self) -> float:
        return self.mean_metrics()["accuracy"]

    def summary(self) -> Dict:
        return {
            "config": self.descriptor.name,
            **self.descriptor.to_dict(),
            **self.mean_metrics(),
            "subject_accuracy": self.subject_accuracy,
            "n_runs": len(self.runs),
        }


def _as_index(label: Union[str, int]) -> int:
    if isinstance(label, str):
        return CLASS_LABELS.index(label)
    return int(label)


def _safe_ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator else 0.0


def window_metrics(predictions: Sequence[Union[str, int]], labels: Sequence[Union[str, int]]) -> WindowMetrics:
    """
    Binary window-level metrics with insomnia as the positive class

    Precision and recall are 0 when their denominator is 0; so is F1 when P + R = 0.
    """
    if len(predictions) != len(labels):
        raise ExperimentError(f"{len(predictions)} predictions for {len(labels)} labels")
    if len(labels) == 0:
        raise EmptyInput("No windows to score")
    positive = CLASS_LABELS.index(POSITIVE_CLASS)
    y_pred = np.array([_as_index(p) for p in predictions]) == positive
    y_true = np.array([_as_index(t) for t in labels]) == positive

    tp = int(np.sum(y_pred & y_true))
    tn = int(np.sum(~y_pred & ~y_true))
    fp = int(np.sum(y_pred & ~y_true))
    fn = int(np.sum(~y_pred & y_true))
    precision = _safe_ratio(tp, tp + fp)
    recall = _safe_ratio(tp, tp + fn)
    return WindowMetrics(
        accuracy=(tp + tn) / len(labels),
        precision=precision,
        recall=recall,
        f1=_safe_ratio(2 * precision * recall, precision + recall),
        confusion=np.array([[tn, fp], [fn, tp]]),
    )


def group_by_subject(predictions: Sequence[WindowPrediction]) -> Dict[str, List[bool]]:
    grouped: Dict[str, List[bool]] = {}
    for prediction in predictions:
        grouped.setdefault(prediction.subject_id, []).append(prediction.correct)
    return grouped


def subject_accuracy(correct_by_subject: Mapping[str, Sequence[bool]]) -> float:
    """Unweighted mean over subjects of each subject's fraction of correct windows"""
    if not correct_by_subject:
        raise EmptyInput("No subjects to score")
    per_subject = []
    for subject, outcomes in correct_by_subject.items():
        if len(outcomes) == 0:
            raise EmptyInput(f"Subject {subject} has no windows")
        per_subject.append(float(np.mean(outcomes)))
    return float(np.mean(per_subject))


def check_subject_disjointness(runs: Sequence[RunRecord]) -> None:
    for run in runs:
        overlap = run.train_subjects & run.test_subjects
        if overlap:
            raise LeakageError(
                f"Iteration {run.iteration}, fold {run.fold}: subjects {sorted(overlap)} "
                f"appear in both training and test sets"
            )
        tested = {p.subject_id for p in run.predictions}
        if not tested <= run.test_subjects:
            raise LeakageError(
                f"Iteration {run.iteration}, fold {run.fold}: predictions for non-test subjects "
                f"{sorted(tested - run.test_subjects)}"
            )


def aggregate(descriptor: RunDescriptor, runs: Sequence[RunRecord]) -> ExperimentReport:
    if not runs:
        raise EmptyInput(f"No runs to aggregate for {descriptor.name}")
    check_subject_disjointness(runs)
    ordered = sorted(runs, key=lambda run: (run.iteration, run.fold))
    report = ExperimentReport(descriptor=descriptor, runs=list(ordered))
    means = report.mean_metrics()
    logger.info(
        f"{descriptor.name}: window accuracy {means['accuracy']:.3f}, "
        f"subject accuracy {report.subject_accuracy:.3f} over {len(runs)} runs"
    )
    return report


# Full-data reference targets (accuracy, precision, recall, f1, subject accuracy)
def _reference(values: Tuple[float, float, float, float, float]) -> Dict[str, float]:
    return dict(zip((*METRIC_NAMES, "subject_accuracy"), values))


REFERENCE_RESULTS: Dict[RunDescriptor, Dict[str, float]] = {
    RunDescriptor(10): _reference((0.605, 0.591, 0.604, 0.603, 0.656)),
    RunDescriptor(30): _reference((0.625, 0.613, 0.620, 0.616, 0.634)),
    RunDescriptor(50): _reference((0.701, 0.667, 0.699, 0.706, 0.677)),
    RunDescriptor(70): _reference((0.552, 0.560, 0.551, 0.548, 0.589)),
    RunDescriptor(90): _reference((0.593, 0.539, 0.592, 0.632, 0.584)),
    RunDescriptor(10, use_distance_term=False): _reference((0.565, 0.556, 0.564, 0.566, 0.617)),
    RunDescriptor(50, use_distance_term=False): _reference((0.642, 0.567, 0.640, 0.657, 0.621)),
    RunDescriptor(90, use_distance_term=False): _reference((0.563, 0.557, 0.561, 0.606, 0.567)),
    RunDescriptor(50, omitted_channel="Fp2-F4"): _reference((0.685, 0.565, 0.686, 0.677, 0.667)),
    RunDescriptor(50, omitted_channel="F4-C4"): _reference((0.653, 0.579, 0.655, 0.668, 0.631)),
    RunDescriptor(50, omitted_channel="C4-P4"): _reference((0.639, 0.564, 0.638, 0.654, 0.635)),
    RunDescriptor(50, omitted_channel="P4-O2"): _reference((0.668, 0.544, 0.667, 0.662, 0.645)),
    RunDescriptor(50, omitted_channel="C4-A1"): _reference((0.645, 0.643, 0.646, 0.669, 0.641)),
}


def compare_to_reference(report: ExperimentReport, tolerance: float = 0.05) -> Optional[Dict]:
    """
    Compare a report with the full-data reference row for its configuration

    Returns:
        None when no reference exists, otherwise per-metric observed/reference/within
        plus an overall "passed" flag
    """
    reference = REFERENCE_RESULTS.get(report.descriptor)
    if reference is None:
        return None
    observed = {**report.mean_metrics(), "subject_accuracy": report.subject_accuracy}
    metrics = {
        name: {
            "observed": observed[name],
            "reference": target,
            "within": abs(observed[name] - target) <= tolerance,
        }
        for name, target in reference.items()
    }
    return {"tolerance": tolerance, "metrics": metrics, "passed": all(m["within"] for m in metrics.values())}


def rank_channel_importance(reports: Sequence[ExperimentReport],
                            baseline: Optional[float] = None) -> List[Tuple[str, float]]:
    """
    Omitted channels ordered by window-accuracy drop, largest first

    Args:
        reports: Channel-ablation reports (one per omitted channel)
        baseline: Window accuracy with every channel present; defaults to the best
            ablation accuracy so drops are non-negative

    Returns:
        List of (channel, drop)
    """
    ablations = [r for r in reports if r.descriptor.omitted_channel]
    if not ablations:
        raise EmptyInput("No channel-ablation reports to rank")
    accuracies = {r.descriptor.omitted_channel: r.window_accuracy for r in ablations}
    reference = max(accuracies.values()) if baseline is None else baseline
    drops = [(channel, reference - accuracy) for channel, accuracy in accuracies.items()]
    return sorted(drops, key=lambda item: (-item[1], item[0]))
