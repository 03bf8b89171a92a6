"""
Fold Planner
Decides which subjects are tested in which fold and which seeds drive the repeated iterations
"""

import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Tuple, Union

import numpy as np

from tools.edf_reader import CLASS_LABELS, Recording

logger = logging.getLogger(__name__)

N_FOLDS = 5
N_ITERATIONS = 3


class ExperimentError(ValueError):
    pass


class TooFewSubjects(ExperimentError):
    pass


@dataclass(frozen=True)
class FoldPlan:
    n_folds: int
    assignments: Dict[str, int]
    iteration_seeds: Tuple[int, ...]

    def __post_init__(self):
        used = set(self.assignments.values())
        empty = [fold for fold in range(self.n_folds) if fold not in used]
        if empty:
            raise ExperimentError(f"Folds {empty} have no subjects")
        if not used <= set(range(self.n_folds)):
            raise ExperimentError(f"Fold indices {sorted(used)} fall outside 0..{self.n_folds - 1}")

    def test_subjects(self, fold: int) -> FrozenSet[str]:
        return frozenset(subject for subject, f in self.assignments.items() if f == fold)

    def train_subjects(self, fold: int) -> FrozenSet[str]:
        return frozenset(subject for subject, f in self.assignments.items() if f != fold)

    def fold_sizes(self) -> List[int]:
        return [len(self.test_subjects(fold)) for fold in range(self.n_folds)]

    def to_dict(self) -> Dict:
        return {
            "n_folds": self.n_folds,
            "assignments": dict(sorted(self.assignments.items())),
            "iteration_seeds": list(self.iteration_seeds),
        }


def subject_labels(recordings: Iterable[Recording]) -> Dict[str, str]:
    """subject_id -> class label, rejecting subjects that appear with two labels"""
    labels: Dict[str, str] = {}
    for recording in recordings:
        previous = labels.setdefault(recording.subject_id, recording.class_label)
        if previous != recording.class_label:
            raise ExperimentError(
                f"Subject {recording.subject_id} is labelled both '{previous}' and '{recording.class_label}'"
            )
    return labels


def make_folds(subjects: Union[Mapping[str, str], Iterable[Tuple[str, str]]], seed: int,
               n_folds: int = N_FOLDS, n_iterations: int = N_ITERATIONS) -> FoldPlan:
    """
    Stratified subject-level fold assignment

    Each class is shuffled with the seeded stream and dealt round-robin, larger
    classes first, continuing from the fold where the previous class stopped.
    16 subjects (9/7) therefore land in folds of sizes {4, 3, 3, 3, 3} with both
    classes in every fold.

    Args:
        subjects: subject_id -> class label (or (subject_id, class label) pairs)
        seed: Seed for the shuffle and the iteration seeds
        n_folds: Number of folds

    Returns:
        FoldPlan
    """
    labels = dict(subjects.items() if isinstance(subjects, Mapping) else subjects)
    if len(labels) < n_folds:
        raise TooFewSubjects(f"{len(labels)} subjects cannot fill {n_folds} folds")
    unknown = {label for label in labels.values() if label not in CLASS_LABELS}
    if unknown:
        raise ExperimentError(f"Unknown class labels {sorted(unknown)}")

    shuffle_seq, iteration_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(shuffle_seq)
    by_class = {label: sorted(s for s, c in labels.items() if c == label) for label in CLASS_LABELS}
    order = sorted(by_class, key=lambda label: (-len(by_class[label]), CLASS_LABELS.index(label)))

    assignments = {}
    pointer = 0
    for label in order:
        members = by_class[label]
        for index in rng.permutation(len(members)):
            assignments[members[index]] = pointer
            pointer = (pointer + 1) % n_folds

    iteration_seeds = tuple(int(s) for s in iteration_seq.generate_state(n_iterations))
    plan = FoldPlan(n_folds=n_folds, assignments=assignments, iteration_seeds=iteration_seeds)
    logger.info(f"Planned {n_folds} folds over {len(labels)} subjects, sizes {plan.fold_sizes()}")
    return plan
