import pytest

from conftest import make_recording
from experiments.planner import (
    ExperimentError,
    FoldPlan,
    TooFewSubjects,
    make_folds,
    subject_labels,
)


def _cohort(n_insomnia, n_control):
    subjects = {f"ins{i:02d}": "insomnia" for i in range(n_insomnia)}
    subjects.update({f"con{i:02d}": "control" for i in range(n_control)})
    return subjects


def test_sixteen_subjects_fill_stratified_folds():
    subjects = _cohort(9, 7)
    plan = make_folds(subjects, seed=0)
    assert sorted(plan.fold_sizes(), reverse=True) == [4, 3, 3, 3, 3]
    assert set(plan.assignments) == set(subjects)
    for fold in range(5):
        classes = {subjects[s] for s in plan.test_subjects(fold)}
        assert classes == {"insomnia", "control"}
        assert plan.test_subjects(fold) | plan.train_subjects(fold) == frozenset(subjects)
        assert not plan.test_subjects(fold) & plan.train_subjects(fold)


def test_five_subjects_give_one_per_fold():
    plan = make_folds(_cohort(3, 2), seed=1)
    assert plan.fold_sizes() == [1, 1, 1, 1, 1]


def test_too_few_subjects():
    with pytest.raises(TooFewSubjects):
        make_folds(_cohort(2, 2), seed=0)


def test_unknown_class_label():
    subjects = _cohort(3, 2)
    subjects["odd"] = "narcolepsy"
    with pytest.raises(ExperimentError):
        make_folds(subjects, seed=0)


def test_plans_are_seeded():
    subjects = _cohort(9, 7)
    first = make_folds(subjects, seed=4)
    assert make_folds(list(subjects.items()), seed=4) == first
    assert make_folds(subjects, seed=5).assignments != first.assignments
    assert len(first.iteration_seeds) == 3
    assert len(set(first.iteration_seeds)) == 3
    assert first.to_dict()["n_folds"] == 5


def test_fold_plan_rejects_empty_folds():
    with pytest.raises(ExperimentError):
        FoldPlan(n_folds=3, assignments={"a": 0, "b": 1}, iteration_seeds=(1,))


def test_subject_labels(rng):
    recordings = [make_recording(rng, "s1", "insomnia", duration=1.0), make_recording(rng, "s2", "control", duration=1.0)]
    assert subject_labels(recordings) == {"s1": "insomnia", "s2": "control"}
    with pytest.raises(ExperimentError):
        subject_labels(recordings + [make_recording(rng, "s1", "control", duration=1.0)])
