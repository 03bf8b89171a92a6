"""
Cross-Validation Executor
Runs every (iteration, fold) of a fold plan: standardize, train, predict, score
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from experiments.planner import ExperimentError, FoldPlan
from experiments.verifier import (
    ExperimentReport,
    LeakageError,
    RunDescriptor,
    RunRecord,
    WindowPrediction,
    aggregate,
    group_by_subject,
    subject_accuracy,
    window_metrics,
)
from network.checkpoint import save_checkpoint
from network.gcn import GcnModel, ModelConfig, predict_batch, train
from network.graph import BrainGraph

logger = logging.getLogger(__name__)


class FoldWithoutTestData(ExperimentError):
    pass


@dataclass(frozen=True)
class FeatureStats:
    mean: np.ndarray
    std: np.ndarray


@dataclass(frozen=True)
class FoldTask:
    iteration: int
    fold: int
    seed: int
    model_config: ModelConfig
    train_graphs: Tuple[BrainGraph, ...]
    test_graphs: Tuple[BrainGraph, ...]
    checkpoint_path: Optional[Path] = None


def feature_stats(graphs: Sequence[BrainGraph]) -> FeatureStats:
    """Per-feature mean and standard deviation over every node of every graph"""
    stacked = np.concatenate([np.asarray(graph.node_features) for graph in graphs], axis=0)
    std = stacked.std(axis=0)
    std[std < 1e-12] = 1.0
    return FeatureStats(mean=stacked.mean(axis=0), std=std)


def apply_stats(graphs: Sequence[BrainGraph], stats: FeatureStats) -> List[BrainGraph]:
    return [graph.with_features((np.asarray(graph.node_features) - stats.mean) / stats.std) for graph in graphs]


def standardize_features(train_graphs: Sequence[BrainGraph],
                         test_graphs: Sequence[BrainGraph]) -> Tuple[List[BrainGraph], List[BrainGraph], FeatureStats]:
    """
    Standardize node features with statistics of the training graphs only

    Returns:
        Tuple of (standardized train graphs, standardized test graphs, training statistics)
    """
    if not train_graphs:
        raise ExperimentError("Cannot standardize without training graphs")
    stats = feature_stats(train_graphs)
    return apply_stats(train_graphs, stats), apply_stats(test_graphs, stats), stats


def run_seed(iteration_seed: int, fold: int) -> int:
    """Training seed of one run, derived from its iteration seed and fold index"""
    return int(np.random.SeedSequence([iteration_seed, fold]).generate_state(1)[0])


def run_fold(task: FoldTask) -> RunRecord:
    """Train on the task's training graphs and score its test graphs"""
    train_subjects = frozenset(graph.subject_id for graph in task.train_graphs)
    test_subjects = frozenset(graph.subject_id for graph in task.test_graphs)
    overlap = train_subjects & test_subjects
    if overlap:
        raise LeakageError(f"Fold {task.fold}: subjects {sorted(overlap)} in both training and test data")

    train_std, test_std, _ = standardize_features(task.train_graphs, task.test_graphs)
    config = replace(task.model_config, seed=task.seed)
    width = train_std[0].node_features.shape[1]
    result = train(GcnModel.initialize(config, input_width=width), train_std, config)
    if task.checkpoint_path is not None:
        save_checkpoint(task.checkpoint_path, result.model)

    predicted = [p.predicted_class for p in predict_batch(result.model, test_std)]
    predictions = tuple(
        WindowPrediction(
            subject_id=graph.subject_id,
            window_index=graph.window_index,
            true_label=graph.class_label,
            predicted_label=label,
        )
        for graph, label in zip(test_std, predicted)
    )
    metrics = window_metrics(predicted, [graph.class_label for graph in test_std])
    record = RunRecord(
        iteration=task.iteration,
        fold=task.fold,
        seed=task.seed,
        metrics=metrics,
        subject_accuracy=subject_accuracy(group_by_subject(predictions)),
        train_subjects=train_subjects,
        test_subjects=test_subjects,
        predictions=predictions,
        loss_history=tuple(result.loss_history),
        checkpoint=None if task.checkpoint_path is None else str(task.checkpoint_path),
    )
    logger.debug(
        f"iteration {task.iteration} fold {task.fold}: accuracy {metrics.accuracy:.3f}, "
        f"subject accuracy {record.subject_accuracy:.3f}"
    )
    return record


def checkpoint_name(config_name: str, iteration: int, fold: int) -> str:
    return f"{config_name}_i{iteration}_f{fold}.ckpt"


def plan_tasks(graphs: Sequence[BrainGraph], model_config: ModelConfig, fold_plan: FoldPlan,
               checkpoint_dir: Optional[Union[str, Path]] = None, config_name: str = "run") -> List[FoldTask]:
    unplanned = sorted({graph.subject_id for graph in graphs} - set(fold_plan.assignments))
    if unplanned:
        raise ExperimentError(f"Graphs of subjects {unplanned} have no fold assignment")

    tasks = []
    for iteration, iteration_seed in enumerate(fold_plan.iteration_seeds):
        for fold in range(fold_plan.n_folds):
            test_subjects = fold_plan.test_subjects(fold)
            test_graphs = tuple(g for g in graphs if g.subject_id in test_subjects)
            train_graphs = tuple(g for g in graphs if g.subject_id not in test_subjects)
            if not test_graphs:
                raise FoldWithoutTestData(f"Fold {fold} (subjects {sorted(test_subjects)}) has no windows")
            if not train_graphs:
                raise ExperimentError(f"Fold {fold} leaves no training windows")
            tasks.append(
                FoldTask(
                    iteration=iteration,
                    fold=fold,
                    seed=run_seed(iteration_seed, fold),
                    model_config=model_config,
                    train_graphs=train_graphs,
                    test_graphs=test_graphs,
                    checkpoint_path=None if checkpoint_dir is None
                    else Path(checkpoint_dir) / checkpoint_name(config_name, iteration, fold),
                )
            )
    return tasks


def run_cv(graphs: Sequence[BrainGraph], model_config: ModelConfig, fold_plan: FoldPlan,
           descriptor: Optional[RunDescriptor] = None, jobs: int = 1,
           checkpoint_dir: Optional[Union[str, Path]] = None) -> ExperimentReport:
    """
    Subject-independent cross-validation over every iteration seed and fold

    Args:
        graphs: Brain graphs of every subject in the fold plan
        model_config: Model and training settings (the seed is replaced per run)
        fold_plan: Fold assignment and iteration seeds
        descriptor: Configuration the graphs were built with
        jobs: Worker processes for the independent runs
        checkpoint_dir: Directory receiving each run's trained model (none saved when omitted)

    Returns:
        ExperimentReport holding n_iterations x n_folds runs
    """
    if not graphs:
        raise ExperimentError("Cross-validation needs at least one graph")
    model_config.validate()
    descriptor = descriptor or RunDescriptor(window_seconds=0.0)
    tasks = plan_tasks(graphs, model_config, fold_plan, checkpoint_dir, descriptor.name)
    logger.info(f"Running {len(tasks)} cross-validation runs for {descriptor.name} with {jobs} job(s)")

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run_fold, tasks))
    else:
        records = [run_fold(task) for task in tasks]
    return aggregate(descriptor, records)
