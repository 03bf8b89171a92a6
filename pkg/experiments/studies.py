"""
Studies
Window-length sweep, connectivity ablation and channel ablation, each a set of paired CV runs
"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

from experiments.executor import run_cv
from experiments.planner import FoldPlan, make_folds, subject_labels
from experiments.verifier import ExperimentReport, RunDescriptor
from network.gcn import ModelConfig
from network.graph import CHANNELS, BrainGraph, ConnectivityConfig, build_graphs
from tools.edf_reader import Recording, select_channels
from tools.filters import WINDOW_LENGTHS
from tools.montage import DEFAULT_MONTAGE, Montage

logger = logging.getLogger(__name__)

CONNECTIVITY_LENGTHS = (10, 50, 90)
CHANNEL_ABLATION_WINDOW = 50

GraphSource = Callable[[RunDescriptor], List[BrainGraph]]


def build_dataset(recordings: Sequence[Recording], descriptor: RunDescriptor,
                  connectivity: ConnectivityConfig, montage: Montage = DEFAULT_MONTAGE) -> List[BrainGraph]:
    """Brain graphs of every preprocessed recording for one configuration"""
    config = replace(connectivity, use_distance_term=descriptor.use_distance_term)
    graphs = []
    for recording in recordings:
        graphs.extend(
            build_graphs(
                select_channels(recording, CHANNELS),
                descriptor.window_seconds,
                config,
                omit_channel=descriptor.omitted_channel,
                montage=montage,
            )
        )
    return graphs


def sweep_descriptors(lengths: Sequence[float] = WINDOW_LENGTHS, use_distance_term: bool = True) -> List[RunDescriptor]:
    return [RunDescriptor(length, use_distance_term) for length in lengths]


def connectivity_descriptors(lengths: Sequence[float] = CONNECTIVITY_LENGTHS) -> List[RunDescriptor]:
    """(coherence only, combined) pairs per length"""
    return [RunDescriptor(length, use_distance) for length in lengths for use_distance in (False, True)]


def channel_descriptors(window_seconds: float = CHANNEL_ABLATION_WINDOW, channels: Sequence[str] = CHANNELS,
                        use_distance_term: bool = True) -> List[RunDescriptor]:
    return [RunDescriptor(window_seconds, use_distance_term, channel) for channel in channels]


def run_configurations(descriptors: Sequence[RunDescriptor], graph_source: GraphSource, model_config: ModelConfig,
                       fold_plan: FoldPlan, jobs: int = 1,
                       completed: Optional[List[ExperimentReport]] = None,
                       checkpoint_dir: Optional[Union[str, Path]] = None) -> List[ExperimentReport]:
    """
    One full CV per descriptor, every one on the same fold plan

    Args:
        completed: List that receives each report as soon as it finishes, so a caller
            still holds the finished ones when a later configuration fails
        checkpoint_dir: Directory receiving every run's trained model
    """
    reports = [] if completed is None else completed
    for descriptor in descriptors:
        logger.info(f"Configuration {descriptor.name}")
        reports.append(run_cv(graph_source(descriptor), model_config, fold_plan, descriptor=descriptor, jobs=jobs,
                              checkpoint_dir=checkpoint_dir))
    return reports


def _run_study(descriptors: Sequence[RunDescriptor], recordings: Sequence[Recording], model_config: ModelConfig,
               connectivity: ConnectivityConfig, seed: int, fold_plan: Optional[FoldPlan],
               jobs: int) -> List[ExperimentReport]:
    plan = fold_plan or make_folds(subject_labels(recordings), seed)
    source = lambda descriptor: build_dataset(recordings, descriptor, connectivity)
    return run_configurations(descriptors, source, model_config, plan, jobs)


def window_length_sweep(recordings: Sequence[Recording], model_config: ModelConfig,
                        connectivity: ConnectivityConfig = ConnectivityConfig(),
                        lengths: Sequence[float] = WINDOW_LENGTHS, seed: int = 0,
                        fold_plan: Optional[FoldPlan] = None, jobs: int = 1) -> List[ExperimentReport]:
    """One full CV per window length, all sharing one fold plan"""
    descriptors = sweep_descriptors(lengths, connectivity.use_distance_term)
    return _run_study(descriptors, recordings, model_config, connectivity, seed, fold_plan, jobs)


def connectivity_ablation(recordings: Sequence[Recording], model_config: ModelConfig,
                          connectivity: ConnectivityConfig = ConnectivityConfig(),
                          lengths: Sequence[float] = CONNECTIVITY_LENGTHS, seed: int = 0,
                          fold_plan: Optional[FoldPlan] = None, jobs: int = 1) -> List[ExperimentReport]:
    """Coherence-only versus coherence-plus-distance graphs at each length"""
    return _run_study(connectivity_descriptors(lengths), recordings, model_config, connectivity, seed, fold_plan, jobs)


def channel_ablation(recordings: Sequence[Recording], model_config: ModelConfig,
                     connectivity: ConnectivityConfig = ConnectivityConfig(),
                     window_seconds: float = CHANNEL_ABLATION_WINDOW,
                     channels: Sequence[str] = CHANNELS, seed: int = 0,
                     fold_plan: Optional[FoldPlan] = None, jobs: int = 1) -> List[ExperimentReport]:
    """One CV per omitted channel, on graphs of the remaining nodes"""
    descriptors = channel_descriptors(window_seconds, channels, connectivity.use_distance_term)
    return _run_study(descriptors, recordings, model_config, connectivity, seed, fold_plan, jobs)
