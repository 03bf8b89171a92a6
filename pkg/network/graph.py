"""
Brain Graph Builder
Per-window connectivity (reduced coherence plus spatial distance) and band-power node features
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from tools.edf_reader import Recording, normalize_label, select_channels
from tools.filters import EpochWindow, segment
from tools.montage import DEFAULT_MONTAGE, DistanceMatrix, Montage
from tools.spectral import BANDS, WelchParams, band_powers, coherence_matrix, welch_psd

logger = logging.getLogger(__name__)

CHANNELS = ("Fp2-F4", "F4-C4", "C4-P4", "P4-O2", "C4-A1")
LOG_FLOOR = 1e-12


class GraphError(ValueError):
    pass


class DegenerateNormalizationWarning(UserWarning):
    """All off-diagonal connectivity values of a window were equal"""


@dataclass(frozen=True)
class ConnectivityConfig:
    k: float = 5.0
    coherence_band: Tuple[float, float] = (1.0, 45.0)
    use_distance_term: bool = True
    welch: WelchParams = field(default_factory=WelchParams)

    def validate(self, sample_rate: float) -> None:
        f_lo, f_hi = self.coherence_band
        if self.k <= 0:
            raise GraphError(f"k must be positive, got {self.k}")
        if not 0 <= f_lo < f_hi <= sample_rate / 2.0:
            raise GraphError(f"Coherence band {self.coherence_band} must satisfy 0 <= lo < hi <= Nyquist")


@dataclass(frozen=True)
class BrainGraph:
    channel_labels: Tuple[str, ...]
    connectivity: np.ndarray
    node_features: np.ndarray
    subject_id: str
    class_label: str
    window_index: int

    @property
    def n_nodes(self) -> int:
        return len(self.channel_labels)

    def with_features(self, node_features: np.ndarray) -> "BrainGraph":
        return BrainGraph(
            channel_labels=self.channel_labels,
            connectivity=self.connectivity,
            node_features=node_features,
            subject_id=self.subject_id,
            class_label=self.class_label,
            window_index=self.window_index,
        )


def random_coherence(d_ij: float, k: float, clamp: bool = True) -> float:
    """
    Volume-conduction coherence expected from distance alone, exp((1 - D) / k)

    Clamped to 1 so the subtraction in reduced_coherence stays on coherence scale.
    """
    value = float(np.exp((1.0 - d_ij) / k))
    return min(value, 1.0) if clamp else value


def reduced_coherence(c_computed: float, c_random: float) -> float:
    return c_computed - c_random


def _normalize_off_diagonal(matrix: np.ndarray) -> np.ndarray:
    n = matrix.shape[0]
    result = np.zeros_like(matrix)
    if n < 2:
        return result
    off = ~np.eye(n, dtype=bool)
    values = matrix[off]
    lo, hi = values.min(), values.max()
    if hi - lo <= 1e-12:
        warnings.warn(
            "Connectivity values are all equal; setting off-diagonal entries to 0.5",
            DegenerateNormalizationWarning,
            stacklevel=3,
        )
        result[off] = 0.5
    else:
        result[off] = (values - lo) / (hi - lo)
    return result


def combined_connectivity(window: EpochWindow, distances: DistanceMatrix,
                          config: ConnectivityConfig) -> np.ndarray:
    """
    Connectivity matrix C' = (C_computed - C_random) + D, min-max normalized per window

    Args:
        window: 250 Hz window
        distances: Normalized geodesic distances in the window's channel order
        config: k, coherence band, distance-term switch and Welch parameters

    Returns:
        Symmetric [n x n] matrix in [0, 1] with zero diagonal
    """
    n = window.channels.shape[0]
    if distances.d.shape != (n, n):
        raise GraphError(f"Distance matrix {distances.d.shape} does not match {n} channels")
    if [normalize_label(a) for a in distances.labels] != [normalize_label(b) for b in window.labels]:
        raise GraphError(f"Distance labels {distances.labels} differ from window labels {window.labels}")

    computed = coherence_matrix(window.channels, window.sample_rate, config.welch, config.coherence_band)
    combined = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d_ij = float(distances.d[i, j])
            value = reduced_coherence(float(computed[i, j]), random_coherence(d_ij, config.k))
            if config.use_distance_term:
                value += d_ij
            combined[i, j] = combined[j, i] = value
    return _normalize_off_diagonal(combined)


def node_feature_matrix(window: EpochWindow, welch_params: WelchParams = WelchParams()) -> np.ndarray:
    """log10 band power per channel, one column per band in BANDS order"""
    rows = [band_powers(welch_psd(channel, window.sample_rate, welch_params)) for channel in window.channels]
    return np.log10(np.array(rows) + LOG_FLOOR)


def build_graphs(recording: Recording, window_seconds: float, config: ConnectivityConfig,
                 omit_channel: Optional[str] = None,
                 montage: Montage = DEFAULT_MONTAGE) -> List[BrainGraph]:
    """
    Turn a preprocessed 250 Hz recording into one brain graph per window

    Args:
        recording: Filtered, resampled recording holding the graph channels
        window_seconds: Window length
        config: Connectivity settings
        omit_channel: Channel dropped before the distance matrix is built
        montage: Electrode geometry

    Returns:
        List of BrainGraph in window order
    """
    if recording.class_label is None:
        raise GraphError(f"Recording of subject {recording.subject_id} has no class label")
    labels = list(recording.labels)
    if omit_channel is not None:
        recording.channel(omit_channel)
        labels = [label for label in labels if normalize_label(label) != normalize_label(omit_channel)]
        recording = select_channels(recording, labels)

    distances = montage.distance_matrix(labels)
    windows = segment(recording, window_seconds)
    config.validate(windows[0].sample_rate)

    graphs = []
    for window in windows:
        connectivity = combined_connectivity(window, distances, config)
        features = node_feature_matrix(window, config.welch)
        connectivity.setflags(write=False)
        features.setflags(write=False)
        graphs.append(
            BrainGraph(
                channel_labels=tuple(labels),
                connectivity=connectivity,
                node_features=features,
                subject_id=recording.subject_id,
                class_label=recording.class_label,
                window_index=window.window_index,
            )
        )
    logger.info(
        f"Built {len(graphs)} graphs ({len(labels)} nodes, {window_seconds} s) for subject {recording.subject_id}"
    )
    return graphs


def class_mean_connectivity(graphs: Sequence[BrainGraph]) -> Dict[str, np.ndarray]:
    """Mean connectivity matrix per class label"""
    grouped: Dict[str, List[np.ndarray]] = {}
    for graph in graphs:
        grouped.setdefault(graph.class_label, []).append(graph.connectivity)
    return {label: np.mean(matrices, axis=0) for label, matrices in sorted(grouped.items())}


def feature_names() -> List[str]:
    return [name for name, _, _ in BANDS]
