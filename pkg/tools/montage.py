"""
Montage Tool
10-20 electrode geometry on an idealized unit-sphere head
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# Spherical 10-20 layout as (theta, phi) in degrees: theta is the signed angle
# from the vertex (positive = right hemisphere), phi the azimuth from the
# interaural axis towards the nose.
_SPHERICAL_1020 = {
    "FPZ": (92, 90), "FP1": (-92, -72), "FP2": (92, 72),
    "F7": (-92, -36), "F3": (-60, -51), "FZ": (46, 90), "F4": (60, 51), "F8": (92, 36),
    "T3": (-92, 0), "C3": (-46, 0), "CZ": (0, 0), "C4": (46, 0), "T4": (92, 0),
    "T5": (-92, 36), "P3": (-60, 51), "PZ": (46, -90), "P4": (60, -51), "T6": (92, -36),
    "O1": (-92, 72), "OZ": (92, -90), "O2": (92, -72),
    "A1": (-120, 0), "A2": (120, 0),
}

_ALIASES = {"T7": "T3", "T8": "T4", "P7": "T5", "P8": "T6", "M1": "A1", "M2": "A2"}


class MontageError(ValueError):
    pass


class UnknownElectrode(MontageError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"Unknown electrode '{label}'")


class DegenerateMidpoint(MontageError):
    pass


@dataclass(frozen=True)
class ElectrodePosition:
    label: str
    unit_vector: np.ndarray


@dataclass(frozen=True)
class ChannelNode:
    channel_label: str
    position: np.ndarray


@dataclass(frozen=True)
class DistanceMatrix:
    labels: Tuple[str, ...]
    d: np.ndarray


def _spherical_to_unit(theta_deg: float, phi_deg: float) -> np.ndarray:
    theta, phi = np.radians(theta_deg), np.radians(phi_deg)
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def _normalize(vector: np.ndarray, label: str) -> np.ndarray:
    norm = np.linalg.norm(vector)
    if not np.isfinite(norm) or norm == 0:
        raise MontageError(f"Electrode '{label}' has a zero or non-finite position")
    unit = np.asarray(vector, dtype=np.float64) / norm
    unit.setflags(write=False)
    return unit


class Montage:
    """Electrode coordinate table with channel-node and distance helpers"""

    def __init__(self, positions: Optional[Mapping[str, np.ndarray]] = None):
        if positions is None:
            positions = {label: _spherical_to_unit(*angles) for label, angles in _SPHERICAL_1020.items()}
        self.positions: Dict[str, np.ndarray] = {
            label.upper(): _normalize(np.asarray(vector, dtype=np.float64), label)
            for label, vector in positions.items()
        }

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "Montage":
        """
        Build a montage from an override file

        Args:
            path: CSV with columns label,x,y,z (vectors are normalized on load)
        """
        frame = pd.read_csv(path)
        missing = {"label", "x", "y", "z"} - set(frame.columns)
        if missing:
            raise MontageError(f"Electrode file {path} is missing columns: {', '.join(sorted(missing))}")
        table = Montage().positions
        for row in frame.itertuples(index=False):
            table[str(row.label).strip().upper()] = np.array([row.x, row.y, row.z], dtype=np.float64)
        logger.info(f"Loaded {len(frame)} electrode positions from {path}")
        return cls(table)

    def electrode_position(self, label: str) -> ElectrodePosition:
        key = label.strip().upper()
        if key not in self.positions and key in _ALIASES:
            key = _ALIASES[key]
        if key not in self.positions:
            raise UnknownElectrode(label)
        return ElectrodePosition(label=label.strip(), unit_vector=self.positions[key])

    def channel_node(self, channel_label: str) -> ChannelNode:
        """Node at the great-circle midpoint of a bipolar channel's two electrodes"""
        parts = [part.strip() for part in channel_label.split("-")]
        if len(parts) != 2 or not all(parts):
            raise UnknownElectrode(channel_label)
        v1 = self.electrode_position(parts[0]).unit_vector
        v2 = self.electrode_position(parts[1]).unit_vector
        total = v1 + v2
        norm = np.linalg.norm(total)
        if norm < 1e-9:
            raise DegenerateMidpoint(f"Electrodes of channel '{channel_label}' are antipodal")
        position = total / norm
        position.setflags(write=False)
        return ChannelNode(channel_label=channel_label, position=position)

    def raw_geodesic_matrix(self, channel_labels: Sequence[str]) -> np.ndarray:
        """Great-circle angles (radians) between channel nodes"""
        nodes = np.array([self.channel_node(label).position for label in channel_labels])
        # atan2 form of arccos(u.v), exact for coincident nodes
        cross = np.linalg.norm(np.cross(nodes[:, None, :], nodes[None, :, :]), axis=-1)
        angles = np.arctan2(cross, nodes @ nodes.T)
        angles = (angles + angles.T) / 2.0
        np.fill_diagonal(angles, 0.0)
        return angles

    def distance_matrix(self, channel_labels: Sequence[str]) -> DistanceMatrix:
        """
        Geodesic node distances normalized by the largest pair in this channel set
        """
        if not channel_labels:
            raise MontageError("At least one channel is required")
        raw = self.raw_geodesic_matrix(channel_labels)
        largest = raw.max()
        d = raw / largest if largest > 0 else np.zeros_like(raw)
        return DistanceMatrix(labels=tuple(channel_labels), d=d)


DEFAULT_MONTAGE = Montage()


def electrode_position(label: str) -> ElectrodePosition:
    return DEFAULT_MONTAGE.electrode_position(label)


def channel_node(channel_label: str) -> ChannelNode:
    return DEFAULT_MONTAGE.channel_node(channel_label)


def distance_matrix(channel_labels: Sequence[str]) -> DistanceMatrix:
    return DEFAULT_MONTAGE.distance_matrix(channel_labels)
