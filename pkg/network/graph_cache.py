"""
Graph Cache
Binary and JSON/CSV serialization of brain graphs
"""

import io
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import BinaryIO, Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from network.graph import BrainGraph, GraphError, feature_names
from tools.edf_reader import CLASS_LABELS

MAGIC = b"EEGGRAPH"
VERSION = 1


class CacheFormatError(GraphError):
    pass


def _write_text(stream: BinaryIO, text: str) -> None:
    encoded = text.encode("utf-8")
    stream.write(struct.pack("<H", len(encoded)))
    stream.write(encoded)


def _read_exact(stream: BinaryIO, size: int) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise CacheFormatError(f"Graph cache ends early: wanted {size} bytes, got {len(data)}")
    return data


def _read_text(stream: BinaryIO) -> str:
    (length,) = struct.unpack("<H", _read_exact(stream, 2))
    return _read_exact(stream, length).decode("utf-8")


def encode_graphs(graphs: Sequence[BrainGraph], stream: BinaryIO) -> None:
    """
    Record layout after the magic tag, version byte and uint32 record count:
    subject_id, uint32 window_index, uint8 class index, uint8 n_nodes, node labels,
    uint8 n_features, float64 connectivity row-major, float64 features row-major.
    """
    stream.write(MAGIC)
    stream.write(struct.pack("<BI", VERSION, len(graphs)))
    for graph in graphs:
        n_nodes, n_features = graph.node_features.shape
        _write_text(stream, graph.subject_id)
        stream.write(struct.pack("<IBB", graph.window_index, CLASS_LABELS.index(graph.class_label), n_nodes))
        for label in graph.channel_labels:
            _write_text(stream, label)
        stream.write(struct.pack("<B", n_features))
        stream.write(np.ascontiguousarray(graph.connectivity, dtype="<f8").tobytes())
        stream.write(np.ascontiguousarray(graph.node_features, dtype="<f8").tobytes())


def decode_graphs(stream: BinaryIO) -> List[BrainGraph]:
    if _read_exact(stream, len(MAGIC)) != MAGIC:
        raise CacheFormatError("Not a graph cache (bad magic tag)")
    version, count = struct.unpack("<BI", _read_exact(stream, 5))
    if version != VERSION:
        raise CacheFormatError(f"Unsupported graph cache version {version}")

    graphs = []
    for _ in range(count):
        subject_id = _read_text(stream)
        window_index, class_index, n_nodes = struct.unpack("<IBB", _read_exact(stream, 6))
        if class_index >= len(CLASS_LABELS):
            raise CacheFormatError(f"Unknown class index {class_index}")
        labels = tuple(_read_text(stream) for _ in range(n_nodes))
        (n_features,) = struct.unpack("<B", _read_exact(stream, 1))
        connectivity = np.frombuffer(_read_exact(stream, 8 * n_nodes * n_nodes), dtype="<f8")
        features = np.frombuffer(_read_exact(stream, 8 * n_nodes * n_features), dtype="<f8")
        graphs.append(
            BrainGraph(
                channel_labels=labels,
                connectivity=connectivity.reshape(n_nodes, n_nodes).astype(np.float64),
                node_features=features.reshape(n_nodes, n_features).astype(np.float64),
                subject_id=subject_id,
                class_label=CLASS_LABELS[class_index],
                window_index=window_index,
            )
        )
    if stream.read(1):
        raise CacheFormatError("Trailing bytes after the last graph record")
    return graphs


def atomic_write_bytes(path: Union[str, Path], payload: bytes) -> None:
    """Write to a temporary sibling, then rename over the target"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def write_graph_cache(path: Union[str, Path], graphs: Sequence[BrainGraph]) -> None:
    buffer = io.BytesIO()
    encode_graphs(graphs, buffer)
    atomic_write_bytes(path, buffer.getvalue())


def read_graph_cache(path: Union[str, Path]) -> List[BrainGraph]:
    with open(path, "rb") as f:
        return decode_graphs(f)


def graphs_to_json(graphs: Sequence[BrainGraph]) -> List[Dict]:
    return [
        {
            "subject_id": graph.subject_id,
            "window_index": graph.window_index,
            "class_label": graph.class_label,
            "channel_labels": list(graph.channel_labels),
            "connectivity": graph.connectivity.tolist(),
            "node_features": graph.node_features.tolist(),
            "feature_names": feature_names(),
        }
        for graph in graphs
    ]


def graphs_to_frame(graphs: Sequence[BrainGraph]) -> pd.DataFrame:
    """One row per graph: upper-triangle connectivity and node features as columns"""
    rows = []
    names = feature_names()
    for graph in graphs:
        row = {
            "subject_id": graph.subject_id,
            "window_index": graph.window_index,
            "class_label": graph.class_label,
        }
        labels = graph.channel_labels
        for i in range(len(labels)):
            for j in range(i + 1, len(labels)):
                row[f"conn[{labels[i]}|{labels[j]}]"] = graph.connectivity[i, j]
        for i, label in enumerate(labels):
            for b, name in enumerate(names):
                row[f"{label}.{name}"] = graph.node_features[i, b]
        rows.append(row)
    return pd.DataFrame(rows)


def export_json(path: Union[str, Path], graphs: Sequence[BrainGraph]) -> None:
    atomic_write_bytes(path, json.dumps(graphs_to_json(graphs), indent=2).encode("utf-8"))
