"""
Model Checkpoints
Self-describing binary save/load of trained GCN models, plus JSON export
"""

import io
import json
import struct
from pathlib import Path
from typing import BinaryIO, Dict, Union

import numpy as np

from network.gcn import GcnError, GcnModel, ModelConfig
from network.graph_cache import atomic_write_bytes

MAGIC = b"EEGGCNCK"
VERSION = 1


class CheckpointFormatError(GcnError):
    pass


def _config_from_dict(data: Dict) -> ModelConfig:
    data = dict(data)
    data["gcn_layers"] = tuple(data["gcn_layers"])
    data["dense_layers"] = tuple(data["dense_layers"])
    return ModelConfig(**data)


def encode_checkpoint(model: GcnModel, stream: BinaryIO) -> None:
    """
    Layout: magic, version byte, uint32 length + JSON header (config, input width,
    parameter names and shapes), then every parameter as float64 row-major in
    header order.
    """
    header = {
        "config": model.config.to_dict(),
        "input_width": model.input_width,
        "params": [{"name": name, "shape": list(value.shape)} for name, value in model.params.items()],
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    stream.write(MAGIC)
    stream.write(struct.pack("<BI", VERSION, len(encoded)))
    stream.write(encoded)
    for value in model.params.values():
        stream.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def decode_checkpoint(stream: BinaryIO) -> GcnModel:
    if stream.read(len(MAGIC)) != MAGIC:
        raise CheckpointFormatError("Not a model checkpoint (bad magic tag)")
    prefix = stream.read(5)
    if len(prefix) != 5:
        raise CheckpointFormatError("Checkpoint header is truncated")
    version, length = struct.unpack("<BI", prefix)
    if version != VERSION:
        raise CheckpointFormatError(f"Unsupported checkpoint version {version}")
    try:
        header = json.loads(stream.read(length).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"Checkpoint header is not valid JSON: {e}") from None

    params = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) * 8
        raw = stream.read(size)
        if len(raw) != size:
            raise CheckpointFormatError(f"Checkpoint ends inside parameter '{entry['name']}'")
        params[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    return GcnModel(params, _config_from_dict(header["config"]), header["input_width"])


def save_checkpoint(path: Union[str, Path], model: GcnModel) -> None:
    buffer = io.BytesIO()
    encode_checkpoint(model, buffer)
    atomic_write_bytes(path, buffer.getvalue())


def load_checkpoint(path: Union[str, Path]) -> GcnModel:
    with open(path, "rb") as f:
        return decode_checkpoint(f)


def checkpoint_to_json(model: GcnModel) -> Dict:
    return {
        "config": model.config.to_dict(),
        "input_width": model.input_width,
        "params": {name: value.tolist() for name, value in model.params.items()},
    }
