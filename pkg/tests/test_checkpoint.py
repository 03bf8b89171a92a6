import io

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from network.checkpoint import (
    CheckpointFormatError,
    checkpoint_to_json,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from network.gcn import GcnModel, ModelConfig


def test_saved_model_restores_config_and_params(tmp_path):
    model = GcnModel.initialize(ModelConfig(gcn_layers=(8, 4), dense_layers=(4, 2), seed=5), input_width=6)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, model)
    restored = load_checkpoint(path)
    assert restored.config == model.config
    assert restored.input_width == 6
    assert list(restored.params) == list(model.params)
    for name, value in model.params.items():
        assert_array_equal(restored.params[name], value)


def test_corrupt_checkpoints_are_rejected():
    buffer = io.BytesIO()
    encode_checkpoint(GcnModel.initialize(ModelConfig(gcn_layers=(4,), dense_layers=(4, 2))), buffer)
    data = buffer.getvalue()
    with pytest.raises(CheckpointFormatError):
        decode_checkpoint(io.BytesIO(b"XXXXXXXX" + data[8:]))
    with pytest.raises(CheckpointFormatError):
        decode_checkpoint(io.BytesIO(data[:10]))
    with pytest.raises(CheckpointFormatError):
        decode_checkpoint(io.BytesIO(data[:-8]))


def test_json_export():
    model = GcnModel.initialize(ModelConfig(gcn_layers=(4,), dense_layers=(4, 2)))
    payload = checkpoint_to_json(model)
    assert tuple(payload["config"]["gcn_layers"]) == (4,)
    assert np.array(payload["params"]["conv0.weight"]).shape == (6, 4)
