"""
Graph Convolutional Network
From-scratch numpy GCN: forward pass, analytic gradients and step-decay SGD training
"""

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from network.graph import BrainGraph
from tools.edf_reader import CLASS_LABELS

logger = logging.getLogger(__name__)

N_CLASSES = len(CLASS_LABELS)


class GcnError(ValueError):
    pass


class ShapeMismatch(GcnError):
    pass


class AsymmetricInput(GcnError):
    pass


class NegativeWeight(GcnError):
    pass


class NonFiniteLoss(GcnError):
    pass


class SingleClassTrainingWarning(UserWarning):
    """Training set holds windows of one class only"""


@dataclass(frozen=True)
class ModelConfig:
    gcn_layers: Tuple[int, ...] = (32, 32)
    leaky_slope: float = 0.01
    dense_layers: Tuple[int, ...] = (16, 2)
    readout: str = "mean"
    epochs: int = 30
    batch_size: int = 64
    lr0: float = 0.01
    lr_decay_every: int = 10
    lr_decay_factor: float = 10.0
    seed: int = 0
    class_weighting: bool = False

    def check_structure(self) -> None:
        if not self.dense_layers or self.dense_layers[-1] != N_CLASSES:
            raise GcnError(f"Final dense width must equal the number of classes ({N_CLASSES})")
        if any(width < 1 for width in (*self.gcn_layers, *self.dense_layers)):
            raise GcnError("Layer widths must be positive")
        if self.readout != "mean":
            raise GcnError(f"Unsupported readout '{self.readout}'")
        if self.epochs < 0 or self.batch_size < 1 or self.lr_decay_every < 1:
            raise GcnError("epochs must be >= 0, batch_size and lr_decay_every >= 1")
        if self.lr0 < 0 or self.lr_decay_factor <= 0:
            raise GcnError("Learning rate must be >= 0 and the decay factor positive")

    def validate(self) -> None:
        self.check_structure()
        if self.lr0 <= 0:
            raise GcnError(f"lr0 must be positive, got {self.lr0}")

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class Prediction:
    class_probabilities: np.ndarray
    predicted_class: str

    @property
    def class_index(self) -> int:
        return CLASS_LABELS.index(self.predicted_class)


@dataclass
class TrainingResult:
    model: "GcnModel"
    loss_history: List[float] = field(default_factory=list)
    train_accuracy_history: List[float] = field(default_factory=list)


def leaky_relu(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


def leaky_relu_grad(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0, 1.0, slope)


def normalize_adjacency(connectivity: np.ndarray) -> np.ndarray:
    """
    Symmetric GCN propagation matrix D^-1/2 (A + I) D^-1/2

    The connectivity weights act as the weighted adjacency A.
    """
    a = np.asarray(connectivity, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"Connectivity must be square, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12):
        raise AsymmetricInput("Connectivity matrix is not symmetric")
    if (a < 0).any():
        raise NegativeWeight("Connectivity matrix has negative weights")
    a_tilde = a + np.eye(a.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return a_tilde * inv_sqrt[:, None] * inv_sqrt[None, :]


def learning_rate(epoch: int, config: ModelConfig) -> float:
    """lr0 / factor ** floor(epoch / every)"""
    return config.lr0 / config.lr_decay_factor ** (epoch // config.lr_decay_every)


def _layer_shapes(config: ModelConfig, input_width: int) -> List[Tuple[str, int, int]]:
    shapes = []
    width = input_width
    for i, out in enumerate(config.gcn_layers):
        shapes.append((f"conv{i}", width, out))
        width = out
    for i, out in enumerate(config.dense_layers):
        shapes.append((f"dense{i}", width, out))
        width = out
    return shapes


class GcnModel:
    """Graph convolution layers, mean readout and a dense classification head"""

    def __init__(self, params: Dict[str, np.ndarray], config: ModelConfig, input_width: int = 6):
        config.check_structure()
        self.config = config
        self.input_width = input_width
        expected = {}
        for name, fan_in, fan_out in _layer_shapes(config, input_width):
            expected[f"{name}.weight"] = (fan_in, fan_out)
            expected[f"{name}.bias"] = (fan_out,)
        if set(params) != set(expected):
            raise ShapeMismatch(f"Parameter names {sorted(params)} do not match {sorted(expected)}")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ShapeMismatch(f"{name} has shape {params[name].shape}, expected {shape}")
        # ordered the way the layers are applied
        self.params = {name: np.asarray(params[name], dtype=np.float64) for name in expected}

    @classmethod
    def initialize(cls, config: ModelConfig, input_width: int = 6, seed: Optional[int] = None) -> "GcnModel":
        """Glorot-uniform weights, zero biases, drawn from a seeded stream"""
        init_seq, _ = np.random.SeedSequence(config.seed if seed is None else seed).spawn(2)
        rng = np.random.default_rng(init_seq)
        params = {}
        for name, fan_in, fan_out in _layer_shapes(config, input_width):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params[f"{name}.weight"] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            params[f"{name}.bias"] = np.zeros(fan_out)
        return cls(params, config, input_width)

    def copy(self, config: Optional[ModelConfig] = None) -> "GcnModel":
        """Independent parameter copy, optionally under another (structurally equal) config"""
        return GcnModel({name: value.copy() for name, value in self.params.items()}, config or self.config,
                        self.input_width)

    @property
    def n_conv(self) -> int:
        return len(self.config.gcn_layers)

    @property
    def n_dense(self) -> int:
        return len(self.config.dense_layers)

    def _check_graph(self, graph: BrainGraph) -> None:
        n_nodes, width = np.shape(graph.node_features)
        if width != self.input_width:
            raise ShapeMismatch(f"Graph has {width} node features, model expects {self.input_width}")
        if np.shape(graph.connectivity) != (n_nodes, n_nodes):
            raise ShapeMismatch(
                f"Connectivity {np.shape(graph.connectivity)} does not match {n_nodes} nodes"
            )

    def forward(self, graph: BrainGraph) -> Tuple[Prediction, Dict]:
        """
        Class probabilities for one graph

        Returns:
            Tuple of (prediction, activation trace for the backward pass)
        """
        self._check_graph(graph)
        a_hat = normalize_adjacency(graph.connectivity)[None]
        logits, trace = _forward_batch(self, a_hat, np.asarray(graph.node_features, dtype=np.float64)[None])
        probabilities = softmax(logits)[0]
        return _prediction(probabilities), trace

    def predict(self, graph: BrainGraph) -> Prediction:
        """Argmax of the class probabilities; ties go to class index 0"""
        prediction, _ = self.forward(graph)
        return prediction


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _prediction(probabilities: np.ndarray) -> Prediction:
    return Prediction(class_probabilities=probabilities, predicted_class=CLASS_LABELS[int(np.argmax(probabilities))])


def _forward_batch(model: GcnModel, a_hat: np.ndarray, x: np.ndarray) -> Tuple[np.ndarray, Dict]:
    """
    a_hat: [B x n x n] propagation matrices, x: [B x n x f] node features
    """
    slope = model.config.leaky_slope
    h = x
    conv_trace = []
    for i in range(model.n_conv):
        propagated = a_hat @ h
        z = propagated @ model.params[f"conv{i}.weight"] + model.params[f"conv{i}.bias"]
        conv_trace.append((propagated, z))
        h = leaky_relu(z, slope)

    readout = h.mean(axis=1)
    a = readout
    dense_trace = []
    for i in range(model.n_dense):
        z = a @ model.params[f"dense{i}.weight"] + model.params[f"dense{i}.bias"]
        dense_trace.append((a, z))
        a = leaky_relu(z, slope) if i < model.n_dense - 1 else z

    trace = {"a_hat": a_hat, "conv": conv_trace, "readout": readout, "dense": dense_trace, "logits": a}
    return a, trace


def _backward_batch(model: GcnModel, trace: Dict, d_logits: np.ndarray) -> Dict[str, np.ndarray]:
    slope = model.config.leaky_slope
    grads = {}
    g = d_logits
    for i in reversed(range(model.n_dense)):
        a_in, z = trace["dense"][i]
        if i < model.n_dense - 1:
            g = g * leaky_relu_grad(z, slope)
        grads[f"dense{i}.weight"] = a_in.T @ g
        grads[f"dense{i}.bias"] = g.sum(axis=0)
        g = g @ model.params[f"dense{i}.weight"].T

    a_hat = trace["a_hat"]
    n_nodes = a_hat.shape[1]
    d_h = np.repeat(g[:, None, :] / n_nodes, n_nodes, axis=1)
    for i in reversed(range(model.n_conv)):
        propagated, z = trace["conv"][i]
        d_z = d_h * leaky_relu_grad(z, slope)
        grads[f"conv{i}.weight"] = np.einsum("bni,bno->io", propagated, d_z)
        grads[f"conv{i}.bias"] = d_z.sum(axis=(0, 1))
        d_propagated = d_z @ model.params[f"conv{i}.weight"].T
        d_h = np.swapaxes(a_hat, 1, 2) @ d_propagated
    return grads


def _class_weights(labels: np.ndarray, enabled: bool) -> np.ndarray:
    if not enabled:
        return np.ones(N_CLASSES)
    counts = np.bincount(labels, minlength=N_CLASSES).astype(np.float64)
    weights = np.zeros(N_CLASSES)
    present = counts > 0
    weights[present] = labels.size / (present.sum() * counts[present])
    return weights


def _labels_of(graphs: Sequence[BrainGraph]) -> np.ndarray:
    return np.array([CLASS_LABELS.index(graph.class_label) for graph in graphs], dtype=int)


def _stacked_loss_and_gradients(model: GcnModel, a_hat: List[np.ndarray], x: List[np.ndarray],
                                labels: np.ndarray, sample_weights: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
    total_weight = sample_weights.sum()
    grads = {name: np.zeros_like(value) for name, value in model.params.items()}
    loss = 0.0
    # graphs with different node counts are propagated in separate stacks
    groups: Dict[int, List[int]] = {}
    for index, matrix in enumerate(a_hat):
        groups.setdefault(matrix.shape[0], []).append(index)

    for indices in groups.values():
        logits, trace = _forward_batch(model, np.stack([a_hat[i] for i in indices]), np.stack([x[i] for i in indices]))
        group_labels = labels[indices]
        weights = sample_weights[indices] / total_weight
        log_probs = _log_softmax(logits)
        loss -= float((weights * log_probs[np.arange(len(indices)), group_labels]).sum())
        one_hot = np.eye(N_CLASSES)[group_labels]
        d_logits = weights[:, None] * (np.exp(log_probs) - one_hot)
        for name, value in _backward_batch(model, trace, d_logits).items():
            grads[name] += value
    return loss, grads


def loss_and_gradients(model: GcnModel, graphs: Sequence[BrainGraph],
                       labels: Optional[Sequence[int]] = None) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Mean cross-entropy over a batch and its gradient for every parameter

    Args:
        model: Model to evaluate
        graphs: Nonempty batch
        labels: Class indices (defaults to each graph's class label)

    Returns:
        Tuple of (loss, gradients keyed like model.params)
    """
    if not graphs:
        raise GcnError("Batch must not be empty")
    for graph in graphs:
        model._check_graph(graph)
    y = _labels_of(graphs) if labels is None else np.asarray(labels, dtype=int)
    if y.shape != (len(graphs),):
        raise ShapeMismatch(f"{y.size} labels for {len(graphs)} graphs")
    a_hat = [normalize_adjacency(graph.connectivity) for graph in graphs]
    x = [np.asarray(graph.node_features, dtype=np.float64) for graph in graphs]
    weights = _class_weights(y, model.config.class_weighting)[y]
    return _stacked_loss_and_gradients(model, a_hat, x, y, weights)


def train(model: GcnModel, graphs: Sequence[BrainGraph], config: Optional[ModelConfig] = None) -> TrainingResult:
    """
    Shuffled mini-batch SGD with step learning-rate decay

    Deterministic for a given config.seed: the shuffle stream is derived from it.
    The input model is not modified.
    """
    config = config or model.config
    config.check_structure()
    if not graphs:
        raise GcnError("Training needs at least one graph")
    for graph in graphs:
        model._check_graph(graph)

    labels = _labels_of(graphs)
    if np.unique(labels).size < 2:
        warnings.warn(
            f"All {len(graphs)} training windows belong to class '{CLASS_LABELS[labels[0]]}'",
            SingleClassTrainingWarning,
            stacklevel=2,
        )
    a_hat = [normalize_adjacency(graph.connectivity) for graph in graphs]
    x = [np.asarray(graph.node_features, dtype=np.float64) for graph in graphs]
    weights = _class_weights(labels, config.class_weighting)[labels]

    trained = model.copy(config)
    _, shuffle_seq = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(shuffle_seq)
    result = TrainingResult(model=trained)

    for epoch in range(config.epochs):
        lr = learning_rate(epoch, config)
        order = rng.permutation(len(graphs))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grads = _stacked_loss_and_gradients(
                trained, [a_hat[i] for i in batch], [x[i] for i in batch], labels[batch], weights[batch]
            )
            if not np.isfinite(loss):
                largest = max(float(np.abs(p).max()) for p in trained.params.values())
                raise NonFiniteLoss(
                    f"Loss became {loss} at epoch {epoch}, batch starting {start} "
                    f"(lr={lr}, max |param|={largest:.3g})"
                )
            for name, grad in grads.items():
                trained.params[name] -= lr * grad
            epoch_loss += loss * len(batch)

        result.loss_history.append(epoch_loss / len(graphs))
        predicted = _stacked_probabilities(trained, a_hat, x).argmax(axis=1)
        result.train_accuracy_history.append(float(np.mean(predicted == labels)))
        logger.debug(
            f"epoch {epoch}: lr={lr:g} loss={result.loss_history[-1]:.4f} "
            f"train_acc={result.train_accuracy_history[-1]:.3f}"
        )
    return result


def _stacked_probabilities(model: GcnModel, a_hat: List[np.ndarray], x: List[np.ndarray]) -> np.ndarray:
    probabilities = np.zeros((len(a_hat), N_CLASSES))
    groups: Dict[int, List[int]] = {}
    for index, matrix in enumerate(a_hat):
        groups.setdefault(matrix.shape[0], []).append(index)
    for indices in groups.values():
        logits, _ = _forward_batch(model, np.stack([a_hat[i] for i in indices]), np.stack([x[i] for i in indices]))
        probabilities[indices] = softmax(logits)
    return probabilities


def predict_batch(model: GcnModel, graphs: Sequence[BrainGraph]) -> List[Prediction]:
    """Predictions for many graphs, propagated as stacks of equal node count"""
    for graph in graphs:
        model._check_graph(graph)
    a_hat = [normalize_adjacency(graph.connectivity) for graph in graphs]
    x = [np.asarray(graph.node_features, dtype=np.float64) for graph in graphs]
    return [_prediction(row) for row in _stacked_probabilities(model, a_hat, x)]


def accuracy(model: GcnModel, graphs: Sequence[BrainGraph]) -> float:
    predictions = predict_batch(model, graphs)
    return float(np.mean([p.predicted_class == g.class_label for p, g in zip(predictions, graphs)]))
