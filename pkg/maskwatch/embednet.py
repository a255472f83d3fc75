"""
Toy embedding network trained with the margin loss.

A small rectifier MLP whose final activation is L2-normalized, trained with
plain SGD (coupled weight decay, heavy-ball momentum) against unit-norm class
weights. Everything is numpy and seeded, so two runs with the same inputs
produce bit-identical parameters.
"""

import csv
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from . import marginloss
from .base.exceptions import (
    DimensionMismatch,
    EmptyBatch,
    FormatError,
    IoFailure,
    ValidationError,
    ZeroEmbedding,
)
from .base.types import IndexArray, Matrix, PathLike, Vector
from .marginloss import ClassWeights, MarginSpec

logger = logging.getLogger(__name__)

CHECKPOINT_HEADER = "EMBEDNET v1"
DATASET_HEADER = "DATASET v1"

# Class counts of the masked / no-mask image folders.
FOLDER_CLASS_COUNTS = (1915, 1918)
DEFAULT_HIDDEN = (32, 32)
DEFAULT_EMBEDDING_DIM = 8
DEFAULT_INPUT_DIM = 16


class TrainConfig(BaseModel):
    """SGD hyperparameters; defaults follow the published training setup."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    learning_rate: float = Field(default=1e-4, gt=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=0.01, ge=0.0)
    batch_size: int = Field(default=32, ge=1)
    epochs: int = Field(default=40, ge=1)
    seed: int = 0


@dataclass(frozen=True)
class EmbedNet:
    """
    Feed-forward network ``layer_dims[0] -> hidden... -> D``.

    ``weights[l]`` has shape ``(layer_dims[l + 1], layer_dims[l])``.
    """

    layer_dims: tuple[int, ...]
    weights: tuple[Matrix, ...]
    biases: tuple[Vector, ...]

    def __post_init__(self) -> None:
        if len(self.layer_dims) < 2:
            raise ValidationError("EmbedNet needs at least an input and an output dimension")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise DimensionMismatch("One weight matrix and one bias per layer expected")
        for i, (w, b) in enumerate(zip(self.weights, self.biases, strict=True)):
            shape = (self.layer_dims[i + 1], self.layer_dims[i])
            if w.shape != shape or b.shape != (shape[0],):
                raise DimensionMismatch(f"Layer {i}: expected weight {shape}, got {w.shape}")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def embedding_dim(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list in checkpoint order (W0, b0, W1, b1, ...)."""
        params: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases, strict=True):
            params.extend((w, b))
        return params


@dataclass(frozen=True)
class LabeledDataset:
    samples: Matrix
    labels: IndexArray
    num_classes: int

    def __post_init__(self) -> None:
        if self.samples.ndim != 2 or self.labels.shape != (self.samples.shape[0],):
            raise DimensionMismatch("samples must be N x dim with one label per row")
        if self.num_classes < 1 or len(self) < self.num_classes:
            raise ValidationError("Dataset needs at least one sample per class")
        if np.any(self.labels < 0) or np.any(self.labels >= self.num_classes):
            raise ValidationError(f"Every label must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.samples.shape[1])


@dataclass
class OptimizerState:
    """Momentum buffers, updated in place by :func:`train_step`."""

    velocities: list[np.ndarray] = field(default_factory=list)
    class_velocity: Matrix | None = None
    steps: int = 0


class StepResult(NamedTuple):
    net: EmbedNet
    class_weights: ClassWeights
    loss: float


class TrainResult(NamedTuple):
    net: EmbedNet
    class_weights: ClassWeights
    loss_history: list[float]


def init_net(
    layer_dims: Sequence[int],
    seed: int = 0,
) -> EmbedNet:
    """Uniform ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` initialization."""
    dims = tuple(int(d) for d in layer_dims)
    if any(d < 1 for d in dims):
        raise ValidationError(f"Layer dimensions must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:], strict=True):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return EmbedNet(layer_dims=dims, weights=tuple(weights), biases=tuple(biases))


def default_layer_dims(input_dim: int, embedding_dim: int = DEFAULT_EMBEDDING_DIM) -> tuple[int, ...]:
    return (input_dim, *DEFAULT_HIDDEN, embedding_dim)


def init_class_weights(num_classes: int, dim: int, seed: int = 0) -> ClassWeights:
    rng = np.random.default_rng(seed + 1)
    return ClassWeights.from_raw(rng.standard_normal((num_classes, dim)))


def _forward_cached(net: EmbedNet, X: Matrix) -> tuple[list[Matrix], list[Matrix], Matrix, Vector]:
    """Returns (layer inputs, pre-activations, unit embeddings, output norms)."""
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise DimensionMismatch(
            f"Input dim {X.shape[-1]} does not match network input {net.input_dim}",
            expected=net.input_dim,
            actual=int(X.shape[-1]),
        )
    inputs: list[Matrix] = []
    pre: list[Matrix] = []
    h = X
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases, strict=True)):
        inputs.append(h)
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
    norms = np.linalg.norm(h, axis=1)
    if np.any(norms == 0):
        raise ZeroEmbedding("Network output is the zero vector; cannot normalize")
    return inputs, pre, h / norms[:, None], norms


def embed_batch(net: EmbedNet, X: Matrix) -> Matrix:
    """Unit embeddings for every row of ``X``."""
    _, _, E, _ = _forward_cached(net, np.asarray(X, dtype=np.float64))
    return E


def forward(net: EmbedNet, x: Vector) -> Vector:
    """L2-normalized final-layer activation for one input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"Expected a 1-D input, got shape {x.shape}")
    return embed_batch(net, x[None, :])[0]


def _backward(
    net: EmbedNet,
    inputs: list[Matrix],
    pre: list[Matrix],
    E: Matrix,
    norms: Vector,
    dE: Matrix,
) -> list[np.ndarray]:
    """Parameter gradients in ``net.parameters()`` order."""
    # Through the normalization e = z / |z|: dz = (dE - e (e . dE)) / |z|
    dz = (dE - E * np.einsum("nd,nd->n", E, dE)[:, None]) / norms[:, None]
    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(net.weights))
    for i in range(len(net.weights) - 1, -1, -1):
        grads[2 * i] = dz.T @ inputs[i]
        grads[2 * i + 1] = dz.sum(axis=0)
        if i > 0:
            dz = (dz @ net.weights[i]) * (pre[i - 1] > 0)
    return grads


def sgd_update(
    param: np.ndarray, grad: np.ndarray, velocity: np.ndarray, cfg: TrainConfig
) -> tuple[np.ndarray, np.ndarray]:
    """
    One coupled-decay momentum step.

    ``v <- momentum * v + g + weight_decay * theta``; ``theta <- theta - lr * v``.
    """
    velocity = cfg.momentum * velocity + grad + cfg.weight_decay * param
    return param - cfg.learning_rate * velocity, velocity


def train_step(
    net: EmbedNet,
    class_weights: ClassWeights,
    batch: tuple[Matrix, IndexArray],
    spec: MarginSpec,
    cfg: TrainConfig,
    state: OptimizerState,
) -> StepResult:
    """
    One SGD update on a batch; returns the batch mean loss before the update.

    Class weight rows are re-normalized to unit length after the step.
    """
    X = np.asarray(batch[0], dtype=np.float64)
    labels = np.asarray(batch[1], dtype=np.intp)
    if X.shape[0] == 0:
        raise EmptyBatch("train_step needs a nonempty batch")
    if class_weights.dim != net.embedding_dim:
        raise DimensionMismatch(
            f"Class weight dim {class_weights.dim} != embedding dim {net.embedding_dim}",
            expected=net.embedding_dim,
            actual=class_weights.dim,
        )

    inputs, pre, E, norms = _forward_cached(net, X)
    dE, dW, fwd = marginloss.batch_grad(E, class_weights, labels, spec)
    grads = _backward(net, inputs, pre, E, norms, dE)

    params = net.parameters()
    if not state.velocities:
        state.velocities = [np.zeros_like(p) for p in params]
    if state.class_velocity is None:
        state.class_velocity = np.zeros_like(class_weights.rows)

    new_params = []
    for i, (p, g) in enumerate(zip(params, grads, strict=True)):
        p_new, state.velocities[i] = sgd_update(p, g, state.velocities[i], cfg)
        new_params.append(p_new)
    rows, state.class_velocity = sgd_update(class_weights.rows, dW, state.class_velocity, cfg)
    state.steps += 1

    new_net = EmbedNet(
        layer_dims=net.layer_dims,
        weights=tuple(new_params[0::2]),
        biases=tuple(new_params[1::2]),
    )
    return StepResult(new_net, ClassWeights.from_raw(rows), fwd.mean_loss)


def train(
    dataset: LabeledDataset,
    net_init: EmbedNet,
    spec: MarginSpec,
    cfg: TrainConfig,
    class_weights_init: ClassWeights | None = None,
) -> TrainResult:
    """
    Run ``cfg.epochs`` epochs of ``ceil(N / batch_size)`` steps with a seeded
    shuffle per epoch.

    Returns:
        Trained network, class weights and the sample-weighted mean loss of
        every epoch
    """
    if dataset.input_dim != net_init.input_dim:
        raise DimensionMismatch(
            f"Dataset dim {dataset.input_dim} != network input {net_init.input_dim}",
            expected=net_init.input_dim,
            actual=dataset.input_dim,
        )
    class_weights = class_weights_init or init_class_weights(
        dataset.num_classes, net_init.embedding_dim, cfg.seed
    )
    if class_weights.num_classes != dataset.num_classes:
        raise DimensionMismatch(
            "Class weight count does not match dataset classes",
            expected=dataset.num_classes,
            actual=class_weights.num_classes,
        )

    rng = np.random.default_rng(cfg.seed)
    state = OptimizerState()
    net = net_init
    history: list[float] = []
    n = len(dataset)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            net, class_weights, loss = train_step(
                net, class_weights, (dataset.samples[idx], dataset.labels[idx]), spec, cfg, state
            )
            total += loss * len(idx)
        history.append(total / n)
        logger.debug("epoch %d/%d loss %.6f", epoch + 1, cfg.epochs, history[-1])
    return TrainResult(net, class_weights, history)


def make_toy_dataset(
    num_classes: int = 2,
    per_class: Sequence[int] = FOLDER_CLASS_COUNTS,
    input_dim: int = DEFAULT_INPUT_DIM,
    spread: float = 0.1,
    seed: int = 0,
) -> LabeledDataset:
    """
    Gaussian clusters of standard deviation ``spread`` around ``num_classes``
    seeded unit-length centers. Samples are ordered by class.
    """
    if len(per_class) != num_classes:
        raise ValidationError(f"per_class has {len(per_class)} entries for {num_classes} classes")
    if spread <= 0:
        raise ValidationError(f"spread must be positive, got {spread}")
    if any(c < 1 for c in per_class):
        raise ValidationError("Every class needs at least one sample")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((num_classes, input_dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    blocks, labels = [], []
    for k, count in enumerate(per_class):
        blocks.append(centers[k] + spread * rng.standard_normal((count, input_dim)))
        labels.append(np.full(count, k, dtype=np.intp))
    return LabeledDataset(np.vstack(blocks), np.concatenate(labels), num_classes)


def nearest_class_accuracy(
    net: EmbedNet, class_weights: ClassWeights, dataset: LabeledDataset
) -> float:
    """Fraction of samples whose embedding is most similar to its own class row."""
    E = embed_batch(net, dataset.samples)
    predicted = np.argmax(E @ class_weights.rows.T, axis=1)
    return float(np.mean(predicted == dataset.labels))


def median_target_angle(
    net: EmbedNet, class_weights: ClassWeights, dataset: LabeledDataset
) -> float:
    E = embed_batch(net, dataset.samples)
    return float(np.median(marginloss.target_angles(E, class_weights, dataset.labels)))


# ---------------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------------


def _fmt(values: np.ndarray) -> str:
    return " ".join(f"{v:.17g}" for v in values.ravel())


def save_checkpoint(net: EmbedNet, class_weights: ClassWeights, path: PathLike) -> None:
    """
    Write a text checkpoint: header, ``dims`` line, ``classes`` line, then one
    line per tensor (W0, b0, ..., class weights) in row-major order.
    """
    lines = [
        CHECKPOINT_HEADER,
        "dims " + " ".join(str(d) for d in net.layer_dims),
        f"classes {class_weights.num_classes}",
    ]
    lines.extend(_fmt(p) for p in net.parameters())
    lines.append(_fmt(class_weights.rows))
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot write checkpoint: {e}", path=str(path), cause=e) from e


def load_checkpoint(path: PathLike) -> tuple[EmbedNet, ClassWeights]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise IoFailure(f"Cannot read checkpoint: {e}", path=str(path), cause=e) from e
    p = str(path)
    if not lines or lines[0].strip() != CHECKPOINT_HEADER:
        raise FormatError(f"Expected header {CHECKPOINT_HEADER!r}", path=p, line_number=1)
    try:
        dims_tok = lines[1].split()
        if dims_tok[:1] != ["dims"]:
            raise ValueError("missing dims line")
        dims = tuple(int(d) for d in dims_tok[1:])
        if len(dims) < 2 or min(dims) < 1:
            raise ValueError(f"need at least two positive layer sizes, got {dims}")
    except (IndexError, ValueError) as e:
        raise FormatError("Bad dims line", path=p, line_number=2, cause=e) from e
    try:
        classes_tok = lines[2].split()
        if len(classes_tok) != 2 or classes_tok[0] != "classes":
            raise ValueError("missing classes line")
        num_classes = int(classes_tok[1])
        if num_classes < 1:
            raise ValueError(f"class count must be positive, got {num_classes}")
    except (IndexError, ValueError) as e:
        raise FormatError("Bad classes line", path=p, line_number=3, cause=e) from e

    shapes: list[tuple[int, ...]] = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:], strict=True):
        shapes.extend(((fan_out, fan_in), (fan_out,)))
    shapes.append((num_classes, dims[-1]))
    body = lines[3:]
    if len(body) != len(shapes):
        raise FormatError(f"Expected {len(shapes)} tensor lines, found {len(body)}", path=p)

    tensors = []
    for offset, (line, shape) in enumerate(zip(body, shapes, strict=True)):
        try:
            values = np.array([float(v) for v in line.split()], dtype=np.float64)
        except ValueError as e:
            raise FormatError("Non-numeric value", path=p, line_number=4 + offset, cause=e) from e
        if values.size != math.prod(shape):
            raise FormatError(
                f"Expected {math.prod(shape)} values, found {values.size}",
                path=p,
                line_number=4 + offset,
            )
        tensors.append(values.reshape(shape))
    net = EmbedNet(layer_dims=dims, weights=tuple(tensors[0:-1:2]), biases=tuple(tensors[1:-1:2]))
    try:
        cw = ClassWeights(rows=tensors[-1])
    except ValidationError as e:
        raise FormatError("Class weights are not unit-norm", path=p, cause=e) from e
    return net, cw


def save_dataset(dataset: LabeledDataset, path: PathLike) -> None:
    lines = [f"{DATASET_HEADER} classes={dataset.num_classes} dim={dataset.input_dim}"]
    for label, row in zip(dataset.labels, dataset.samples, strict=True):
        lines.append(f"{int(label)}\t" + ",".join(f"{v:.17g}" for v in row))
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot write dataset: {e}", path=str(path), cause=e) from e


def load_dataset(path: PathLike) -> LabeledDataset:
    """Read ``DATASET v1 classes=<C> dim=<N>`` followed by ``<label>\\t<values>`` rows."""
    p = str(path)
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise IoFailure(f"Cannot read dataset: {e}", path=p, cause=e) from e
    try:
        head = lines[0].split()
        if " ".join(head[:2]) != DATASET_HEADER:
            raise ValueError("bad header")
        fields = dict(tok.split("=", 1) for tok in head[2:])
        num_classes, dim = int(fields["classes"]), int(fields["dim"])
    except (IndexError, KeyError, ValueError) as e:
        raise FormatError(f"Expected '{DATASET_HEADER} classes=<C> dim=<N>'", path=p, line_number=1, cause=e) from e

    samples, labels = [], []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            label_str, values_str = line.split("\t", 1)
            row = [float(v) for v in values_str.split(",")]
            labels.append(int(label_str))
        except ValueError as e:
            raise FormatError("Expected '<label>\\t<v1>,<v2>,...'", path=p, line_number=number, cause=e) from e
        if len(row) != dim:
            raise FormatError(f"Expected {dim} values, found {len(row)}", path=p, line_number=number)
        samples.append(row)
    try:
        return LabeledDataset(
            np.array(samples, dtype=np.float64).reshape(len(samples), dim),
            np.array(labels, dtype=np.intp),
            num_classes,
        )
    except ValidationError as e:
        raise FormatError(str(e), path=p, cause=e) from e


def write_loss_csv(history: Sequence[float], path: PathLike) -> None:
    """``epoch,loss`` rows, epochs numbered from 1."""
    try:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "loss"])
            for epoch, loss in enumerate(history, start=1):
                writer.writerow([epoch, f"{loss:.10f}"])
    except OSError as e:
        raise IoFailure(f"Cannot write loss CSV: {e}", path=str(path), cause=e) from e
