"""Multilayer perceptrons with hand-derived backpropagation.

ReLU hidden layers, identity output, He-initialized weights, trained with
plain minibatch SGD under milestone learning-rate decay. The architecture
family is fixed, so gradients are chained by hand; no autodiff.

Checkpoints use a flat binary layout (see ``save_model``): the magic
bytes ``DTSM``, a u32 format version, a u32 layer count, the layer sizes
as u32s, then for each layer its weight matrix (row-major) followed by
its bias vector, all little-endian float64.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .numerics import as_matrix, cross_entropy, cross_entropy_grad

CHECKPOINT_MAGIC = b"DTSM"
CHECKPOINT_VERSION = 1


@dataclass
class SgdConfig:
    """Plain SGD settings: milestone epochs multiply lr by decay_factor."""

    learning_rate: float
    epochs: int
    batch_size: int
    seed: int
    milestones: tuple = ()
    decay_factor: float = 0.1

    def __post_init__(self):
        self.milestones = tuple(int(m) for m in self.milestones)
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ValueError(f"decay_factor must lie in (0, 1], got {self.decay_factor}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if list(self.milestones) != sorted(self.milestones):
            raise ValueError(f"milestones must be sorted ascending, got {self.milestones}")


@dataclass
class Gradients:
    """Per-parameter gradient buffers paired with a model's layers."""

    weights: list
    biases: list


class Model:
    """MLP parameters plus the forward cache backpropagation needs."""

    def __init__(self, layer_sizes, weights, biases):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"need >= 2 layer sizes, all >= 1, got {layer_sizes}")
        if len(weights) != len(self.layer_sizes) - 1 or len(biases) != len(weights):
            raise ValueError("one weight matrix and bias vector per layer pair required")
        for i, (w, b) in enumerate(zip(weights, biases)):
            expect = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != expect:
                raise ValueError(f"weight {i} has shape {w.shape}, expected {expect}")
            if b.shape != (expect[1],):
                raise ValueError(f"bias {i} has shape {b.shape}, expected ({expect[1]},)")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i} parameters contain non-finite entries")
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in biases]
        self._activations = None

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "Model":
        return Model(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


def init_model(layer_sizes, seed) -> Model:
    """He-initialized MLP: W ~ N(0, 2/fan_in), zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"need >= 2 layer sizes, all >= 1, got {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Model(sizes, weights, biases)


def forward(model: Model, inputs) -> np.ndarray:
    """Forward pass; caches layer activations for ``backward``."""
    x = as_matrix(inputs, "inputs")
    if x.shape[1] != model.input_dim:
        raise ValueError(
            f"inputs have width {x.shape[1]}, model expects {model.input_dim}"
        )
    activations = [x]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        x = x @ w + b
        if i < last:
            x = np.maximum(x, 0.0)
            activations.append(x)
    model._activations = activations
    return x


def backward(model: Model, upstream_logit_grad) -> Gradients:
    """Chain the upstream logit gradient back to every parameter.

    Requires a prior ``forward`` on the matching batch; returns the filled
    gradient buffers.
    """
    if model._activations is None:
        raise RuntimeError("backward called before forward")
    activations = model._activations
    delta = np.ascontiguousarray(upstream_logit_grad, dtype=np.float64)
    expect = (activations[0].shape[0], model.num_classes)
    if delta.shape != expect:
        raise ValueError(
            f"upstream gradient has shape {delta.shape}, expected {expect} "
            "from the cached forward batch"
        )
    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            # Post-ReLU activation > 0 iff pre-activation > 0.
            delta = (delta @ model.weights[i].T) * (activations[i] > 0.0)
    return Gradients(weights=grad_w, biases=grad_b)


def sgd_step(model: Model, gradients: Gradients, lr: float) -> Model:
    """In-place parameter update theta <- theta - lr * grad."""
    for w, gw in zip(model.weights, gradients.weights):
        if w.shape != gw.shape:
            raise ValueError(f"gradient shape {gw.shape} != weight shape {w.shape}")
        w -= lr * gw
    for b, gb in zip(model.biases, gradients.biases):
        if b.shape != gb.shape:
            raise ValueError(f"gradient shape {gb.shape} != bias shape {b.shape}")
        b -= lr * gb
    return model


def flat_params(model: Model) -> np.ndarray:
    """All parameters concatenated, weights then biases per layer."""
    parts = []
    for w, b in zip(model.weights, model.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def assign_flat_params(model: Model, values) -> Model:
    """Inverse of ``flat_params``; writes into the existing buffers."""
    vec = np.asarray(values, dtype=np.float64).ravel()
    expected = sum(w.size + b.size
                   for w, b in zip(model.weights, model.biases))
    if vec.size != expected:
        raise ValueError(f"got {vec.size} values, model holds {expected}")
    offset = 0
    for w, b in zip(model.weights, model.biases):
        w[...] = vec[offset:offset + w.size].reshape(w.shape)
        offset += w.size
        b[...] = vec[offset:offset + b.size]
        offset += b.size
    return model


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    """Dedicated generator for one epoch's shuffle, derived from the run seed."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(int(epoch),))
    )


def minibatch_slices(num_rows: int, batch_size: int):
    """Contiguous batch slices covering [0, num_rows); last may be short."""
    return [
        slice(start, min(start + batch_size, num_rows))
        for start in range(0, num_rows, batch_size)
    ]


def lr_at_epoch(config: SgdConfig, epoch: int) -> float:
    """Learning rate in effect for a 0-based epoch index."""
    lr = config.learning_rate
    for milestone in config.milestones:
        if epoch >= milestone:
            lr *= config.decay_factor
    return lr


@dataclass
class EpochRecord:
    """One epoch of supervised-training telemetry."""

    epoch: int
    lr: float
    mean_ce: float
    accuracy: float


def train_supervised(model: Model, dataset, config: SgdConfig):
    """Minibatch SGD on cross-entropy; returns (model, per-epoch records)."""
    features = dataset.features
    labels = dataset.labels
    if features.shape[1] != model.input_dim:
        raise ValueError(
            f"dataset width {features.shape[1]} != model input {model.input_dim}"
        )
    if dataset.num_classes != model.num_classes:
        raise ValueError(
            f"dataset has {dataset.num_classes} classes, model {model.num_classes}"
        )
    records = []
    for epoch in range(config.epochs):
        lr = lr_at_epoch(config, epoch)
        order = epoch_rng(config.seed, epoch).permutation(features.shape[0])
        batch_losses = []
        for batch in minibatch_slices(features.shape[0], config.batch_size):
            idx = order[batch]
            logits = forward(model, features[idx])
            batch_losses.append(cross_entropy(logits, labels[idx]))
            grads = backward(model, cross_entropy_grad(logits, labels[idx]))
            sgd_step(model, grads, lr)
        correct = np.argmax(forward(model, features), axis=1) == labels
        records.append(EpochRecord(
            epoch=epoch,
            lr=lr,
            mean_ce=float(np.mean(batch_losses)),
            accuracy=float(np.mean(correct)),
        ))
    return model, records


def save_model(model: Model, path) -> None:
    """Write the checkpoint layout documented in the module docstring."""
    with open(path, "wb") as fh:
        fh.write(serialize_model(model))


def serialize_model(model: Model) -> bytes:
    sizes = model.layer_sizes
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        struct.pack("<I", len(sizes)),
        struct.pack(f"<{len(sizes)}I", *sizes),
    ]
    for w, b in zip(model.weights, model.biases):
        parts.append(w.astype("<f8").tobytes())
        parts.append(b.astype("<f8").tobytes())
    return b"".join(parts)


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint (bad magic bytes)")
    try:
        version, count = struct.unpack_from("<II", blob, 4)
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        sizes = struct.unpack_from(f"<{count}I", blob, 12)
        offset = 12 + 4 * count
        weights = []
        biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            n = fan_in * fan_out
            w = np.frombuffer(blob, dtype="<f8", count=n, offset=offset)
            offset += 8 * n
            b = np.frombuffer(blob, dtype="<f8", count=fan_out, offset=offset)
            offset += 8 * fan_out
            weights.append(w.reshape(fan_in, fan_out).astype(np.float64))
            biases.append(b.astype(np.float64))
    except (struct.error, ValueError) as exc:
        if isinstance(exc, ValueError) and str(exc).startswith(str(path)):
            raise
        raise ValueError(f"{path}: truncated or corrupt checkpoint") from exc
    if offset != len(blob):
        raise ValueError(f"{path}: truncated or corrupt checkpoint")
    return Model(sizes, weights, biases)


def model_fingerprint(model: Model) -> str:
    """SHA-256 of the serialized parameters; detects any mutation."""
    return hashlib.sha256(serialize_model(model)).hexdigest()
