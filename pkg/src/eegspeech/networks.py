"""The three networks of the hierarchy and their training loops.

Level 1 trains a CNN and an LSTM network in parallel roles on the same square
input matrices, each ending in a 2-class softmax.  Their penultimate hidden
activations (128 and 1024 wide) are concatenated into a 1152-dim fused vector.
Level 2 compresses fused vectors with an unsupervised autoencoder whose 32-dim
latent code feeds the boosted-tree classifier at level 3.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from . import rng as rng_mod
from .nn import Adam, LayerSpec, Network, build_network
from .nn import ops

# Architecture constants; the penultimate/latent widths are load-bearing for
# the fusion arithmetic and are re-checked at build time.
CNN_PENULTIMATE = 128
LSTM_PENULTIMATE = 1024
FUSED_DIM = CNN_PENULTIMATE + LSTM_PENULTIMATE
DAE_LATENT = 32

CNN_SPECS = [
    LayerSpec("conv2d", filters=32, kernel=3),
    LayerSpec("activation", fn="relu"),
    LayerSpec("conv2d", filters=64, kernel=3),
    LayerSpec("activation", fn="relu"),
    LayerSpec("dropout", rate=0.25),
    LayerSpec("flatten"),
    LayerSpec("dense", units=64),
    LayerSpec("activation", fn="relu"),
    LayerSpec("dropout", rate=0.50),
    LayerSpec("dense", units=CNN_PENULTIMATE),
    LayerSpec("activation", fn="relu"),
    LayerSpec("dense", units=2),
    LayerSpec("softmax"),
]

LSTM_SPECS = [
    LayerSpec("lstm", units=128),
    LayerSpec("lstm", units=256),
    LayerSpec("dropout", rate=0.25),
    LayerSpec("dense", units=512),
    LayerSpec("activation", fn="relu"),
    LayerSpec("dropout", rate=0.50),
    LayerSpec("dense", units=LSTM_PENULTIMATE),
    LayerSpec("activation", fn="relu"),
    LayerSpec("dense", units=2),
    LayerSpec("softmax"),
]


def dae_specs(input_dim: int) -> list[LayerSpec]:
    return [
        LayerSpec("dense", units=512),
        LayerSpec("activation", fn="relu"),
        LayerSpec("dropout", rate=0.25),
        LayerSpec("dense", units=128),
        LayerSpec("activation", fn="relu"),
        LayerSpec("dropout", rate=0.25),
        LayerSpec("dense", units=DAE_LATENT),
        LayerSpec("activation", fn="sigmoid"),
        LayerSpec("dropout", rate=0.25),
        LayerSpec("dense", units=128),
        LayerSpec("activation", fn="sigmoid"),
        LayerSpec("dense", units=512),
        LayerSpec("activation", fn="relu"),
        LayerSpec("dense", units=input_dim),
        LayerSpec("activation", fn="tanh"),
    ]


@dataclass
class TrainSettings:
    """Budget and optimiser settings for one network's training run."""

    epochs: int
    batch_size: int = 64
    learning_rate: float = 0.001
    seed: int = 0
    sequence_axis: str = "rows"  # lstm only: rows|columns as timesteps

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.sequence_axis not in ("rows", "columns"):
            raise ValueError("sequence_axis must be 'rows' or 'columns'")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float


@dataclass
class CnnModel:
    net: Network
    input_size: int
    feature_index: int
    trace: list[EpochStats] = field(default_factory=list)

    def predict_proba(self, matrix: np.ndarray) -> np.ndarray:
        return self.net.forward(matrix[None, None, :, :], train=False)[0]

    def penultimate(self, matrix: np.ndarray) -> np.ndarray:
        outs = self.net.forward_collect(matrix[None, None, :, :])
        return outs[self.feature_index][0]


@dataclass
class LstmModel:
    net: Network
    input_size: int
    feature_index: int
    sequence_axis: str = "rows"
    trace: list[EpochStats] = field(default_factory=list)

    def _sequence(self, matrix: np.ndarray) -> np.ndarray:
        return matrix if self.sequence_axis == "rows" else matrix.T

    def predict_proba(self, matrix: np.ndarray) -> np.ndarray:
        return self.net.forward(self._sequence(matrix)[None, :, :], train=False)[0]

    def penultimate(self, matrix: np.ndarray) -> np.ndarray:
        outs = self.net.forward_collect(self._sequence(matrix)[None, :, :])
        return outs[self.feature_index][0]


@dataclass
class DaeModel:
    net: Network
    input_dim: int
    latent_index: int
    mean: np.ndarray
    std: np.ndarray
    trace: list[EpochStats] = field(default_factory=list)

    def standardize(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.std

    def encode_one(self, feature: np.ndarray) -> np.ndarray:
        z = self.standardize(np.asarray(feature, dtype=np.float64))
        outs = self.net.forward_collect(z[None, :])
        return outs[self.latent_index][0]


def _feature_layer_index(net: Network, specs: list[LayerSpec], spec_index: int) -> int:
    """Map a LayerSpec position to the built layer index (lstm layers insert a
    trailing last-step selector)."""
    built = 0
    for i, spec in enumerate(specs):
        if i == spec_index:
            return built
        built += 1
        if spec.kind == "lstm" and len(net.layers) > built and net.layers[built].__class__.__name__ == "LastStep":
            built += 1
    raise ValueError("spec index out of range")


def _check_labels(labels) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64)
    if y.ndim != 1:
        raise ValueError("labels must be a flat vector")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be binary (0/1)")
    counts = np.bincount(y, minlength=2)
    if counts.min() == 0:
        raise ValueError("single-class input: both classes must be present")
    if counts.min() < 2:
        raise ValueError("need at least 2 examples per class")
    return y


def _train_classifier(net: Network, x: np.ndarray, y: np.ndarray,
                      settings: TrainSettings, name: str) -> list[EpochStats]:
    adam = Adam(net.parameters(), learning_rate=settings.learning_rate)
    shuffle_rng = rng_mod.stream(settings.seed, name, "shuffle")
    net.set_dropout_rng(rng_mod.stream(settings.seed, name, "dropout"))
    n = len(x)
    trace = []
    for epoch in range(settings.epochs):
        order = shuffle_rng.permutation(n)
        losses = []
        hits = 0
        for start in range(0, n, settings.batch_size):
            idx = order[start:start + settings.batch_size]
            xb, yb = x[idx], y[idx]
            probs = net.forward(xb, train=True)
            losses.append(ops.bce_loss_batch(probs, yb) * len(idx))
            hits += int((probs.argmax(axis=1) == yb).sum())
            net.zero_grad()
            dlogits = ops.cross_entropy_logit_grad(probs, yb)
            net.backward(dlogits, start=len(net.layers) - 2)
            adam.step()
        trace.append(EpochStats(epoch, sum(losses) / n, hits / n))
    net.set_dropout_rng(None)
    return trace


def _stack_inputs(inputs) -> np.ndarray:
    x = np.stack([np.asarray(m, dtype=np.float64) for m in inputs])
    if x.ndim != 3 or x.shape[1] != x.shape[2]:
        raise ValueError(f"inputs must be square matrices, got shape {x.shape[1:]}")
    return x


def build_cnn_model(input_size: int, seed: int = 0) -> CnnModel:
    """An untrained CNN of the reference architecture for the given matrix size."""
    shape = (1, input_size, input_size)
    net = build_network(CNN_SPECS, shape, rng_mod.stream(seed, "cnn", "init"))
    feature_index = _feature_layer_index(net, CNN_SPECS, 10)
    _verify_width(net, feature_index, shape, CNN_PENULTIMATE, "cnn penultimate")
    return CnnModel(net=net, input_size=input_size, feature_index=feature_index)


def build_lstm_model(input_size: int, sequence_axis: str = "rows", seed: int = 0) -> LstmModel:
    shape = (input_size, input_size)
    net = build_network(LSTM_SPECS, shape, rng_mod.stream(seed, "lstm", "init"))
    feature_index = _feature_layer_index(net, LSTM_SPECS, 7)
    _verify_width(net, feature_index, shape, LSTM_PENULTIMATE, "lstm penultimate")
    return LstmModel(net=net, input_size=input_size, feature_index=feature_index,
                     sequence_axis=sequence_axis)


def build_dae_model(input_dim: int, seed: int = 0) -> DaeModel:
    net = build_network(dae_specs(input_dim), (input_dim,), rng_mod.stream(seed, "dae", "init"))
    latent_index = 7
    _verify_width(net, latent_index, (input_dim,), DAE_LATENT, "dae latent")
    return DaeModel(net=net, input_dim=input_dim, latent_index=latent_index,
                    mean=np.zeros(input_dim), std=np.ones(input_dim))


def train_cnn(inputs, labels, settings: TrainSettings) -> CnnModel:
    """Train the convolutional branch on square input matrices."""
    x = _stack_inputs(inputs)
    y = _check_labels(labels)
    if len(x) != len(y):
        raise ValueError("inputs and labels disagree in length")
    model = build_cnn_model(x.shape[1], seed=settings.seed)
    model.trace = _train_classifier(model.net, x[:, None, :, :], y, settings, "cnn")
    return model


def train_lstm(inputs, labels, settings: TrainSettings) -> LstmModel:
    """Train the recurrent branch, reading the matrix row-by-row (or
    column-by-column) as a sequence."""
    x = _stack_inputs(inputs)
    y = _check_labels(labels)
    if len(x) != len(y):
        raise ValueError("inputs and labels disagree in length")
    if settings.sequence_axis == "columns":
        x = np.ascontiguousarray(x.transpose(0, 2, 1))
    model = build_lstm_model(x.shape[1], sequence_axis=settings.sequence_axis,
                             seed=settings.seed)
    model.trace = _train_classifier(model.net, x, y, settings, "lstm")
    return model


def _verify_width(net: Network, index: int, input_shape, expected: int, what: str) -> None:
    probe = np.zeros((1, *input_shape))
    out = net.forward_collect(probe)[index]
    if out.shape[-1] != expected:
        raise ValueError(f"{what} width is {out.shape[-1]}, expected {expected}")


def extract_fused(cnn: CnnModel, lstm: LstmModel, matrix: np.ndarray) -> np.ndarray:
    """Concatenate the two penultimate activation vectors (CNN first)."""
    return np.concatenate([cnn.penultimate(matrix), lstm.penultimate(matrix)])


def train_dae(features, settings: TrainSettings) -> DaeModel:
    """Fit the autoencoder on fused feature vectors (unsupervised, MSE).

    Inputs are standardised per dimension with training-set statistics
    (stored on the model); constant dimensions standardise to zero.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("need a 2-D feature array with at least 2 rows")
    model = build_dae_model(x.shape[1], seed=settings.seed)
    model.mean = x.mean(axis=0)
    std = x.std(axis=0)
    model.std = np.where(std == 0.0, 1.0, std)
    z = model.standardize(x)
    net = model.net
    adam = Adam(net.parameters(), learning_rate=settings.learning_rate)
    shuffle_rng = rng_mod.stream(settings.seed, "dae", "shuffle")
    net.set_dropout_rng(rng_mod.stream(settings.seed, "dae", "dropout"))
    n = len(z)
    for epoch in range(settings.epochs):
        order = shuffle_rng.permutation(n)
        losses = []
        for start in range(0, n, settings.batch_size):
            idx = order[start:start + settings.batch_size]
            zb = z[idx]
            recon = net.forward(zb, train=True)
            losses.append(ops.mse_loss(recon, zb) * len(idx))
            net.zero_grad()
            net.backward(ops.mse_grad(recon, zb))
            adam.step()
        model.trace.append(EpochStats(epoch, sum(losses) / n, 0.0))
    net.set_dropout_rng(None)
    return model


def encode(dae: DaeModel, feature: np.ndarray) -> np.ndarray:
    """The latent code for one fused feature vector (eval mode)."""
    return dae.encode_one(feature)


def reconstruction_mse(dae: DaeModel, features) -> float:
    z = dae.standardize(np.asarray(features, dtype=np.float64))
    recon = dae.net.forward(z, train=False)
    return ops.mse_loss(recon, z)


def write_trace_csv(path: str | os.PathLike, trace: list[EpochStats]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "loss", "accuracy"])
        for row in trace:
            writer.writerow([row.epoch, repr(row.loss), repr(row.accuracy)])
