"""Sequential network container plus declarative layer specs with build-time
shape checking: a mismatched architecture fails when the model is built, never
mid-training."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Activation, Conv2D, Dense, Dropout, Flatten, LastStep, Layer, Lstm, Softmax
from .tensor import Tensor

LAYER_KINDS = ("conv2d", "dense", "lstm", "dropout", "activation", "softmax", "flatten", "concat")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of an architecture; only the fields for ``kind`` are used."""

    kind: str
    filters: int | None = None
    kernel: int = 3
    units: int | None = None
    rate: float | None = None
    fn: str | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv2d":
            if not (self.filters and self.filters > 0):
                raise ValueError("conv2d needs a positive filter count")
            if self.kernel < 1:
                raise ValueError("conv2d kernel must be positive")
        elif self.kind in ("dense", "lstm"):
            if not (self.units and self.units > 0):
                raise ValueError(f"{self.kind} needs a positive unit count")
        elif self.kind == "dropout":
            if self.rate is None or not 0 <= self.rate < 1:
                raise ValueError("dropout rate must lie in [0, 1)")
        elif self.kind == "activation":
            if self.fn not in ("relu", "sigmoid", "tanh"):
                raise ValueError(f"activation fn must be relu|sigmoid|tanh, got {self.fn!r}")


def infer_shapes(specs: list[LayerSpec], input_shape: tuple[int, ...]) -> list[tuple[int, ...]]:
    """Per-layer output shapes (excluding the batch axis); raises on any
    mismatch so errors surface at build time."""
    shapes = []
    shape = tuple(input_shape)
    for i, spec in enumerate(specs):
        if spec.kind == "conv2d":
            if len(shape) != 3:
                raise ValueError(f"layer {i}: conv2d needs (c, h, w) input, got {shape}")
            c, h, w = shape
            if h < spec.kernel or w < spec.kernel:
                raise ValueError(f"layer {i}: kernel {spec.kernel} does not fit {h}x{w}")
            shape = (spec.filters, h - spec.kernel + 1, w - spec.kernel + 1)
        elif spec.kind == "dense":
            if len(shape) != 1:
                raise ValueError(f"layer {i}: dense needs a flat input, got {shape}")
            shape = (spec.units,)
        elif spec.kind == "lstm":
            if len(shape) != 2:
                raise ValueError(f"layer {i}: lstm needs (T, features) input, got {shape}")
            shape = (shape[0], spec.units)
            if _lstm_last_step(specs, i):
                # mirrors the LastStep selector build_network inserts here
                shape = (spec.units,)
        elif spec.kind == "flatten":
            shape = (int(np.prod(shape)),)
        elif spec.kind in ("dropout", "activation", "softmax"):
            pass
        elif spec.kind == "concat":
            raise ValueError(f"layer {i}: concat is not valid inside a sequential stack")
        shapes.append(shape)
    return shapes


def _lstm_last_step(specs: list[LayerSpec], index: int) -> bool:
    """True when layer ``index`` is the last lstm before non-sequence layers."""
    for later in specs[index + 1:]:
        if later.kind == "lstm":
            return False
        if later.kind in ("dense", "flatten"):
            return True
    return True


def build_network(specs: list[LayerSpec], input_shape: tuple[int, ...],
                  rng: np.random.Generator) -> "Network":
    """Instantiate and initialise a network, validating the shape chain.

    A trailing ``LastStep`` selector is inserted automatically after the final
    lstm layer so the dense stack consumes the last hidden state.
    """
    infer_shapes(specs, input_shape)  # fail fast on any mismatch
    layers: list[Layer] = []
    shape = tuple(input_shape)
    for i, spec in enumerate(specs):
        if spec.kind == "conv2d":
            layers.append(Conv2D.create(shape[0], spec.filters, spec.kernel, rng))
            shape = (spec.filters, shape[1] - spec.kernel + 1, shape[2] - spec.kernel + 1)
        elif spec.kind == "dense":
            layers.append(Dense.create(shape[0], spec.units, rng))
            shape = (spec.units,)
        elif spec.kind == "lstm":
            layers.append(Lstm.create(shape[1], spec.units, rng))
            shape = (shape[0], spec.units)
            if _lstm_last_step(specs, i):
                layers.append(LastStep())
                shape = (spec.units,)
        elif spec.kind == "dropout":
            layers.append(Dropout(spec.rate))
        elif spec.kind == "activation":
            layers.append(Activation(spec.fn))
        elif spec.kind == "softmax":
            layers.append(Softmax())
        elif spec.kind == "flatten":
            layers.append(Flatten())
            shape = (int(np.prod(shape)),)
        else:
            raise ValueError(f"layer {i}: cannot build kind {spec.kind!r}")
    return Network(layers)


class Network:
    """A plain sequential stack with explicit forward/backward control."""

    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def forward(self, x, train: bool = False):
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def forward_collect(self, x) -> list:
        """Eval-mode forward returning every layer's output in order."""
        outs = []
        for layer in self.layers:
            x = layer.forward(x, False)
            outs.append(x)
        return outs

    def backward(self, grad, start: int | None = None):
        """Propagate ``grad`` backward from the output of layer ``start``
        (default: the last layer), accumulating parameter gradients."""
        if start is None:
            start = len(self.layers) - 1
        for layer in reversed(self.layers[: start + 1]):
            grad = layer.backward(grad)
        return grad

    def parameters(self) -> list[tuple[str, Tensor]]:
        named = []
        for i, layer in enumerate(self.layers):
            for name, tensor in layer.parameters():
                named.append((f"layer{i:02d}.{name}", tensor))
        return named

    def zero_grad(self) -> None:
        for _, t in self.parameters():
            t.zero_grad()

    def set_dropout_rng(self, rng: np.random.Generator | None) -> None:
        for layer in self.layers:
            if isinstance(layer, Dropout):
                layer.rng = rng

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.parameters())
        if set(state) != set(params):
            missing = set(params) - set(state)
            extra = set(state) - set(params)
            raise ValueError(f"checkpoint mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, tensor in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != tensor.data.shape:
                raise ValueError(
                    f"{name}: checkpoint shape {value.shape} != model shape {tensor.data.shape}"
                )
            tensor.data[...] = value
