#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# ============================================================
# File: network.py
# Revision: Rev.1
# Purpose: Feed-forward ReLU networks: representation,
#          evaluation, JSON parsing and canonical serialization.
# ============================================================

import json
import math
from dataclasses import dataclass
from typing import Iterator, List, Sequence, Union

import numpy as np

from utils.errors import InputShapeError, NetworkParseError

RELU = "relu"
IDENTITY = "identity"
ACTIVATIONS = (RELU, IDENTITY)


@dataclass(frozen=True, order=True)
class NeuronId:
    """Neuron address. Layer 0 is the input layer, hidden layers are
    numbered from 1, the output layer is ``net.output_layer``. The
    neuron index is 0-based within its layer."""
    layer: int
    neuron: int

    def __str__(self):
        return f"v[{self.layer},{self.neuron}]"

    def to_list(self) -> List[int]:
        return [self.layer, self.neuron]

    @classmethod
    def from_list(cls, value: Sequence[int]) -> "NeuronId":
        return cls(int(value[0]), int(value[1]))


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray   # (this layer's neurons, previous layer's neurons)
    biases: np.ndarray
    activation: str

    @property
    def width(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_in(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class EvalTrace:
    """Per-layer values; index 0 holds the input for both lists."""
    pre: List[np.ndarray]
    post: List[np.ndarray]
    output: float


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


class Network:
    """Immutable layered network. ``layers`` excludes the implicit input layer."""

    def __init__(self, layers: Sequence[Layer]):
        if not layers:
            raise NetworkParseError("network needs at least an output layer", "layers")
        frozen = []
        prev_width = None
        for i, layer in enumerate(layers):
            weights = _frozen(layer.weights)
            biases = _frozen(layer.biases)
            loc = f"layers[{i}]"
            if weights.ndim != 2 or weights.shape[0] == 0 or weights.shape[1] == 0:
                raise NetworkParseError("weights must be a non-empty matrix", f"{loc}.weights")
            if biases.shape != (weights.shape[0],):
                raise NetworkParseError(
                    f"expected {weights.shape[0]} biases, got {biases.size}", f"{loc}.biases")
            if prev_width is not None and weights.shape[1] != prev_width:
                raise NetworkParseError(
                    f"expected {prev_width} columns, got {weights.shape[1]}", f"{loc}.weights")
            is_last = i == len(layers) - 1
            expected = IDENTITY if is_last else RELU
            if layer.activation not in ACTIVATIONS:
                raise NetworkParseError(f"unsupported activation {layer.activation!r}",
                                        f"{loc}.activation")
            if layer.activation != expected:
                raise NetworkParseError(f"activation must be {expected!r}", f"{loc}.activation")
            frozen.append(Layer(weights, biases, layer.activation))
            prev_width = weights.shape[0]
        self._layers = tuple(frozen)

    # ---------- TOPOLOGY ----------
    @property
    def layers(self) -> Sequence[Layer]:
        return self._layers

    @property
    def input_size(self) -> int:
        return self._layers[0].fan_in

    @property
    def output_layer(self) -> int:
        return len(self._layers)

    @property
    def output_size(self) -> int:
        return self._layers[-1].width

    @property
    def widths(self) -> List[int]:
        return [self.input_size] + [layer.width for layer in self._layers]

    @property
    def hidden_layers(self) -> range:
        return range(1, self.output_layer)

    def layer(self, index: int) -> Layer:
        """Layer by NeuronId numbering (1 = first hidden layer)."""
        return self._layers[index - 1]

    def hidden_neurons(self) -> Iterator[NeuronId]:
        """Hidden neurons in topological (layer-major, index-minor) order."""
        for li in self.hidden_layers:
            for j in range(self.layer(li).width):
                yield NeuronId(li, j)

    @property
    def relu_count(self) -> int:
        return sum(self.layer(li).width for li in self.hidden_layers)

    def contains(self, v: NeuronId) -> bool:
        return 1 <= v.layer <= self.output_layer and 0 <= v.neuron < self.layer(v.layer).width

    def is_output(self, v: NeuronId) -> bool:
        return v.layer == self.output_layer

    def with_layers(self, layers: Sequence[Layer]) -> "Network":
        return Network(layers)

    def __eq__(self, other):
        if not isinstance(other, Network) or len(self._layers) != len(other._layers):
            return False
        return all(
            a.activation == b.activation
            and np.array_equal(a.weights, b.weights)
            and np.array_equal(a.biases, b.biases)
            for a, b in zip(self._layers, other._layers)
        )

    def __hash__(self):
        return hash(serialize_network(self))

    def __repr__(self):
        return f"Network(widths={self.widths})"


# =================================================
# Function: evaluate
# =================================================
def evaluate(net: Network, x) -> EvalTrace:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_size,):
        raise InputShapeError(f"expected input of width {net.input_size}, got shape {x.shape}")
    pre, post = [x], [x]
    current = x
    for layer in net.layers:
        z = layer.weights @ current + layer.biases
        current = np.maximum(z, 0.0) if layer.activation == RELU else z
        pre.append(z)
        post.append(current)
    return EvalTrace(pre=pre, post=post, output=float(current[0]))


def evaluate_batch(net: Network, xs: np.ndarray) -> np.ndarray:
    """Outputs for a batch of inputs, shape (n, input_size) -> (n,)."""
    current = np.asarray(xs, dtype=np.float64)
    for layer in net.layers:
        current = current @ layer.weights.T + layer.biases
        if layer.activation == RELU:
            current = np.maximum(current, 0.0)
    return current[:, 0]


# =================================================
# Function: parse_network / serialize_network
# =================================================
def check_number(item, loc: str) -> float:
    """A finite JSON number; NaN and Infinity are rejected."""
    if isinstance(item, bool) or not isinstance(item, (int, float)):
        raise NetworkParseError("expected a number", loc)
    if not math.isfinite(item):
        raise NetworkParseError(f"expected a finite number, got {item!r}", loc)
    return float(item)


def _matrix(value, loc: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise NetworkParseError("expected a non-empty list of rows", loc)
    width = None
    for r, row in enumerate(value):
        if not isinstance(row, list) or not row:
            raise NetworkParseError("expected a non-empty list of numbers", f"{loc}[{r}]")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise NetworkParseError(f"expected {width} columns, got {len(row)}", f"{loc}[{r}]")
        for c, item in enumerate(row):
            check_number(item, f"{loc}[{r}][{c}]")
    return np.array(value, dtype=np.float64)


def _vector(value, loc: str) -> np.ndarray:
    if not isinstance(value, list):
        raise NetworkParseError("expected a list of numbers", loc)
    for i, item in enumerate(value):
        check_number(item, f"{loc}[{i}]")
    return np.array(value, dtype=np.float64).reshape(len(value))


def network_from_dict(doc) -> Network:
    if not isinstance(doc, dict) or "layers" not in doc:
        raise NetworkParseError("missing 'layers'", "$")
    raw_layers = doc["layers"]
    if not isinstance(raw_layers, list) or not raw_layers:
        raise NetworkParseError("expected a non-empty list", "layers")
    layers = []
    for i, raw in enumerate(raw_layers):
        loc = f"layers[{i}]"
        if not isinstance(raw, dict):
            raise NetworkParseError("expected an object", loc)
        for key in ("weights", "biases", "activation"):
            if key not in raw:
                raise NetworkParseError(f"missing '{key}'", loc)
        weights = _matrix(raw["weights"], f"{loc}.weights")
        biases = _vector(raw["biases"], f"{loc}.biases")
        if not isinstance(raw["activation"], str):
            raise NetworkParseError("expected a string", f"{loc}.activation")
        layers.append(Layer(weights, biases, raw["activation"]))
    return Network(layers)


def parse_network(text: Union[bytes, str]) -> Network:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise NetworkParseError(f"not UTF-8: {exc}", "$") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkParseError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} col {exc.colno}") from exc
    return network_from_dict(doc)


def network_to_dict(net: Network) -> dict:
    return {
        "layers": [
            {
                "activation": layer.activation,
                "biases": [float(b) for b in layer.biases],
                "weights": [[float(w) for w in row] for row in layer.weights],
            }
            for layer in net.layers
        ]
    }


def serialize_network(net: Network) -> bytes:
    return json.dumps(network_to_dict(net), sort_keys=True, separators=(",", ":")).encode("utf-8")
