import os

import hypothesis
import numpy as np
import pytest

from utils.network import Layer, Network, NeuronId
from utils.property import Query

np.seterr(all="warn")

hypothesis.settings.register_profile("ci", derandomize=True, deadline=None, max_examples=60)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

EXAMPLE_LAYER1 = [[1, 0], [2, 0], [0, 2], [0, 1]]
EXAMPLE_LAYER2 = [[3, 0, -1, 0], [2, 0, -2, 0], [0, 1, 0, 0], [0, 0, 0, 8], [0, 0, 0, 1]]
EXAMPLE_OUTPUT = [[1, 1, -4, 1, 1]]

# layer-2 pairs (current coordinates) that rebuild the two-merge abstraction of the example network
EXAMPLE_MERGES = [(NeuronId(2, 3), NeuronId(2, 4)), (NeuronId(2, 0), NeuronId(2, 1))]


def make_network(*matrices, biases=None) -> Network:
    layers = []
    for k, w in enumerate(matrices):
        w = np.array(w, dtype=float)
        b = np.zeros(w.shape[0]) if biases is None else np.array(biases[k], dtype=float)
        layers.append(Layer(w, b, "identity" if k == len(matrices) - 1 else "relu"))
    return Network(layers)


@pytest.fixture
def example_network() -> Network:
    return make_network(EXAMPLE_LAYER1, EXAMPLE_LAYER2, EXAMPLE_OUTPUT)


@pytest.fixture
def example_abstract_network() -> Network:
    return make_network(EXAMPLE_LAYER1, [[3, 0, -1, 0], [0, 1, 0, 0], [0, 0, 0, 8]], [[2, -4, 2]])


@pytest.fixture
def example_refined_network() -> Network:
    return make_network(EXAMPLE_LAYER1, [[3, 0, -1, 0], [2, 0, -2, 0], [0, 1, 0, 0], [0, 0, 0, 8]],
                        [[1, 1, -4, 2]])


@pytest.fixture
def above14_query() -> Query:
    return Query(np.zeros(2), np.ones(2), 14.0)


def random_network(rng: np.random.Generator, inputs: int, hidden, scale: float = 4.0) -> Network:
    matrices, biases = [], []
    fan_in = inputs
    for width in list(hidden) + [1]:
        matrices.append(np.round(rng.uniform(-scale, scale, size=(width, fan_in)), 3))
        biases.append(np.round(rng.uniform(-1, 1, size=width), 3))
        fan_in = width
    return make_network(*matrices, biases=biases)
