import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_network, random_network
from utils.errors import InputShapeError, NetworkParseError
from utils.network import (
    NeuronId,
    evaluate,
    evaluate_batch,
    network_to_dict,
    parse_network,
    serialize_network,
)


def test_example_output_at_0_1(example_network):
    trace = evaluate(example_network, [0.0, 1.0])
    assert trace.output == pytest.approx(9.0, abs=1e-9)
    np.testing.assert_allclose(trace.pre[2], [-2, -4, 0, 8, 1], atol=1e-9)


def test_example_output_at_3_1(example_network):
    assert evaluate(example_network, [3.0, 1.0]).output == pytest.approx(-6.0, abs=1e-9)


def test_zero_network_outputs_zero():
    net = make_network(np.zeros((3, 2)), np.zeros((1, 3)))
    assert evaluate(net, [5.0, -7.0]).output == 0.0


def test_evaluate_rejects_wrong_width(example_network):
    with pytest.raises(InputShapeError):
        evaluate(example_network, [1.0, 2.0, 3.0])


def test_post_activations_nonnegative(example_network):
    trace = evaluate(example_network, [0.3, -2.0])
    for li in example_network.hidden_layers:
        assert np.all(trace.post[li] >= 0)
        np.testing.assert_array_equal(trace.post[li], np.maximum(trace.pre[li], 0))


@given(st.integers(0, 2**32 - 1))
def test_evaluate_matches_straight_line(seed):
    rng = np.random.default_rng(seed)
    hidden = rng.integers(1, 9, size=rng.integers(1, 5))
    net = random_network(rng, int(rng.integers(1, 5)), hidden)
    x = rng.uniform(-2, 2, size=net.input_size)
    value = x
    for layer in net.layers[:-1]:
        value = np.maximum(layer.weights @ value + layer.biases, 0)
    expected = (net.layers[-1].weights @ value + net.layers[-1].biases)[0]
    assert abs(evaluate(net, x).output - expected) <= 1e-9
    assert abs(evaluate_batch(net, x[None, :])[0] - expected) <= 1e-9


def test_topology(example_network):
    assert example_network.widths == [2, 4, 5, 1]
    assert example_network.relu_count == 9
    assert list(example_network.hidden_neurons())[:2] == [NeuronId(1, 0), NeuronId(1, 1)]
    assert example_network.is_output(NeuronId(3, 0))


def test_parse_serialize_round_trip(example_network):
    data = serialize_network(example_network)
    assert serialize_network(example_network) == data
    parsed = parse_network(data)
    assert parsed == example_network
    assert parsed.widths == [2, 4, 5, 1]
    assert serialize_network(parsed) == data


def test_parse_rejects_column_mismatch(example_network):
    doc = network_to_dict(example_network)
    doc["layers"][1]["weights"] = [[1, 2, 3]] * 5
    with pytest.raises(NetworkParseError) as err:
        parse_network(json.dumps(doc))
    assert err.value.location == "layers[1].weights"


@pytest.mark.parametrize("mutate, location", [
    (lambda d: d["layers"][0].update(activation="tanh"), "layers[0].activation"),
    (lambda d: d["layers"][-1].update(activation="relu"), "layers[2].activation"),
    (lambda d: d["layers"][0].update(biases=[0, 0]), "layers[0].biases"),
    (lambda d: d["layers"][0]["weights"][1].append(4), "layers[0].weights[1]"),
    (lambda d: d["layers"][0]["weights"][0].__setitem__(0, "x"), "layers[0].weights[0][0]"),
    (lambda d: d["layers"][1]["weights"][2].__setitem__(3, float("nan")), "layers[1].weights[2][3]"),
    (lambda d: d["layers"][2]["biases"].__setitem__(0, float("inf")), "layers[2].biases[0]"),
])
def test_parse_reports_location(example_network, mutate, location):
    doc = network_to_dict(example_network)
    mutate(doc)
    with pytest.raises(NetworkParseError) as err:
        parse_network(json.dumps(doc))
    assert err.value.location == location


def test_parse_rejects_bad_json():
    with pytest.raises(NetworkParseError):
        parse_network(b"{\"layers\": [")
    with pytest.raises(NetworkParseError):
        parse_network(b"{}")
