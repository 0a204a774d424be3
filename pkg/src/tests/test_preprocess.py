import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_network, random_network
from utils.errors import NotPureError
from utils.network import NeuronId, evaluate_batch
from utils.preprocess import (
    NEG_DEC,
    POS_DEC,
    POS_INC,
    Influence,
    classes_from_list,
    classes_to_list,
    classify,
    purify,
    purify_with_classes,
    shift_inputs_nonnegative,
)
from utils.property import Query


def test_example_classes(example_network):
    classes = classify(example_network)
    assert classes[NeuronId(2, 2)] == NEG_DEC
    assert classes[NeuronId(2, 0)].influence is Influence.INC
    assert classes[NeuronId(2, 1)].influence is Influence.INC
    assert classes[NeuronId(1, 0)] == POS_INC
    assert classes[NeuronId(1, 1)] == POS_DEC
    assert classes[NeuronId(1, 2)] == NEG_DEC


def test_example_is_already_pure(example_network):
    pure, classes = purify_with_classes(example_network)
    assert pure == example_network
    assert classes == classify(example_network)


def test_mixed_neuron_is_split():
    # the only first-layer neuron has one positive and one negative outgoing edge
    net = make_network([[1.0]], [[1.0], [-1.0]], [[1.0, 1.0]])
    with pytest.raises(NotPureError):
        classify(net)
    pure = purify(net)
    assert pure.widths == [1, 2, 2, 1]
    classify(pure)
    xs = np.linspace(-3, 3, 13)[:, None]
    np.testing.assert_allclose(evaluate_batch(pure, xs), evaluate_batch(net, xs), atol=1e-12)


def test_zero_outgoing_neuron_is_pos_inc():
    net = make_network([[1.0], [2.0]], [[0.0, 3.0]])
    assert classify(net)[NeuronId(1, 0)] == POS_INC


def test_zero_edge_does_not_split():
    # (1,0) feeds an inc neuron with weight 2 and the dec neuron (2,1) with weight 0
    net = make_network([[1.0]], [[2.0], [0.0]], [[1.0, -1.0]])
    classes = classify(net)
    assert classes[NeuronId(2, 1)] == NEG_DEC
    assert classes[NeuronId(1, 0)] == POS_INC
    assert purify(net) == net


@given(st.integers(0, 2**32 - 1))
def test_purify_preserves_function(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, int(rng.integers(1, 4)), rng.integers(1, 5, size=rng.integers(1, 4)))
    pure, classes = purify_with_classes(net)
    assert classify(pure) == classes
    xs = rng.uniform(-3, 3, size=(1000, net.input_size))
    np.testing.assert_allclose(evaluate_batch(pure, xs), evaluate_batch(net, xs), atol=1e-9)
    assert pure.relu_count <= 4 * net.relu_count


def test_input_shift_keeps_function(example_network):
    q = Query(np.array([-1.0, -2.0]), np.array([1.0, 0.5]), 3.0)
    net, sq, offset = shift_inputs_nonnegative(example_network, q)
    np.testing.assert_array_equal(offset, [-1.0, -2.0])
    np.testing.assert_array_equal(sq.input_lower, [0.0, 0.0])
    xs = np.random.default_rng(3).uniform(q.input_lower, q.input_upper, size=(100, 2))
    np.testing.assert_allclose(evaluate_batch(net, xs - offset), evaluate_batch(example_network, xs), atol=1e-9)


def test_input_shift_noop_on_nonnegative_box(example_network, above14_query):
    net, q, offset = shift_inputs_nonnegative(example_network, above14_query)
    assert net is example_network and q is above14_query
    assert not offset.any()


def test_classes_json(example_network):
    classes = classify(example_network)
    assert classes_from_list(classes_to_list(classes)) == classes


@given(st.integers(0, 2**32 - 1))
def test_purify_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, int(rng.integers(1, 4)), rng.integers(1, 5, size=rng.integers(1, 4)))
    pure = purify(net)
    assert purify(pure) == pure
