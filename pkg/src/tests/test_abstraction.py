import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import EXAMPLE_MERGES, make_network, random_network
from utils.abstraction import (
    AbstractionRecord,
    ExplicitMergePolicy,
    SeededMergePolicy,
    abstract_to_saturation,
    can_abstract,
    compatible_pairs,
    make_policy,
    merge_pair,
    refine_last,
)
from utils.errors import AbstractionError, CannotRefineError
from utils.network import NeuronId, evaluate, evaluate_batch
from utils.preprocess import classify, purify_with_classes


def test_can_abstract_example(example_network):
    classes = classify(example_network)
    assert can_abstract(example_network, classes, NeuronId(2, 0), NeuronId(2, 1))
    assert not can_abstract(example_network, classes, NeuronId(2, 0), NeuronId(2, 2))
    assert not can_abstract(example_network, classes, NeuronId(1, 0), NeuronId(2, 0))
    assert not can_abstract(example_network, classes, NeuronId(2, 0), NeuronId(2, 0))
    assert not can_abstract(example_network, classes, NeuronId(3, 0), NeuronId(3, 0))


def test_merge_rejects_incompatible(example_network):
    with pytest.raises(AbstractionError):
        merge_pair(example_network, classify(example_network), NeuronId(2, 1), NeuronId(2, 2))


def test_merge_weights_match_example(example_network):
    net, classes, step = merge_pair(example_network, classify(example_network), NeuronId(2, 0), NeuronId(2, 1))
    assert step.triple == (NeuronId(2, 0), NeuronId(2, 0), NeuronId(2, 1))
    np.testing.assert_array_equal(net.layer(2).weights[0], [3, 0, -1, 0])
    np.testing.assert_array_equal(net.layer(3).weights[0], [2, -4, 1, 1])
    assert net.widths == [2, 4, 4, 1]
    assert classes[NeuronId(2, 1)] == classify(example_network)[NeuronId(2, 2)]


def test_example_grouping_gives_abstract_network(example_network, example_abstract_network, example_refined_network):
    net, classes, record = abstract_to_saturation(example_network, classify(example_network),
                                                  ExplicitMergePolicy(EXAMPLE_MERGES))
    assert net == example_abstract_network
    assert len(record) == 2
    refined = refine_last(net, record)
    assert refined.network == example_refined_network
    assert refined.undone.triple == (NeuronId(2, 0), NeuronId(2, 0), NeuronId(2, 1))
    assert len(refined.record) == 1
    assert refine_last(refined.network, refined.record).network == example_network


def test_example_values(example_network, example_abstract_network, example_refined_network):
    assert evaluate(example_abstract_network, [3.0, 1.0]).output == pytest.approx(6.0, abs=1e-9)
    assert evaluate(example_refined_network, [3.0, 1.0]).output == pytest.approx(1.0, abs=1e-9)
    assert evaluate(example_abstract_network, [0.0, 1.0]).output == pytest.approx(16.0, abs=1e-9)


def test_refine_empty_record(example_network):
    with pytest.raises(CannotRefineError):
        refine_last(example_network, AbstractionRecord())


def test_saturation_leaves_no_pairs(example_network):
    net, classes, record = abstract_to_saturation(example_network, classify(example_network))
    assert not list(compatible_pairs(net, classes))
    assert len(record) == example_network.relu_count - net.relu_count


def test_seeded_policy_is_deterministic(example_network):
    classes = classify(example_network)
    a = abstract_to_saturation(example_network, classes, SeededMergePolicy(7))[2].triples()
    b = abstract_to_saturation(example_network, classes, SeededMergePolicy(7))[2].triples()
    assert a == b


def test_unknown_policy():
    with pytest.raises(AbstractionError):
        make_policy("best")


def _chain(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, int(rng.integers(1, 4)), rng.integers(1, 7, size=rng.integers(1, 4)))
    pure, classes = purify_with_classes(net)
    abstract, _, record = abstract_to_saturation(pure, classes, SeededMergePolicy(seed))
    return rng, pure, abstract, record


@given(st.integers(0, 2**32 - 1))
def test_merging_over_approximates(seed):
    rng, pure, abstract, record = _chain(seed)
    xs = rng.uniform(0, 1, size=(1000, pure.input_size))
    chain = [step.snapshot for step in record] + [abstract]
    values = [evaluate_batch(net, xs) for net in chain]
    for before, after in zip(values, values[1:]):
        assert np.all(after >= before - 1e-7)


@given(st.integers(0, 2**32 - 1))
def test_refine_restores_snapshot(seed):
    _, pure, abstract, record = _chain(seed)
    net = abstract
    while len(record):
        net, _, record, _ = refine_last(net, record)
    assert net == pure


# ---------- sign of refined neurons ----------
SIGN_SAMPLES = 100_000


def _sign_samples(seed):
    rng = np.random.default_rng(seed)
    a, b, c, d = rng.uniform(-4, 4, size=(4, SIGN_SAMPLES))
    x1, x2 = rng.uniform(0, 4, size=(2, SIGN_SAMPLES))
    return a, b, c, d, x1, x2


def test_inc_merge_negative_implies_refined_negative():
    a, b, c, d, x1, x2 = _sign_samples(11)
    merged = x1 * np.maximum(a, b) + x2 * np.maximum(c, d)
    hit = merged < -1e-8
    refined = ((x1 * a + x2 * c) < 0) | ((x1 * b + x2 * d) < 0)
    assert hit.any()
    assert np.all(refined[hit])


def test_dec_merge_positive_implies_refined_positive():
    a, b, c, d, x1, x2 = _sign_samples(12)
    merged = x1 * np.minimum(a, b) + x2 * np.minimum(c, d)
    hit = merged > 1e-8
    refined = ((x1 * a + x2 * c) > 0) | ((x1 * b + x2 * d) > 0)
    assert hit.any()
    assert np.all(refined[hit])


@pytest.mark.parametrize("output_weight", [1.0, -1.0])
def test_merge_pair_incoming_rule(output_weight):
    rng = np.random.default_rng(13)
    for _ in range(300):
        (a, c), (b, d) = np.round(rng.uniform(-4, 4, size=(2, 2)), 3)
        net = make_network([[a, c], [b, d]], [[output_weight, output_weight]])
        classes = classify(net)
        merged = merge_pair(net, classes, NeuronId(1, 0), NeuronId(1, 1)).network
        x = rng.uniform(0, 4, size=2)
        value = evaluate(merged, x).pre[1][0]
        refined = evaluate(net, x).pre[1]
        if output_weight > 0 and value < -1e-8:
            assert refined.min() < 0
        if output_weight < 0 and value > 1e-8:
            assert refined.max() > 0
