import numpy as np
import pytest

from utils.errors import InputShapeError, NetworkParseError, QueryError
from utils.network import evaluate
from utils.property import (
    GT,
    LT,
    Query,
    Verdict,
    VerdictKind,
    canonicalize,
    check_witness,
    parse_query,
    serialize_query,
)


def test_example_witness_is_not_a_counterexample(example_network, above14_query):
    assert not check_witness(example_network, above14_query, [0.0, 1.0])


def test_abstract_witness_holds_on_abstract_network(example_abstract_network, above14_query):
    assert evaluate(example_abstract_network, [0.0, 1.0]).output == pytest.approx(16.0)
    assert check_witness(example_abstract_network, above14_query, [0.0, 1.0])


def test_witness_outside_box_rejected(example_abstract_network, above14_query):
    assert not check_witness(example_abstract_network, above14_query, [0.0, 1.5])


def test_boundary_value_rejected(example_network):
    q = Query(np.zeros(2), np.ones(2), 9.0)
    assert not check_witness(example_network, q, [0.0, 1.0])


def test_witness_shape_error(example_network, above14_query):
    with pytest.raises(InputShapeError):
        check_witness(example_network, above14_query, [0.0])


def test_less_than_sense(example_network):
    q = Query(np.zeros(2), np.ones(2), 10.0, LT)
    assert check_witness(example_network, q, [0.0, 1.0])
    net, cq = canonicalize(example_network, q)
    assert cq.sense == GT and cq.output_threshold == -10.0
    assert evaluate(net, [0.0, 1.0]).output == pytest.approx(-9.0)
    assert check_witness(net, cq, [0.0, 1.0])


def test_query_validation():
    with pytest.raises(QueryError):
        Query(np.ones(2), np.zeros(2), 0.0)
    with pytest.raises(QueryError):
        Query(np.zeros(2), np.ones(3), 0.0)
    with pytest.raises(QueryError):
        Query(np.zeros(1), np.ones(1), float("nan"))


def test_query_round_trip(above14_query):
    data = serialize_query(above14_query)
    q = parse_query(data)
    np.testing.assert_array_equal(q.input_upper, above14_query.input_upper)
    assert q.output_threshold == 14.0 and q.sense == GT
    assert serialize_query(q) == data


def test_query_needs_one_threshold():
    with pytest.raises(NetworkParseError):
        parse_query(b'{"input_lower": [0], "input_upper": [1]}')
    with pytest.raises(NetworkParseError):
        parse_query(b'{"input_lower": [0], "input_upper": [1], "output_gt": 1, "output_lt": 2}')


def test_verdict_dict():
    assert Verdict.unsat().to_dict() == {"verdict": "UNSAT"}
    assert Verdict.sat([0.0, 1.0]).to_dict() == {"verdict": "SAT", "witness": [0.0, 1.0]}
    assert Verdict.timeout().kind is VerdictKind.TIMEOUT


@pytest.mark.parametrize("text, location", [
    (b'{"input_lower": [0, NaN], "input_upper": [1, 1], "output_gt": 1}', "input_lower[1]"),
    (b'{"input_lower": [0], "input_upper": [Infinity], "output_gt": 1}', "input_upper[0]"),
    (b'{"input_lower": [0], "input_upper": [1], "output_lt": -Infinity}', "output_lt"),
])
def test_query_rejects_non_finite(text, location):
    with pytest.raises(NetworkParseError) as err:
        parse_query(text)
    assert err.value.location == location
