import io
import json

import numpy as np
import pytest

from conftest import make_network
from utils.config import Limits
from utils.lp_core import encode, solve
from utils.network import NeuronId, evaluate
from utils.property import Query, VerdictKind
from utils.residual import GammaContext, Phase
from utils.split_search import (
    SearchNode,
    TraceWriter,
    apply_phase,
    check_success,
    pick_split,
    verify,
)


def test_abstract_network_is_sat(example_abstract_network, above14_query):
    outcome = verify(example_abstract_network, above14_query, GammaContext())
    assert outcome.verdict.is_sat
    assert evaluate(example_abstract_network, outcome.verdict.witness).output > 14
    assert above14_query.in_box(outcome.verdict.witness)


def test_original_network_is_unsat(example_network, above14_query):
    outcome = verify(example_network, above14_query)
    assert outcome.verdict.kind is VerdictKind.UNSAT
    assert outcome.stats.visited_states > 1
    assert outcome.stats.lp_solves >= outcome.stats.visited_states


def test_layer2_inactive_branch_closes(example_network, above14_query):
    t = encode(example_network, above14_query)
    for pair in t.relu_pairs:
        if pair.neuron.layer == 2:
            apply_phase(t, pair, Phase.INACTIVE)
    assert not solve(t).feasible


def test_no_hidden_layer_needs_no_split():
    net = make_network([[1.0, 1.0]])
    outcome = verify(net, Query(np.zeros(2), np.ones(2), 1.5))
    assert outcome.verdict.is_sat
    assert outcome.stats.visited_states == 1 and outcome.stats.splits == 0


def test_pick_split_first_hidden_neuron(example_network, above14_query):
    t = encode(example_network, above14_query)
    assert pick_split(SearchNode(1, t, {}, 0), t) == NeuronId(1, 0)
    assert pick_split(SearchNode(1, t, {NeuronId(1, 0): Phase.ACTIVE}, 1), t) == NeuronId(1, 1)
    all_split = {pair.neuron: Phase.ACTIVE for pair in t.relu_pairs}
    assert pick_split(SearchNode(1, t, all_split, 9), t) is None


def test_pick_split_skips_determined_pair(example_network, above14_query):
    t = encode(example_network, above14_query)
    t.lower[t.relu_pairs[0].pre] = 0.0
    assert pick_split(SearchNode(1, t, {}, 0), t) == NeuronId(1, 1)


def test_check_success():
    net = make_network([[1.0]], [[1.0]])
    t = encode(net, Query(np.zeros(1), np.ones(1), -10.0))
    pair = t.relu_pairs[0]
    alpha = np.zeros(t.n_vars)
    alpha[pair.pre], alpha[pair.post] = -2.0, 0.0
    assert check_success(t, alpha)
    alpha[pair.pre], alpha[pair.post] = 3.0, 3.0
    assert check_success(t, alpha)
    alpha[pair.post] = 0.0
    assert not check_success(t, alpha)


def test_state_cap_gives_timeout(example_network, above14_query):
    outcome = verify(example_network, above14_query, limits=Limits(max_states=3, wall_clock=None))
    assert outcome.verdict.kind is VerdictKind.TIMEOUT


def test_learning_fills_gamma(example_network, above14_query):
    ctx = GammaContext()
    outcome = verify(example_network, above14_query, ctx)
    assert outcome.verdict.kind is VerdictKind.UNSAT
    assert outcome.stats.learned_clauses == len(ctx.gamma) > 0
    assert outcome.stats.prune_hits == 0
    assert outcome.stats.propagations >= outcome.stats.prune_hits
    assert ctx.branch_record == []


def test_learning_does_not_grow_the_tree(example_network, above14_query):
    plain = verify(example_network, above14_query).stats
    learned = verify(example_network, above14_query, GammaContext()).stats
    assert learned.visited_states <= plain.visited_states


def test_search_is_deterministic(example_network, above14_query):
    a = verify(example_network, above14_query, GammaContext()).stats
    b = verify(example_network, above14_query, GammaContext()).stats
    assert a.counted() == b.counted()


def test_trace_events(example_abstract_network, above14_query):
    stream = io.StringIO()
    verify(example_abstract_network, above14_query, GammaContext(), trace=TraceWriter(stream), iteration=4)
    records = [json.loads(line) for line in stream.getvalue().splitlines()]
    events = {r["event"] for r in records}
    assert {"split", "failure", "success"} <= events
    assert all(r["iteration"] == 4 for r in records)
    learned = [r for r in records if r["event"] == "failure" and r["clause"]]
    assert learned


def test_memory_trace(example_abstract_network, above14_query):
    trace = TraceWriter()
    verify(example_abstract_network, above14_query, GammaContext(), trace=trace)
    assert trace.records and trace.records[-1]["event"] == "success"


@pytest.mark.parametrize("threshold, kind", [(8.5, VerdictKind.SAT), (9.5, VerdictKind.UNSAT)])
def test_threshold_around_maximum(example_network, threshold, kind):
    outcome = verify(example_network, Query(np.zeros(2), np.ones(2), threshold), GammaContext())
    assert outcome.verdict.kind is kind
