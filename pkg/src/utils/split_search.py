#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# ============================================================
# File: split_search.py
# Revision: Rev.1
# Purpose: Case-splitting search over ReLU phases for one
#          (possibly abstract) network: LP feasibility at each
#          node, clause learning on failure, guarded pruning.
# ============================================================

import json
import time
from dataclasses import asdict, dataclass
from typing import Dict, IO, List, NamedTuple, Optional

import numpy as np

from utils.config import EPSILON, RELU_TOL, Limits
from utils.log_utils import get_logger
from utils.lp_core import BoundKind, ReluPair, Tableau, encode, solve
from utils.network import Network, NeuronId
from utils.preprocess import Classification
from utils.property import Query, Verdict, check_witness
from utils.residual import GammaContext, Phase

logger = get_logger(__name__)

# exploration order of the two branches of a split
BRANCH_ORDER = (Phase.ACTIVE, Phase.INACTIVE)


@dataclass
class SearchStats:
    visited_states: int = 0
    splits: int = 0
    propagations: int = 0
    prune_hits: int = 0
    lp_solves: int = 0
    conflicts: int = 0
    learned_clauses: int = 0
    instrumentation_seconds: float = 0.0

    def add(self, other: "SearchStats") -> "SearchStats":
        for name, value in asdict(other).items():
            setattr(self, name, getattr(self, name) + value)
        return self

    def counted(self) -> tuple:
        """Counters only; wall-clock fields are excluded."""
        return (self.visited_states, self.splits, self.propagations, self.prune_hits,
                self.lp_solves, self.conflicts, self.learned_clauses)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SearchNode:
    node_id: int
    tableau: Tableau
    splits: Dict[NeuronId, Phase]
    depth: int


class SearchOutcome(NamedTuple):
    verdict: Verdict
    stats: SearchStats
    ctx: Optional[GammaContext]


class TraceWriter:
    """JSON-lines event sink. Keeps records in memory when no stream is given."""

    def __init__(self, stream: Optional[IO[str]] = None):
        self.stream = stream
        self.records: List[dict] = []

    def emit(self, event: str, **fields) -> None:
        record = {"event": event, **fields}
        if self.stream is None:
            self.records.append(record)
        else:
            self.stream.write(json.dumps(record, sort_keys=True) + "\n")


class _LimitReached(Exception):
    pass


def _branch_list(splits: Dict[NeuronId, Phase]) -> list:
    return [[v.layer, v.neuron, p.value] for v, p in sorted(splits.items())]


# =================================================
# Function: check_success / pick_split / apply_phase
# =================================================
def check_success(t: Tableau, alpha: np.ndarray) -> bool:
    """Every ReLU pair satisfies f = max(0, b) within RELU_TOL."""
    if not t.relu_pairs:
        return True
    pre = alpha[[p.pre for p in t.relu_pairs]]
    post = alpha[[p.post for p in t.relu_pairs]]
    return bool(np.all(np.abs(post - np.maximum(pre, 0.0)) <= RELU_TOL))


def pick_split(node: SearchNode, t: Tableau) -> Optional[NeuronId]:
    """First unsplit pair, in topological order, whose x_b straddles zero."""
    for pair in t.relu_pairs:
        if pair.neuron in node.splits:
            continue
        if t.lower[pair.pre] < -EPSILON and t.upper[pair.pre] > EPSILON:
            return pair.neuron
    return None


def apply_phase(t: Tableau, pair: ReluPair, phase: Phase) -> bool:
    """Active: x_b >= 0 and x_f = x_b. Inactive: x_b <= 0 and x_f <= 0."""
    if phase is Phase.ACTIVE:
        ok = t.assert_bound(pair.pre, BoundKind.LOWER, 0.0)
        t.add_equality({pair.post: 1.0, pair.pre: -1.0}, 0.0)
        return ok
    ok = t.assert_bound(pair.pre, BoundKind.UPPER, 0.0)
    return t.assert_bound(pair.post, BoundKind.UPPER, 0.0) and ok


class SplitSearch:
    """Depth-first search, active branch first, one tableau snapshot per node."""

    def __init__(self, net: Network, q: Query, ctx: Optional[GammaContext] = None,
                 classes: Optional[Classification] = None, limits: Optional[Limits] = None,
                 deadline: Optional[float] = None, propagation: bool = True, learning: bool = True,
                 trace: Optional[TraceWriter] = None, iteration: int = 0):
        self.net = net
        self.q = q
        self.ctx = ctx
        self.classes = classes or {}
        self.limits = limits or Limits()
        self.deadline = deadline
        if deadline is None and self.limits.wall_clock is not None:
            self.deadline = time.monotonic() + self.limits.wall_clock
        self.propagation = propagation and ctx is not None
        self.learning = learning and ctx is not None
        self.trace = trace
        self.iteration = iteration
        self.stats = SearchStats()
        self._boundary_closures = 0

    # ---------- ENTRY ----------
    def run(self) -> SearchOutcome:
        root = encode(self.net, self.q)
        try:
            witness = self._explore(root, {}, 0)
        except _LimitReached:
            logger.info(f"Iteration {self.iteration}: limit reached after {self.stats.visited_states} states")
            return SearchOutcome(Verdict.timeout(), self.stats, self.ctx)
        verdict = Verdict.unsat() if witness is None else Verdict.sat(witness)
        return SearchOutcome(verdict, self.stats, self.ctx)

    def _emit(self, event: str, **fields) -> None:
        if self.trace is not None:
            self.trace.emit(event, iteration=self.iteration, **fields)

    def _check_limits(self) -> None:
        cap = self.limits.max_states
        if cap is not None and self.stats.visited_states > cap:
            raise _LimitReached()
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise _LimitReached()

    # ---------- NODE ----------
    def _explore(self, tableau: Tableau, splits: Dict[NeuronId, Phase], depth: int) -> Optional[np.ndarray]:
        self.stats.visited_states += 1
        node = SearchNode(self.stats.visited_states, tableau, splits, depth)
        self._check_limits()
        mark = len(self.ctx.branch_record) if self.ctx is not None else 0
        boundary_before = self._boundary_closures
        try:
            reason = self._propagate(node)
            if reason is not None:
                self._close(node, reason)
                return None

            while True:
                self.stats.lp_solves += 1
                result = solve(tableau)
                if not result.feasible:
                    self._close(node, "lp")
                    return None
                if check_success(tableau, result.assignment):
                    witness = np.clip(result.assignment[tableau.input_vars],
                                      self.q.input_lower, self.q.input_upper)
                    if check_witness(self.net, self.q, witness):
                        self._emit("success", node=node.node_id, witness=[float(v) for v in witness])
                        return witness
                target = pick_split(node, tableau)
                if target is not None:
                    break
                if not self._fix_determined(node):
                    logger.warning(f"Node {node.node_id}: fully determined but no confirmed witness")
                    self._boundary_closures += 1
                    self._close(node, "boundary", learn=False)
                    return None

            self.stats.splits += 1
            own_mark = len(self.ctx.branch_record) if self.ctx is not None else 0
            for phase in BRANCH_ORDER:
                child = tableau.copy()
                child_splits = dict(splits)
                child_splits[target] = phase
                if self.ctx is not None:
                    self.ctx.record_split(target, phase)
                self._emit("split", node=node.node_id, neuron=target.to_list(), phase=phase.value)
                apply_phase(child, child.pair(target), phase)
                witness = self._explore(child, child_splits, depth + 1)
                if witness is not None:
                    return witness
                if self.ctx is not None:
                    self.ctx.truncate_branch(own_mark)
            # a subtree with an undecided leaf is not a proof
            self._close(node, "exhausted", learn=self._boundary_closures == boundary_before)
            return None
        finally:
            if self.ctx is not None:
                self.ctx.truncate_branch(mark)

    def _fix_determined(self, node: SearchNode) -> bool:
        """Enforce phases already decided by bounds on unsplit pairs."""
        t = node.tableau
        fixed = False
        for pair in t.relu_pairs:
            if pair.neuron in node.splits:
                continue
            phase = Phase.ACTIVE if t.lower[pair.pre] >= -EPSILON else Phase.INACTIVE
            apply_phase(t, pair, phase)
            node.splits[pair.neuron] = phase
            fixed = True
        return fixed

    def _propagate(self, node: SearchNode) -> Optional[str]:
        if not self.propagation or not self.ctx.gamma:
            return None
        while True:
            before = _branch_list(node.splits)
            started = time.perf_counter()
            result = self.ctx.propagate(node.splits, self.classes)
            self.stats.instrumentation_seconds += time.perf_counter() - started
            if result.conflict is not None:
                self.stats.conflicts += 1
                self._emit("conflict", node=node.node_id, clause=result.conflict.to_dict(), branch=before)
                return "conflict"
            if not result.forced:
                return None
            for item in result.forced:
                neuron, phase = item.literal.neuron, item.literal.phase
                self.stats.propagations += 1
                if item.guarded:
                    self.stats.prune_hits += 1
                node.splits[neuron] = phase
                self._emit("propagate", node=node.node_id, neuron=neuron.to_list(), phase=phase.value,
                           guarded=item.guarded, clause=item.clause.to_dict(), branch=before)
                if not apply_phase(node.tableau, node.tableau.pair(neuron), phase):
                    return "bounds"

    def _close(self, node: SearchNode, reason: str, learn: bool = True) -> None:
        clause = None
        if learn and self.learning:
            started = time.perf_counter()
            clause = self.ctx.learn_on_failure()
            self.stats.instrumentation_seconds += time.perf_counter() - started
            if clause is not None:
                self.stats.learned_clauses += 1
        self._emit("failure", node=node.node_id, reason=reason, branch=_branch_list(node.splits),
                   clause=None if clause is None else clause.to_dict())


# =================================================
# Function: verify
# =================================================
def verify(net: Network, q: Query, ctx: Optional[GammaContext] = None, limits: Optional[Limits] = None,
           **options) -> SearchOutcome:
    """Decide the query on one network. Options are passed to SplitSearch."""
    outcome = SplitSearch(net, q, ctx, limits=limits, **options).run()
    s = outcome.stats
    logger.debug(f"verify: {outcome.verdict.kind.value} states={s.visited_states} splits={s.splits} "
                 f"propagations={s.propagations} prunes={s.prune_hits}")
    return outcome
