#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# ============================================================
# File: cegar_driver.py
# Revision: Rev.1
# Purpose: Abstraction-refinement loop: plain, abstraction
#          (ar) and abstraction with residual reasoning (ar4).
# ============================================================

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from utils.abstraction import abstract_to_saturation, refine_last
from utils.config import Limits
from utils.errors import ResinetError
from utils.log_utils import get_logger
from utils.network import Network, NeuronId, evaluate, network_to_dict
from utils.preprocess import classes_to_list, purify_with_classes, shift_inputs_nonnegative
from utils.property import Query, Verdict, VerdictKind, canonicalize, check_witness
from utils.residual import GammaContext, Phase
from utils.split_search import SearchStats, TraceWriter, verify

logger = get_logger(__name__)

BREAKPOINT_TOL = 1e-9


class Mode(str, Enum):
    PLAIN = "plain"
    AR = "ar"
    AR4 = "ar4"


@dataclass
class IterationRecord:
    index: int
    widths: List[int]
    merges_left: int
    verdict: str
    stats: SearchStats
    clauses_before: int = 0
    clauses_after: int = 0
    spurious: bool = False
    gamma_violations: int = 0

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "widths": self.widths,
            "merges_left": self.merges_left,
            "verdict": self.verdict,
            "spurious": self.spurious,
            "clauses_before": self.clauses_before,
            "clauses_after": self.clauses_after,
            "gamma_violations": self.gamma_violations,
            "stats": self.stats.to_dict(),
        }


@dataclass
class RunResult:
    verdict: Verdict
    stats: SearchStats
    refinement_count: int
    mode: Mode
    merges: int = 0
    iterations: List[IterationRecord] = field(default_factory=list)
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        out = self.verdict.to_dict()
        out.update({
            "mode": self.mode.value,
            "refinement_count": self.refinement_count,
            "merges": self.merges,
            "elapsed_seconds": self.elapsed,
            "stats": self.stats.to_dict(),
            "iterations": [it.to_dict() for it in self.iterations],
        })
        return out


# =================================================
# Function: is_real_sat
# =================================================
def is_real_sat(original: Network, q: Query, witness) -> bool:
    return check_witness(original, q, witness)


def witness_pattern(net: Network, x) -> Tuple[Dict[NeuronId, Phase], FrozenSet[NeuronId]]:
    """Phase of every hidden neuron at x, plus those sitting on the breakpoint."""
    trace = evaluate(net, x)
    pattern, ambiguous = {}, set()
    for v in net.hidden_neurons():
        pre = trace.pre[v.layer][v.neuron]
        pattern[v] = Phase.ACTIVE if pre >= 0 else Phase.INACTIVE
        if abs(pre) <= BREAKPOINT_TOL:
            ambiguous.add(v)
    return pattern, frozenset(ambiguous)


# =================================================
# Function: run
# =================================================
def run(original: Network, q: Query, mode="ar4", limits: Optional[Limits] = None, policy=None,
        trace: Optional[TraceWriter] = None) -> RunResult:
    mode = Mode(mode)
    limits = limits or Limits()
    q.check_against(original)
    started = time.monotonic()
    deadline = started + limits.wall_clock if limits.wall_clock is not None else None
    net, cq = canonicalize(original, q)

    if mode is Mode.PLAIN:
        if trace is not None:
            trace.emit("iteration", iteration=0, network=network_to_dict(net), merges=0)
        ctx = GammaContext()
        outcome = verify(net, cq, ctx, limits, deadline=deadline, trace=trace, iteration=0)
        record = IterationRecord(0, net.widths, 0, outcome.verdict.kind.value, outcome.stats,
                                 clauses_after=len(ctx.gamma))
        if outcome.verdict.is_sat:
            pattern, ambiguous = witness_pattern(net, outcome.verdict.witness)
            record.gamma_violations = len(ctx.violated_by(pattern, ambiguous))
        result = RunResult(outcome.verdict, SearchStats().add(outcome.stats), 0, mode,
                           iterations=[record], elapsed=time.monotonic() - started)
        _log_summary(result)
        return result

    shifted, sq, offset = shift_inputs_nonnegative(net, cq)
    pure, classes = purify_with_classes(shifted)
    abstract, a_classes, merges = abstract_to_saturation(pure, classes, policy)
    residual = mode is Mode.AR4
    ctx = GammaContext(merges)
    total = SearchStats()
    iterations: List[IterationRecord] = []
    refinements = 0
    logger.info(f"Mode {mode.value}: {len(merges)} merges, abstract widths {abstract.widths}")

    while True:
        k = len(iterations)
        if trace is not None:
            trace.emit("iteration", iteration=k, network=network_to_dict(abstract), merges=len(ctx.abstraction_record),
                       offset=[float(v) for v in offset], classes=classes_to_list(a_classes))
        if not residual:
            ctx = GammaContext(ctx.abstraction_record)
        before = len(ctx.gamma)
        outcome = verify(abstract, sq, ctx, limits, classes=a_classes, deadline=deadline,
                         propagation=residual, learning=residual, trace=trace, iteration=k)
        total.add(outcome.stats)
        record = IterationRecord(k, abstract.widths, len(ctx.abstraction_record), outcome.verdict.kind.value,
                                 outcome.stats, before, len(ctx.gamma))
        iterations.append(record)
        logger.info(f"Iteration {k}: {record.verdict} on widths {record.widths}, "
                    f"states={outcome.stats.visited_states}, prunes={outcome.stats.prune_hits}")

        if outcome.verdict.kind is not VerdictKind.SAT:
            verdict = outcome.verdict
            break
        pattern, ambiguous = witness_pattern(abstract, outcome.verdict.witness)
        record.gamma_violations = len(ctx.violated_by(pattern, ambiguous))
        witness = np.clip(outcome.verdict.witness + offset, q.input_lower, q.input_upper)
        if is_real_sat(original, q, witness):
            verdict = Verdict.sat(witness)
            break
        record.spurious = True
        if not len(ctx.abstraction_record):
            raise ResinetError("witness of the fully refined network does not hold on the original")

        abstract, a_classes, remaining, step = refine_last(abstract, ctx.abstraction_record)
        refinements += 1
        if residual:
            t0 = time.perf_counter()
            dropped = ctx.rename_after_refinement(step, a_classes, remaining)
            total.instrumentation_seconds += time.perf_counter() - t0
        else:
            dropped = 0
            ctx.abstraction_record = remaining
        if trace is not None:
            trace.emit("refine", iteration=k, merged=step.merged.to_list(), left=step.left.to_list(),
                       right=step.right.to_list(), dropped=dropped, gamma=[c.to_dict() for c in ctx.gamma])

    result = RunResult(verdict, total, refinements, mode, len(merges), iterations, time.monotonic() - started)
    _log_summary(result)
    return result


def _log_summary(result: RunResult) -> None:
    s = result.stats
    logger.info(f"Run {result.mode.value}: {result.verdict.kind.value} after {result.refinement_count} "
                f"refinements, states={s.visited_states}, splits={s.splits}, prunes={s.prune_hits}")
