#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# ============================================================
# File: oracle.py
# Revision: Rev.1
# Purpose: Ground truth for small networks: exhaustive ReLU
#          phase enumeration over LP feasibility, plus grid
#          search for witnesses.
# ============================================================

import itertools
from typing import Mapping, Optional

import numpy as np

from utils.config import GRID_MAX_DIM, ORACLE_MAX_RELUS, RELU_TOL
from utils.errors import OracleLimitError
from utils.lp_core import BoundKind, Tableau, encode, solve
from utils.network import Network, NeuronId, evaluate_batch
from utils.property import GT, Query, Verdict, canonicalize, check_witness
from utils.residual import Phase


def _fix(t: Tableau, neuron: NeuronId, active: bool) -> None:
    pair = t.pair(neuron)
    if active:
        t.assert_bound(pair.pre, BoundKind.LOWER, 0.0)
        t.add_equality({pair.post: 1.0, pair.pre: -1.0}, 0.0)
    else:
        t.assert_bound(pair.pre, BoundKind.UPPER, 0.0)
        t.assert_bound(pair.post, BoundKind.UPPER, 0.0)


def _consistent(t: Tableau, alpha: np.ndarray) -> bool:
    for pair in t.relu_pairs:
        if abs(alpha[pair.post] - max(0.0, alpha[pair.pre])) > RELU_TOL:
            return False
    return True


# =================================================
# Function: brute_force_verify
# =================================================
def brute_force_verify(net: Network, q: Query,
                       fixed: Optional[Mapping[NeuronId, Phase]] = None) -> Verdict:
    """Enumerate every phase pattern (completing ``fixed`` when given) and
    solve one LP per pattern. Patterns go in lexicographic order over
    bit-vectors in topological neuron order, inactive before active."""
    net, q = canonicalize(net, q)
    fixed = dict(fixed or {})
    free = [v for v in net.hidden_neurons() if v not in fixed]
    if len(free) > ORACLE_MAX_RELUS:
        raise OracleLimitError(f"{len(free)} free ReLUs exceed the enumeration bound {ORACLE_MAX_RELUS}")

    base = encode(net, q)
    for v, phase in fixed.items():
        _fix(base, v, phase is Phase.ACTIVE)
    if base.failed:
        return Verdict.unsat()

    for bits in itertools.product((False, True), repeat=len(free)):
        t = base.copy()
        for v, active in zip(free, bits):
            _fix(t, v, active)
        if t.failed:
            continue
        result = solve(t)
        if not result.feasible or not _consistent(t, result.assignment):
            continue
        x = np.clip(result.assignment[t.input_vars], q.input_lower, q.input_upper)
        if check_witness(net, q, x):
            return Verdict.sat(x)
    return Verdict.unsat()


# =================================================
# Function: grid_search
# =================================================
def grid_search(net: Network, q: Query, resolution: int) -> Optional[np.ndarray]:
    """First grid point (lexicographic, resolution points per axis) that
    passes check_witness. Resolution 1 tests the lower corner only."""
    if q.width > GRID_MAX_DIM:
        raise OracleLimitError(f"grid search supports at most {GRID_MAX_DIM} inputs, got {q.width}")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    axes = [np.linspace(lo, hi, resolution) if resolution > 1 else np.array([lo])
            for lo, hi in zip(q.input_lower, q.input_upper)]
    points = np.array(list(itertools.product(*axes)), dtype=np.float64).reshape(-1, q.width)
    outputs = evaluate_batch(net, points)
    margin = outputs - q.output_threshold if q.sense == GT else q.output_threshold - outputs
    for idx in np.flatnonzero(margin > 0):
        if check_witness(net, q, points[idx]):
            return points[idx]
    return None
