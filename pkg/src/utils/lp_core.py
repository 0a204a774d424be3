#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# ============================================================
# File: lp_core.py
# Revision: Rev.1
# Purpose: LP feasibility over linear equalities and variable
#          bounds: network encoding, bound assertion and a
#          bounded-variable simplex with Bland's rule.
# ============================================================

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, NamedTuple, Optional

import numpy as np

from utils.config import (
    EPSILON,
    LP_FEASIBILITY_TOL,
    LP_MAX_ITERATIONS,
    LP_PIVOT_TOL,
    OUTPUT_DELTA,
)
from utils.errors import InputShapeError, LPIterationLimitError
from utils.log_utils import get_logger
from utils.network import Network, NeuronId
from utils.property import Query

logger = get_logger(__name__)

INF = np.inf


class BoundKind(str, Enum):
    LOWER = "lower"
    UPPER = "upper"


class ReluPair(NamedTuple):
    neuron: NeuronId
    pre: int    # x_b
    post: int   # x_f


@dataclass(frozen=True)
class Certificate:
    """Infeasibility witness.

    kind "bounds": ``variable`` has lower > upper.
    kind "row": over all columns (original variables, then one slack per
    row), ``variable = row . x`` holds on the equalities, yet every
    assignment within bounds puts the right-hand side strictly below the
    variable's lower bound (side "lower") or above its upper bound.
    """
    kind: str
    variable: int
    side: str
    row: Optional[np.ndarray] = None


class LPStatus(str, Enum):
    FEASIBLE = "FEASIBLE"
    INFEASIBLE = "INFEASIBLE"


@dataclass
class LPResult:
    status: LPStatus
    assignment: Optional[np.ndarray] = None
    certificate: Optional[Certificate] = None
    pivots: int = 0

    @property
    def feasible(self) -> bool:
        return self.status is LPStatus.FEASIBLE


class Tableau:
    """Equalities ``A x = rhs``, bounds, and the ReLU pairs of a network.

    Single-owner mutable state; ``copy`` gives an independent snapshot.
    """

    def __init__(self):
        self.names: List[str] = []
        self.lower = np.zeros(0)
        self.upper = np.zeros(0)
        self.A = np.zeros((0, 0))
        self.rhs = np.zeros(0)
        self.relu_pairs: List[ReluPair] = []
        self.input_vars: List[int] = []
        self.output_var: Optional[int] = None
        self.failure: Optional[Certificate] = None
        self._pair_index: Dict[NeuronId, int] = {}

    # ---------- CONSTRUCTION ----------
    def add_variable(self, name: str, lower: float = -INF, upper: float = INF) -> int:
        if self.A.shape[0]:
            raise ValueError("variables must be added before equalities")
        self.names.append(name)
        self.lower = np.append(self.lower, float(lower))
        self.upper = np.append(self.upper, float(upper))
        self.A = np.zeros((0, len(self.names)))
        return len(self.names) - 1

    def add_relu_pair(self, neuron: NeuronId, pre: int, post: int) -> None:
        self._pair_index[neuron] = len(self.relu_pairs)
        self.relu_pairs.append(ReluPair(neuron, pre, post))

    def add_equality(self, coeffs: Mapping[int, float], rhs: float) -> None:
        row = np.zeros(self.n_vars)
        for var, c in coeffs.items():
            row[var] += c
        self.A = np.vstack([self.A, row])
        self.rhs = np.append(self.rhs, float(rhs))

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.names = self.names
        t.lower = self.lower.copy()
        t.upper = self.upper.copy()
        t.A = self.A.copy()
        t.rhs = self.rhs.copy()
        t.relu_pairs = self.relu_pairs
        t.input_vars = self.input_vars
        t.output_var = self.output_var
        t.failure = self.failure
        t._pair_index = self._pair_index
        return t

    # ---------- ACCESS ----------
    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def failed(self) -> bool:
        return self.failure is not None

    def pair(self, neuron: NeuronId) -> ReluPair:
        return self.relu_pairs[self._pair_index[neuron]]

    # =================================================
    # Function: assert_bound
    # =================================================
    def assert_bound(self, var: int, kind: BoundKind, value: float) -> bool:
        """Tighten one bound; returns False when the tableau is now FAILED."""
        if kind is BoundKind.LOWER:
            self.lower[var] = max(self.lower[var], float(value))
        else:
            self.upper[var] = min(self.upper[var], float(value))
        if self.failure is None and self.lower[var] > self.upper[var] + EPSILON:
            self.failure = Certificate("bounds", var, kind.value)
        return self.failure is None


# =================================================
# Function: encode
# =================================================
def encode(net: Network, q: Query) -> Tableau:
    """Variables: inputs, then (x_b, x_f) per hidden neuron in topological
    order, then the output. One row per non-input neuron:
    sum(w * source) - x_b = -bias."""
    if q.width != net.input_size:
        raise InputShapeError(f"query width {q.width} != network input width {net.input_size}")
    if net.output_size != 1:
        raise InputShapeError(f"verification needs a single output, network has {net.output_size}")

    t = Tableau()
    t.input_vars = [t.add_variable(f"x{i}", lo, hi)
                    for i, (lo, hi) in enumerate(zip(q.input_lower, q.input_upper))]
    pre_vars: Dict[int, List[int]] = {}
    post_vars: Dict[int, List[int]] = {0: t.input_vars}
    for li in net.hidden_layers:
        pre_vars[li], post_vars[li] = [], []
        for j in range(net.layer(li).width):
            b = t.add_variable(f"b{li}_{j}")
            f = t.add_variable(f"f{li}_{j}", 0.0, INF)
            pre_vars[li].append(b)
            post_vars[li].append(f)
            t.add_relu_pair(NeuronId(li, j), b, f)
    t.output_var = t.add_variable("y", q.output_threshold + OUTPUT_DELTA, INF)
    pre_vars[net.output_layer] = [t.output_var]

    for li in range(1, net.output_layer + 1):
        layer = net.layer(li)
        sources = post_vars[li - 1]
        for j in range(layer.width):
            coeffs = {src: float(w) for src, w in zip(sources, layer.weights[j]) if w != 0.0}
            coeffs[pre_vars[li][j]] = -1.0
            t.add_equality(coeffs, -float(layer.biases[j]))
    return t


# =================================================
# Function: solve
# =================================================
def solve(t: Tableau, max_iterations: Optional[int] = None) -> LPResult:
    """Bounded-variable simplex on A x - s = 0, s in [rhs, rhs].

    Slacks start basic, original variables nonbasic at the bound point
    closest to zero. Bland's rule picks the smallest violated basic
    variable and the smallest suitable nonbasic variable.
    """
    if t.failure is not None:
        return LPResult(LPStatus.INFEASIBLE, certificate=t.failure)
    limit = LP_MAX_ITERATIONS if max_iterations is None else max_iterations
    m, n = t.A.shape
    total = n + m
    lo = np.concatenate([t.lower, t.rhs])
    hi = np.concatenate([t.upper, t.rhs])
    T = np.zeros((m, total))
    T[:, :n] = t.A
    basic = np.arange(n, total)
    is_basic = np.zeros(total, dtype=bool)
    is_basic[n:] = True
    alpha = np.zeros(total)
    alpha[:n] = np.clip(0.0, t.lower, t.upper)
    alpha[n:] = t.A @ alpha[:n]
    tol = LP_FEASIBILITY_TOL

    for pivots in range(limit + 1):
        values = alpha[basic]
        too_low = values < lo[basic] - tol
        too_high = values > hi[basic] + tol
        violated = np.flatnonzero(too_low | too_high)
        if violated.size == 0:
            return _finish(t, T, basic, is_basic, alpha, pivots)
        if pivots == limit:
            break
        r = int(violated[np.argmin(basic[violated])])
        xb = int(basic[r])
        row = T[r]
        nonbasic = ~is_basic
        if too_low[r]:
            ok = nonbasic & (((row > LP_PIVOT_TOL) & (alpha < hi)) | ((row < -LP_PIVOT_TOL) & (alpha > lo)))
            target, side = lo[xb], BoundKind.LOWER.value
        else:
            ok = nonbasic & (((row < -LP_PIVOT_TOL) & (alpha < hi)) | ((row > LP_PIVOT_TOL) & (alpha > lo)))
            target, side = hi[xb], BoundKind.UPPER.value
        candidates = np.flatnonzero(ok)
        if candidates.size == 0:
            cert = Certificate("row", xb, side, row.copy())
            return LPResult(LPStatus.INFEASIBLE, certificate=cert, pivots=pivots)
        _pivot_and_update(T, basic, is_basic, alpha, r, xb, int(candidates[0]), target)

    raise LPIterationLimitError(f"simplex exceeded {limit} pivots on a {m}x{n} tableau")


def _pivot_and_update(T, basic, is_basic, alpha, r, xb, xj, target):
    a = T[r, xj]
    theta = (target - alpha[xb]) / a
    alpha[xj] += theta
    alpha[basic] += T[:, xj] * theta
    alpha[xb] = target

    new_row = -T[r] / a
    new_row[xj] = 0.0
    new_row[xb] = 1.0 / a
    col = T[:, xj].copy()
    col[r] = 0.0
    T += np.outer(col, new_row)
    T[:, xj] = 0.0
    T[r] = new_row
    basic[r] = xj
    is_basic[xj] = True
    is_basic[xb] = False


def _finish(t: Tableau, T, basic, is_basic, alpha, pivots) -> LPResult:
    n = t.n_vars
    alpha[basic] = T @ np.where(is_basic, 0.0, alpha)
    x = alpha[:n].copy()
    residual = np.max(np.abs(t.A @ x - t.rhs)) if t.n_rows else 0.0
    if residual > 1e-7:
        logger.warning(f"LP residual {residual:.3e} above tolerance after {pivots} pivots")
    return LPResult(LPStatus.FEASIBLE, assignment=x, pivots=pivots)


# =================================================
# Function: verify_certificate
# =================================================
def verify_certificate(t: Tableau, cert: Certificate) -> bool:
    """Independent check of an infeasibility certificate against the raw rows."""
    if cert.kind == "bounds":
        return bool(t.lower[cert.variable] > t.upper[cert.variable] + EPSILON)
    if cert.kind != "row" or cert.row is None:
        return False
    m, n = t.A.shape
    row = np.asarray(cert.row, dtype=np.float64)
    if row.shape != (n + m,):
        return False

    # express both sides over the original variables (slack s_r = A_r . x)
    if cert.variable < n:
        lhs = np.zeros(n)
        lhs[cert.variable] = 1.0
    else:
        lhs = t.A[cert.variable - n].copy()
    rhs = row[:n] + row[n:] @ t.A
    scale = 1.0 + np.max(np.abs(row)) * (1.0 + (np.max(np.abs(t.A)) if t.A.size else 0.0))
    if np.max(np.abs(lhs - rhs)) > 1e-7 * scale:
        return False

    lo = np.concatenate([t.lower, t.rhs])
    hi = np.concatenate([t.upper, t.rhs])
    pos, neg = row > 0, row < 0
    if cert.side == BoundKind.LOWER.value:
        reach = np.concatenate([hi[pos], lo[neg]])
        if not np.all(np.isfinite(reach)):
            return False
        best = row[pos] @ hi[pos] + row[neg] @ lo[neg]
        return bool(best < lo[cert.variable])
    reach = np.concatenate([lo[pos], hi[neg]])
    if not np.all(np.isfinite(reach)):
        return False
    best = row[pos] @ lo[pos] + row[neg] @ hi[neg]
    return bool(best > hi[cert.variable])
