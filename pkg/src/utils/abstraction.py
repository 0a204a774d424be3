#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# ============================================================
# File: abstraction.py
# Revision: Rev.1
# Purpose: Neuron-merging abstraction, reverse-order refinement
#          and the abstraction record of applied merges.
# ============================================================

from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from utils.errors import AbstractionError, CannotRefineError
from utils.log_utils import get_logger
from utils.network import Layer, Network, NeuronId
from utils.preprocess import Classification, Influence

logger = get_logger(__name__)

Pair = Tuple[NeuronId, NeuronId]


@dataclass(frozen=True)
class MergeStep:
    """One applied merge. ``left``/``right`` are coordinates in the
    pre-merge network; ``merged`` sits at ``left``'s index afterwards."""
    merged: NeuronId
    left: NeuronId
    right: NeuronId
    snapshot: Network = field(repr=False, compare=False)
    snapshot_classes: Classification = field(repr=False, compare=False)

    @property
    def triple(self) -> Tuple[NeuronId, NeuronId, NeuronId]:
        return self.merged, self.left, self.right


@dataclass(frozen=True)
class AbstractionRecord:
    steps: Tuple[MergeStep, ...] = ()

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def appended(self, step: MergeStep) -> "AbstractionRecord":
        return AbstractionRecord(self.steps + (step,))

    def triples(self) -> List[Tuple[NeuronId, NeuronId, NeuronId]]:
        return [s.triple for s in self.steps]


class MergeResult(NamedTuple):
    network: Network
    classes: Classification
    step: MergeStep


class RefineResult(NamedTuple):
    network: Network
    classes: Classification
    record: AbstractionRecord
    undone: MergeStep


# =================================================
# Function: can_abstract
# =================================================
def can_abstract(net: Network, classes: Classification, v1: NeuronId, v2: NeuronId) -> bool:
    if v1 == v2 or v1.layer != v2.layer:
        return False
    if not (net.contains(v1) and net.contains(v2)):
        return False
    if net.is_output(v1) or v1.layer < 1:
        return False
    c1, c2 = classes.get(v1), classes.get(v2)
    return c1 is not None and c1 == c2


def _remap_classes(classes: Classification, layer: int, removed: int) -> Classification:
    out: Classification = {}
    for v, cls in classes.items():
        if v.layer != layer or v.neuron < removed:
            out[v] = cls
        elif v.neuron > removed:
            out[NeuronId(layer, v.neuron - 1)] = cls
    return out


# =================================================
# Function: merge_pair
# =================================================
def merge_pair(net: Network, classes: Classification, v1: NeuronId, v2: NeuronId) -> MergeResult:
    """Merge two same-class neurons of one layer.

    Incoming weights and bias: elementwise max for inc, min for dec.
    Outgoing weights: summed. The merged neuron takes the lower index.
    """
    if not can_abstract(net, classes, v1, v2):
        raise AbstractionError(f"cannot merge {v1} and {v2}")
    left, right = (v1, v2) if v1.neuron < v2.neuron else (v2, v1)
    li, i, j = left.layer, left.neuron, right.neuron
    pick = np.maximum if classes[left].influence is Influence.INC else np.minimum

    layer = net.layer(li)
    w = layer.weights.copy()
    b = layer.biases.copy()
    w[i] = pick(w[i], w[j])
    b[i] = pick(b[i], b[j])
    w = np.delete(w, j, axis=0)
    b = np.delete(b, j)

    nxt = net.layer(li + 1)
    w_next = nxt.weights.copy()
    w_next[:, i] = w_next[:, i] + w_next[:, j]
    w_next = np.delete(w_next, j, axis=1)

    layers = list(net.layers)
    layers[li - 1] = Layer(w, b, layer.activation)
    layers[li] = Layer(w_next, nxt.biases, nxt.activation)
    merged_net = Network(layers)
    step = MergeStep(merged=left, left=left, right=right, snapshot=net, snapshot_classes=classes)
    logger.debug(f"Merged {left} + {right} ({classes[left]})")
    return MergeResult(merged_net, _remap_classes(classes, li, j), step)


# ---------- MERGE-ORDER POLICIES ----------
def compatible_pairs(net: Network, classes: Classification) -> Iterable[Pair]:
    """All mergeable pairs, layers left to right, then by (i, j) index."""
    for li in net.hidden_layers:
        width = net.layer(li).width
        for i in range(width):
            for j in range(i + 1, width):
                a, b = NeuronId(li, i), NeuronId(li, j)
                if can_abstract(net, classes, a, b):
                    yield a, b


class GreedyMergePolicy:
    name = "greedy"

    def next_pair(self, net: Network, classes: Classification) -> Optional[Pair]:
        return next(iter(compatible_pairs(net, classes)), None)


class SeededMergePolicy:
    name = "random"

    def __init__(self, seed: int = 0):
        self._rng = np.random.default_rng(seed)

    def next_pair(self, net: Network, classes: Classification) -> Optional[Pair]:
        pairs = list(compatible_pairs(net, classes))
        if not pairs:
            return None
        return pairs[int(self._rng.integers(len(pairs)))]


class ExplicitMergePolicy:
    """Fixed list of pairs, each given in the coordinates of the network
    current at the time it is applied. Stops when the list runs out."""
    name = "explicit"

    def __init__(self, pairs: Sequence[Pair]):
        self._pairs = list(pairs)
        self._pos = 0

    def next_pair(self, net: Network, classes: Classification) -> Optional[Pair]:
        if self._pos >= len(self._pairs):
            return None
        pair = self._pairs[self._pos]
        self._pos += 1
        return pair


def make_policy(name: str = "greedy", seed: int = 0, pairs: Optional[Sequence[Pair]] = None):
    if name == "greedy":
        return GreedyMergePolicy()
    if name == "random":
        return SeededMergePolicy(seed)
    if name == "explicit":
        return ExplicitMergePolicy(pairs or [])
    raise AbstractionError(f"unknown merge policy {name!r}")


# =================================================
# Function: abstract_to_saturation
# =================================================
def abstract_to_saturation(net: Network, classes: Classification, policy=None
                           ) -> Tuple[Network, Classification, AbstractionRecord]:
    policy = policy or GreedyMergePolicy()
    record = AbstractionRecord()
    while True:
        pair = policy.next_pair(net, classes)
        if pair is None:
            break
        net, classes, step = merge_pair(net, classes, *pair)
        record = record.appended(step)
    logger.debug(f"Abstraction applied {len(record)} merges with policy {policy.name}; widths {net.widths}")
    return net, classes, record


# =================================================
# Function: refine_last
# =================================================
def refine_last(net: Network, record: AbstractionRecord) -> RefineResult:
    if not len(record):
        raise CannotRefineError("abstraction record is empty; network is already the original")
    step = record.steps[-1]
    logger.debug(f"Refining {step.merged} back into {step.left} + {step.right}")
    return RefineResult(step.snapshot, step.snapshot_classes, AbstractionRecord(record.steps[:-1]), step)
