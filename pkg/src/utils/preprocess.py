#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# ============================================================
# File: preprocess.py
# Revision: Rev.1
# Purpose: Sign / influence classification of hidden neurons
#          and purification into an equivalent pure network.
# ============================================================

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np

from utils.errors import NotPureError
from utils.log_utils import get_logger
from utils.network import Layer, Network, NeuronId
from utils.property import Query

logger = get_logger(__name__)


class Sign(str, Enum):
    POS = "pos"
    NEG = "neg"


class Influence(str, Enum):
    INC = "inc"
    DEC = "dec"


@dataclass(frozen=True)
class NeuronClass:
    sign: Sign
    influence: Influence

    def __str__(self):
        return f"({self.sign.value},{self.influence.value})"


Classification = Dict[NeuronId, NeuronClass]

POS_INC = NeuronClass(Sign.POS, Influence.INC)
POS_DEC = NeuronClass(Sign.POS, Influence.DEC)
NEG_INC = NeuronClass(Sign.NEG, Influence.INC)
NEG_DEC = NeuronClass(Sign.NEG, Influence.DEC)

# copy order used by purify
BUCKET_ORDER = (POS_INC, POS_DEC, NEG_INC, NEG_DEC)


def _edge_class(weight: float, successor: Influence) -> NeuronClass:
    """Class implied by a single nonzero outgoing edge."""
    if weight > 0:
        return POS_INC if successor is Influence.INC else POS_DEC
    return NEG_DEC if successor is Influence.INC else NEG_INC


def _buckets(column: np.ndarray, successors: List[NeuronClass]) -> Dict[NeuronClass, List[int]]:
    buckets: Dict[NeuronClass, List[int]] = {}
    for s, w in enumerate(column):
        if w == 0.0:
            continue
        buckets.setdefault(_edge_class(float(w), successors[s].influence), []).append(s)
    return buckets


# =================================================
# Function: classify
# =================================================
def classify(net: Network) -> Classification:
    """Classes of every hidden neuron plus the output neuron (always pos/inc).

    Zero-weight edges are class-neutral; a neuron with no nonzero
    outgoing edge is (pos, inc).
    """
    out_layer = net.output_layer
    classes: Classification = {NeuronId(out_layer, j): POS_INC for j in range(net.output_size)}
    for li in reversed(list(net.hidden_layers)):
        successors = [classes[NeuronId(li + 1, s)] for s in range(net.layer(li + 1).width)]
        outgoing = net.layer(li + 1).weights
        for j in range(net.layer(li).width):
            buckets = _buckets(outgoing[:, j], successors)
            if len(buckets) > 1:
                raise NotPureError(NeuronId(li, j))
            classes[NeuronId(li, j)] = next(iter(buckets), POS_INC)
    return classes


# =================================================
# Function: purify
# =================================================
def purify_with_classes(net: Network) -> Tuple[Network, Classification]:
    """Split mixed neurons into up to four copies, one per (sign, influence) bucket.

    Hidden layers are processed from last to first. Each copy keeps the
    outgoing edges of its bucket and duplicates the incoming row and bias.
    """
    weights = [layer.weights.copy() for layer in net.layers]
    biases = [layer.biases.copy() for layer in net.layers]
    # successor classes of the layer being processed, starting at the output
    succ_classes: List[NeuronClass] = [POS_INC] * net.output_size
    layer_classes: Dict[int, List[NeuronClass]] = {}
    split_count = 0

    for li in reversed(list(net.hidden_layers)):
        w_in, b_in = weights[li - 1], biases[li - 1]
        w_out = weights[li]
        rows, bias_rows, columns, classes = [], [], [], []
        for j in range(w_in.shape[0]):
            buckets = _buckets(w_out[:, j], succ_classes)
            if not buckets:
                buckets = {POS_INC: []}
            if len(buckets) > 1:
                split_count += len(buckets) - 1
            for cls in BUCKET_ORDER:
                if cls not in buckets:
                    continue
                column = np.zeros(w_out.shape[0])
                keep = buckets[cls]
                column[keep] = w_out[keep, j]
                rows.append(w_in[j])
                bias_rows.append(b_in[j])
                columns.append(column)
                classes.append(cls)
        weights[li - 1] = np.vstack(rows)
        biases[li - 1] = np.array(bias_rows)
        weights[li] = np.column_stack(columns)
        layer_classes[li] = classes
        succ_classes = classes

    layers = [Layer(w, b, layer.activation) for w, b, layer in zip(weights, biases, net.layers)]
    pure = Network(layers)
    result: Classification = {NeuronId(pure.output_layer, j): POS_INC for j in range(pure.output_size)}
    for li, classes in layer_classes.items():
        for j, cls in enumerate(classes):
            result[NeuronId(li, j)] = cls
    if split_count:
        logger.debug(f"Purify added {split_count} neuron copies: widths {net.widths} -> {pure.widths}")
    return pure, result


def purify(net: Network) -> Network:
    return purify_with_classes(net)[0]


# =================================================
# Function: shift_inputs_nonnegative
# =================================================
def shift_inputs_nonnegative(net: Network, q: Query) -> Tuple[Network, Query, np.ndarray]:
    """Substitute x = x' + offset so that every input of the box is >= 0.

    Merging over-approximates only on nonnegative source values; the
    offset is folded into the first layer's biases. Returns the offset
    to add back to witnesses of the shifted query.
    """
    offset = np.minimum(q.input_lower, 0.0)
    if not np.any(offset < 0):
        return net, q, np.zeros(q.width)
    first = net.layers[0]
    shifted = Layer(first.weights, first.biases + first.weights @ offset, first.activation)
    shifted_net = Network([shifted] + list(net.layers[1:]))
    shifted_q = Query(q.input_lower - offset, q.input_upper - offset, q.output_threshold, q.sense)
    return shifted_net, shifted_q, offset


# ---------- JSON ----------
def classes_to_list(classes: Classification) -> list:
    return [[v.layer, v.neuron, c.sign.value, c.influence.value] for v, c in sorted(classes.items())]


def classes_from_list(rows) -> Classification:
    return {NeuronId(int(l), int(n)): NeuronClass(Sign(s), Influence(i)) for l, n, s, i in rows}
