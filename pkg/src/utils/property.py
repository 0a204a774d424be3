#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# ============================================================
# File: property.py
# Revision: Rev.1
# Purpose: Verification queries (box input, output threshold),
#          verdicts and witness checking.
# ============================================================

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from utils.config import EPSILON
from utils.errors import InputShapeError, NetworkParseError, QueryError
from utils.log_utils import get_logger
from utils.network import Layer, Network, check_number, evaluate

logger = get_logger(__name__)

GT = "gt"
LT = "lt"


@dataclass(frozen=True, eq=False)
class Query:
    """Property (l <= x <= u) and (y > c), or (y < c) when sense is LT."""
    input_lower: np.ndarray
    input_upper: np.ndarray
    output_threshold: float
    sense: str = GT

    def __post_init__(self):
        lower = np.array(self.input_lower, dtype=np.float64).reshape(-1)
        upper = np.array(self.input_upper, dtype=np.float64).reshape(-1)
        if lower.shape != upper.shape:
            raise QueryError(f"bound widths differ: {lower.size} vs {upper.size}")
        if np.any(lower > upper):
            bad = int(np.argmax(lower > upper))
            raise QueryError(f"input_lower[{bad}] > input_upper[{bad}]")
        if not np.isfinite(self.output_threshold):
            raise QueryError("output threshold must be finite")
        if self.sense not in (GT, LT):
            raise QueryError(f"unknown sense {self.sense!r}")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "input_lower", lower)
        object.__setattr__(self, "input_upper", upper)
        object.__setattr__(self, "output_threshold", float(self.output_threshold))

    @property
    def width(self) -> int:
        return self.input_lower.size

    def check_against(self, net: Network) -> None:
        if self.width != net.input_size:
            raise InputShapeError(f"query width {self.width} != network input width {net.input_size}")
        if net.output_size != 1:
            raise InputShapeError(f"verification needs a single output, network has {net.output_size}")

    def in_box(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.input_lower) and np.all(x <= self.input_upper))


class VerdictKind(str, Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    TIMEOUT = "TIMEOUT"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    witness: Optional[np.ndarray] = field(default=None, compare=False)

    @classmethod
    def sat(cls, witness) -> "Verdict":
        return cls(VerdictKind.SAT, np.asarray(witness, dtype=np.float64))

    @classmethod
    def unsat(cls) -> "Verdict":
        return cls(VerdictKind.UNSAT)

    @classmethod
    def timeout(cls) -> "Verdict":
        return cls(VerdictKind.TIMEOUT)

    @property
    def is_sat(self) -> bool:
        return self.kind is VerdictKind.SAT

    def to_dict(self) -> dict:
        out = {"verdict": self.kind.value}
        if self.witness is not None:
            out["witness"] = [float(v) for v in self.witness]
        return out


# =================================================
# Function: check_witness
# =================================================
def check_witness(net: Network, q: Query, x) -> bool:
    """True iff x lies in the box and the output clears the threshold by more than EPSILON.

    Values within EPSILON of the threshold are logged as boundary and rejected.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_size,) or q.width != net.input_size:
        raise InputShapeError(f"witness shape {x.shape} does not match input width {net.input_size}")
    if not q.in_box(x):
        return False
    y = evaluate(net, x).output
    margin = y - q.output_threshold if q.sense == GT else q.output_threshold - y
    if margin > EPSILON:
        return True
    if margin >= -EPSILON:
        logger.warning(f"Boundary witness: output {y!r} within {EPSILON} of {q.output_threshold!r}")
    return False


# =================================================
# Function: canonicalize
# =================================================
def canonicalize(net: Network, q: Query) -> Tuple[Network, Query]:
    """Rewrite y < c as (-y) > (-c) by negating the output layer."""
    if q.sense == GT:
        return net, q
    last = net.layers[-1]
    negated = Layer(-last.weights, -last.biases, last.activation)
    layers = list(net.layers[:-1]) + [negated]
    return Network(layers), Query(q.input_lower, q.input_upper, -q.output_threshold, GT)


# ---------- JSON ----------
def query_from_dict(doc) -> Query:
    if not isinstance(doc, dict):
        raise NetworkParseError("expected an object", "$")
    for key in ("input_lower", "input_upper"):
        if key not in doc or not isinstance(doc[key], list):
            raise NetworkParseError("expected a list of numbers", key)
        for i, item in enumerate(doc[key]):
            check_number(item, f"{key}[{i}]")
    if ("output_gt" in doc) == ("output_lt" in doc):
        raise NetworkParseError("exactly one of 'output_gt' / 'output_lt' is required", "$")
    sense, key = (GT, "output_gt") if "output_gt" in doc else (LT, "output_lt")
    threshold = check_number(doc[key], key)
    return Query(np.array(doc["input_lower"], dtype=np.float64),
                 np.array(doc["input_upper"], dtype=np.float64),
                 float(threshold), sense)


def parse_query(text: Union[bytes, str]) -> Query:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkParseError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} col {exc.colno}") from exc
    return query_from_dict(doc)


def serialize_query(q: Query) -> bytes:
    key = "output_gt" if q.sense == GT else "output_lt"
    doc = {
        "input_lower": [float(v) for v in q.input_lower],
        "input_upper": [float(v) for v in q.input_upper],
        key: float(q.output_threshold),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
