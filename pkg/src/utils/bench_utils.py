#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# ============================================================
# File: bench_utils.py
# Revision: Rev.1
# Purpose: Benchmark suite generation (oracle-calibrated),
#          mode comparison reports and trace validation.
# ============================================================

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from utils.cegar_driver import run
from utils.config import (
    GEN_MAX_DEPTH,
    GEN_MAX_RELUS,
    GEN_MAX_WIDTH,
    GEN_WEIGHT_RANGE,
    ORACLE_MAX_RELUS,
    TIE_SECONDS,
    Limits,
)
from utils.errors import NetworkParseError, ResinetError, TraceFormatError
from utils.log_utils import get_logger
from utils.network import Layer, Network, NeuronId, evaluate_batch, network_from_dict, parse_network, serialize_network
from utils.oracle import brute_force_verify
from utils.preprocess import classes_from_list
from utils.property import Query, canonicalize, parse_query, serialize_query
from utils.residual import Clause, Phase, guard_holds

logger = get_logger(__name__)

MANIFEST = "manifest.csv"
MANIFEST_COLUMNS = ["instance", "network_file", "query_file", "inputs", "relus", "threshold", "expected"]
REPORT_COLUMNS = [
    "instance", "mode", "verdict", "expected", "wall_seconds", "visited_states", "splits",
    "propagations", "prune_hits", "lp_solves", "learned_clauses", "refinements", "instrumentation_seconds",
]
CALIBRATION_MARGIN = 1e-3


# =================================================
# BLOCK 1: SUITE GENERATION
# =================================================
@dataclass(frozen=True)
class Instance:
    name: str
    network: Network
    query: Query
    expected: str


def parse_shape(text: str) -> Tuple[int, List[int]]:
    """'2-4-5-1' -> (2, [4, 5]); the trailing output width must be 1."""
    try:
        widths = [int(part) for part in text.split("-")]
    except ValueError as exc:
        raise ValueError(f"bad shape {text!r}") from exc
    if len(widths) < 2 or widths[-1] != 1 or min(widths) < 1:
        raise ValueError(f"bad shape {text!r}: need input-...-1 with positive widths")
    return widths[0], widths[1:-1]


def random_shape(rng: np.random.Generator, max_inputs: int = 4, max_depth: int = GEN_MAX_DEPTH,
                 max_width: int = GEN_MAX_WIDTH, max_relus: int = GEN_MAX_RELUS) -> Tuple[int, List[int]]:
    inputs = int(rng.integers(1, max_inputs + 1))
    depth = int(rng.integers(1, max_depth + 1))
    widths: List[int] = []
    budget = max_relus
    for _ in range(depth):
        if budget < 1:
            break
        w = int(rng.integers(1, min(max_width, budget) + 1))
        widths.append(w)
        budget -= w
    return inputs, widths


def random_network(rng: np.random.Generator, inputs: int, hidden: Sequence[int],
                   weight_range: float = GEN_WEIGHT_RANGE, decimals: int = 3) -> Network:
    layers = []
    fan_in = inputs
    for k, width in enumerate(list(hidden) + [1]):
        weights = np.round(rng.uniform(-weight_range, weight_range, size=(width, fan_in)), decimals)
        biases = np.round(rng.uniform(-1.0, 1.0, size=width), decimals)
        layers.append(Layer(weights, biases, "relu" if k < len(hidden) else "identity"))
        fan_in = width
    return Network(layers)


def calibrate_threshold(rng: np.random.Generator, net: Network, lower, upper, want_sat: bool,
                        samples: int = 256) -> Tuple[float, str]:
    """Threshold whose oracle verdict is stable under a small perturbation."""
    points = rng.uniform(lower, upper, size=(samples, len(lower)))
    outputs = evaluate_batch(net, points)
    top, spread = float(outputs.max()), float(outputs.max() - outputs.min()) + 0.1
    c = float(np.quantile(outputs, 0.8)) if want_sat else top + 0.25 * spread
    for _ in range(8):
        c = round(c, 3)
        verdicts = [brute_force_verify(net, Query(lower, upper, c + d)).kind.value
                    for d in (-CALIBRATION_MARGIN, 0.0, CALIBRATION_MARGIN)]
        if len(set(verdicts)) == 1:
            return c, verdicts[0]
        c += 0.05 * spread
    raise ResinetError("could not calibrate a stable threshold")


def generate_suite(seed: int, count: int, shape: Optional[str] = None, max_inputs: int = 4,
                   max_depth: int = GEN_MAX_DEPTH, max_width: int = GEN_MAX_WIDTH,
                   max_relus: int = GEN_MAX_RELUS) -> List[Instance]:
    rng = np.random.default_rng(seed)
    instances = []
    for i in range(count):
        if shape:
            inputs, hidden = parse_shape(shape)
        else:
            inputs, hidden = random_shape(rng, max_inputs, max_depth, max_width, max_relus)
        net = random_network(rng, inputs, hidden)
        lower, upper = np.zeros(inputs), np.ones(inputs)
        c, expected = calibrate_threshold(rng, net, lower, upper, want_sat=(i % 2 == 0))
        instances.append(Instance(f"instance_{i:04d}", net, Query(lower, upper, c), expected))
    return instances


def write_suite(instances: Iterable[Instance], out_dir: str) -> pd.DataFrame:
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for inst in instances:
        net_file, query_file = f"{inst.name}.network.json", f"{inst.name}.query.json"
        with open(os.path.join(out_dir, net_file), "wb") as fh:
            fh.write(serialize_network(inst.network))
        with open(os.path.join(out_dir, query_file), "wb") as fh:
            fh.write(serialize_query(inst.query))
        rows.append([inst.name, net_file, query_file, inst.network.input_size,
                     inst.network.relu_count, inst.query.output_threshold, inst.expected])
    manifest = pd.DataFrame(rows, columns=MANIFEST_COLUMNS)
    manifest.to_csv(os.path.join(out_dir, MANIFEST), index=False)
    logger.info(f"Wrote {len(rows)} instances to {out_dir}")
    return manifest


def load_suite(suite_dir: str) -> List[Instance]:
    path = os.path.join(suite_dir, MANIFEST)
    if os.path.exists(path):
        manifest = pd.read_csv(path, dtype={"instance": str, "expected": str})
    else:
        names = sorted(f[:-len(".network.json")] for f in os.listdir(suite_dir) if f.endswith(".network.json"))
        manifest = pd.DataFrame({"instance": names,
                                 "network_file": [f"{n}.network.json" for n in names],
                                 "query_file": [f"{n}.query.json" for n in names],
                                 "expected": [""] * len(names)})
    instances = []
    for row in manifest.itertuples(index=False):
        with open(os.path.join(suite_dir, row.network_file), "rb") as fh:
            net = parse_network(fh.read())
        with open(os.path.join(suite_dir, row.query_file), "rb") as fh:
            q = parse_query(fh.read())
        expected = row.expected if isinstance(row.expected, str) else ""
        instances.append(Instance(row.instance, net, q, expected))
    return instances


# =================================================
# BLOCK 2: COMPARISON
# =================================================
def _run_row(inst: Instance, mode: str, limits: Limits) -> dict:
    started = time.monotonic()
    result = run(inst.network, inst.query, mode, limits)
    s = result.stats
    return {
        "instance": inst.name, "mode": mode, "verdict": result.verdict.kind.value,
        "expected": inst.expected, "wall_seconds": round(time.monotonic() - started, 6),
        "visited_states": s.visited_states, "splits": s.splits, "propagations": s.propagations,
        "prune_hits": s.prune_hits, "lp_solves": s.lp_solves, "learned_clauses": s.learned_clauses,
        "refinements": result.refinement_count,
        "instrumentation_seconds": round(s.instrumentation_seconds, 6),
    }


def compare_suite(instances: Sequence[Instance], modes: Sequence[str], limits: Limits,
                  workers: int = 1, progress: bool = False) -> pd.DataFrame:
    """One row per (instance, mode), in instance then mode order."""
    jobs = [(inst, mode) for inst in instances for mode in modes]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(tqdm(pool.map(lambda job: _run_row(job[0], job[1], limits), jobs),
                         total=len(jobs), desc="compare", disable=not progress))
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def find_disagreements(report: pd.DataFrame) -> List[str]:
    """FAILURE lines for instances whose decided verdicts (modes and oracle) differ."""
    lines = []
    for name, group in report.groupby("instance", sort=True):
        decided = {v for v in group["verdict"] if v != "TIMEOUT"}
        expected = {v for v in group["expected"] if isinstance(v, str) and v}
        if len(decided | expected) > 1:
            detail = ", ".join(f"{m}={v}" for m, v in zip(group["mode"], group["verdict"]))
            lines.append(f"FAILURE {name}: {detail}; oracle={'/'.join(sorted(expected)) or '-'}")
    return lines


def summarize(report: pd.DataFrame) -> pd.DataFrame:
    columns = ["mode", "instances", "solved", "timeouts", "sat", "unsat",
               "visited_states", "mean_visited_states", "prune_hits"]
    if report.empty:
        return pd.DataFrame(columns=columns)
    rows = []
    for mode, group in report.groupby("mode", sort=False):
        solved = group[group["verdict"] != "TIMEOUT"]
        rows.append([mode, len(group), len(solved), int((group["verdict"] == "TIMEOUT").sum()),
                     int((group["verdict"] == "SAT").sum()), int((group["verdict"] == "UNSAT").sum()),
                     int(group["visited_states"].sum()), float(group["visited_states"].mean()),
                     int(group["prune_hits"].sum())])
    return pd.DataFrame(rows, columns=columns)


def pairwise_tally(report: pd.DataFrame, first: str = "ar4", second: str = "ar",
                   tie_seconds: float = TIE_SECONDS) -> Dict[str, int]:
    """Solved-more-quickly counts (ties within tie_seconds) and uniquely solved counts."""
    tally = {f"{first}_faster": 0, f"{second}_faster": 0, "ties": 0,
             f"{first}_unique": 0, f"{second}_unique": 0, "both_timeout": 0}
    a = report[report["mode"] == first].set_index("instance")
    b = report[report["mode"] == second].set_index("instance")
    for name in sorted(set(a.index) & set(b.index)):
        ra, rb = a.loc[name], b.loc[name]
        a_ok, b_ok = ra["verdict"] != "TIMEOUT", rb["verdict"] != "TIMEOUT"
        if a_ok and b_ok:
            gap = float(ra["wall_seconds"]) - float(rb["wall_seconds"])
            if abs(gap) <= tie_seconds:
                tally["ties"] += 1
            elif gap < 0:
                tally[f"{first}_faster"] += 1
            else:
                tally[f"{second}_faster"] += 1
        elif a_ok:
            tally[f"{first}_unique"] += 1
        elif b_ok:
            tally[f"{second}_unique"] += 1
        else:
            tally["both_timeout"] += 1
    return tally


def write_report(report: pd.DataFrame, out_prefix: str, parquet: bool = False) -> List[str]:
    folder = os.path.dirname(out_prefix)
    if folder:
        os.makedirs(folder, exist_ok=True)
    paths = [f"{out_prefix}.csv", f"{out_prefix}.json"]
    report.to_csv(paths[0], index=False)
    report.to_json(paths[1], orient="records", indent=1)
    if parquet:
        paths.append(f"{out_prefix}.parquet")
        report.to_parquet(paths[-1], engine="pyarrow", index=False)
    return paths


# =================================================
# BLOCK 3: TRACE VALIDATION
# =================================================
@dataclass(frozen=True)
class TraceViolation:
    line: int
    kind: str
    detail: str


@dataclass
class TraceReport:
    violations: List[TraceViolation]
    clauses_checked: int = 0
    propagations_checked: int = 0
    skipped: int = 0

    @property
    def clean(self) -> bool:
        return not self.violations


def load_trace(path: str) -> List[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict) or "event" not in record:
                raise TraceFormatError(f"line {lineno}: missing 'event'")
            record["_line"] = lineno
            records.append(record)
    return records


def _branch_from_list(rows) -> Dict[NeuronId, Phase]:
    try:
        return {NeuronId(int(l), int(n)): Phase(p) for l, n, p in rows}
    except (TypeError, ValueError) as exc:
        raise TraceFormatError(f"bad branch record: {exc}") from exc


def _replay_clause(clause: Clause, net: Network, q: Query, line: int, report: TraceReport, kind: str) -> None:
    fixed = clause.split_set()
    if net.relu_count - len(fixed) > ORACLE_MAX_RELUS:
        report.skipped += 1
        return
    report.clauses_checked += 1
    verdict = brute_force_verify(net, q, fixed)
    if verdict.is_sat:
        report.violations.append(TraceViolation(line, kind, f"clause {clause} admits witness {list(verdict.witness)}"))


def validate_trace(records: Sequence[dict], original: Network, q: Query) -> TraceReport:
    """Replay learned and transferred clauses against the network they belong
    to, and re-evaluate every propagation's unit status and guard."""
    report = TraceReport([])
    canon_net, canon_q = canonicalize(original, q)
    networks: Dict[int, Tuple[Network, Query, dict]] = {}
    for rec in records:
        line = rec.get("_line", 0)
        event = rec["event"]
        try:
            if event == "iteration":
                net = network_from_dict(rec["network"])
                offset = np.array(rec.get("offset") or np.zeros(canon_q.width), dtype=np.float64)
                iq = Query(canon_q.input_lower - offset, canon_q.input_upper - offset, canon_q.output_threshold)
                networks[int(rec["iteration"])] = (net, iq, classes_from_list(rec.get("classes") or []))
            elif event in ("failure", "propagate", "refine", "conflict"):
                k = int(rec["iteration"])
                if k not in networks and event != "refine":
                    raise TraceFormatError(f"line {line}: event before its iteration record")
                if event == "failure" and rec.get("clause"):
                    net, iq, _ = networks[k]
                    _replay_clause(Clause.from_dict(rec["clause"]), net, iq, line, report, "learned")
                elif event == "propagate":
                    _check_propagation(rec, networks[k], line, report)
        except (KeyError, TypeError, ValueError, NetworkParseError) as exc:
            raise TraceFormatError(f"line {line}: {exc}") from exc

    # transferred clauses are checked against the network of the next iteration
    for rec in records:
        if rec["event"] == "refine":
            nxt = networks.get(int(rec["iteration"]) + 1)
            if nxt is None:
                continue
            for doc in rec.get("gamma", []):
                _replay_clause(Clause.from_dict(doc), nxt[0], nxt[1], rec.get("_line", 0), report, "renamed")
    logger.info(f"Trace check: {report.clauses_checked} clauses, {report.propagations_checked} propagations, "
                f"{report.skipped} skipped, {len(report.violations)} violations")
    return report


def _check_propagation(rec: dict, network_entry, line: int, report: TraceReport) -> None:
    _, _, classes = network_entry
    clause = Clause.from_dict(rec["clause"])
    branch = _branch_from_list(rec["branch"])
    forced = NeuronId.from_list(rec["neuron"])
    report.propagations_checked += 1
    open_literals = [lit for lit in clause.literals if lit.neuron not in branch]
    falsified = all(not lit.satisfied_by(branch[lit.neuron]) for lit in clause.literals if lit.neuron in branch)
    if len(open_literals) != 1 or open_literals[0].neuron != forced or not falsified:
        report.violations.append(TraceViolation(line, "propagation", f"clause {clause} is not unit on {forced}"))
        return
    if open_literals[0].phase.value != rec["phase"]:
        report.violations.append(TraceViolation(line, "propagation", f"forced phase differs from clause {clause}"))
        return
    if not clause.exact and not guard_holds(clause, branch, classes, forced):
        report.violations.append(TraceViolation(line, "guard", f"guard fails for clause {clause} on {forced}"))
