#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# ============================================================
# File: residual.py
# Revision: Rev.1
# Purpose: Residual-reasoning context: clause store over ReLU
#          phase literals, branch blocking record, clause
#          learning, renaming across refinement, guard check
#          and unit propagation.
# ============================================================

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from utils.errors import SplitConsistencyError, TraceFormatError
from utils.log_utils import get_logger
from utils.network import NeuronId
from utils.preprocess import Classification, Influence

logger = get_logger(__name__)


class Phase(str, Enum):
    ACTIVE = "active"
    INACTIVE = "inactive"

    def opposite(self) -> "Phase":
        return Phase.INACTIVE if self is Phase.ACTIVE else Phase.ACTIVE


def supported_phase(influence: Influence) -> Phase:
    """Phase whose failure transfers to refined neurons: active for inc, inactive for dec."""
    return Phase.ACTIVE if influence is Influence.INC else Phase.INACTIVE


@dataclass(frozen=True, order=True)
class PhaseLiteral:
    """``positive`` is r (active); otherwise the literal is not-r (inactive)."""
    neuron: NeuronId
    positive: bool

    @classmethod
    def blocking(cls, neuron: NeuronId, phase: Phase) -> "PhaseLiteral":
        """Literal that is false exactly when ``neuron`` has ``phase``."""
        return cls(neuron, phase is Phase.INACTIVE)

    @property
    def phase(self) -> Phase:
        """Phase that makes the literal true."""
        return Phase.ACTIVE if self.positive else Phase.INACTIVE

    @property
    def blocked_phase(self) -> Phase:
        return self.phase.opposite()

    def satisfied_by(self, phase: Phase) -> bool:
        return phase is self.phase

    def __str__(self):
        return ("r" if self.positive else "~r") + str(self.neuron)

    def to_list(self) -> list:
        return [self.neuron.layer, self.neuron.neuron, "r" if self.positive else "~r"]

    @classmethod
    def from_list(cls, value) -> "PhaseLiteral":
        try:
            layer, neuron, sign = value
        except (TypeError, ValueError) as exc:
            raise TraceFormatError(f"bad literal {value!r}") from exc
        if sign not in ("r", "~r"):
            raise TraceFormatError(f"bad literal polarity {sign!r}")
        return cls(NeuronId(int(layer), int(neuron)), sign == "r")


@dataclass(frozen=True)
class RefinedGroup:
    """Refined neurons standing for one abstract neuron of the learn-time network."""
    members: Tuple[NeuronId, ...]
    phase: Phase


@dataclass(frozen=True)
class GuardContext:
    refined_layer: int                 # earliest layer refined since learn time
    groups: Tuple[RefinedGroup, ...]

    def group_of(self, neuron: NeuronId) -> Optional[RefinedGroup]:
        for group in self.groups:
            if neuron in group.members:
                return group
        return None

    def to_dict(self) -> dict:
        return {
            "refined_layer": self.refined_layer,
            "groups": [{"members": [m.to_list() for m in g.members], "phase": g.phase.value}
                       for g in self.groups],
        }

    @classmethod
    def from_dict(cls, doc) -> "GuardContext":
        try:
            groups = tuple(
                RefinedGroup(tuple(NeuronId.from_list(m) for m in g["members"]), Phase(g["phase"]))
                for g in doc["groups"])
            return cls(int(doc["refined_layer"]), groups)
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceFormatError(f"bad guard context: {exc}") from exc


@dataclass(frozen=True)
class Clause:
    literals: Tuple[PhaseLiteral, ...]
    clause_id: int = 0
    learned_level: int = 0            # abstraction-record length at learn time
    guard: Optional[GuardContext] = None

    @property
    def exact(self) -> bool:
        return self.guard is None

    def split_set(self) -> Dict[NeuronId, Phase]:
        """The (renamed) learn-time split assignment this clause blocks."""
        return {lit.neuron: lit.blocked_phase for lit in self.literals}

    def partition(self) -> Tuple[Dict[NeuronId, Phase], Tuple[RefinedGroup, ...], Dict[NeuronId, Phase]]:
        """Learn-time splits as (preceding/same-layer, refined groups, following layers)."""
        splits = self.split_set()
        if self.guard is None:
            return splits, (), {}
        grouped = {m for g in self.guard.groups for m in g.members}
        layer = self.guard.refined_layer
        pre = {v: p for v, p in splits.items() if v not in grouped and v.layer <= layer}
        post = {v: p for v, p in splits.items() if v not in grouped and v.layer > layer}
        return pre, self.guard.groups, post

    def satisfied_by(self, pattern: Mapping[NeuronId, Phase], ambiguous=frozenset()) -> bool:
        """``ambiguous`` neurons sit on the ReLU breakpoint and satisfy either polarity."""
        return any(lit.neuron in ambiguous or lit.satisfied_by(pattern[lit.neuron])
                   for lit in self.literals if lit.neuron in pattern)

    def to_dict(self) -> dict:
        return {
            "id": self.clause_id,
            "level": self.learned_level,
            "literals": [lit.to_list() for lit in self.literals],
            "guard": None if self.guard is None else self.guard.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc) -> "Clause":
        if not isinstance(doc, dict) or "literals" not in doc:
            raise TraceFormatError(f"bad clause record {doc!r}")
        guard = doc.get("guard")
        return cls(
            literals=tuple(sorted(PhaseLiteral.from_list(v) for v in doc["literals"])),
            clause_id=int(doc.get("id", 0)),
            learned_level=int(doc.get("level", 0)),
            guard=None if guard is None else GuardContext.from_dict(guard),
        )

    def __str__(self):
        return "(" + " | ".join(str(lit) for lit in self.literals) + ")"


@dataclass(frozen=True)
class ForcedLiteral:
    literal: PhaseLiteral
    clause: Clause

    @property
    def guarded(self) -> bool:
        return not self.clause.exact


@dataclass
class PropagationResult:
    forced: List[ForcedLiteral] = field(default_factory=list)
    conflict: Optional[Clause] = None


def _output_layer(classes: Classification) -> int:
    return max(v.layer for v in classes) if classes else 0


# =================================================
# Function: guard_holds
# =================================================
def guard_holds(clause: Clause, current_branch: Mapping[NeuronId, Phase], classes: Classification,
                forced: Optional[NeuronId] = None) -> bool:
    """Side conditions under which a transferred clause may fire.

    (i)   learn-time splits in preceding layers and same-layer neurons
          outside the refined groups appear identically in the branch;
    (ii)  every refined-group member except ``forced`` is set to the
          group's learn-time phase (``forced`` must be a group member);
    (iii) every hidden neuron after the refined layer is split inc-active
          or dec-inactive, now (``forced`` excepted) and at learn time.
    Exact clauses have no guard.
    """
    if clause.guard is None:
        return True
    guard = clause.guard
    pre, groups, _ = clause.partition()

    if forced is not None:
        group = guard.group_of(forced)
        if group is None:
            return False
        for member in group.members:
            if member != forced and current_branch.get(member) is not group.phase:
                return False

    for neuron, phase in pre.items():
        if current_branch.get(neuron) is not phase:
            return False

    learn = clause.split_set()
    out_layer = _output_layer(classes)
    for neuron, cls in classes.items():
        if neuron.layer <= guard.refined_layer or neuron.layer >= out_layer:
            continue
        need = supported_phase(cls.influence)
        if learn.get(neuron) is not need:
            return False
        if neuron != forced and current_branch.get(neuron) is not need:
            return False
    return True


class GammaContext:
    """Clause store, branch blocking record and abstraction record of one run."""

    def __init__(self, abstraction_record=None):
        self.gamma: List[Clause] = []
        self.branch_record: List[PhaseLiteral] = []
        self.abstraction_record = abstraction_record
        self._keys = set()
        self._next_id = 1
        self._branch_neurons = set()

    @property
    def level(self) -> int:
        return len(self.abstraction_record) if self.abstraction_record is not None else 0

    # =================================================
    # Function: record_split
    # =================================================
    def record_split(self, neuron: NeuronId, chosen_phase: Phase) -> PhaseLiteral:
        if neuron in self._branch_neurons:
            raise SplitConsistencyError(f"{neuron} already split on this branch")
        literal = PhaseLiteral.blocking(neuron, chosen_phase)
        self.branch_record.append(literal)
        self._branch_neurons.add(neuron)
        return literal

    def truncate_branch(self, length: int) -> None:
        while len(self.branch_record) > length:
            self._branch_neurons.discard(self.branch_record.pop().neuron)

    def current_branch(self) -> Dict[NeuronId, Phase]:
        return {lit.neuron: lit.blocked_phase for lit in self.branch_record}

    # =================================================
    # Function: learn_on_failure
    # =================================================
    def learn_on_failure(self) -> Optional[Clause]:
        """Add the branch record as a clause. None for an empty record (global UNSAT)
        or when the same literal set is already stored."""
        if not self.branch_record:
            return None
        literals = tuple(sorted(self.branch_record))
        return self.add_clause(literals)

    def add_clause(self, literals: Iterable[PhaseLiteral], guard: Optional[GuardContext] = None,
                   learned_level: Optional[int] = None) -> Optional[Clause]:
        literals = tuple(sorted(set(literals)))
        if not literals or literals in self._keys:
            return None
        clause = Clause(literals, self._next_id,
                        self.level if learned_level is None else learned_level, guard)
        self._next_id += 1
        self._keys.add(literals)
        self.gamma.append(clause)
        return clause

    # =================================================
    # Function: rename_after_refinement
    # =================================================
    def rename_after_refinement(self, undone, classes: Classification, record=None) -> int:
        """Rewrite the store for the network obtained by undoing ``undone``.

        ``undone`` is a MergeStep (merged, left, right); ``classes`` are the
        refined network's classes. Returns the number of dropped clauses.
        """
        merged, left, right = undone.triple
        layer, gap = merged.layer, right.neuron
        phase = supported_phase(classes[left].influence)
        out_layer = _output_layer(classes)

        def remap(v: NeuronId) -> NeuronId:
            if v.layer == layer and v.neuron >= gap:
                return NeuronId(layer, v.neuron + 1)
            return v

        kept: List[Clause] = []
        dropped = 0
        for clause in self.gamma:
            on_merged = [lit for lit in clause.literals if lit.neuron == merged]
            groups = [] if clause.guard is None else [
                RefinedGroup(tuple(remap(m) for m in g.members), g.phase) for g in clause.guard.groups]
            literals = [PhaseLiteral(remap(lit.neuron), lit.positive)
                        for lit in clause.literals if lit.neuron != merged]
            if on_merged:
                if on_merged[0].blocked_phase is not phase:
                    dropped += 1
                    continue
                literals += [PhaseLiteral.blocking(left, phase), PhaseLiteral.blocking(right, phase)]
                for k, g in enumerate(groups):
                    if left in g.members:
                        members = tuple(sorted(set(g.members) | {right}))
                        groups[k] = RefinedGroup(members, g.phase)
                        break
                else:
                    groups.append(RefinedGroup((left, right), phase))
            elif clause.guard is None:
                # neurons up to the refined layer keep their values and the output only decreases
                if any(lit.neuron.layer > layer for lit in clause.literals):
                    dropped += 1
                    continue
                kept.append(Clause(tuple(sorted(literals)), clause.clause_id, clause.learned_level))
                continue

            refined_layer = layer if clause.guard is None else min(layer, clause.guard.refined_layer)
            if not self._stays_valid(literals, refined_layer, classes, out_layer):
                dropped += 1
                continue
            kept.append(Clause(tuple(sorted(literals)), clause.clause_id, clause.learned_level,
                               GuardContext(refined_layer, tuple(groups))))

        self.gamma = kept
        self._keys = {c.literals for c in kept}
        self.truncate_branch(0)
        if record is not None:
            self.abstraction_record = record
        logger.debug(f"Renamed store after refining {merged}: kept {len(kept)}, dropped {dropped}")
        return dropped

    @staticmethod
    def _stays_valid(literals, refined_layer, classes, out_layer) -> bool:
        # later-layer literals must block the phase that refinement preserves
        for lit in literals:
            if refined_layer < lit.neuron.layer < out_layer:
                if lit.blocked_phase is not supported_phase(classes[lit.neuron].influence):
                    return False
        return True

    # =================================================
    # Function: propagate
    # =================================================
    def propagate(self, current_branch: Mapping[NeuronId, Phase], classes: Classification) -> PropagationResult:
        """One scan over the store. Unit clauses whose guard holds force their
        last literal, which is also appended to the branch record. A fully
        falsified clause, or two clauses forcing opposite phases, is a conflict."""
        result = PropagationResult()
        chosen: Dict[NeuronId, PhaseLiteral] = {}
        for clause in self.gamma:
            open_literals = []
            satisfied = False
            for lit in clause.literals:
                phase = current_branch.get(lit.neuron)
                if phase is None:
                    open_literals.append(lit)
                elif lit.satisfied_by(phase):
                    satisfied = True
                    break
            if satisfied or len(open_literals) > 1:
                continue
            if not open_literals:
                if guard_holds(clause, current_branch, classes):
                    result.conflict = clause
                    break
                continue
            lit = open_literals[0]
            if not guard_holds(clause, current_branch, classes, forced=lit.neuron):
                continue
            previous = chosen.get(lit.neuron)
            if previous is not None:
                if previous != lit:
                    result.conflict = clause
                    break
                continue
            chosen[lit.neuron] = lit
            result.forced.append(ForcedLiteral(lit, clause))

        if result.conflict is None:
            for item in result.forced:
                self.record_split(item.literal.neuron, item.literal.phase)
        else:
            result.forced = []
        return result

    # ---------- INSPECTION ----------
    def violated_by(self, pattern: Mapping[NeuronId, Phase], ambiguous=frozenset()) -> List[Clause]:
        """Clauses falsified by a full phase pattern."""
        return [c for c in self.gamma if not c.satisfied_by(pattern, ambiguous)]

    def dump_jsonl(self) -> str:
        return "".join(json.dumps(c.to_dict(), sort_keys=True) + "\n" for c in self.gamma)
