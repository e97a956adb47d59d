"""Iterative block-level molecule refinement and modification analytics.

Each step enumerates every single-block edit the vocabulary allows, scores
the edited molecules with the oracle, and accepts the best one if it improves
the weighted objective by more than ``epsilon``. Edits operate on the
molecule's tokenization, and each accepted molecule is re-tokenized before
the next step.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping, Sequence

from .molgraph import MolecularGraph, parse_smiles, write_smiles
from .oracle import Oracle, normalize_property
from .tokenizer import (
    BlockKind, BuildingBlock, Coverage, Junction, JunctionError, ROLES_BY_CODE, TokenizationResult,
    complement_role, reassemble, tokenize,
)
from .vocab import Vocabulary

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-9


class Direction(str, Enum):
    MAXIMIZE = "max"
    MINIMIZE = "min"

    @property
    def sign(self) -> int:
        return 1 if self is Direction.MAXIMIZE else -1


@dataclass(frozen=True)
class Objective:
    property: str
    direction: Direction
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "property", normalize_property(self.property))
        object.__setattr__(self, "direction", Direction(self.direction))
        if not (self.weight > 0 and self.weight != float("inf")):
            raise ValueError(f"objective weight must be finite and positive, got {self.weight}")

    @classmethod
    def parse(cls, text: str) -> Objective:
        """``PROP:max|min[:weight]``."""
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"objective {text!r} is not PROP:max|min[:weight]")
        weight = float(parts[2]) if len(parts) == 3 else 1.0
        return cls(parts[0], Direction(parts[1].lower()), weight)

    def __str__(self) -> str:
        return f"{self.property}:{self.direction.value}:{self.weight:g}"


class EditKind(str, Enum):
    REPLACE = "ReplaceBlock"
    ADD = "AddBlock"
    REMOVE = "RemoveBlock"


_KIND_ORDER = {EditKind.REPLACE: 0, EditKind.ADD: 1, EditKind.REMOVE: 2}


@dataclass(frozen=True)
class CandidateEdit:
    """``position`` is a block index, or a junction index for ``AddBlock``."""

    kind: EditKind
    position: int
    new_block: BuildingBlock | None = None
    block_id: int | None = None

    def __post_init__(self):
        if (self.kind is EditKind.REMOVE) != (self.new_block is None):
            raise ValueError(f"{self.kind.value} edits {'must not' if self.kind is EditKind.REMOVE else 'must'} "
                             "carry a new block")

    @property
    def sort_key(self) -> tuple:
        return (_KIND_ORDER[self.kind], self.position, -1 if self.block_id is None else self.block_id)


class StopReason(str, Enum):
    NO_IMPROVING_CANDIDATE = "NoImprovingCandidate"
    MAX_ITERATIONS = "MaxIterations"


class RefinementError(ValueError):
    pass


def _roles(block: BuildingBlock) -> tuple[int, ...]:
    return tuple(sorted(block.roles))


def enumerate_candidates(t: TokenizationResult, v: Vocabulary) -> Iterator[CandidateEdit]:
    """All role-compatible single-block edits, ordered by (kind, position, block id).

    ReplaceBlock swaps a block for a vocabulary block with the same attachment
    roles. AddBlock splices a two-attachment mid block into a junction.
    RemoveBlock drops a two-attachment mid block whose neighbours can bond
    directly; cap removal would leave a dangling attachment and is never offered.
    """
    if t.coverage is not Coverage.COMPLETE:
        raise RefinementError("refinement needs a Complete tokenization")
    by_roles: dict[tuple[int, ...], list[tuple[int, BuildingBlock]]] = {}
    for e in v.entries:
        b = v.block(e.block_id)
        by_roles.setdefault(_roles(b), []).append((e.block_id, b))
    for pos, block in enumerate(t.blocks):
        for bid, nb in by_roles.get(_roles(block), ()):
            if nb.canonical_form != block.canonical_form:
                yield CandidateEdit(EditKind.REPLACE, pos, nb, bid)
    for jpos, j in enumerate(t.junctions):
        (b1, a1), (b2, a2) = j.ends
        key = tuple(sorted((t.blocks[b1].attachments[a1].role, t.blocks[b2].attachments[a2].role)))
        for bid, nb in by_roles.get(key, ()):
            if nb.kind is BlockKind.MID:
                yield CandidateEdit(EditKind.ADD, jpos, nb, bid)
    partners = _partners(t)
    for pos, block in enumerate(t.blocks):
        if len(block.attachments) != 2:
            continue
        (_, ra), (_, rb) = partners[(pos, 0)], partners[(pos, 1)]
        if complement_role(ra) == rb:
            yield CandidateEdit(EditKind.REMOVE, pos)


def _partners(t: TokenizationResult) -> dict[tuple[int, int], tuple[tuple[int, int], int]]:
    """(block, attachment) -> (partner end, partner role)."""
    out = {}
    for j in t.junctions:
        e1, e2 = j.ends
        out[e1] = (e2, t.blocks[e2[0]].attachments[e2[1]].role)
        out[e2] = (e1, t.blocks[e1[0]].attachments[e1[1]].role)
    return out


def _match_attachments(old: BuildingBlock, new: BuildingBlock) -> list[int]:
    """new attachment index for each old attachment, pairing equal roles in order."""
    pool: dict[int, list[int]] = {}
    for i, r in enumerate(new.roles):
        pool.setdefault(r, []).append(i)
    return [pool[r].pop(0) for r in old.roles]


def apply_edit(t: TokenizationResult, edit: CandidateEdit) -> MolecularGraph:
    """Reassemble the molecule that ``edit`` produces."""
    blocks = list(t.blocks)
    ends = [list(j.ends) for j in t.junctions]
    reactions = [j.reaction for j in t.junctions]
    if edit.kind is EditKind.REPLACE:
        old = blocks[edit.position]
        mapping = _match_attachments(old, edit.new_block)
        blocks[edit.position] = edit.new_block
        for je in ends:
            for k, (bi, ai) in enumerate(je):
                if bi == edit.position:
                    je[k] = (bi, mapping[ai])
    elif edit.kind is EditKind.ADD:
        new_index = len(blocks)
        blocks.append(edit.new_block)
        e1, e2 = ends[edit.position]
        r1 = t.blocks[e1[0]].attachments[e1[1]].role
        roles = list(edit.new_block.roles)
        m1 = roles.index(complement_role(r1))
        m2 = 1 - m1
        ends[edit.position] = [e1, (new_index, m1)]
        ends.append([(new_index, m2), e2])
        reactions.append(edit.new_block.attachments[m2].reaction)
    else:
        partners = _partners(t)
        p1, p2 = partners[(edit.position, 0)][0], partners[(edit.position, 1)][0]
        keep = [k for k, je in enumerate(ends) if all(bi != edit.position for bi, _ in je)]
        reaction = ROLES_BY_CODE[partners[(edit.position, 0)][1]][0]
        ends = [ends[k] for k in keep] + [[p1, p2]]
        reactions = [reactions[k] for k in keep] + [reaction]
        del blocks[edit.position]
        ends = [[(bi - (bi > edit.position), ai) for bi, ai in je] for je in ends]
    stamps = [[0] * len(b.attachments) for b in blocks]
    junctions = []
    for jid, (je, reaction) in enumerate(zip(ends, reactions), 1):
        for bi, ai in je:
            stamps[bi][ai] = jid
        junctions.append(Junction(jid, reaction, (tuple(je[0]), tuple(je[1]))))
    stamped = [b.with_junctions(s) for b, s in zip(blocks, stamps)]
    return reassemble(stamped, junctions)


@dataclass(frozen=True)
class TraceStep:
    kind: EditKind
    position: int
    old_block: str | None
    new_block: str | None
    molecule: str
    scores_before: Mapping[str, float]
    scores_after: Mapping[str, float]
    gain: float
    accepted: bool

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "position": self.position, "old_block": self.old_block,
                "new_block": self.new_block, "molecule": self.molecule,
                "scores_before": dict(self.scores_before), "scores_after": dict(self.scores_after),
                "gain": self.gain, "accepted": self.accepted}

    @classmethod
    def from_json(cls, d: dict) -> TraceStep:
        return cls(EditKind(d["kind"]), int(d["position"]), d["old_block"], d["new_block"], d["molecule"],
                   dict(d["scores_before"]), dict(d["scores_after"]), float(d["gain"]), bool(d["accepted"]))


@dataclass(frozen=True)
class RefinementTrace:
    initial: str
    objectives: tuple[Objective, ...]
    steps: tuple[TraceStep, ...]
    final: str
    stop_reason: StopReason
    guards: tuple[Objective, ...] = ()

    @property
    def accepted(self) -> list[TraceStep]:
        return [s for s in self.steps if s.accepted]

    def to_json(self) -> dict:
        return {"initial": self.initial, "objectives": [str(o) for o in self.objectives],
                "guards": [str(o) for o in self.guards],
                "steps": [s.to_json() for s in self.steps], "final": self.final,
                "stop_reason": self.stop_reason.value}

    @classmethod
    def from_json(cls, d: dict) -> RefinementTrace:
        return cls(d["initial"], tuple(Objective.parse(o) for o in d["objectives"]),
                   tuple(TraceStep.from_json(s) for s in d["steps"]), d["final"],
                   StopReason(d["stop_reason"]), tuple(Objective.parse(o) for o in d.get("guards", ())))


def aggregate_gain(before: Mapping[str, float], after: Mapping[str, float],
                   objectives: Sequence[Objective]) -> float:
    return sum(o.weight * o.direction.sign * (after[o.property] - before[o.property]) for o in objectives)


@dataclass
class StepOutcome:
    edit: CandidateEdit | None
    molecule: MolecularGraph | None
    scores_before: dict[str, float]
    scores_after: dict[str, float] | None
    gain: float
    improved: bool
    skipped: list[str] = field(default_factory=list)

    @property
    def chosen(self) -> CandidateEdit | None:
        """The accepted edit, or ``None`` when nothing clears the epsilon gate."""
        return self.edit if self.improved else None


def refine_step(m: MolecularGraph, objectives: Sequence[Objective], oracle: Oracle, v: Vocabulary,
                epsilon: float = DEFAULT_EPSILON, guards: Sequence[Objective] = (),
                tokenization: TokenizationResult | None = None) -> StepOutcome:
    """Best-scoring candidate edit.

    ``improved`` is true when its weighted gain exceeds ``epsilon``; guard
    objectives veto any candidate that makes them worse by more than ``epsilon``.
    Ties keep the earliest candidate in enumeration order.
    """
    t = tokenization or tokenize(m)
    props = sorted({o.property for o in list(objectives) + list(guards)})
    before = oracle.scores(m, props)
    best = StepOutcome(None, None, before, None, float("-inf"), False)
    seen: set[str] = set()
    for edit in sorted(enumerate_candidates(t, v), key=lambda e: e.sort_key):
        try:
            g = apply_edit(t, edit)
            key = write_smiles(g)
            if key in seen:
                continue
            seen.add(key)
            after = oracle.scores(g, props)
        except (JunctionError, ValueError) as exc:
            msg = f"{edit.kind.value}@{edit.position}: {exc}"
            log.warning("candidate skipped: %s", msg)
            best.skipped.append(msg)
            continue
        if any(o.direction.sign * (after[o.property] - before[o.property]) < -epsilon for o in guards):
            continue
        gain = aggregate_gain(before, after, objectives)
        if gain > best.gain:
            best = StepOutcome(edit, g, before, after, gain, False, best.skipped)
    best.improved = best.edit is not None and best.gain > epsilon
    return best


def refine(m: MolecularGraph, objectives: Sequence[Objective], oracle: Oracle, v: Vocabulary,
           max_iter: int = 10, epsilon: float = DEFAULT_EPSILON,
           guards: Sequence[Objective] = ()) -> RefinementTrace:
    """Apply improving edits until none is left or ``max_iter`` steps are accepted.

    The last evaluated but rejected candidate, if any, is kept in the trace
    with ``accepted=False`` as the record of the stop decision.
    """
    if max_iter < 1:
        raise RefinementError("max_iter must be >= 1")
    if not objectives:
        raise RefinementError("at least one objective is required")
    initial = write_smiles(m)
    current = m
    steps: list[TraceStep] = []
    stop = StopReason.MAX_ITERATIONS
    for _ in range(max_iter):
        t = tokenize(current)
        out = refine_step(current, objectives, oracle, v, epsilon, guards, t)
        if out.edit is None:
            stop = StopReason.NO_IMPROVING_CANDIDATE
            break
        e = out.edit
        step = TraceStep(
            e.kind, e.position,
            t.blocks[e.position].canonical_form if e.kind is not EditKind.ADD else None,
            e.new_block.canonical_form if e.new_block is not None else None,
            write_smiles(out.molecule), out.scores_before, out.scores_after, out.gain, out.improved,
        )
        steps.append(step)
        if not out.improved:
            stop = StopReason.NO_IMPROVING_CANDIDATE
            break
        current = out.molecule
    return RefinementTrace(initial, tuple(objectives), tuple(steps), write_smiles(current), stop, tuple(guards))


def refine_sequential(m: MolecularGraph, objectives: Sequence[Objective], oracle: Oracle, v: Vocabulary,
                      max_iter: int = 10, epsilon: float = DEFAULT_EPSILON) -> list[RefinementTrace]:
    """One round per objective; earlier objectives become no-regression guards."""
    traces = []
    current = m
    for k, obj in enumerate(objectives):
        trace = refine(current, [obj], oracle, v, max_iter, epsilon, guards=objectives[:k])
        traces.append(trace)
        current = parse_smiles(trace.final)
    return traces


def modification_frequencies(traces: Iterable[RefinementTrace]) -> list[tuple[str, str, int]]:
    """Accepted ReplaceBlock edits counted by (old, new); most frequent first,
    ties in lexicographic order."""
    counts: Counter = Counter()
    for trace in traces:
        for s in trace.steps:
            if s.accepted and s.kind is EditKind.REPLACE:
                counts[(s.old_block, s.new_block)] += 1
    return sorted(((old, new, n) for (old, new), n in counts.items()), key=lambda r: (-r[2], r[0], r[1]))
