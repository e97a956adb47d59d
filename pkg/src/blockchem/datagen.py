"""Instruction-data generation: activity cliffs, templated tasks, vocabulary filtering.

Molecules appear in prompts and responses as inline segments
``[MOL] tok tok ... [/MOL]``. Each token is one block in linearized order,
written as SMILES whose wildcard classes are ``10 * junction + role``. A
segment therefore decodes on its own without a sidecar.
"""

from __future__ import annotations

import json
import random
import re
import statistics
import string
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .molgraph import MolecularGraph, SmilesError, parse_smiles, write_smiles
from .oracle import PropertyKind, PropertyRecord
from .scaffold import FragmentSetError, scaffold_key
from .tokenizer import (
    AttachmentPoint, BuildingBlock, Junction, JunctionError, ROLES_BY_CODE, TokenizationResult,
    reassemble, tokenize,
)
from .vocab import Vocabulary

MOL_OPEN = "[MOL]"
MOL_CLOSE = "[/MOL]"
_SEGMENT_RE = re.compile(re.escape(MOL_OPEN) + r"(.*?)" + re.escape(MOL_CLOSE), re.S)


class Relation(str, Enum):
    SAME_SCAFFOLD_OPPOSITE_LABEL = "SameScaffoldOppositeLabel"
    SAME_SCAFFOLD_DELTA = "SameScaffoldDeltaGE1Sigma"
    DIFF_SCAFFOLD_SAME_PROPERTY = "DiffScaffoldSameProperty"


class Task(str, Enum):
    CLASSIFICATION = "Classification"
    REGRESSION = "Regression"
    PROPERTY_TO_MOLECULE = "PropertyToMolecule"
    MULTI_PROPERTY_TO_MOLECULE = "MultiPropertyToMolecule"
    SCAFFOLD_PROPERTY_TO_MOLECULE = "ScaffoldPropertyToMolecule"
    MOLECULE_GENERATION = "MoleculeGeneration"
    POS_NEG_SAME_SCAFFOLD = "PosNegSameScaffold"
    POS_POS_DIFF_SCAFFOLD = "PosPosDiffScaffold"


class TemplateError(ValueError):
    pass


class DatagenError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ActivityCliffPair:
    property: str
    relation: Relation
    mol_a: str
    mol_b: str
    delta: float | None = None

    def to_json(self) -> dict:
        return {"mol_a": self.mol_a, "mol_b": self.mol_b, "property": self.property,
                "relation": self.relation.value, "delta": self.delta}

    @classmethod
    def from_json(cls, d: dict) -> ActivityCliffPair:
        return cls(d["property"], Relation(d["relation"]), d["mol_a"], d["mol_b"], d.get("delta"))


# ---------------------------------------------------------------------------
# cliff mining
# ---------------------------------------------------------------------------

def dedupe_records(records: Iterable[PropertyRecord]) -> list[PropertyRecord]:
    """First record per (property, canonical molecule)."""
    seen, out = set(), []
    for r in records:
        key = (r.property, r.molecule)
        if key not in seen:
            seen.add(key)
            out.append(r)
    return out


def population_sigma(values: Sequence[float]) -> float:
    return statistics.pstdev(values) if values else 0.0


class ScaffoldCache:
    def __init__(self):
        self._keys: dict[str, str] = {}

    def __call__(self, smiles: str) -> str:
        key = self._keys.get(smiles)
        if key is None:
            key = scaffold_key(parse_smiles(smiles)).canonical_form
            self._keys[smiles] = key
        return key


def _by_property(records: Iterable[PropertyRecord]) -> dict[str, list[PropertyRecord]]:
    groups: dict[str, list[PropertyRecord]] = {}
    for r in dedupe_records(records):
        groups.setdefault(r.property, []).append(r)
    return groups


def mine_cliffs_same_scaffold(records: Iterable[PropertyRecord], allow_empty_scaffold: bool = False,
                              scaffolds: ScaffoldCache | None = None) -> list[ActivityCliffPair]:
    """Same-scaffold pairs with opposite labels, or with |delta| >= population sigma.

    Records are deduplicated per property before sigma is computed. Nominal
    pairs put the negative molecule in ``mol_a``; numerical pairs put the lower
    value there. Acyclic molecules pair only if ``allow_empty_scaffold``.
    """
    scaffolds = scaffolds or ScaffoldCache()
    out = []
    for prop, recs in _by_property(records).items():
        kinds = {r.kind for r in recs}
        if len(kinds) > 1:
            raise DatagenError(f"property {prop} mixes nominal and numerical records")
        numerical = kinds == {PropertyKind.NUMERICAL}
        sigma = population_sigma([r.value for r in recs]) if numerical else 0.0
        groups: dict[str, list[PropertyRecord]] = {}
        for r in recs:
            key = scaffolds(r.molecule)
            if key or allow_empty_scaffold:
                groups.setdefault(key, []).append(r)
        for members in groups.values():
            for a, b in combinations(members, 2):
                if numerical:
                    lo, hi = (a, b) if a.value <= b.value else (b, a)
                    delta = hi.value - lo.value
                    if sigma > 0 and delta >= sigma:
                        out.append(ActivityCliffPair(prop, Relation.SAME_SCAFFOLD_DELTA,
                                                     lo.molecule, hi.molecule, delta))
                elif a.value != b.value:
                    neg, pos = (a, b) if a.value == 0 else (b, a)
                    out.append(ActivityCliffPair(prop, Relation.SAME_SCAFFOLD_OPPOSITE_LABEL,
                                                 neg.molecule, pos.molecule))
    out.sort()
    return out


def mine_pairs_diff_scaffold_same_property(records: Iterable[PropertyRecord], fan_out: int | None = None,
                                           scaffolds: ScaffoldCache | None = None) -> list[ActivityCliffPair]:
    """Positive-positive pairs with different scaffold keys.

    Candidate pairs are visited in sorted order and accepted while both
    molecules are below ``fan_out`` pairs (``None`` means unlimited).
    """
    if fan_out is not None and fan_out < 0:
        raise DatagenError("fan_out must be non-negative")
    scaffolds = scaffolds or ScaffoldCache()
    out = []
    for prop, recs in sorted(_by_property(records).items()):
        if any(r.kind is not PropertyKind.NOMINAL for r in recs):
            raise DatagenError(f"property {prop}: different-scaffold pairs need nominal records")
        positives = sorted(r.molecule for r in recs if r.value == 1)
        keys = {m: scaffolds(m) for m in positives}
        used: dict[str, int] = {}
        for a, b in combinations(positives, 2):
            if keys[a] == keys[b]:
                continue
            if fan_out is not None and (used.get(a, 0) >= fan_out or used.get(b, 0) >= fan_out):
                continue
            used[a] = used.get(a, 0) + 1
            used[b] = used.get(b, 0) + 1
            out.append(ActivityCliffPair(prop, Relation.DIFF_SCAFFOLD_SAME_PROPERTY, a, b))
    out.sort()
    return out


# ---------------------------------------------------------------------------
# inline block segments
# ---------------------------------------------------------------------------

def block_tokens(result: TokenizationResult) -> list[str]:
    tokens = []
    for block in result.blocks:
        g = block.tagged_graph()
        atoms = list(g.atoms)
        for w, att in zip(block.wildcard_atoms, block.attachments):
            atoms[w] = replace(atoms[w], atom_class=10 * att.junction_id + att.role)
        tokens.append(write_smiles(MolecularGraph(atoms, g.bonds)))
    return tokens


def encode_segment(result: TokenizationResult) -> str:
    return f"{MOL_OPEN} {' '.join(block_tokens(result))} {MOL_CLOSE}"


def decode_tokens(tokens: Sequence[str]) -> tuple[MolecularGraph, list[str]]:
    """Rebuild a molecule and its canonical block forms from segment tokens."""
    if not tokens:
        raise DatagenError("empty molecule segment")
    blocks = []
    for tok in tokens:
        g = parse_smiles(tok)
        atoms = list(g.atoms)
        junction_of = {}
        for i, a in enumerate(atoms):
            if a.is_wildcard:
                jid, role = divmod(a.atom_class, 10)
                if role not in ROLES_BY_CODE or jid < 1:
                    raise DatagenError(f"token {tok!r}: wildcard class {a.atom_class} is not a junction tag")
                junction_of[i] = jid
                atoms[i] = replace(a, atom_class=role)
        blocks.append(BuildingBlock.from_fragment(MolecularGraph(atoms, g.bonds), junction_of))
    ends: dict[int, list[tuple[int, int, AttachmentPoint]]] = {}
    for bi, b in enumerate(blocks):
        for ai, att in enumerate(b.attachments):
            ends.setdefault(att.junction_id, []).append((bi, ai, att))
    junctions = []
    for jid, es in sorted(ends.items()):
        if len(es) != 2:
            raise DatagenError(f"junction {jid} appears {len(es)} time(s) in segment")
        junctions.append(Junction(jid, es[0][2].reaction, ((es[0][0], es[0][1]), (es[1][0], es[1][1]))))
    graph = reassemble(blocks, junctions)
    return graph, [b.canonical_form for b in blocks]


def find_segments(text: str) -> list[list[str]]:
    return [m.group(1).split() for m in _SEGMENT_RE.finditer(text)]


# ---------------------------------------------------------------------------
# templated examples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InstructionExample:
    task: Task
    prompt: str
    response: str
    source: str
    seed: int
    # canonical forms of every inline block, prompt first
    blocks: tuple[str, ...] = field(default=())

    def to_json(self) -> dict:
        return {"task": self.task.value, "prompt": self.prompt, "response": self.response,
                "source": self.source, "seed": self.seed, "blocks": list(self.blocks)}

    @classmethod
    def from_json(cls, d: dict) -> InstructionExample:
        return cls(Task(d["task"]), d["prompt"], d["response"], d["source"], int(d["seed"]),
                   tuple(d.get("blocks", ())))


# placeholder fields each task supplies; the required ones must appear in every template
TASK_FIELDS: dict[Task, dict[str, tuple[set[str], set[str]]]] = {
    Task.CLASSIFICATION: {"questions": ({"molecule", "property"}, set()),
                          "answers": ({"answer"}, {"property", "molecule"})},
    Task.REGRESSION: {"questions": ({"molecule", "property"}, set()),
                      "answers": ({"value"}, {"property", "molecule"})},
    Task.PROPERTY_TO_MOLECULE: {"questions": ({"property"}, {"value"}),
                                "answers": ({"molecule"}, {"property", "value"})},
    Task.MULTI_PROPERTY_TO_MOLECULE: {"questions": ({"properties"}, set()),
                                      "answers": ({"molecule"}, {"properties"})},
    Task.SCAFFOLD_PROPERTY_TO_MOLECULE: {"questions": ({"scaffold", "property"}, set()),
                                         "answers": ({"molecule"}, {"scaffold", "property"})},
    Task.MOLECULE_GENERATION: {"questions": (set(), set()), "answers": ({"molecule"}, set())},
    Task.POS_NEG_SAME_SCAFFOLD: {"questions": ({"molecule", "property"}, set()),
                                 "answers": ({"improved"}, {"property", "molecule"})},
    Task.POS_POS_DIFF_SCAFFOLD: {"questions": ({"molecule", "property"}, set()),
                                 "answers": ({"alternative"}, {"property", "molecule"})},
}


def _placeholders(template: str) -> set[str]:
    names = set()
    for _, name, _, _ in string.Formatter().parse(template):
        if name is not None:
            if not name.isidentifier():
                raise TemplateError(f"placeholder {{{name}}} must be a plain name")
            names.add(name)
    return names


@dataclass(frozen=True)
class TemplateSet:
    questions: tuple[str, ...]
    answers: tuple[str, ...]


def validate_templates(doc: Mapping[str, Mapping[str, Sequence[str]]]) -> dict[Task, TemplateSet]:
    out = {}
    for name, parts in doc.items():
        try:
            task = Task(name)
        except ValueError:
            raise TemplateError(f"unknown task {name!r} in template file") from None
        sets = {}
        for part in ("questions", "answers"):
            templates = tuple(parts.get(part, ()))
            if not templates:
                raise TemplateError(f"{name}: at least one entry in {part!r} is required")
            required, optional = TASK_FIELDS[task][part]
            for t in templates:
                names = _placeholders(t)
                if required - names:
                    raise TemplateError(f"{name} {part[:-1]} {t!r} is missing placeholder(s) "
                                        f"{sorted(required - names)}")
                if names - required - optional:
                    raise TemplateError(f"{name} {part[:-1]} {t!r} uses unknown placeholder(s) "
                                        f"{sorted(names - required - optional)}")
            sets[part] = templates
        out[task] = TemplateSet(sets["questions"], sets["answers"])
    return out


def load_templates(path: str | Path | None = None) -> dict[Task, TemplateSet]:
    if path is None:
        text = resources.files("blockchem.data").joinpath("templates.json").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    return validate_templates(json.loads(text))


@dataclass(frozen=True)
class MultiPropertyInput:
    molecule: str
    properties: tuple[str, ...]


class _Segmenter:
    def __init__(self):
        self._cache: dict[str, tuple[str, tuple[str, ...]]] = {}

    def __call__(self, smiles: str) -> tuple[str, tuple[str, ...]]:
        hit = self._cache.get(smiles)
        if hit is None:
            result = tokenize(parse_smiles(smiles))
            hit = (encode_segment(result), tuple(result.block_forms))
            self._cache[smiles] = hit
        return hit


def _format_value(x: float) -> str:
    return f"{x:.3g}"


def _fields(task: Task, item, seg: _Segmenter) -> tuple[dict[str, str], list[str]]:
    """Placeholder values plus block forms (prompt molecules first)."""
    if task in (Task.CLASSIFICATION, Task.REGRESSION, Task.PROPERTY_TO_MOLECULE,
                Task.SCAFFOLD_PROPERTY_TO_MOLECULE):
        if not isinstance(item, PropertyRecord):
            raise DatagenError(f"{task.value} expects property records")
        text, forms = seg(item.molecule)
        f = {"molecule": text, "property": item.property}
        blocks = list(forms)
        if task is Task.CLASSIFICATION:
            f["answer"] = "Yes" if item.value == 1 else "No"
        else:
            f["value"] = _format_value(item.value)
        if task is Task.SCAFFOLD_PROPERTY_TO_MOLECULE:
            key = scaffold_key(parse_smiles(item.molecule)).canonical_form
            if not key:
                raise DatagenError(f"{item.molecule} has no ring scaffold")
            s_text, s_forms = seg(key)
            f["scaffold"] = s_text
            blocks = list(s_forms) + blocks
        return f, blocks
    if task is Task.MULTI_PROPERTY_TO_MOLECULE:
        text, forms = seg(item.molecule)
        return {"molecule": text, "properties": ", ".join(item.properties)}, list(forms)
    if task is Task.MOLECULE_GENERATION:
        text, forms = seg(item if isinstance(item, str) else item.molecule)
        return {"molecule": text}, list(forms)
    if not isinstance(item, ActivityCliffPair):
        raise DatagenError(f"{task.value} expects activity-cliff pairs")
    a_text, a_forms = seg(item.mol_a)
    b_text, b_forms = seg(item.mol_b)
    key = "improved" if task is Task.POS_NEG_SAME_SCAFFOLD else "alternative"
    return {"molecule": a_text, "property": item.property, key: b_text}, list(a_forms) + list(b_forms)


def gen_examples(task: Task | str, inputs: Iterable, templates: Mapping[Task, TemplateSet], seed: int = 0,
                 source: str = "") -> tuple[list[InstructionExample], list[str]]:
    """One example per input item; returns (examples, diagnostics).

    Each item draws its templates from an RNG seeded by (seed, task, index),
    so output depends only on the seed and the item's position.
    """
    task = Task(task)
    if task not in templates:
        raise TemplateError(f"no templates for task {task.value}")
    tset = templates[task]
    seg = _Segmenter()
    examples, diags = [], []
    for i, item in enumerate(inputs):
        try:
            values, blocks = _fields(task, item, seg)
        except (SmilesError, FragmentSetError, JunctionError, DatagenError) as exc:
            diags.append(f"item {i}: skipped: {exc}")
            continue
        rng = random.Random(f"{seed}:{task.value}:{i}")
        question = rng.choice(tset.questions)
        answer = rng.choice(tset.answers)
        examples.append(InstructionExample(task, question.format(**values), answer.format(**values),
                                           source, seed, tuple(blocks)))
    return examples, diags


def multi_property_inputs(records: Iterable[PropertyRecord]) -> list[MultiPropertyInput]:
    """Molecules with two or more positive nominal labels."""
    props: dict[str, list[str]] = {}
    for r in dedupe_records(records):
        if r.kind is PropertyKind.NOMINAL and r.value == 1:
            props.setdefault(r.molecule, []).append(r.property)
    return [MultiPropertyInput(m, tuple(sorted(ps))) for m, ps in props.items() if len(ps) >= 2]


def filter_by_vocab(examples: Iterable[InstructionExample], v: Vocabulary) -> list[InstructionExample]:
    """Examples whose every inline block is in ``v``."""
    return [ex for ex in examples if all(b in v for b in ex.blocks)]
