"""Building-block tokenization along amide, Suzuki and Buchwald-Hartwig bonds.

Two tokenizers share one bond matcher. The synthesis-guaranteed tokenizer
only keeps a disconnection when neither resulting fragment carries a
functional group that would compete with the new coupling handle; if any
eligible bond has to be left intact the result is marked ``Partial``. The
rule-based tokenizer cuts the same bonds with no conflict checks, subject only
to a minimum block size. :func:`tokenize` chains the two.

Blocks carry their attachment points as wildcard atoms. In a block's
``canonical_form`` each wildcard's atom class is the role code of its
(reaction, side) pair, so the form identifies a block independently of the
molecule it came from. Junction ids live on :class:`AttachmentPoint` objects,
and in :meth:`BuildingBlock.tagged_smiles` as ``[*:junction]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Sequence

from .molgraph import (
    Atom, Bond, BondOrder, MolecularGraph, WILDCARD, canonical_ranks,
    canonical_smiles_and_order, parse_smiles, write_smiles,
)
from .scaffold import require_single_component

DEFAULT_MIN_BLOCK_SIZE = 3


class Reaction(str, Enum):
    AMIDE = "Amide"
    SUZUKI = "Suzuki"
    BUCHWALD = "Buchwald"


class Side(str, Enum):
    ACYL = "AcylSide"
    AMINE = "AmineSide"
    ARYL_A = "ArylSideA"
    ARYL_B = "ArylSideB"


# Role codes are the wildcard atom classes used in canonical block forms.
ROLE_CODES: dict[tuple[Reaction, Side], int] = {
    (Reaction.AMIDE, Side.ACYL): 1,
    (Reaction.AMIDE, Side.AMINE): 2,
    (Reaction.SUZUKI, Side.ARYL_A): 3,
    (Reaction.SUZUKI, Side.ARYL_B): 4,
    (Reaction.BUCHWALD, Side.ARYL_A): 5,
    (Reaction.BUCHWALD, Side.AMINE): 6,
}
ROLES_BY_CODE = {code: role for role, code in ROLE_CODES.items()}
_COMPLEMENT = {1: 2, 2: 1, 3: 4, 4: 3, 5: 6, 6: 5}


def complement_role(code: int) -> int:
    return _COMPLEMENT[code]


class Coverage(str, Enum):
    COMPLETE = "Complete"
    PARTIAL = "Partial"
    UNTOKENIZED = "Untokenized"


class TokenizerKind(str, Enum):
    SYNTHESIS_GUARANTEED = "SynthesisGuaranteed"
    RULE_BASED = "RuleBased"
    SINGLE_BLOCK = "SingleBlock"


class BlockKind(str, Enum):
    CAP = "Cap"
    MID = "Mid"
    # a molecule with no eligible bond is one block with no attachment point
    WHOLE = "Whole"


class JunctionError(ValueError):
    """Base class for reassembly failures."""


class DanglingJunctionError(JunctionError):
    pass


class RoleMismatchError(JunctionError):
    pass


class DisconnectedJunctionError(JunctionError):
    pass


@dataclass(frozen=True)
class AttachmentPoint:
    reaction: Reaction
    side: Side
    junction_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "reaction", Reaction(self.reaction))
        object.__setattr__(self, "side", Side(self.side))
        if (self.reaction, self.side) not in ROLE_CODES:
            raise ValueError(f"{self.side.value} is not a valid side for {self.reaction.value}")

    @property
    def role(self) -> int:
        return ROLE_CODES[(self.reaction, self.side)]

    def complements(self, other: AttachmentPoint) -> bool:
        return _COMPLEMENT[self.role] == other.role

    @classmethod
    def from_role(cls, code: int, junction_id: int = 0) -> AttachmentPoint:
        reaction, side = ROLES_BY_CODE[code]
        return cls(reaction, side, junction_id)


@dataclass(frozen=True, eq=False)
class BuildingBlock:
    """A canonical fragment; ``graph`` atoms are in canonical order and each
    wildcard atom's class is its role code. ``attachments`` follow the order of
    wildcard atoms in ``graph``."""

    canonical_form: str
    graph: MolecularGraph
    attachments: tuple[AttachmentPoint, ...]

    def __eq__(self, other):
        if not isinstance(other, BuildingBlock):
            return NotImplemented
        return self.canonical_form == other.canonical_form and self.attachments == other.attachments

    def __hash__(self):
        return hash((self.canonical_form, self.attachments))

    @property
    def kind(self) -> BlockKind:
        return block_kind(len(self.attachments))

    @property
    def wildcard_atoms(self) -> tuple[int, ...]:
        return tuple(a.index for a in self.graph.atoms if a.is_wildcard)

    @property
    def roles(self) -> tuple[int, ...]:
        return tuple(att.role for att in self.attachments)

    @property
    def heavy_atom_count(self) -> int:
        return self.graph.heavy_atom_count

    def with_junctions(self, junction_ids: Sequence[int]) -> BuildingBlock:
        if len(junction_ids) != len(self.attachments):
            raise ValueError("one junction id per attachment is required")
        atts = tuple(replace(att, junction_id=j) for att, j in zip(self.attachments, junction_ids))
        return BuildingBlock(self.canonical_form, self.graph, atts)

    def tagged_graph(self) -> MolecularGraph:
        g = self.graph
        atoms = list(g.atoms)
        for w, att in zip(self.wildcard_atoms, self.attachments):
            atoms[w] = replace(atoms[w], atom_class=att.junction_id)
        return MolecularGraph(atoms, g.bonds)

    def tagged_smiles(self) -> str:
        """SMILES with ``[*:junction_id]`` wildcards (roles kept in a sidecar)."""
        return write_smiles(self.tagged_graph())

    @classmethod
    def from_fragment(cls, fragment: MolecularGraph, junction_of: dict[int, int] | None = None) -> BuildingBlock:
        """Canonicalize a fragment whose wildcard classes are role codes."""
        junction_of = junction_of or {}
        form, order = _canonical_fragment(_structure_key(fragment))
        graph = fragment.permuted(order)
        atts = tuple(
            AttachmentPoint.from_role(a.atom_class, junction_of.get(order[i], 0))
            for i, a in enumerate(graph.atoms) if a.is_wildcard
        )
        return cls(form, graph, atts)

    @classmethod
    def from_canonical(cls, form: str) -> BuildingBlock:
        return _block_from_form(form)


def _structure_key(g: MolecularGraph) -> tuple:
    """Everything canonicalization reads from a graph, in index order."""
    atoms = tuple((a.element, a.formal_charge, a.aromatic, a.implicit_hydrogens, a.atom_class) for a in g.atoms)
    bonds = tuple((b.begin, b.end, int(b.order)) for b in g.bonds)
    return atoms, bonds


@lru_cache(maxsize=65536)
def _canonical_fragment(key: tuple) -> tuple[str, tuple[int, ...]]:
    atoms, bonds = key
    g = MolecularGraph([Atom(e, c, ar, h, i, k) for i, (e, c, ar, h, k) in enumerate(atoms)],
                       [Bond(u, v, BondOrder(o)) for u, v, o in bonds])
    form, order = canonical_smiles_and_order(g)
    return form, tuple(order)


@lru_cache(maxsize=65536)
def _block_from_form(form: str) -> BuildingBlock:
    g = parse_smiles(form)
    for a in g.atoms:
        if a.is_wildcard and a.atom_class not in ROLES_BY_CODE:
            raise ValueError(f"wildcard class {a.atom_class} in {form!r} is not a role code")
    block = BuildingBlock.from_fragment(g)
    if block.canonical_form != form:
        raise ValueError(f"{form!r} is not in canonical form (expected {block.canonical_form!r})")
    return block


def block_kind(n_attachments: int) -> BlockKind:
    if n_attachments == 0:
        return BlockKind.WHOLE
    return BlockKind.CAP if n_attachments == 1 else BlockKind.MID


@dataclass(frozen=True)
class Junction:
    """One disconnection; ``ends`` are (block index, attachment index) pairs."""

    id: int
    reaction: Reaction
    ends: tuple[tuple[int, int], tuple[int, int]]


@dataclass(frozen=True)
class TokenizationResult:
    smiles: str
    blocks: tuple[BuildingBlock, ...]
    junctions: tuple[Junction, ...]
    coverage: Coverage
    tokenizer_used: TokenizerKind

    @property
    def block_forms(self) -> list[str]:
        return [b.canonical_form for b in self.blocks]

    def to_record(self) -> dict:
        return {
            "smiles": self.smiles,
            "blocks": [
                {
                    "canonical_form": b.canonical_form,
                    "smiles": b.tagged_smiles(),
                    "kind": b.kind.value,
                    "attachments": [
                        {"junction": a.junction_id, "reaction": a.reaction.value, "side": a.side.value}
                        for a in b.attachments
                    ],
                }
                for b in self.blocks
            ],
            "junctions": [
                {"id": j.id, "reaction": j.reaction.value, "ends": [list(e) for e in j.ends]}
                for j in self.junctions
            ],
            "coverage": self.coverage.value,
            "tokenizer": self.tokenizer_used.value,
        }

    @classmethod
    def from_record(cls, record: dict) -> TokenizationResult:
        """Rebuild from a record, using only the tagged SMILES and the role sidecar."""
        blocks = tuple(_block_from_tagged(b["smiles"], b["attachments"]) for b in record["blocks"])
        junctions = tuple(
            Junction(int(j["id"]), Reaction(j["reaction"]), tuple(tuple(e) for e in j["ends"]))
            for j in record["junctions"]
        )
        return cls(record["smiles"], blocks, junctions, Coverage(record["coverage"]),
                   TokenizerKind(record["tokenizer"]))


def _block_from_tagged(tagged: str, attachments: Iterable[dict]) -> BuildingBlock:
    roles = {int(a["junction"]): ROLE_CODES[(Reaction(a["reaction"]), Side(a["side"]))]
             for a in attachments}
    g = parse_smiles(tagged)
    atoms = list(g.atoms)
    junction_of = {}
    for i, a in enumerate(atoms):
        if a.is_wildcard:
            if a.atom_class not in roles:
                raise DanglingJunctionError(f"wildcard [*:{a.atom_class}] in {tagged!r} has no sidecar role")
            junction_of[i] = a.atom_class
            atoms[i] = replace(a, atom_class=roles[a.atom_class])
    return BuildingBlock.from_fragment(MolecularGraph(atoms, g.bonds), junction_of)


# ---------------------------------------------------------------------------
# conflict rules
# ---------------------------------------------------------------------------

def _has_double_to(g: MolecularGraph, atom: int, element: str) -> bool:
    return any(order is BondOrder.DOUBLE and g.atoms[b].element == element
               for b, order in g.neighbors(atom))


def _is_carbonyl_carbon(g: MolecularGraph, atom: int) -> bool:
    a = g.atoms[atom]
    return a.element == "C" and not a.aromatic and _has_double_to(g, atom, "O")


def _aliphatic_amine(g: MolecularGraph, i: int) -> bool:
    """Neutral primary or secondary amine whose carbons are all sp3."""
    a = g.atoms[i]
    if a.element != "N" or a.aromatic or a.formal_charge or a.implicit_hydrogens < 1:
        return False
    for b, order in g.neighbors(i):
        nb = g.atoms[b]
        if order is not BondOrder.SINGLE or nb.element != "C" or nb.aromatic:
            return False
        if any(o is not BondOrder.SINGLE for _, o in g.neighbors(b)):
            return False
    return True


def _carboxylic_acid(g: MolecularGraph, i: int) -> bool:
    if not _is_carbonyl_carbon(g, i):
        return False
    for b, order in g.neighbors(i):
        nb = g.atoms[b]
        if nb.element == "O" and order is BondOrder.SINGLE and g.degree(b) == 1:
            if nb.implicit_hydrogens >= 1 or nb.formal_charge == -1:
                return True
    return False


def _aryl_halide_or_boron(g: MolecularGraph, i: int) -> bool:
    a = g.atoms[i]
    if a.element != "C" or not a.aromatic:
        return False
    return any(order is BondOrder.SINGLE and g.atoms[b].element in ("Br", "I", "B")
               for b, order in g.neighbors(i))


PATTERNS: dict[str, Callable[[MolecularGraph, int], bool]] = {
    "aliphatic_amine": _aliphatic_amine,
    "carboxylic_acid": _carboxylic_acid,
    "aryl_halide_or_boron": _aryl_halide_or_boron,
}
SCOPES = ("fragment", "ring_system")


@dataclass(frozen=True)
class ConflictRule:
    name: str
    pattern: str
    applies_to: frozenset[tuple[Reaction, Side]]
    scope: str = "fragment"

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown conflict pattern {self.pattern!r}; known: {sorted(PATTERNS)}")
        if self.scope not in SCOPES:
            raise ValueError(f"unknown rule scope {self.scope!r}")

    def matches_at(self, g: MolecularGraph, atom: int) -> bool:
        return PATTERNS[self.pattern](g, atom)


def load_conflict_rules(path: str | Path | None = None) -> tuple[ConflictRule, ...]:
    """Read a rule file; ``None`` loads the bundled default set."""
    if path is None:
        text = resources.files("blockchem.data").joinpath("conflict_rules.json").read_text()
    else:
        text = Path(path).read_text()
    return rules_from_json(json.loads(text))


def rules_from_json(doc: dict) -> tuple[ConflictRule, ...]:
    rules = []
    for r in doc.get("rules", []):
        applies = frozenset((Reaction(x), Side(y)) for x, y in r["applies_to"])
        for pair in applies:
            if pair not in ROLE_CODES:
                raise ValueError(f"rule {r['name']!r}: invalid reaction/side pair {pair}")
        rules.append(ConflictRule(r["name"], r["pattern"], applies, r.get("scope", "fragment")))
    return tuple(rules)


@lru_cache(maxsize=1)
def default_rules() -> tuple[ConflictRule, ...]:
    return load_conflict_rules()


def _ring_system(g: MolecularGraph, atom: int) -> set[int]:
    ring = g.ring_bonds
    seen = {atom}
    stack = [atom]
    while stack:
        a = stack.pop()
        for b, _ in g.neighbors(a):
            if b not in seen and g.bond_id(a, b) in ring:
                seen.add(b)
                stack.append(b)
    return seen if len(seen) > 1 else set()


def attachment_sites(g: MolecularGraph) -> set[int]:
    """Atoms bonded to a wildcard; these are coupling handles, never conflicts."""
    return {b for a in g.atoms if a.is_wildcard for b, _ in g.neighbors(a.index)}


def conflict_matches(fragment: MolecularGraph, attachment: AttachmentPoint,
                     rules: Sequence[ConflictRule]) -> list[tuple[str, int]]:
    """(rule name, atom index) for every off-attachment match relevant to ``attachment``."""
    key = (attachment.reaction, attachment.side)
    relevant = [r for r in rules if key in r.applies_to]
    if not relevant:
        return []
    sites = attachment_sites(fragment)
    hits = []
    for rule in relevant:
        if rule.scope == "ring_system":
            own_sites = {b for a in fragment.atoms
                         if a.is_wildcard and a.atom_class in (0, attachment.role)
                         for b, _ in fragment.neighbors(a.index)}
            candidates = sorted(set().union(*(_ring_system(fragment, s) for s in own_sites)))
        else:
            candidates = range(len(fragment.atoms))
        for i in candidates:
            if i in sites or fragment.atoms[i].is_wildcard:
                continue
            if rule.matches_at(fragment, i):
                hits.append((rule.name, i))
    return hits


def conflict_check(fragment: MolecularGraph, attachment: AttachmentPoint,
                   rules: Sequence[ConflictRule] | None = None) -> bool:
    """True when a rule for this attachment's role matches anywhere but a coupling site."""
    if rules is None:
        rules = default_rules()
    return bool(conflict_matches(fragment, attachment, rules))


def block_conflicts(block: BuildingBlock, rules: Sequence[ConflictRule]) -> list[tuple[str, int]]:
    hits = []
    for att in block.attachments:
        hits.extend(conflict_matches(block.graph, att, rules))
    return hits


# ---------------------------------------------------------------------------
# bond matching
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Disconnection:
    bond: Bond
    reaction: Reaction
    # (atom, side) for each endpoint
    sides: tuple[tuple[int, Side], tuple[int, Side]]


def _is_amide_nitrogen(g: MolecularGraph, n: int) -> bool:
    return any(_is_carbonyl_carbon(g, b) for b, _ in g.neighbors(n))


def _plain_nitrogen(g: MolecularGraph, n: int) -> bool:
    a = g.atoms[n]
    return (a.element == "N" and a.formal_charge == 0
            and all(o in (BondOrder.SINGLE, BondOrder.AROMATIC) for _, o in g.neighbors(n)))


def _match_bond(g: MolecularGraph, bond: Bond, ranks: Sequence[int]) -> Disconnection | None:
    u, v = bond.begin, bond.end
    au, av = g.atoms[u], g.atoms[v]
    if au.is_wildcard or av.is_wildcard:
        return None
    for c, n in ((u, v), (v, u)):
        if _is_carbonyl_carbon(g, c) and _plain_nitrogen(g, n) and not g.atoms[n].aromatic:
            return Disconnection(bond, Reaction.AMIDE, ((c, Side.ACYL), (n, Side.AMINE)))
    aryl_u = au.element == "C" and au.aromatic
    aryl_v = av.element == "C" and av.aromatic
    if aryl_u and aryl_v:
        a, b = (u, v) if ranks[u] < ranks[v] else (v, u)
        return Disconnection(bond, Reaction.SUZUKI, ((a, Side.ARYL_A), (b, Side.ARYL_B)))
    for c, n in ((u, v), (v, u)):
        if (g.atoms[c].element == "C" and g.atoms[c].aromatic
                and _plain_nitrogen(g, n) and not _is_amide_nitrogen(g, n)):
            return Disconnection(bond, Reaction.BUCHWALD, ((c, Side.ARYL_A), (n, Side.AMINE)))
    return None


def _disconnections(g: MolecularGraph, ranks: Sequence[int] | None = None) -> list[Disconnection]:
    if ranks is None:
        ranks = canonical_ranks(g)
    ring = g.ring_bonds
    found = []
    for k, bond in enumerate(g.bonds):
        if bond.order is not BondOrder.SINGLE or k in ring:
            continue
        d = _match_bond(g, bond, ranks)
        if d is not None:
            found.append(d)
    found.sort(key=lambda d: sorted((ranks[d.bond.begin], ranks[d.bond.end])))
    return found


def find_disconnectable_bonds(g: MolecularGraph) -> list[tuple[Bond, Reaction]]:
    """Acyclic single bonds an automated coupling could form, in canonical bond order.

    Amide: C(=O)-N. Suzuki: aromatic C to aromatic C of another ring.
    Buchwald: aromatic C to a neutral, non-amide nitrogen.
    """
    require_single_component(g)
    return [(d.bond, d.reaction) for d in _disconnections(g)]


# ---------------------------------------------------------------------------
# tokenizers
# ---------------------------------------------------------------------------

class _CutState:
    """Progressively fragmented molecule."""

    def __init__(self, g: MolecularGraph):
        self.g = g
        self.cuts: list[Disconnection] = []
        self.cut_ids: set[int] = set()

    def component(self, start: int, extra_cut: int | None = None) -> list[int]:
        g, cut = self.g, self.cut_ids
        seen = {start}
        stack = [start]
        while stack:
            a = stack.pop()
            for b, _ in g.neighbors(a):
                if b in seen:
                    continue
                k = g.bond_id(a, b)
                if k in cut or k == extra_cut:
                    continue
                seen.add(b)
                stack.append(b)
        return sorted(seen)

    def fragment(self, atoms: list[int], cuts: Sequence[Disconnection]) -> tuple[MolecularGraph, dict[int, int]]:
        """Fragment graph with role-coded wildcards; returns wildcard -> cut index."""
        g = self.g
        pos = {a: i for i, a in enumerate(atoms)}
        new_atoms: list[Atom] = [g.atoms[a] for a in atoms]
        bonds = []
        for b in g.bonds:
            if b.begin in pos and b.end in pos and g.bond_id(b.begin, b.end) not in self.cut_ids:
                bonds.append(Bond(pos[b.begin], pos[b.end], b.order))
        wild_cut = {}
        for ci, d in enumerate(cuts):
            for atom, side in d.sides:
                if atom in pos:
                    w = len(new_atoms)
                    new_atoms.append(Atom(WILDCARD, atom_class=ROLE_CODES[(d.reaction, side)]))
                    bonds.append(Bond(pos[atom], w, d.bond.order))
                    wild_cut[w] = ci
        return MolecularGraph(new_atoms, bonds), wild_cut


class _Canonical(NamedTuple):
    """A molecule relabelled into canonical write order, with its ranks."""

    smiles: str
    graph: MolecularGraph
    ranks: list[int]


def _canonical(g: MolecularGraph) -> _Canonical:
    require_single_component(g)
    smiles, order = canonical_smiles_and_order(g)
    ranks = canonical_ranks(g)
    return _Canonical(smiles, g.permuted(order), [ranks[a] for a in order])


def _assemble_result(c: _Canonical, state: _CutState, coverage: Coverage,
                     kind: TokenizerKind) -> TokenizationResult:
    # atoms of c.graph are already in write order
    comps = c.graph.components(skip_bonds=state.cut_ids)
    comps.sort(key=min)
    raw_blocks = []
    for comp in comps:
        frag, wild_cut = state.fragment(comp, state.cuts)
        # provisional junction id = cut index + 1, renumbered below
        block = BuildingBlock.from_fragment(frag, {w: ci + 1 for w, ci in wild_cut.items()})
        raw_blocks.append(block)
    renumber: dict[int, int] = {}
    for block in raw_blocks:
        for att in block.attachments:
            renumber.setdefault(att.junction_id, len(renumber) + 1)
    blocks = tuple(b.with_junctions([renumber[a.junction_id] for a in b.attachments]) for b in raw_blocks)
    ends: dict[int, list[tuple[int, int]]] = {}
    for bi, b in enumerate(blocks):
        for ai, att in enumerate(b.attachments):
            ends.setdefault(att.junction_id, []).append((bi, ai))
    junctions = []
    for ci, d in enumerate(state.cuts):
        jid = renumber[ci + 1]
        e = sorted(ends[jid])
        junctions.append(Junction(jid, d.reaction, (e[0], e[1])))
    junctions.sort(key=lambda j: j.id)
    return TokenizationResult(c.smiles, blocks, tuple(junctions), coverage, kind)


def synth_tokenize(g: MolecularGraph, rules: Sequence[ConflictRule] | None = None) -> TokenizationResult:
    """Synthesis-guaranteed tokenization.

    Eligible bonds are visited in canonical order and cut greedily when both
    new fragments pass the conflict check. Coverage is ``Complete`` only if no
    eligible bond had to be kept and every block re-checks clean.
    """
    return _synth(_canonical(g), default_rules() if rules is None else rules)


def _synth(c: _Canonical, rules: Sequence[ConflictRule]) -> TokenizationResult:
    g = c.graph
    candidates = _disconnections(g, c.ranks)
    state = _CutState(g)
    if not candidates:
        return _assemble_result(c, state, Coverage.COMPLETE, TokenizerKind.SINGLE_BLOCK)
    rejected = 0
    for d in candidates:
        k = g.bond_id(d.bond.begin, d.bond.end)
        ok = True
        for atom, side in d.sides:
            comp = state.component(atom, extra_cut=k)
            state.cut_ids.add(k)
            frag, _ = state.fragment(comp, state.cuts + [d])
            state.cut_ids.discard(k)
            if conflict_check(frag, AttachmentPoint(d.reaction, side), rules):
                ok = False
                break
        if ok:
            state.cuts.append(d)
            state.cut_ids.add(k)
        else:
            rejected += 1
    result = _assemble_result(c, state, Coverage.COMPLETE, TokenizerKind.SYNTHESIS_GUARANTEED)
    clean = all(not block_conflicts(b, rules) for b in result.blocks)
    if rejected or not clean:
        result = replace(result, coverage=Coverage.PARTIAL)
    return result


def rule_tokenize(g: MolecularGraph, min_block_size: int = DEFAULT_MIN_BLOCK_SIZE) -> TokenizationResult:
    """Cut every eligible bond that leaves both fragments with at least
    ``min_block_size`` heavy atoms. No conflict checking; always ``Complete``."""
    if min_block_size < 1:
        raise ValueError("min_block_size must be >= 1")
    return _rule(_canonical(g), min_block_size)


def _rule(c: _Canonical, min_block_size: int) -> TokenizationResult:
    g = c.graph
    state = _CutState(g)
    for d in _disconnections(g, c.ranks):
        k = g.bond_id(d.bond.begin, d.bond.end)
        sizes = [len(state.component(atom, extra_cut=k)) for atom, _ in d.sides]
        if min(sizes) >= min_block_size:
            state.cuts.append(d)
            state.cut_ids.add(k)
    return _assemble_result(c, state, Coverage.COMPLETE, TokenizerKind.RULE_BASED)


def tokenize(g: MolecularGraph, rules: Sequence[ConflictRule] | None = None,
             min_block_size: int = DEFAULT_MIN_BLOCK_SIZE, synth_only: bool = False) -> TokenizationResult:
    """Synthesis-guaranteed tokenization, falling back to the rule-based one
    when coverage is not complete (unless ``synth_only``)."""
    if min_block_size < 1:
        raise ValueError("min_block_size must be >= 1")
    c = _canonical(g)
    result = _synth(c, default_rules() if rules is None else rules)
    if result.coverage is Coverage.COMPLETE or synth_only:
        return result
    return _rule(c, min_block_size)


# ---------------------------------------------------------------------------
# reassembly
# ---------------------------------------------------------------------------

def reassemble(blocks: Sequence[BuildingBlock], junctions: Sequence[Junction]) -> MolecularGraph:
    """Fuse blocks back into one molecule.

    Each junction deletes its two wildcard atoms and bonds their neighbours
    with the order of the wildcard bonds.

    Raises:
        DanglingJunctionError: a junction id is missing, undeclared or unpaired.
        RoleMismatchError: paired attachments are not complementary roles.
        DisconnectedJunctionError: the blocks do not form one connected graph.
    """
    if not blocks:
        raise DisconnectedJunctionError("no blocks to reassemble")
    declared = {}
    for j in junctions:
        if j.id in declared:
            raise DanglingJunctionError(f"junction {j.id} declared twice")
        declared[j.id] = Reaction(j.reaction)
    sites: dict[int, list[tuple[int, int, AttachmentPoint]]] = {}
    for bi, block in enumerate(blocks):
        for w, att in zip(block.wildcard_atoms, block.attachments):
            sites.setdefault(att.junction_id, []).append((bi, w, att))
    for jid, ends in sites.items():
        if jid not in declared:
            raise DanglingJunctionError(f"attachment references undeclared junction {jid}")
        if len(ends) != 2:
            raise DanglingJunctionError(f"junction {jid} has {len(ends)} attachment(s), expected 2")
        (_, _, a1), (_, _, a2) = ends
        if not a1.complements(a2) or a1.reaction is not declared[jid]:
            raise RoleMismatchError(
                f"junction {jid}: {a1.reaction.value}/{a1.side.value} cannot pair with "
                f"{a2.reaction.value}/{a2.side.value} under {declared[jid].value}")
    for jid in declared:
        if jid not in sites:
            raise DanglingJunctionError(f"junction {jid} has no attachments")

    offsets = []
    atoms: list[Atom] = []
    index_maps = []
    for block in blocks:
        m = {}
        for a in block.graph.atoms:
            if not a.is_wildcard:
                m[a.index] = len(atoms)
                atoms.append(a)
        index_maps.append(m)
        offsets.append(m)
    bonds: list[Bond] = []
    for bi, block in enumerate(blocks):
        m = index_maps[bi]
        for b in block.graph.bonds:
            if b.begin in m and b.end in m:
                bonds.append(Bond(m[b.begin], m[b.end], b.order))
    parent = list(range(len(blocks)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for jid in sorted(sites):
        ends = []
        for bi, w, _ in sites[jid]:
            (nbr, order), = blocks[bi].graph.neighbors(w)
            ends.append((index_maps[bi][nbr], order, bi))
        (u, order, b1), (v, _, b2) = ends
        if u == v or any({x.begin, x.end} == {u, v} for x in bonds):
            raise RoleMismatchError(f"junction {jid} would duplicate an existing bond")
        bonds.append(Bond(u, v, order))
        parent[find(b1)] = find(b2)
    if len({find(i) for i in range(len(blocks))}) > 1:
        raise DisconnectedJunctionError("junction graph does not connect all blocks")
    return MolecularGraph(atoms, bonds)


def reassemble_result(result: TokenizationResult) -> MolecularGraph:
    return reassemble(result.blocks, result.junctions)
