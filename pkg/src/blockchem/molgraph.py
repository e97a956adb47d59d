"""Molecular graphs: SMILES parsing, canonical ranking, canonical SMILES output.

Only a subset of SMILES is understood: organic-subset atoms, bracket atoms
with hydrogen count, charge and atom class, ring closures (including ``%nn``),
branches, explicit bond symbols and lowercase aromatic atoms. Stereo markers
are accepted and dropped with a :class:`StereoStrippedWarning`. Aromaticity is
taken exactly as written; there is no ring perception.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Iterable, Iterator, NamedTuple, Sequence

import networkx as nx
from networkx.algorithms import isomorphism

WILDCARD = "*"

ATOMIC_NUMBERS = {
    WILDCARD: 0, "B": 5, "C": 6, "N": 7, "O": 8, "F": 9,
    "P": 15, "S": 16, "Cl": 17, "Br": 35, "I": 53,
}
SUPPORTED_ELEMENTS = frozenset(ATOMIC_NUMBERS)

# Allowed neutral valences, lowest first.
VALENCES = {
    "B": (3,), "C": (4,), "N": (3, 5), "O": (2,), "P": (3, 5),
    "S": (2, 4, 6), "F": (1,), "Cl": (1,), "Br": (1,), "I": (1,),
}
ORGANIC_SUBSET = frozenset(VALENCES)
AROMATIC_SYMBOLS = {"b": "B", "c": "C", "n": "N", "o": "O", "p": "P", "s": "S"}
# Aromatic atoms that donate one electron to the pi system (and so use up one
# valence unit). Pyrrole-type nitrogens must carry an explicit [nH].
_PI_CONTRIBUTION = {"B": 1, "C": 1, "N": 1, "P": 1, "O": 0, "S": 0}


class BondOrder(IntEnum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def valence(self) -> int:
        return 1 if self is BondOrder.AROMATIC else int(self)


_BOND_SYMBOLS = {"-": BondOrder.SINGLE, "=": BondOrder.DOUBLE, "#": BondOrder.TRIPLE,
                 ":": BondOrder.AROMATIC, "/": BondOrder.SINGLE, "\\": BondOrder.SINGLE}


class StereoStrippedWarning(UserWarning):
    """Emitted when stereo descriptors are discarded during parsing."""


class SmilesError(ValueError):
    """Base class for SMILES diagnostics; ``offset`` is a 0-based character index."""

    def __init__(self, message: str, offset: int | None = None, text: str | None = None):
        self.offset = offset
        self.text = text
        self.reason = message
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")


class UnbalancedParenthesisError(SmilesError):
    pass


class UnmatchedRingClosureError(SmilesError):
    pass


class UnsupportedElementError(SmilesError):
    pass


class UnsupportedSyntaxError(SmilesError):
    pass


class ValenceError(SmilesError):
    pass


class AromaticityError(SmilesError):
    pass


@dataclass(frozen=True, slots=True)
class Atom:
    element: str
    formal_charge: int = 0
    aromatic: bool = False
    implicit_hydrogens: int = 0
    index: int = 0
    atom_class: int = 0

    @property
    def is_wildcard(self) -> bool:
        return self.element == WILDCARD

    @property
    def atomic_number(self) -> int:
        return ATOMIC_NUMBERS[self.element]


@dataclass(frozen=True, slots=True)
class Bond:
    begin: int
    end: int
    order: BondOrder

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.begin, self.end)

    def other(self, atom: int) -> int:
        return self.end if atom == self.begin else self.begin


class MolecularGraph:
    """Immutable attributed graph of atoms and bonds.

    ``fragment_set`` marks graphs that came from a dotted SMILES; only those
    may have several connected components.
    """

    __slots__ = ("atoms", "bonds", "fragment_set", "_adj", "_bond_index", "_ring_bonds", "_ranks", "_canon")

    def __init__(self, atoms: Sequence[Atom], bonds: Sequence[Bond], fragment_set: bool = False):
        atoms = tuple(a if a.index == i else Atom(a.element, a.formal_charge, a.aromatic, a.implicit_hydrogens,
                                                  i, a.atom_class)
                      for i, a in enumerate(atoms))
        n = len(atoms)
        adj: list[list[tuple[int, BondOrder]]] = [[] for _ in range(n)]
        index: dict[tuple[int, int], int] = {}
        for k, b in enumerate(bonds):
            u, v = b.begin, b.end
            if u == v or not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"bond {k} has invalid endpoints {b.endpoints}")
            key = (u, v) if u < v else (v, u)
            if key in index:
                raise ValueError(f"duplicate bond between atoms {key}")
            index[key] = k
            adj[u].append((v, b.order))
            adj[v].append((u, b.order))
        self.atoms: tuple[Atom, ...] = atoms
        self.bonds: tuple[Bond, ...] = tuple(bonds)
        self.fragment_set = fragment_set
        self._adj = tuple(tuple(x) for x in adj)
        self._bond_index = index
        self._ring_bonds: frozenset[int] | None = None
        # lazily filled canonical ranks and (SMILES, write order)
        self._ranks: tuple[int, ...] | None = None
        self._canon: tuple[str, tuple[int, ...]] | None = None

    def __len__(self) -> int:
        return len(self.atoms)

    def __repr__(self) -> str:
        return f"MolecularGraph({write_smiles(self)!r})"

    def neighbors(self, atom: int) -> tuple[tuple[int, BondOrder], ...]:
        return self._adj[atom]

    def degree(self, atom: int) -> int:
        return len(self._adj[atom])

    def bond_between(self, u: int, v: int) -> Bond | None:
        k = self._bond_index.get((u, v) if u < v else (v, u))
        return None if k is None else self.bonds[k]

    def bond_id(self, u: int, v: int) -> int:
        return self._bond_index[(u, v) if u < v else (v, u)]

    @property
    def heavy_atom_count(self) -> int:
        return sum(1 for a in self.atoms if not a.is_wildcard)

    def bond_valence(self, atom: int) -> int:
        return sum(order.valence for _, order in self._adj[atom])

    def components(self, skip_bonds: Iterable[int] = ()) -> list[list[int]]:
        """Connected components as sorted atom lists, ignoring ``skip_bonds``."""
        skip = set(skip_bonds)
        seen = [False] * len(self.atoms)
        out = []
        for start in range(len(self.atoms)):
            if seen[start]:
                continue
            seen[start] = True
            stack, comp = [start], []
            while stack:
                a = stack.pop()
                comp.append(a)
                for b, _ in self._adj[a]:
                    if not seen[b] and (not skip or self.bond_id(a, b) not in skip):
                        seen[b] = True
                        stack.append(b)
            out.append(sorted(comp))
        return out

    @property
    def ring_bonds(self) -> frozenset[int]:
        """Indices of bonds lying on at least one cycle (i.e. non-bridges)."""
        if self._ring_bonds is None:
            self._ring_bonds = frozenset(range(len(self.bonds))) - _bridges(self)
        return self._ring_bonds

    def is_ring_bond(self, u: int, v: int) -> bool:
        return self.bond_id(u, v) in self.ring_bonds

    def ring_bond_count(self, atom: int) -> int:
        rb = self.ring_bonds
        return sum(1 for b, _ in self._adj[atom] if self.bond_id(atom, b) in rb)

    def in_ring(self, atom: int) -> bool:
        return self.ring_bond_count(atom) > 0

    def subgraph(self, atom_ids: Sequence[int]) -> MolecularGraph:
        keep = {a: i for i, a in enumerate(atom_ids)}
        atoms = [self.atoms[a] for a in atom_ids]
        bonds = [Bond(keep[b.begin], keep[b.end], b.order) for b in self.bonds
                 if b.begin in keep and b.end in keep]
        return MolecularGraph(atoms, bonds)

    def permuted(self, order: Sequence[int]) -> MolecularGraph:
        """Graph whose atom ``i`` is this graph's atom ``order[i]``; bonds sorted."""
        pos = {a: i for i, a in enumerate(order)}
        bonds = []
        for b in self.bonds:
            u, v = pos[b.begin], pos[b.end]
            bonds.append(Bond(min(u, v), max(u, v), b.order))
        bonds.sort(key=lambda b: (b.begin, b.end))
        return MolecularGraph([self.atoms[a] for a in order], bonds, self.fragment_set)

    def with_atom(self, atom: int, **changes) -> MolecularGraph:
        atoms = list(self.atoms)
        atoms[atom] = replace(atoms[atom], **changes)
        return MolecularGraph(atoms, self.bonds, self.fragment_set)


def _bridges(g: MolecularGraph) -> frozenset[int]:
    n = len(g.atoms)
    disc = [-1] * n
    low = [0] * n
    bridges = set()
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        # (atom, parent bond id, neighbor iterator)
        stack = [(root, -1, iter(g.neighbors(root)))]
        while stack:
            a, pbond, it = stack[-1]
            advanced = False
            for b, _ in it:
                bid = g.bond_id(a, b)
                if bid == pbond:
                    continue
                if disc[b] == -1:
                    disc[b] = low[b] = timer
                    timer += 1
                    stack.append((b, bid, iter(g.neighbors(b))))
                    advanced = True
                    break
                low[a] = min(low[a], disc[b])
            if not advanced:
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[a])
                    if low[a] > disc[parent]:
                        bridges.add(pbond)
    return frozenset(bridges)


# ---------------------------------------------------------------------------
# valence rules
# ---------------------------------------------------------------------------

def allowed_valences(element: str, charge: int) -> tuple[int, ...]:
    """Valences allowed for ``element`` carrying ``charge`` (isoelectronic shift)."""
    if element == WILDCARD:
        return (8,)
    base = VALENCES[element]
    if element == "C":
        return (4 - abs(charge),)
    if element == "B":
        return (3 - charge,)
    return tuple(v + charge for v in base if v + charge >= 0)


def default_hydrogens(element: str, aromatic: bool, bond_valence: int) -> int | None:
    """Implicit hydrogens for an unbracketed atom, or None on valence violation."""
    if element == WILDCARD:
        return 0
    vals = VALENCES[element]
    if aromatic:
        if bond_valence > vals[-1]:
            return None
        return max(0, vals[0] - bond_valence - _PI_CONTRIBUTION[element])
    for v in vals:
        if v >= bond_valence:
            return v - bond_valence
    return None


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

class _ParsedAtom:
    __slots__ = ("element", "aromatic", "charge", "hcount", "atom_class", "offset")

    def __init__(self, element, aromatic, charge, hcount, atom_class, offset):
        self.element = element
        self.aromatic = aromatic
        self.charge = charge
        self.hcount = hcount  # None for organic-subset atoms
        self.atom_class = atom_class
        self.offset = offset


def parse_smiles(text: str) -> MolecularGraph:
    """Parse a SMILES string from the supported subset.

    Atoms keep the order in which they appear in ``text``. Implicit hydrogens
    are filled in for organic-subset atoms. A dotted SMILES yields a graph
    flagged as a fragment set.

    Raises:
        SmilesError: one of its subclasses, carrying the character offset.
    """
    if not text or not text.strip():
        raise UnsupportedSyntaxError("empty SMILES", 0, text)
    text = text.strip()
    atoms: list[_ParsedAtom] = []
    bonds: dict[tuple[int, int], tuple[BondOrder | None, int]] = {}
    branch_stack: list[tuple[int, int]] = []
    rings: dict[int, tuple[int, str | None, int]] = {}
    prev: int | None = None
    pending: str | None = None
    pending_at = 0
    dotted = False
    stereo = False
    i, n = 0, len(text)

    def add_bond(a: int, b: int, symbol: str | None, offset: int) -> None:
        key = (a, b) if a < b else (b, a)
        if a == b or key in bonds:
            raise UnsupportedSyntaxError("duplicate or self bond", offset, text)
        bonds[key] = (_BOND_SYMBOLS[symbol] if symbol else None, offset)

    while i < n:
        ch = text[i]
        if ch == "(":
            if prev is None:
                raise UnbalancedParenthesisError("branch opened before any atom", i, text)
            branch_stack.append((prev, i))
            i += 1
        elif ch == ")":
            if not branch_stack:
                raise UnbalancedParenthesisError("unmatched ')'", i, text)
            if pending is not None:
                raise UnsupportedSyntaxError("bond symbol before ')'", pending_at, text)
            prev = branch_stack.pop()[0]
            i += 1
        elif ch in _BOND_SYMBOLS:
            if pending is not None:
                raise UnsupportedSyntaxError("consecutive bond symbols", i, text)
            if ch in "/\\":
                stereo = True
            pending, pending_at = ch, i
            i += 1
        elif ch == ".":
            if pending is not None or branch_stack:
                raise UnsupportedSyntaxError("'.' inside a branch or after a bond", i, text)
            prev = None
            dotted = True
            i += 1
        elif ch.isdigit() or ch == "%":
            start = i
            if ch == "%":
                digits = text[i + 1:i + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise UnsupportedSyntaxError("'%' must be followed by two digits", i, text)
                num = int(digits)
                i += 3
            else:
                num = int(ch)
                i += 1
            if prev is None:
                raise UnmatchedRingClosureError("ring closure before any atom", start, text)
            if num in rings:
                other, sym, opened_at = rings.pop(num)
                if pending and sym and _BOND_SYMBOLS[pending] != _BOND_SYMBOLS[sym]:
                    raise UnsupportedSyntaxError("conflicting ring-closure bond symbols", start, text)
                add_bond(other, prev, pending or sym, start)
            else:
                rings[num] = (prev, pending, start)
            pending = None
        elif ch == "[":
            end = text.find("]", i)
            if end < 0:
                raise UnsupportedSyntaxError("unterminated bracket atom", i, text)
            atom, had_stereo = _parse_bracket(text, i, end)
            stereo |= had_stereo
            atoms.append(atom)
            if prev is not None:
                add_bond(prev, len(atoms) - 1, pending, i)
            prev, pending = len(atoms) - 1, None
            i = end + 1
        else:
            sym = text[i:i + 2] if text[i:i + 2] in ("Cl", "Br") else ch
            if sym in ORGANIC_SUBSET:
                atom = _ParsedAtom(sym, False, 0, None, 0, i)
            elif sym in AROMATIC_SYMBOLS:
                atom = _ParsedAtom(AROMATIC_SYMBOLS[sym], True, 0, None, 0, i)
            elif sym == WILDCARD:
                atom = _ParsedAtom(WILDCARD, False, 0, 0, 0, i)
            elif ch.isalpha():
                raise UnsupportedElementError(f"unsupported element {ch!r}", i, text)
            else:
                raise UnsupportedSyntaxError(f"unexpected character {ch!r}", i, text)
            atoms.append(atom)
            if prev is not None:
                add_bond(prev, len(atoms) - 1, pending, i)
            elif pending is not None:
                raise UnsupportedSyntaxError("bond symbol without a preceding atom", pending_at, text)
            prev, pending = len(atoms) - 1, None
            i += len(sym)

    if branch_stack:
        raise UnbalancedParenthesisError("unclosed '('", branch_stack[-1][1], text)
    if rings:
        first = min(r[2] for r in rings.values())
        raise UnmatchedRingClosureError("unclosed ring bond", first, text)
    if pending is not None:
        raise UnsupportedSyntaxError("dangling bond symbol", pending_at, text)
    if stereo:
        warnings.warn(f"stereo descriptors stripped from {text!r}", StereoStrippedWarning, stacklevel=2)

    bond_list = []
    for (a, b), (order, _) in sorted(bonds.items()):
        if order is None:
            both = atoms[a].aromatic and atoms[b].aromatic
            order = BondOrder.AROMATIC if both else BondOrder.SINGLE
        bond_list.append(Bond(a, b, order))
    skeleton = MolecularGraph(
        [Atom(p.element, p.charge, p.aromatic, 0, k, p.atom_class) for k, p in enumerate(atoms)],
        bond_list,
        dotted,
    )
    # aromatic bonds that are bridges (e.g. biphenyl written without '-') are single
    ring = skeleton.ring_bonds
    fixed = [Bond(b.begin, b.end, BondOrder.SINGLE)
             if b.order is BondOrder.AROMATIC and k not in ring else b
             for k, b in enumerate(skeleton.bonds)]

    final_atoms = []
    for k, p in enumerate(atoms):
        valence = sum(bo.valence for bo in
                      (b.order for b in fixed if k in (b.begin, b.end)))
        if p.element == WILDCARD:
            final_atoms.append(Atom(WILDCARD, p.charge, False, 0, k, p.atom_class))
            continue
        if p.hcount is None:
            h = default_hydrogens(p.element, p.aromatic, valence)
            if h is None:
                raise ValenceError(f"valence exceeded on {p.element}", p.offset, text)
        else:
            h = p.hcount
            if valence + h > max(allowed_valences(p.element, p.charge), default=-1):
                raise ValenceError(f"valence exceeded on {p.element}", p.offset, text)
        final_atoms.append(Atom(p.element, p.charge, p.aromatic, h, k, p.atom_class))
    g = MolecularGraph(final_atoms, fixed, dotted)
    for k, p in enumerate(atoms):
        if p.aromatic and not g.in_ring(k):
            raise AromaticityError("aromatic atom outside a ring", p.offset, text)
    return g


def _parse_bracket(text: str, start: int, end: int) -> tuple[_ParsedAtom, bool]:
    body = text[start + 1:end]
    j = 0
    if body[:1].isdigit():
        raise UnsupportedSyntaxError("isotopes are not supported", start + 1, text)
    if body[:2] in ("Cl", "Br"):
        sym, j = body[:2], 2
    elif body[:1]:
        sym, j = body[:1], 1
    else:
        raise UnsupportedSyntaxError("empty bracket atom", start, text)
    if sym in AROMATIC_SYMBOLS:
        element, aromatic = AROMATIC_SYMBOLS[sym], True
    elif sym in SUPPORTED_ELEMENTS:
        element, aromatic = sym, False
    else:
        # two-letter elements such as Na or Se land here
        raise UnsupportedElementError(f"unsupported element in {body!r}", start + 1, text)
    if j < len(body) and body[j].islower() and body[j].isalpha():
        raise UnsupportedElementError(f"unsupported element in {body!r}", start + 1, text)
    stereo = False
    while j < len(body) and body[j] == "@":
        stereo = True
        j += 1
        while j < len(body) and (body[j].isupper() and body[j] != "H" or body[j].isdigit()):
            j += 1
    hcount = 0
    if j < len(body) and body[j] == "H":
        j += 1
        hcount = 1
        if j < len(body) and body[j].isdigit():
            hcount = int(body[j])
            j += 1
    charge = 0
    if j < len(body) and body[j] in "+-":
        sign = 1 if body[j] == "+" else -1
        k = j + 1
        if k < len(body) and body[k].isdigit():
            while k < len(body) and body[k].isdigit():
                k += 1
            charge = sign * int(body[j + 1:k])
        else:
            while k < len(body) and body[k] == body[j]:
                k += 1
            charge = sign * (k - j)
        j = k
    atom_class = 0
    if j < len(body) and body[j] == ":":
        digits = body[j + 1:]
        if not digits.isdigit():
            raise UnsupportedSyntaxError(f"bad atom class in {body!r}", start + j + 1, text)
        atom_class = int(digits)
        j = len(body)
    if j != len(body):
        raise UnsupportedSyntaxError(f"unsupported bracket atom {body!r}", start + 1 + j, text)
    if element == WILDCARD:
        hcount = 0
    return _ParsedAtom(element, aromatic, charge, hcount, atom_class, start), stereo


# ---------------------------------------------------------------------------
# canonical ranking
# ---------------------------------------------------------------------------

def _dense_ranks(keys: Sequence) -> list[int]:
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def _refine(ranks: list[int], adj) -> list[int]:
    classes = len(set(ranks))
    while True:
        keys = [(ranks[a], tuple(sorted((ranks[b], int(o)) for b, o in adj[a])))
                for a in range(len(ranks))]
        new = _dense_ranks(keys)
        new_classes = len(set(new))
        if new_classes == classes:
            return new
        ranks, classes = new, new_classes


def symmetry_classes(g: MolecularGraph) -> list[int]:
    """Atom invariants refined over neighborhoods; equal values = same class."""
    invariants = [
        (a.atomic_number, a.aromatic, a.formal_charge, a.implicit_hydrogens,
         g.degree(i), g.ring_bond_count(i), a.atom_class)
        for i, a in enumerate(g.atoms)
    ]
    return _refine(_dense_ranks(invariants), g._adj)


def canonical_ranks(g: MolecularGraph) -> list[int]:
    """Canonical rank (0..n-1) of every atom.

    Ranks come from iterative neighborhood refinement of atom invariants;
    remaining ties are broken by promoting the lowest-index atom of the
    lowest tied class and refining again.
    """
    if g._ranks is not None:
        return list(g._ranks)
    ranks = symmetry_classes(g)
    n = len(ranks)
    while len(set(ranks)) < n:
        seen: dict[int, int] = {}
        tied_rank = None
        for r in ranks:
            seen[r] = seen.get(r, 0) + 1
        tied_rank = min(r for r, c in seen.items() if c > 1)
        pick = ranks.index(tied_rank)
        ranks = [2 * r for r in ranks]
        ranks[pick] -= 1
        ranks = _refine(_dense_ranks(ranks), g._adj)
    g._ranks = tuple(ranks)
    return ranks


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------

def _atom_token(g: MolecularGraph, i: int) -> str:
    a = g.atoms[i]
    if a.is_wildcard:
        return f"[*:{a.atom_class}]" if a.atom_class else "*"
    symbol = a.element.lower() if a.aromatic else a.element
    bare_ok = (a.formal_charge == 0 and a.atom_class == 0
               and default_hydrogens(a.element, a.aromatic, g.bond_valence(i)) == a.implicit_hydrogens)
    if bare_ok:
        return symbol
    out = ["[", symbol]
    if a.implicit_hydrogens:
        out.append("H" if a.implicit_hydrogens == 1 else f"H{a.implicit_hydrogens}")
    if a.formal_charge:
        sign = "+" if a.formal_charge > 0 else "-"
        out.append(sign if abs(a.formal_charge) == 1 else f"{sign}{abs(a.formal_charge)}")
    if a.atom_class:
        out.append(f":{a.atom_class}")
    out.append("]")
    return "".join(out)


def _bond_token(g: MolecularGraph, u: int, v: int, order: BondOrder) -> str:
    both = g.atoms[u].aromatic and g.atoms[v].aromatic
    if order is BondOrder.SINGLE:
        return "-" if both else ""
    if order is BondOrder.AROMATIC:
        return "" if both else ":"
    return "=" if order is BondOrder.DOUBLE else "#"


def _ring_label(d: int) -> str:
    return str(d) if d < 10 else f"%{d}"


def _write_component(g: MolecularGraph, ranks: Sequence[int], start: int,
                     visited: list[bool], order: list[int]) -> str:
    # pass 1: DFS tree (neighbours in rank order) and ring-closure bonds
    seq = [start]
    parent = {start: -1}
    children: dict[int, list[int]] = {start: []}
    visited[start] = True
    stack = [(start, iter(sorted((b for b, _ in g.neighbors(start)), key=ranks.__getitem__)))]
    while stack:
        a, it = stack[-1]
        for b in it:
            if not visited[b]:
                visited[b] = True
                parent[b] = a
                children[a].append(b)
                children[b] = []
                seq.append(b)
                stack.append((b, iter(sorted((c for c, _ in g.neighbors(b)), key=ranks.__getitem__))))
                break
        else:
            stack.pop()
    pos = {a: k for k, a in enumerate(seq)}
    opens: dict[int, list[int]] = {a: [] for a in seq}
    closes: dict[int, list[int]] = {a: [] for a in seq}
    for bond in g.bonds:
        u, v = bond.begin, bond.end
        if u not in pos or parent.get(v) == u or parent.get(u) == v:
            continue
        first, second = (u, v) if pos[u] < pos[v] else (v, u)
        opens[first].append(second)
        closes[second].append(first)
    for a in seq:
        opens[a].sort(key=pos.__getitem__)

    out: list[str] = []
    free_digits: list[int] = []
    next_digit = [1]
    digit_of: dict[tuple[int, int], int] = {}

    def take_digit() -> int:
        if free_digits:
            free_digits.sort()
            return free_digits.pop(0)
        d = next_digit[0]
        next_digit[0] += 1
        return d

    # pass 2: emit, iterative DFS with explicit branch handling
    work: list = [("atom", start, -1)]
    while work:
        item = work.pop()
        if item[0] == "text":
            out.append(item[1])
            continue
        _, a, p = item
        if p != -1:
            out.append(_bond_token(g, p, a, g.bond_between(p, a).order))
        out.append(_atom_token(g, a))
        order.append(a)
        closing = sorted(closes[a], key=lambda b: digit_of[(b, a)])
        for b in closing:
            d = digit_of.pop((b, a))
            out.append(_bond_token(g, b, a, g.bond_between(b, a).order))
            out.append(_ring_label(d))
            free_digits.append(d)
        for b in opens[a]:
            d = take_digit()
            digit_of[(a, b)] = d
            out.append(_ring_label(d))
        kids = children[a]
        # last child continues the chain; earlier ones are branches
        tail = []
        for k, c in enumerate(kids):
            if k < len(kids) - 1:
                tail.append(("text", "("))
                tail.append(("atom", c, a))
                tail.append(("text", ")"))
            else:
                tail.append(("atom", c, a))
        work.extend(reversed(tail))
    return "".join(out)


def canonical_smiles_and_order(g: MolecularGraph, ranks: Sequence[int] | None = None) -> tuple[str, list[int]]:
    """Canonical SMILES plus the atom indices in the order they were written.

    ``ranks`` may be passed when already computed with ``canonical_ranks``.
    """
    if not g.atoms:
        return "", []
    if ranks is None:
        if g._canon is not None:
            return g._canon[0], list(g._canon[1])
        ranks = canonical_ranks(g)
    visited = [False] * len(g.atoms)
    parts = []
    # each component starts from its lowest-ranked atom of minimal degree
    for start in sorted(range(len(g.atoms)), key=lambda a: (g.degree(a), ranks[a])):
        if visited[start]:
            continue
        order: list[int] = []
        parts.append((_write_component(g, ranks, start, visited, order), order))
    if len(parts) > 1:
        parts.sort(key=lambda p: p[0])
    text = ".".join(p[0] for p in parts)
    order = [a for _, o in parts for a in o]
    if g._ranks is not None and tuple(ranks) == g._ranks:
        g._canon = (text, tuple(order))
    return text, order


def write_smiles(g: MolecularGraph) -> str:
    """Canonical SMILES; isomorphic graphs give identical strings."""
    return canonical_smiles_and_order(g)[0]


def canonicalize(text: str) -> str:
    return write_smiles(parse_smiles(text))


# ---------------------------------------------------------------------------
# isomorphism
# ---------------------------------------------------------------------------

def to_networkx(g: MolecularGraph) -> nx.Graph:
    G = nx.Graph()
    for a in g.atoms:
        G.add_node(a.index, label=(a.element, a.formal_charge, a.aromatic,
                                   a.implicit_hydrogens, a.atom_class))
    for b in g.bonds:
        G.add_edge(b.begin, b.end, order=int(b.order))
    return G


def graphs_isomorphic(a: MolecularGraph, b: MolecularGraph) -> bool:
    """True iff a bijection preserves element, charge, aromaticity, H count,
    atom class and bond orders. Uses VF2, independent of canonical ranking."""
    if len(a.atoms) != len(b.atoms) or len(a.bonds) != len(b.bonds):
        return False
    la = sorted((x.element, x.formal_charge, x.aromatic, x.implicit_hydrogens, x.atom_class) for x in a.atoms)
    lb = sorted((x.element, x.formal_charge, x.aromatic, x.implicit_hydrogens, x.atom_class) for x in b.atoms)
    if la != lb:
        return False
    matcher = isomorphism.GraphMatcher(
        to_networkx(a), to_networkx(b),
        node_match=lambda x, y: x["label"] == y["label"],
        edge_match=lambda x, y: x["order"] == y["order"],
    )
    return matcher.is_isomorphic()


# ---------------------------------------------------------------------------
# corpus input
# ---------------------------------------------------------------------------

class CorpusRecord(NamedTuple):
    line_no: int
    smiles: str
    identifier: str | None


class CorpusDiagnostic(NamedTuple):
    line_no: int
    offset: int | None
    message: str

    def __str__(self) -> str:
        col = f":{self.offset}" if self.offset is not None else ""
        return f"line {self.line_no}{col}: {self.message}"


def iter_corpus(lines: Iterable[str]) -> Iterator[CorpusRecord]:
    """Yield ``SMILES[<TAB>identifier]`` records; blank and ``#`` lines skipped."""
    for no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        smiles, _, ident = line.partition("\t")
        yield CorpusRecord(no, smiles.strip(), ident.strip() or None)


def read_corpus(lines: Iterable[str]) -> tuple[list[tuple[CorpusRecord, MolecularGraph]], list[CorpusDiagnostic]]:
    """Parse a corpus, collecting failures as diagnostics rather than raising."""
    good, bad = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StereoStrippedWarning)
        for rec in iter_corpus(lines):
            try:
                good.append((rec, parse_smiles(rec.smiles)))
            except SmilesError as exc:
                bad.append(CorpusDiagnostic(rec.line_no, exc.offset, exc.reason))
    return good, bad
