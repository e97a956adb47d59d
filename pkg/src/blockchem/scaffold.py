"""Bemis-Murcko scaffolds used as the activity-cliff equivalence key."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .molgraph import BondOrder, MolecularGraph, write_smiles

EMPTY_SCAFFOLD = ""


class FragmentSetError(ValueError):
    """Raised when a multi-component (dotted) molecule is given where one is required."""


@dataclass(frozen=True)
class ScaffoldKey:
    canonical_form: str

    @property
    def is_empty(self) -> bool:
        return self.canonical_form == EMPTY_SCAFFOLD

    def __str__(self) -> str:
        return self.canonical_form


def require_single_component(g: MolecularGraph) -> None:
    if g.fragment_set or len(g.components()) > 1:
        raise FragmentSetError("fragment sets are not accepted here")


def murcko_scaffold(g: MolecularGraph) -> MolecularGraph:
    """Ring systems plus the linker paths between them.

    Terminal non-ring atoms are stripped repeatedly. A stripped atom that was
    terminal in the input and double-bonded to a kept atom (ring carbonyl,
    linker amide oxygen, sulfone oxygens) is restored afterwards. Atoms that
    lose neighbours gain the matching hydrogens, so the result is a valid
    molecule. Acyclic input gives an empty graph.
    """
    require_single_component(g)
    n = len(g.atoms)
    if not any(g.in_ring(a) for a in range(n)):
        return MolecularGraph([], [])
    alive = [True] * n
    degree = [g.degree(a) for a in range(n)]
    queue = [a for a in range(n) if degree[a] <= 1 and not g.in_ring(a)]
    while queue:
        a = queue.pop()
        if not alive[a]:
            continue
        alive[a] = False
        for b, _ in g.neighbors(a):
            if alive[b]:
                degree[b] -= 1
                if degree[b] <= 1 and not g.in_ring(b):
                    queue.append(b)
    for a in range(n):
        if not alive[a] and g.degree(a) == 1:
            b, order = g.neighbors(a)[0]
            if order is BondOrder.DOUBLE and alive[b]:
                alive[a] = True

    keep = [a for a in range(n) if alive[a]]
    sub = g.subgraph(keep)
    pos = {a: i for i, a in enumerate(keep)}
    atoms = list(sub.atoms)
    for a in keep:
        lost = sum(order.valence for b, order in g.neighbors(a) if not alive[b])
        if lost:
            atom = atoms[pos[a]]
            atoms[pos[a]] = replace(atom, implicit_hydrogens=atom.implicit_hydrogens + lost)
    return MolecularGraph(atoms, sub.bonds)


def scaffold_key(g: MolecularGraph) -> ScaffoldKey:
    """Canonical SMILES of the Murcko scaffold; empty string for acyclic molecules."""
    return ScaffoldKey(write_smiles(murcko_scaffold(g)))
