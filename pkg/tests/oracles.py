"""Independent reference implementations used as test oracles.

Each one recomputes a library result by a different route: exhaustive
enumeration, exact rationals, or a third-party toolkit. None of them import
the library code path they check.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from fractions import Fraction

# SMARTS twins of the default conflict patterns, applied with RDKit to a
# block's canonical form (wildcard map number = role code).
AMINE_SMARTS = "[N;!a;+0;!H0;!$(N=,#,:*);!$(N-[!#6]);!$(N-c);!$(N-[#6]=,#,:*)]"
ACID_SMARTS = "[C;!a;$(C=O);$(C-[O;D1;!H0,-])]"
ARYL_HANDLE_SMARTS = "[c;$(c-[Br,I,B])]"


def rdkit_conflicts(canonical_form: str) -> list[tuple[str, int]]:
    """Off-attachment conflict hits for a block, found with RDKit SMARTS."""
    from rdkit import Chem

    mol = Chem.MolFromSmiles(canonical_form)
    if mol is None:
        raise ValueError(f"RDKit cannot read {canonical_form!r}")
    dummies = [a for a in mol.GetAtoms() if a.GetAtomicNum() == 0]
    sites = {n.GetIdx() for d in dummies for n in d.GetNeighbors()}
    roles = {d.GetAtomMapNum() for d in dummies}

    def hits(smarts, allowed=None):
        patt = Chem.MolFromSmarts(smarts)
        found = {m[0] for m in mol.GetSubstructMatches(patt)}
        return sorted(i for i in found - sites if allowed is None or i in allowed)

    out = []
    if roles & {2, 6}:
        out += [("unprotected_amine", i) for i in hits(AMINE_SMARTS)]
    if 1 in roles:
        out += [("free_carboxylic_acid", i) for i in hits(ACID_SMARTS)]
    for role in roles & {3, 4}:
        own = {n.GetIdx() for d in dummies if d.GetAtomMapNum() == role for n in d.GetNeighbors()}
        system = set()
        for start in own:
            stack, seen = [start], {start}
            while stack:
                a = mol.GetAtomWithIdx(stack.pop())
                for b in a.GetBonds():
                    o = b.GetOtherAtomIdx(a.GetIdx())
                    if b.IsInRing() and o not in seen:
                        seen.add(o)
                        stack.append(o)
            if len(seen) > 1:
                system |= seen
        out += [("second_aryl_coupling_site", i) for i in hits(ARYL_HANDLE_SMARTS, system)]
    return out


def hand_dot(a, b) -> float:
    """Correctly rounded dot product of two float sequences."""
    return math.fsum(x * y for x, y in zip(a, b))


def exact_softmax_loss(weights, targets) -> float:
    """Mean -log p(target) when each row's logits are ln(weight).

    The softmax of ln(q) is q / sum(q), so every probability is an exact
    fraction and only the final logarithm rounds.
    """
    losses = []
    for q, t in zip(weights, targets):
        p = Fraction(q[t], sum(q))
        losses.append(-math.log(p.numerator) + math.log(p.denominator))
    return math.fsum(losses) / len(losses)


def brute_f1(scores, labels, threshold) -> float:
    pred = [s >= threshold for s in scores]
    tp = sum(p and y == 1 for p, y in zip(pred, labels))
    fp = sum(p and y == 0 for p, y in zip(pred, labels))
    fn = sum((not p) and y == 1 for p, y in zip(pred, labels))
    return 2 * tp / (2 * tp + fp + fn) if tp + fp + fn else 0.0


def threshold_sweep(scores) -> list[float]:
    """Every score, every midpoint, both ends, and a fine grid."""
    s = sorted(set(scores))
    mids = [(a + b) / 2 for a, b in zip(s, s[1:])]
    return sorted(set(s + mids + [min(s) - 1, max(s) + 1] + [k / 1000 for k in range(1001)]))


def rdkit_scaffold_key(smiles: str) -> str:
    """Murcko scaffold from RDKit, as canonical RDKit SMILES ("" if acyclic)."""
    from rdkit import Chem
    from rdkit.Chem.Scaffolds import MurckoScaffold

    core = MurckoScaffold.GetScaffoldForMol(Chem.MolFromSmiles(smiles))
    return Chem.MolToSmiles(core) if core.GetNumAtoms() else ""


def exact_pop_variance(values) -> Fraction:
    xs = [Fraction(v) for v in values]
    mean = sum(xs) / len(xs)
    return sum((x - mean) ** 2 for x in xs) / len(xs)


def brute_cliffs(records, key, allow_empty_scaffold=False) -> set[tuple]:
    """All same-scaffold cliff pairs by checking every record pair.

    ``records`` are (molecule, property, value, numerical) tuples. The sigma
    gate compares delta**2 with the exact population variance.
    """
    first = {}
    for mol, prop, value, numerical in records:
        first.setdefault((prop, mol), (value, numerical))
    by_prop = {}
    for (prop, mol), (value, numerical) in first.items():
        by_prop.setdefault(prop, []).append((mol, value, numerical))
    out = set()
    for prop, recs in by_prop.items():
        var = exact_pop_variance([v for _, v, _ in recs])
        for (ma, va, num), (mb, vb, _) in itertools.combinations(recs, 2):
            ka, kb = key(ma), key(mb)
            if ka != kb or (ka == "" and not allow_empty_scaffold):
                continue
            if num:
                d = Fraction(vb) - Fraction(va)
                if var > 0 and d * d >= var:
                    lo, hi = (ma, mb) if va <= vb else (mb, ma)
                    out.add((prop, "SameScaffoldDeltaGE1Sigma", lo, hi))
            elif va != vb:
                lo, hi = (ma, mb) if va == 0 else (mb, ma)
                out.add((prop, "SameScaffoldOppositeLabel", lo, hi))
    return out


def brute_diff_scaffold(records, key) -> set[tuple]:
    """Every positive-positive pair with distinct scaffolds (no fan-out cap).

    Like the miner, the first record per (property, molecule) wins.
    """
    first = {}
    for mol, prop, value, _ in records:
        first.setdefault((prop, mol), value)
    by_prop = {}
    for (prop, mol), value in first.items():
        if value == 1:
            by_prop.setdefault(prop, set()).add(mol)
    out = set()
    for prop, mols in by_prop.items():
        for a, b in itertools.combinations(sorted(mols), 2):
            if key(a) != key(b):
                out.add((prop, "DiffScaffoldSameProperty", a, b))
    return out


def pair_tally(pairs) -> Counter:
    return Counter(m for p in pairs for m in (p[2], p[3]))


def tally_modifications(trace_docs) -> list[tuple[str, str, int]]:
    """Accepted ReplaceBlock counts read straight from trace JSON documents."""
    counts = Counter()
    for doc in trace_docs:
        for step in doc["steps"]:
            if step["accepted"] and step["kind"] == "ReplaceBlock":
                counts[step["old_block"], step["new_block"]] += 1
    return sorted(((a, b, n) for (a, b), n in counts.items()), key=lambda row: (-row[2], row[0], row[1]))


def _midranks(xs) -> list[Fraction]:
    """rank = count below + (count equal + 1) / 2, as exact fractions."""
    return [sum(y < x for y in xs) + Fraction(sum(y == x for y in xs) + 1, 2) for x in xs]


def brute_wilcoxon(before, after, zero_method="pratt", alternative="two-sided") -> tuple[float, float]:
    """(W+, p) by listing all 2**n sign assignments of the non-zero ranks."""
    d = [Fraction(a) - Fraction(b) for b, a in zip(before, after)]
    if zero_method == "pratt":
        ranks = [r for r, x in zip(_midranks([abs(x) for x in d]), d) if x != 0]
        d = [x for x in d if x != 0]
    else:
        d = [x for x in d if x != 0]
        ranks = _midranks([abs(x) for x in d])
    w = sum((r for r, x in zip(ranks, d) if x > 0), Fraction(0))
    centre = sum(ranks, Fraction(0)) / 2
    hits = 0
    for signs in itertools.product((False, True), repeat=len(ranks)):
        s = sum((r for r, pos in zip(ranks, signs) if pos), Fraction(0))
        if alternative == "greater":
            hits += s >= w
        elif alternative == "less":
            hits += s <= w
        else:
            hits += abs(s - centre) >= abs(w - centre)
    return float(w), float(Fraction(hits, 2 ** len(ranks)))
