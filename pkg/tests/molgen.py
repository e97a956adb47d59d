"""Random molecules assembled from hand-written building blocks.

Used by the fuzz suites and by ``scripts/build_corpus.py``. Pools include
blocks that carry competing groups (free amines, acids, aryl halides) so the
conflict rules are exercised.
"""

from __future__ import annotations

import random

from blockchem.molgraph import MolecularGraph, parse_smiles, write_smiles
from blockchem.tokenizer import BuildingBlock, Junction, complement_role, reassemble

CAPS = {
    1: ["[*:1]C(C)=O", "[*:1]C(=O)c1ccccc1", "[*:1]C(=O)c1ccc(F)cc1", "[*:1]C(=O)C1CC1",
        "[*:1]C(=O)c1ccco1", "[*:1]C(=O)c1cccnc1", "[*:1]C(=O)CCc1ccccc1", "[*:1]C(=O)OC(C)(C)C",
        "[*:1]C(=O)c1ccc(OC)cc1", "[*:1]C(=O)C(C)C", "[*:1]C(=O)c1cccs1", "[*:1]C(=O)COc1ccccc1",
        "[*:1]C(=O)c1ccc2ccccc2c1", "[*:1]C(=O)C1CCOCC1"],
    2: ["[*:2]Nc1ccccc1", "[*:2]N1CCOCC1", "[*:2]N1CCCC1", "[*:2]NCc1ccccc1", "[*:2]NC1CCCCC1",
        "[*:2]N(C)C", "[*:2]NCCc1ccccc1", "[*:2]Nc1ccc(Cl)cc1", "[*:2]N1CCN(C)CC1", "[*:2]NCc1ccco1",
        "[*:2]Nc1ccncc1", "[*:2]NC(C)C", "[*:2]N1CCC(O)CC1", "[*:2]NCC(F)(F)F"],
    3: ["[*:3]c1ccccc1", "[*:3]c1ccc(F)cc1", "[*:3]c1cccnc1", "[*:3]c1ccc(OC)cc1", "[*:3]c1ccsc1",
        "[*:3]c1ccc(C#N)cc1", "[*:3]c1cnn(C)c1", "[*:3]c1ccc2OCOc2c1"],
    4: ["[*:4]c1ccccc1", "[*:4]c1ccc(C)cc1", "[*:4]c1ccncc1", "[*:4]c1cccc(Cl)c1", "[*:4]c1ccoc1",
        "[*:4]c1ccc(C(F)(F)F)cc1", "[*:4]c1cncnc1"],
    5: ["[*:5]c1ccccc1", "[*:5]c1ccc(F)cc1", "[*:5]c1ccncc1", "[*:5]c1ncccn1", "[*:5]c1ccc(C)cc1",
        "[*:5]c1cccc(OC)c1"],
    6: ["[*:6]N1CCOCC1", "[*:6]N1CCN(C)CC1", "[*:6]N1CCCCC1", "[*:6]NC1CC1", "[*:6]N(C)Cc1ccccc1",
        "[*:6]NCCOC", "[*:6]N1CCCC1"],
}
# caps with a competing site for their own coupling
CONFLICT_CAPS = {
    1: ["[*:1]C(=O)CCC(=O)O", "[*:1]C(=O)c1ccc(C(=O)O)cc1"],
    2: ["[*:2]NCCN", "[*:2]NCCCNC", "[*:2]N1CCNCC1"],
    3: ["[*:3]c1ccc(Br)cc1", "[*:3]c1ccc(B(O)O)cc1"],
    4: ["[*:4]c1cc(I)ccc1", "[*:4]c1ccc(Br)cn1"],
    5: ["[*:5]c1ccc(Br)cc1"],
    6: ["[*:6]N1CCNCC1", "[*:6]NCCN"],
}
MIDS = [
    "[*:2]NCC([*:1])=O", "[*:2]NC(C)C([*:1])=O", "[*:2]NCCC([*:1])=O", "[*:1]C(=O)c1ccc([*:3])cc1",
    "[*:2]Nc1ccc([*:3])cc1", "[*:1]C(=O)c1ccc(N[*:2])cc1", "[*:2]N1CCN([*:6])CC1",
    "[*:5]c1ccc(C([*:1])=O)cc1", "[*:4]c1ccc(N[*:2])cc1", "[*:3]c1ccc([*:5])cc1", "[*:1]C(=O)c1cccc([*:4])c1",
    "[*:2]N1CCC(CC1)C([*:1])=O", "[*:5]c1ccc([*:3])nc1", "[*:2]NCc1ccc([*:4])cc1", "[*:2]N1CCC(N[*:2])CC1",
    "[*:6]N1CCC(CC1)N[*:2]",
]


def _block(form: str) -> BuildingBlock:
    return BuildingBlock.from_fragment(parse_smiles(form))


class MoleculeGenerator:
    """Random block trees closed off with caps."""

    def __init__(self, seed: int = 0, conflict_rate: float = 0.0, max_blocks: int = 5):
        self.rng = random.Random(seed)
        self.conflict_rate = conflict_rate
        self.max_blocks = max_blocks
        self.caps = {r: [_block(f) for f in fs] for r, fs in CAPS.items()}
        self.conflict_caps = {r: [_block(f) for f in fs] for r, fs in CONFLICT_CAPS.items()}
        self.mids = [_block(f) for f in MIDS]

    def _cap(self, role: int) -> BuildingBlock:
        if self.conflict_caps.get(role) and self.rng.random() < self.conflict_rate:
            return self.rng.choice(self.conflict_caps[role])
        return self.rng.choice(self.caps[role])

    def graph(self) -> MolecularGraph:
        rng = self.rng
        target = rng.randint(2, self.max_blocks)
        first = rng.choice(self.mids) if target > 2 and rng.random() < 0.8 else self._cap(rng.randint(1, 6))
        blocks = [first]
        open_sites = [(0, i) for i in range(len(first.attachments))]
        links = []
        while open_sites:
            k = rng.randrange(len(open_sites))
            bi, ai = open_sites.pop(k)
            need = complement_role(blocks[bi].attachments[ai].role)
            room = target - len(blocks) - len(open_sites)
            mids = [m for m in self.mids if need in m.roles and len(m.attachments) - 1 <= room - 1]
            if mids and room > 1 and rng.random() < 0.6:
                nb = rng.choice(mids)
            else:
                nb = self._cap(need)
            j = len(blocks)
            blocks.append(nb)
            partner = [i for i, att in enumerate(nb.attachments) if att.role == need]
            pa = rng.choice(partner)
            links.append(((bi, ai), (j, pa)))
            open_sites.extend((j, i) for i in range(len(nb.attachments)) if i != pa)
        stamps = [[0] * len(b.attachments) for b in blocks]
        junctions = []
        for jid, (e1, e2) in enumerate(links, 1):
            stamps[e1[0]][e1[1]] = jid
            stamps[e2[0]][e2[1]] = jid
            junctions.append(Junction(jid, blocks[e1[0]].attachments[e1[1]].reaction, (e1, e2)))
        stamped = [b.with_junctions(s) for b, s in zip(blocks, stamps)]
        return reassemble(stamped, junctions)

    def smiles(self) -> str:
        return write_smiles(self.graph())

    def unique(self, n: int) -> list[str]:
        seen: dict[str, None] = {}
        tries = 0
        while len(seen) < n:
            seen.setdefault(self.smiles())
            tries += 1
            if tries > 50 * n:
                raise RuntimeError("block pools too small for the requested count")
        return list(seen)
