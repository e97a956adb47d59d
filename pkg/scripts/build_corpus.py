"""Regenerate the bundled corpus, demo subset, surrogate table and records.

Run from the repository root::

    python3 scripts/build_corpus.py

The corpus mixes hand-written marketed-drug SMILES (stereo omitted) with
molecules assembled from the block pools in ``tests/molgen.py``. Outputs
land in ``src/blockchem/data``. RDKit is used, when installed, only as an
independent sanity check on the hand-written strings.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path[:0] = [str(ROOT / "src"), str(ROOT / "tests")]

from blockchem.molgraph import SmilesError, canonicalize, parse_smiles  # noqa: E402
from blockchem.oracle import ADMET_PROPERTIES, ContributionTable, Oracle, PropertyModel  # noqa: E402
from blockchem.tokenizer import tokenize  # noqa: E402
from blockchem.vocab import build_vocab  # noqa: E402
from molgen import MoleculeGenerator  # noqa: E402

DATA = ROOT / "src" / "blockchem" / "data"
N_GENERATED = 520
N_DEMO = 50
SEED = 20240601

DRUGS = {
    "aspirin": "CC(=O)Oc1ccccc1C(=O)O",
    "paracetamol": "CC(=O)Nc1ccc(O)cc1",
    "ibuprofen": "CC(C)Cc1ccc(C(C)C(=O)O)cc1",
    "caffeine": "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "imatinib": "Cc1ccc(NC(=O)c2ccc(CN3CCN(C)CC3)cc2)cc1Nc1nccc(-c2cccnc2)n1",
    "lidocaine": "CCN(CC)CC(=O)Nc1c(C)cccc1C",
    "procainamide": "CCN(CC)CCNC(=O)c1ccc(N)cc1",
    "metoclopramide": "CCN(CC)CCNC(=O)c1cc(Cl)c(N)cc1OC",
    "atenolol": "CC(C)NCC(O)COc1ccc(CC(N)=O)cc1",
    "propranolol": "CC(C)NCC(O)COc1cccc2ccccc12",
    "diclofenac": "OC(=O)Cc1ccccc1Nc1c(Cl)cccc1Cl",
    "naproxen": "COc1ccc2cc(C(C)C(=O)O)ccc2c1",
    "celecoxib": "Cc1ccc(-c2cc(C(F)(F)F)nn2-c2ccc(S(N)(=O)=O)cc2)cc1",
    "fluoxetine": "CNCCC(Oc1ccc(C(F)(F)F)cc1)c1ccccc1",
    "sertraline": "CNC1CCC(c2ccc(Cl)c(Cl)c2)c2ccccc21",
    "diazepam": "CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21",
    "nifedipine": "COC(=O)C1=C(C)NC(C)=C(C(=O)OC)C1c1ccccc1[N+](=O)[O-]",
    "amlodipine": "CCOC(=O)C1=C(COCCN)NC(C)=C(C(=O)OC)C1c1ccccc1Cl",
    "losartan": "CCCCc1nc(Cl)c(CO)n1Cc1ccc(-c2ccccc2-c2nn[nH]n2)cc1",
    "valsartan": "CCCCC(=O)N(Cc1ccc(-c2ccccc2-c2nn[nH]n2)cc1)C(C(C)C)C(=O)O",
    "metformin": "CN(C)C(=N)NC(N)=N",
    "sildenafil": "CCCc1nn(C)c2c(=O)[nH]c(-c3cc(S(=O)(=O)N4CCN(C)CC4)ccc3OCC)nc12",
    "gefitinib": "COc1cc2ncnc(Nc3ccc(F)c(Cl)c3)c2cc1OCCCN1CCOCC1",
    "erlotinib": "COCCOc1cc2ncnc(Nc3cccc(C#C)c3)c2cc1OCCOC",
    "nilotinib": "Cc1cn(-c2cc(NC(=O)c3ccc(C)c(Nc4nccc(-c5cccnc5)n4)c3)cc(C(F)(F)F)c2)cn1",
    "dasatinib": "Cc1nc(Nc2ncc(C(=O)Nc3c(C)cccc3Cl)s2)cc(N2CCN(CCO)CC2)n1",
    "sorafenib": "CNC(=O)c1cc(Oc2ccc(NC(=O)Nc3ccc(Cl)c(C(F)(F)F)c3)cc2)ccn1",
    "linezolid": "CC(=O)NCC1CN(c2ccc(N3CCOCC3)c(F)c2)C(=O)O1",
    "ciprofloxacin": "OC(=O)c1cn(C2CC2)c2cc(N3CCNCC3)c(F)cc2c1=O",
    "chloroquine": "CCN(CC)CCCC(C)Nc1ccnc2cc(Cl)ccc12",
    "haloperidol": "OC1(c2ccc(Cl)cc2)CCN(CCCC(=O)c2ccc(F)cc2)CC1",
    "risperidone": "Cc1nc2n(c(=O)c1CCN1CCC(c3noc4cc(F)ccc34)CC1)CCCC2",
    "olanzapine": "Cc1cc2c(s1)Nc1ccccc1N=C2N1CCN(C)CC1",
    "clozapine": "CN1CCN(C2=Nc3cc(Cl)ccc3Nc3ccccc32)CC1",
    "loratadine": "CCOC(=O)N1CCC(=C2c3ccc(Cl)cc3CCc3cccnc32)CC1",
    "cetirizine": "OC(=O)COCCN1CCN(C(c2ccccc2)c2ccc(Cl)cc2)CC1",
    "omeprazole": "COc1ccc2[nH]c(S(=O)Cc3ncc(C)c(OC)c3C)nc2c1",
    "ranitidine": "CNC(=C[N+](=O)[O-])NCCSCc1ccc(CN(C)C)o1",
    "furosemide": "NS(=O)(=O)c1cc(C(=O)O)c(NCc2ccco2)cc1Cl",
    "hydrochlorothiazide": "NS(=O)(=O)c1cc2c(cc1Cl)NCNS2(=O)=O",
    "warfarin": "CC(=O)CC(c1ccccc1)c1c(O)c2ccccc2oc1=O",
    "tamoxifen": "CCC(=C(c1ccccc1)c1ccc(OCCN(C)C)cc1)c1ccccc1",
    "verapamil": "COc1ccc(CCN(C)CCCC(C#N)(C(C)C)c2ccc(OC)c(OC)c2)cc1OC",
    "donepezil": "COc1cc2c(cc1OC)C(=O)C(CC1CCN(Cc3ccccc3)CC1)C2",
    "zolpidem": "Cc1ccc(-c2nc3ccc(C)cn3c2CC(=O)N(C)C)cc1",
    "buspirone": "O=C1CC2(CCCC2)CC(=O)N1CCCCN1CCN(c2ncccn2)CC1",
    "trazodone": "O=c1n(CCCN2CCN(c3cccc(Cl)c3)CC2)nc2ccccn12",
    "aripiprazole": "O=C1CCc2ccc(OCCCCN3CCN(c4cccc(Cl)c4Cl)CC3)cc2N1",
    "quetiapine": "OCCOCCN1CCN(C2=Nc3ccccc3Sc3ccccc32)CC1",
    "venlafaxine": "COc1ccc(C(CN(C)C)C2(O)CCCCC2)cc1",
    "bupropion": "CC(NC(C)(C)C)C(=O)c1cccc(Cl)c1",
    "tramadol": "COc1cccc(C2(O)CCCCC2CN(C)C)c1",
    "indomethacin": "COc1ccc2c(c1)c(CC(=O)O)c(C)n2C(=O)c1ccc(Cl)cc1",
    "ketoprofen": "CC(C(=O)O)c1cccc(C(=O)c2ccccc2)c1",
    "mefenamic_acid": "Cc1cccc(Nc2ccccc2C(=O)O)c1C",
    "piroxicam": "CN1C(C(=O)Nc2ccccn2)=C(O)c2ccccc2S1(=O)=O",
    "meloxicam": "Cc1cnc(NC(=O)C2=C(O)c3ccccc3S(=O)(=O)N2C)s1",
    "glibenclamide": "COc1ccc(Cl)cc1C(=O)NCCc1ccc(S(=O)(=O)NC(=O)NC2CCCCC2)cc1",
    "glipizide": "Cc1cnc(C(=O)NCCc2ccc(S(=O)(=O)NC(=O)NC3CCCCC3)cc2)cn1",
    "pioglitazone": "CCc1ccc(CCOc2ccc(CC3SC(=O)NC3=O)cc2)nc1",
    "rosiglitazone": "CN(CCOc1ccc(CC2SC(=O)NC2=O)cc1)c1ccccn1",
    "sitagliptin": "NC(CC(=O)N1CCn2c(nnc2C(F)(F)F)C1)Cc1cc(F)c(F)cc1F",
    "apixaban": "COc1ccc(-n2nc(C(N)=O)c3c2C(=O)N(c2ccc(N4CCCCC4=O)cc2)CC3)cc1",
    "rivaroxaban": "O=C(NCC1CN(c2ccc(N3CCOCC3=O)cc2)C(=O)O1)c1ccc(Cl)s1",
    "clopidogrel": "COC(=O)C(c1ccccc1Cl)N1CCc2sccc2C1",
    "atorvastatin": "CC(C)c1c(C(=O)Nc2ccccc2)c(-c2ccccc2)c(-c2ccc(F)cc2)n1CCC(O)CC(O)CC(=O)O",
    "acyclovir": "Nc1nc2c(ncn2COCCO)c(=O)[nH]1",
    "fluconazole": "OC(Cn1cncn1)(Cn1cncn1)c1ccc(F)cc1F",
    "ketoconazole": "CC(=O)N1CCN(c2ccc(OCC3COC(Cn4ccnc4)(c4ccc(Cl)cc4Cl)O3)cc2)CC1",
    "sulfamethoxazole": "Cc1cc(NS(=O)(=O)c2ccc(N)cc2)no1",
    "trimethoprim": "COc1cc(Cc2cnc(N)nc2N)cc(OC)c1OC",
    "metronidazole": "Cc1ncc([N+](=O)[O-])n1CCO",
    "isoniazid": "NNC(=O)c1ccncc1",
    "pyrazinamide": "NC(=O)c1cnccn1",
    "ondansetron": "Cc1nccn1CC1CCc2c(c3ccccc3n2C)C1=O",
    "prazosin": "COc1cc2nc(N3CCN(C(=O)c4ccco4)CC3)nc(N)c2cc1OC",
    "dapsone": "Nc1ccc(S(=O)(=O)c2ccc(N)cc2)cc1",
    "bicalutamide": "CC(O)(CS(=O)(=O)c1ccc(F)cc1)C(=O)Nc1ccc(C#N)c(C(F)(F)F)c1",
    "flutamide": "CC(C)C(=O)Nc1ccc([N+](=O)[O-])c(C(F)(F)F)c1",
    "vemurafenib": "CCCS(=O)(=O)Nc1ccc(F)c(C(=O)c2c[nH]c3ncc(-c4ccc(Cl)cc4)cc23)c1F",
    "ibrutinib": "C=CC(=O)N1CCCC(n2nc(-c3ccc(Oc4ccccc4)cc3)c3c(N)ncnc32)C1",
    "pazopanib": "Cc1ccc(Nc2nccc(N(C)c3ccc4c(C)n(C)nc4c3)n2)cc1S(N)(=O)=O",
    "moclobemide": "O=C(NCCN1CCOCC1)c1ccc(Cl)cc1",
    "bromhexine": "CN(Cc1cc(Br)cc(Br)c1N)C1CCCCC1",
    "amiodarone": "CCCCc1oc2ccccc2c1C(=O)c1cc(I)c(OCCN(CC)CC)c(I)c1",
    "benzocaine": "CCOC(=O)c1ccc(N)cc1",
    "phenytoin": "O=C1NC(=O)C(c2ccccc2)(c2ccccc2)N1",
    "carbamazepine": "NC(=O)N1c2ccccc2C=Cc2ccccc21",
    "lamotrigine": "Nc1nnc(-c2cccc(Cl)c2Cl)c(N)n1",
    "levetiracetam": "CCC(C(N)=O)N1CCCC1=O",
    "gabapentin": "NCC1(CC(=O)O)CCCCC1",
    "baclofen": "NCC(CC(=O)O)c1ccc(Cl)cc1",
    "salbutamol": "CC(C)(C)NCC(O)c1ccc(O)c(CO)c1",
    "theophylline": "Cn1c(=O)c2[nH]cnc2n(C)c1=O",
    "allopurinol": "O=c1[nH]cnc2[nH]ncc12",
    "nicotinamide": "NC(=O)c1cccnc1",
    "niacin": "OC(=O)c1cccnc1",
    "practolol": "CC(=O)Nc1ccc(OCC(O)CNC(C)C)cc1",
    "phenacetin": "CCOc1ccc(NC(C)=O)cc1",
    "bosutinib": "COc1cc(Nc2c(C#N)cnc3cc(OCCCN4CCN(C)CC4)c(OC)cc23)c(Cl)cc1Cl",
    "lapatinib": "CS(=O)(=O)CCNCc1ccc(-c2ccc3ncnc(Nc4ccc(OCc5cccc(F)c5)c(Cl)c4)c3c2)o1",
    "telmisartan": "CCCc1nc2c(C)cc(-c3nc4ccccc4n3C)cc2n1Cc1ccc(-c2ccccc2C(=O)O)cc1",
}


def _rdkit_ok(smiles: str) -> bool:
    try:
        from rdkit import Chem, RDLogger
    except ImportError:
        return True
    RDLogger.DisableLog("rdApp.*")
    return Chem.MolFromSmiles(smiles) is not None


def corpus() -> list[str]:
    out: dict[str, None] = {}
    for name, smi in DRUGS.items():
        try:
            canon = canonicalize(smi)
        except SmilesError as exc:
            print(f"skip {name}: {exc}", file=sys.stderr)
            continue
        if not _rdkit_ok(smi):
            print(f"skip {name}: rejected by RDKit", file=sys.stderr)
            continue
        out.setdefault(canon)
    gen = MoleculeGenerator(seed=SEED, conflict_rate=0.25, max_blocks=5)
    for smi in gen.unique(N_GENERATED):
        assert _rdkit_ok(smi), smi
        out.setdefault(canonicalize(smi))
    return list(out)


def contribution_table(forms: list[str], seed: int) -> ContributionTable:
    """Seeded random per-block contributions for every ADMET endpoint."""
    rng = random.Random(seed)
    models = {}
    for prop in ADMET_PROPERTIES:
        contrib = {f: round(rng.gauss(0.0, 0.8), 6) for f in forms}
        models[prop] = PropertyModel(bias=round(rng.gauss(0.0, 0.3), 6), threshold=0.5, contributions=contrib)
    return ContributionTable(models)


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    mols = corpus()
    rng = random.Random(SEED)
    demo = sorted(rng.sample(mols, N_DEMO))
    (DATA / "corpus.smi").write_text("\n".join(mols) + "\n")
    (DATA / "demo.smi").write_text("\n".join(demo) + "\n")

    results = [tokenize(parse_smiles(s)) for s in mols]
    vocab = build_vocab(results, cap_budget=500, mid_budget=500)
    table = contribution_table(list(vocab.forms), SEED)
    table.save(DATA / "demo_contributions.json")

    oracle = Oracle(table)
    lines = ["smiles,property,value"]
    for smi in mols:
        g = parse_smiles(smi)
        for prop in ADMET_PROPERTIES:
            lines.append(f"{smi},{prop},{oracle.label(g, prop)}")
        # a numerical endpoint for the regression task, reusing the HIA logit
        lines.append(f"{smi},SOLUBILITY,{round(table['HIA'].logit(oracle.blocks(g)) - 2.0, 3)}")
    (DATA / "demo_records.csv").write_text("\n".join(lines) + "\n")
    print(f"corpus {len(mols)} molecules, demo {len(demo)}, vocab {len(vocab)}", file=sys.stderr)


if __name__ == "__main__":
    main()
