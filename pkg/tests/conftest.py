from __future__ import annotations

import random
from dataclasses import replace
from importlib import resources

import pytest

from blockchem.molgraph import Bond, MolecularGraph, parse_smiles

ACETANILIDE = "CC(=O)Nc1ccccc1"
BIPHENYL = "c1ccc(-c2ccccc2)cc1"


def _data_lines(name: str) -> list[str]:
    text = resources.files("blockchem").joinpath("data", name).read_text()
    return [line for line in text.splitlines() if line.strip()]


def corpus_smiles() -> list[str]:
    return _data_lines("corpus.smi")


def demo_smiles() -> list[str]:
    return _data_lines("demo.smi")


def relabel(g: MolecularGraph, order: list[int]) -> MolecularGraph:
    """New atom i is old atom order[i]; bonds listed in shuffled endpoint order.

    Built directly from atoms and bonds so tests do not lean on the library's
    own permutation helper.
    """
    new_of = {old: new for new, old in enumerate(order)}
    atoms = [replace(g.atoms[old], index=new) for new, old in enumerate(order)]
    bonds = [Bond(new_of[b.end], new_of[b.begin], b.order) for b in reversed(g.bonds)]
    return MolecularGraph(atoms, bonds, g.fragment_set)


def shuffled(g: MolecularGraph, rng: random.Random) -> MolecularGraph:
    order = list(range(len(g.atoms)))
    rng.shuffle(order)
    return relabel(g, order)


@pytest.fixture(scope="session")
def corpus() -> list[str]:
    return corpus_smiles()


@pytest.fixture(scope="session")
def corpus_graphs(corpus) -> list[MolecularGraph]:
    return [parse_smiles(s) for s in corpus]


@pytest.fixture(scope="session")
def demo_run(tmp_path_factory):
    """One demo pipeline run shared by the CLI and acceptance suites."""
    from demo_pipeline import run_demo

    return run_demo(tmp_path_factory.mktemp("demo"))


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
