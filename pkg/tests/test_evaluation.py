from __future__ import annotations

import random
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from blockchem.evaluation import (
    AllZeroDifferencesWarning, EvalReport, PropertyRow, batch_evaluate, exact_distribution, signed_ranks,
    wilcoxon_signed_rank,
)
from blockchem.molgraph import write_smiles
from blockchem.oracle import ADMET_PROPERTIES
from blockchem.reason import Direction
from conftest import corpus_smiles
from oracles import brute_wilcoxon


def test_five_positive_differences():
    before, after = [0] * 5, [1, 2, 3, 4, 5]
    one = wilcoxon_signed_rank(before, after, zero_method="wilcox", alternative="greater")
    two = wilcoxon_signed_rank(before, after, zero_method="wilcox")
    assert one.statistic == 15 and one.n_effective == 5
    assert one.p_value == 0.03125
    assert two.p_value == 0.0625
    assert brute_wilcoxon(before, after, "wilcox", "greater") == (15.0, 0.03125)


def test_eight_mixed_signs():
    before = [1.83, 0.50, 1.62, 2.48, 1.68, 1.88, 1.55, 3.06]
    after = [0.878, 0.647, 0.598, 2.05, 1.06, 1.29, 1.06, 3.14]
    got = wilcoxon_signed_rank(before, after)
    w, p = brute_wilcoxon(before, after)
    assert got.statistic == w and got.n_effective == 8
    assert got.p_value == pytest.approx(p, abs=1e-12)
    # W+ = ranks of the two increases (0.147 -> 2, 0.08 -> 1)
    assert w == 3.0 and p == pytest.approx(10 / 256, abs=1e-15)


def test_identical_sets():
    with pytest.warns(AllZeroDifferencesWarning):
        r = wilcoxon_signed_rank([0.2, 0.4, 0.6], [0.2, 0.4, 0.6])
    assert r.p_value == 1.0 and r.statistic == 0.0 and r.n_effective == 0


def test_shift_n10():
    before = [i / 20 for i in range(10)]
    after = [b + 0.1 for b in before]
    assert wilcoxon_signed_rank(before, after).p_value == pytest.approx(2 / 1024, abs=1e-15)


@pytest.mark.parametrize("bad", [([], []), ([1.0], [1.0, 2.0])])
def test_bad_lengths(bad):
    with pytest.raises(ValueError):
        wilcoxon_signed_rank(*bad)


def test_unknown_method():
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([0, 1], [1, 2], method="bootstrap")


def test_pratt_keeps_zero_in_ranking():
    # |d| = 0, 1, 2: Pratt ranks 2 and 3 for the non-zero ones, classic ranks 1 and 2
    assert signed_ranks([0, 0, 0], [0, 1, -2], "pratt") == ([2.0, 3.0], [True, False])
    assert signed_ranks([0, 0, 0], [0, 1, -2], "wilcox") == ([1.0, 2.0], [True, False])


def test_exact_distribution_small():
    # ranks 1, 2 doubled to 2, 4: sums 0, 2, 4, 6 once each
    assert exact_distribution([2, 4]) == [1, 0, 1, 0, 1, 0, 1]


small_diffs = st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=1, max_size=12)


@settings(max_examples=150, deadline=None)
@given(small_diffs, st.sampled_from(["pratt", "wilcox"]), st.sampled_from(["two-sided", "greater", "less"]))
def test_exact_matches_brute_force(pairs, zero_method, alternative):
    before = [b / 4 for b, _ in pairs]
    after = [a / 4 for _, a in pairs]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AllZeroDifferencesWarning)
        got = wilcoxon_signed_rank(before, after, zero_method, alternative, method="exact")
    if got.n_effective == 0:
        assert got.p_value == 1.0
        return
    w, p = brute_wilcoxon(before, after, zero_method, alternative)
    assert got.statistic == w
    assert got.p_value == pytest.approx(p, abs=1e-12)
    assert 0.0 <= got.p_value <= 1.0


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("alternative", ["two-sided", "greater"])
def test_exact_matches_scipy(seed, alternative):
    stats = pytest.importorskip("scipy.stats")
    rng = random.Random(seed)
    before = [rng.random() for _ in range(15)]
    after = [b + rng.gauss(0.05, 0.2) for b in before]
    ours = wilcoxon_signed_rank(before, after, "wilcox", alternative, method="exact")
    theirs = stats.wilcoxon(after, before, zero_method="wilcox", alternative=alternative, method="exact")
    assert ours.p_value == pytest.approx(theirs.pvalue, abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_normal_approximation_at_25(seed):
    rng = random.Random(seed)
    before = [rng.random() for _ in range(25)]
    after = [b + rng.gauss(0.0, 0.3) + rng.choice([0.0, 0.1]) for b in before]
    exact = wilcoxon_signed_rank(before, after, method="exact")
    approx = wilcoxon_signed_rank(before, after, method="approx")
    assert exact.method == "exact" and approx.method == "approx"
    assert abs(exact.p_value - approx.p_value) <= 0.01


def test_auto_switches_above_25():
    rng = random.Random(0)
    before = [rng.random() for _ in range(26)]
    after = [b + rng.gauss(0, 1) for b in before]
    assert wilcoxon_signed_rank(before, after).method == "approx"
    assert wilcoxon_signed_rank(before[:25], after[:25]).method == "exact"


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

class TableOracle:
    """Scores looked up by canonical SMILES."""

    def __init__(self, table):
        self.table = table

    def scores(self, g, props):
        return {p: self.table[write_smiles(g)][p] for p in props}


def cohort(n, shift, seed=0):
    rng = random.Random(seed)
    mols = corpus_smiles()[: 2 * n]
    table, pairs = {}, []
    for i in range(n):
        b, a = mols[2 * i], mols[2 * i + 1]
        base = {p: rng.uniform(0.1, 0.8) for p in ADMET_PROPERTIES}
        table[b] = base
        table[a] = {p: base[p] + shift for p in ADMET_PROPERTIES}
        pairs.append((b, a))
    return pairs, TableOracle(table)


def test_shifted_cohort_flagged():
    pairs, oracle = cohort(10, 0.1)
    report = batch_evaluate(pairs, oracle, ["BBBP"])
    (row,) = report.rows
    assert row.p_value == pytest.approx(2 / 1024, abs=1e-15) and row.significant
    assert row.mean_after - row.mean_before == pytest.approx(10.0)
    assert "BBBP (↑)" in report.to_text() and "*" in report.to_text()


def test_identical_cohort():
    pairs, oracle = cohort(8, 0.0)
    report = batch_evaluate(pairs, oracle)
    assert [r.property for r in report.rows] == list(ADMET_PROPERTIES)
    for r in report.rows:
        assert r.mean_before == r.mean_after and r.p_value == 1.0 and not r.significant
    assert "*" not in report.to_text().splitlines()[2]


def test_report_independent_of_pair_order():
    pairs, oracle = cohort(20, 0.03, seed=4)
    first = batch_evaluate(pairs, oracle)
    shuffled = pairs[:]
    random.Random(1).shuffle(shuffled)
    second = batch_evaluate(shuffled, oracle)
    assert first.to_text() == second.to_text()
    assert [(r.mean_before, r.p_value) for r in first.rows] == \
        pytest.approx([(r.mean_before, r.p_value) for r in second.rows], abs=1e-9)


def test_unscorable_pair_excluded():
    pairs, oracle = cohort(6, 0.1)
    report = batch_evaluate(pairs + [("C1CC", "CCO")], oracle, ["HIA"])
    assert report.n_pairs == 6 and len(report.diagnostics) == 1
    assert report.diagnostics[0].startswith("pair 6")


@pytest.mark.parametrize("kwargs", [{"pairs": []}, {"properties": ["SOLUBILITY"]}])
def test_batch_errors(kwargs):
    pairs, oracle = cohort(3, 0.1)
    args = {"pairs": pairs, "oracle": oracle, **kwargs}
    with pytest.raises(ValueError):
        batch_evaluate(**args)


def row(prop, direction, before, after, p):
    return PropertyRow(prop, direction, before, after, p, 50)


@pytest.mark.parametrize("r, before_cell, after_cell", [
    (row("AMES", Direction.MINIMIZE, 59.5, 54.0, 0.01), "59.5", "54.0*"),
    (row("AMES", Direction.MINIMIZE, 54.0, 59.5, 0.01), "54.0*", "59.5"),
    (row("BBBP", Direction.MAXIMIZE, 40.0, 45.0, 0.01), "40.0", "45.0*"),
    (row("BBBP", Direction.MAXIMIZE, 40.0, 45.0, 0.2), "40.0", "45.0"),
])
def test_star_marks_better_column(r, before_cell, after_cell):
    line = EvalReport((r,), 50).to_text().splitlines()[2]
    assert line.split()[-4:-2] == [before_cell, after_cell]


def test_six_row_labels_and_tsv():
    rows = tuple(row(p, d, 50.0, 50.0, 1.0) for p, d in
                 [("AMES", Direction.MINIMIZE), ("CYP3A4", Direction.MINIMIZE), ("BBBP", Direction.MAXIMIZE),
                  ("HIA", Direction.MAXIMIZE), ("DILI", Direction.MINIMIZE), ("PGP", Direction.MINIMIZE)])
    text = EvalReport(rows, 50).to_text()
    labels = [ln.split("  ")[0].rstrip() for ln in text.splitlines()[2:]]
    assert labels == ["AMES Mut. (↓)", "CYP3A4 Inhib. (↓)", "BBBP (↑)", "HIA (↑)", "DILI (↓)", "PGP (↓)"]
    tsv = EvalReport(rows, 50).to_tsv().splitlines()
    assert tsv[0].split("\t") == ["property", "direction", "mean_before", "mean_after", "p_value", "n", "significant"]
    assert len(tsv) == 7


@pytest.mark.parametrize("p, flagged", [(0.049, True), (0.05, False)])
def test_significance_threshold(p, flagged):
    assert row("HIA", Direction.MAXIMIZE, 1.0, 2.0, p).significant is flagged
