"""Before/after cohort evaluation with the Wilcoxon signed-rank test."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .molgraph import SmilesError, parse_smiles
from .oracle import ADMET_PROPERTIES, Oracle, OracleError, normalize_property
from .reason import Direction
from .scaffold import FragmentSetError

log = logging.getLogger(__name__)

ALPHA = 0.05
EXACT_MAX_N = 25
DIRECTIONS = {
    "AMES": Direction.MINIMIZE,
    "CYP3A4": Direction.MINIMIZE,
    "BBBP": Direction.MAXIMIZE,
    "HIA": Direction.MAXIMIZE,
    "DILI": Direction.MINIMIZE,
    "PGP": Direction.MINIMIZE,
}
LABELS = {"AMES": "AMES Mut.", "CYP3A4": "CYP3A4 Inhib."}
ARROWS = {Direction.MAXIMIZE: "↑", Direction.MINIMIZE: "↓"}


class ZeroMethod(str, Enum):
    PRATT = "pratt"
    WILCOX = "wilcox"


class Alternative(str, Enum):
    TWO_SIDED = "two-sided"
    GREATER = "greater"
    LESS = "less"


class AllZeroDifferencesWarning(UserWarning):
    pass


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # sum of ranks of positive differences (after - before)
    p_value: float
    n_effective: int
    method: str


def _average_ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def signed_ranks(before: Sequence[float], after: Sequence[float],
                 zero_method: ZeroMethod | str = ZeroMethod.PRATT) -> tuple[list[float], list[bool]]:
    """Ranks of |after - before| and the sign of each non-zero difference.

    Pratt ranks the zero differences along with the rest and then drops them;
    the classic variant drops zeros before ranking.
    """
    zero_method = ZeroMethod(zero_method)
    if len(before) != len(after):
        raise ValueError("before and after differ in length")
    if not before:
        raise ValueError("need at least one pair")
    d = [a - b for b, a in zip(before, after)]
    if zero_method is ZeroMethod.WILCOX:
        d = [x for x in d if x != 0]
        ranks = _average_ranks([abs(x) for x in d])
    else:
        all_ranks = _average_ranks([abs(x) for x in d])
        ranks = [r for r, x in zip(all_ranks, d) if x != 0]
        d = [x for x in d if x != 0]
    return ranks, [x > 0 for x in d]


def exact_distribution(doubled_ranks: Sequence[int]) -> list[int]:
    """counts[s] = number of sign assignments whose doubled W+ equals s."""
    counts = [1]
    for r in doubled_ranks:
        nxt = counts + [0] * r
        for s, c in enumerate(counts):
            if c:
                nxt[s + r] += c
        counts = nxt
    return counts


def _exact_p(ranks: Sequence[float], w: float, alternative: Alternative) -> float:
    doubled = [int(round(2 * r)) for r in ranks]
    w2 = int(round(2 * w))
    counts = exact_distribution(doubled)
    total = sum(doubled)
    n_patterns = 2 ** len(doubled)
    if alternative is Alternative.GREATER:
        hits = sum(counts[w2:])
    elif alternative is Alternative.LESS:
        hits = sum(counts[:w2 + 1])
    else:
        dev = abs(2 * w2 - total)
        hits = sum(c for s, c in enumerate(counts) if abs(2 * s - total) >= dev)
    return hits / n_patterns


def _normal_p(ranks: Sequence[float], w: float, alternative: Alternative) -> float:
    mean = math.fsum(ranks) / 2
    sd = math.sqrt(math.fsum(r * r for r in ranks) / 4)
    if sd == 0:
        return 1.0
    if alternative is Alternative.TWO_SIDED:
        z = (abs(w - mean) - 0.5) / sd
        return min(1.0, math.erfc(max(z, 0.0) / math.sqrt(2)))
    z = (w - mean - 0.5) / sd if alternative is Alternative.GREATER else (mean - w - 0.5) / sd
    return min(1.0, 0.5 * math.erfc(z / math.sqrt(2)))


def wilcoxon_signed_rank(before: Sequence[float], after: Sequence[float],
                         zero_method: ZeroMethod | str = ZeroMethod.PRATT,
                         alternative: Alternative | str = Alternative.TWO_SIDED,
                         method: str = "auto") -> WilcoxonResult:
    """Paired signed-rank test on ``after - before``.

    ``method`` is ``"exact"`` (full sign-flip distribution over doubled ranks,
    so ties stay exact), ``"approx"`` (normal approximation with tie-aware
    variance and a 0.5 continuity correction), or ``"auto"``: exact up to 25
    non-zero differences.
    """
    alternative = Alternative(alternative)
    if method not in ("auto", "exact", "approx"):
        raise ValueError(f"unknown method {method!r}")
    ranks, positive = signed_ranks(before, after, zero_method)
    n = len(ranks)
    if n == 0:
        warnings.warn("all differences are zero; p-value set to 1", AllZeroDifferencesWarning, stacklevel=2)
        return WilcoxonResult(0.0, 1.0, 0, "degenerate")
    w = math.fsum(r for r, pos in zip(ranks, positive) if pos)
    if method == "exact" or (method == "auto" and n <= EXACT_MAX_N):
        return WilcoxonResult(w, _exact_p(ranks, w, alternative), n, "exact")
    return WilcoxonResult(w, _normal_p(ranks, w, alternative), n, "approx")


@dataclass(frozen=True)
class PropertyRow:
    property: str
    direction: Direction
    mean_before: float
    mean_after: float
    p_value: float
    n: int

    @property
    def significant(self) -> bool:
        return self.p_value < ALPHA

    @property
    def label(self) -> str:
        return f"{LABELS.get(self.property, self.property)} ({ARROWS[self.direction]})"


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[PropertyRow, ...]
    n_pairs: int
    diagnostics: tuple[str, ...] = ()

    def to_text(self) -> str:
        """Aligned table; the better column of a significant row carries ``*``."""
        header = ("Property", "Before", "After", "p", "n")
        body = []
        for r in self.rows:
            before, after = f"{r.mean_before:.1f}", f"{r.mean_after:.1f}"
            if r.significant:
                improved = (r.mean_after - r.mean_before) * r.direction.sign > 0
                if improved:
                    after += "*"
                else:
                    before += "*"
            body.append((r.label, before, after, f"{r.p_value:.4g}", str(r.n)))
        widths = [max(len(row[k]) for row in [header] + body) for k in range(len(header))]
        lines = ["# mean predicted score x100; * marks the better column when p < 0.05 "
                 "(Wilcoxon signed-rank, Pratt zeros, two-sided)"]
        for row in [header] + body:
            cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
        return "\n".join(lines) + "\n"

    def to_tsv(self) -> str:
        lines = ["property\tdirection\tmean_before\tmean_after\tp_value\tn\tsignificant"]
        for r in self.rows:
            lines.append(f"{r.property}\t{r.direction.value}\t{r.mean_before!r}\t{r.mean_after!r}\t"
                         f"{r.p_value!r}\t{r.n}\t{int(r.significant)}")
        return "\n".join(lines) + "\n"


def batch_evaluate(pairs: Sequence[tuple[str, str]], oracle: Oracle,
                   properties: Iterable[str] = ADMET_PROPERTIES,
                   directions: dict[str, Direction] | None = None,
                   alternative: Alternative | str = Alternative.TWO_SIDED) -> EvalReport:
    """Score both sides of each pair and test each property.

    Means are mean predicted scores times 100. A pair whose molecules cannot
    be parsed or scored is dropped for every property, with a diagnostic.
    """
    if not pairs:
        raise ValueError("no pairs to evaluate")
    props = [normalize_property(p) for p in properties]
    directions = {**DIRECTIONS, **(directions or {})}
    for p in props:
        if p not in directions:
            raise ValueError(f"no improvement direction known for {p}")
    scored, diags = [], []
    for i, (before, after) in enumerate(pairs):
        try:
            gb, ga = parse_smiles(before), parse_smiles(after)
            scored.append((oracle.scores(gb, props), oracle.scores(ga, props)))
        except (SmilesError, FragmentSetError, OracleError, ValueError) as exc:
            msg = f"pair {i}: excluded: {exc}"
            log.warning(msg)
            diags.append(msg)
    if not scored:
        raise ValueError("no scorable pairs")
    rows = []
    for p in props:
        b = [s[0][p] for s in scored]
        a = [s[1][p] for s in scored]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AllZeroDifferencesWarning)
            test = wilcoxon_signed_rank(b, a, alternative=alternative)
        rows.append(PropertyRow(p, directions[p], 100 * math.fsum(b) / len(b), 100 * math.fsum(a) / len(a),
                                test.p_value, len(scored)))
    return EvalReport(tuple(rows), len(scored), tuple(diags))
