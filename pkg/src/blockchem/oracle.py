"""Property oracle interface backed by a block-contribution surrogate.

A surrogate score is ``logistic(bias + sum of block contributions)`` over the
blocks :func:`~blockchem.tokenizer.tokenize` produces, with unknown blocks
contributing zero. This keeps refinement and evaluation testable against a
known ground truth.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .molgraph import MolecularGraph, SmilesError, canonicalize, parse_smiles, write_smiles
from .scaffold import FragmentSetError
from .tokenizer import tokenize

TABLE_FORMAT = "blockchem-contributions"
TABLE_VERSION = 1
# properties reported by the evaluation table, with the improving direction
ADMET_PROPERTIES = ("AMES", "CYP3A4", "BBBP", "HIA", "DILI", "PGP")


class OracleError(ValueError):
    pass


class PropertyKind(str, Enum):
    NOMINAL = "nominal"
    NUMERICAL = "numerical"


def normalize_property(name: str) -> str:
    name = name.strip().upper()
    if not name:
        raise OracleError("empty property name")
    return name


@dataclass(frozen=True)
class PropertyRecord:
    molecule: str
    property: str
    value: float
    kind: PropertyKind

    def __post_init__(self):
        object.__setattr__(self, "property", normalize_property(self.property))
        object.__setattr__(self, "kind", PropertyKind(self.kind))
        if not math.isfinite(self.value):
            raise OracleError(f"non-finite value for {self.molecule}")
        if self.kind is PropertyKind.NOMINAL:
            if self.value not in (0, 1):
                raise OracleError(f"nominal value must be 0 or 1, got {self.value}")
            object.__setattr__(self, "value", int(self.value))
        else:
            object.__setattr__(self, "value", float(self.value))


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class PropertyModel:
    bias: float = 0.0
    threshold: float = 0.5
    contributions: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.bias):
            raise OracleError("bias must be finite")
        if not 0.0 < self.threshold < 1.0:
            raise OracleError(f"threshold {self.threshold} must lie strictly inside (0, 1)")
        for form, c in self.contributions.items():
            if not math.isfinite(c):
                raise OracleError(f"contribution for {form!r} is not finite")
        object.__setattr__(self, "contributions", dict(self.contributions))

    def logit(self, block_forms: Iterable[str]) -> float:
        return self.bias + math.fsum(self.contributions.get(f, 0.0) for f in block_forms)


class ContributionTable:
    def __init__(self, models: Mapping[str, PropertyModel]):
        self.models = {normalize_property(p): m for p, m in models.items()}

    def __contains__(self, prop: str) -> bool:
        return normalize_property(prop) in self.models

    def __getitem__(self, prop: str) -> PropertyModel:
        key = normalize_property(prop)
        if key not in self.models:
            raise OracleError(f"unknown property {prop!r}; table has {sorted(self.models)}")
        return self.models[key]

    @property
    def properties(self) -> list[str]:
        return sorted(self.models)

    def to_json(self) -> dict:
        return {
            "format": TABLE_FORMAT,
            "version": TABLE_VERSION,
            "properties": {
                p: {"bias": m.bias, "threshold": m.threshold,
                    "contributions": dict(sorted(m.contributions.items()))}
                for p, m in sorted(self.models.items())
            },
        }

    @classmethod
    def from_json(cls, doc: dict) -> ContributionTable:
        if doc.get("format", TABLE_FORMAT) != TABLE_FORMAT:
            raise OracleError("not a contribution table")
        props = doc.get("properties", doc)
        models = {}
        for p, d in props.items():
            if p in ("format", "version"):
                continue
            models[p] = PropertyModel(float(d.get("bias", 0.0)), float(d.get("threshold", 0.5)),
                                      {k: float(v) for k, v in d.get("contributions", {}).items()})
        return cls(models)

    @classmethod
    def load(cls, path: str | Path) -> ContributionTable:
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n")


class Oracle:
    """Surrogate scorer with a per-molecule cache of tokenized blocks."""

    def __init__(self, table: ContributionTable):
        self.table = table
        self._blocks: dict[str, tuple[str, ...]] = {}

    def blocks(self, g: MolecularGraph) -> tuple[str, ...]:
        key = write_smiles(g)
        forms = self._blocks.get(key)
        if forms is None:
            forms = tuple(tokenize(g).block_forms)
            self._blocks[key] = forms
        return forms

    def score(self, g: MolecularGraph, prop: str) -> float:
        model = self.table[prop]
        return logistic(model.logit(self.blocks(g)))

    def scores(self, g: MolecularGraph, props: Sequence[str]) -> dict[str, float]:
        return {normalize_property(p): self.score(g, p) for p in props}

    def label(self, g: MolecularGraph, prop: str) -> int:
        return classify(self.score(g, prop), self.table[prop].threshold)


def predict(g: MolecularGraph, prop: str, table: ContributionTable) -> float:
    """Surrogate score in (0, 1); depends only on the canonical blocks of ``g``."""
    model = table[prop]
    return logistic(model.logit(tokenize(g).block_forms))


def classify(score: float, threshold: float) -> int:
    return int(score >= threshold)


def _f1(scores: Sequence[float], labels: Sequence[int], threshold: float) -> Fraction:
    tp = fp = fn = 0
    for s, y in zip(scores, labels):
        pred = s >= threshold
        if pred and y:
            tp += 1
        elif pred:
            fp += 1
        elif y:
            fn += 1
    denom = 2 * tp + fp + fn
    return Fraction(2 * tp, denom) if denom else Fraction(0)


def threshold_candidates(scores: Sequence[float]) -> list[float]:
    """Lowest score (everything positive) plus midpoints of consecutive distinct scores."""
    distinct = sorted(set(scores))
    return [distinct[0]] + [(a + b) / 2 for a, b in zip(distinct, distinct[1:])]


def fit_threshold(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Threshold with maximal F1 among the candidates; ties go to the lower threshold."""
    if len(scores) != len(labels):
        raise OracleError("scores and labels differ in length")
    if set(labels) != {0, 1}:
        raise OracleError("threshold fitting needs at least one positive and one negative label")
    best, best_f1 = None, Fraction(-1)
    for t in threshold_candidates(scores):
        f1 = _f1(scores, labels, t)
        if f1 > best_f1:
            best, best_f1 = t, f1
    return best


@dataclass(frozen=True)
class RecordDiagnostic:
    line_no: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line_no}: {self.message}"


def _infer_kinds(raw: Iterable[tuple[str, float]]) -> dict[str, PropertyKind]:
    values: dict[str, set] = {}
    for prop, value in raw:
        values.setdefault(prop, set()).add(value)
    return {p: PropertyKind.NOMINAL if vs <= {0.0, 1.0} else PropertyKind.NUMERICAL
            for p, vs in values.items()}


def read_records(lines: Iterable[str]) -> tuple[list[PropertyRecord], list[RecordDiagnostic]]:
    """Parse ``smiles,property,value[,kind]`` CSV text.

    Without a ``kind`` column a property is nominal iff all its values are 0 or 1.
    Bad rows are reported and skipped.
    """
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        return [], []
    cols = [h.strip().lower() for h in header]
    missing = {"smiles", "property", "value"} - set(cols)
    if missing:
        raise OracleError(f"CSV header lacks column(s): {', '.join(sorted(missing))}")
    idx = {c: cols.index(c) for c in ("smiles", "property", "value")}
    kind_col = cols.index("kind") if "kind" in cols else None
    rows, diags = [], []
    for row in reader:
        line_no = reader.line_num
        if not row or not "".join(row).strip():
            continue
        if len(row) < len(cols):
            diags.append(RecordDiagnostic(line_no, f"expected {len(cols)} fields, got {len(row)}"))
            continue
        smiles = row[idx["smiles"]].strip()
        try:
            prop = normalize_property(row[idx["property"]])
            value = float(row[idx["value"]])
            if not math.isfinite(value):
                raise ValueError("non-finite value")
        except ValueError as exc:
            diags.append(RecordDiagnostic(line_no, str(exc)))
            continue
        try:
            g = parse_smiles(smiles)
            if g.fragment_set:
                raise FragmentSetError("fragment sets are not accepted")
        except (SmilesError, FragmentSetError) as exc:
            diags.append(RecordDiagnostic(line_no, f"bad SMILES {smiles!r}: {exc}"))
            continue
        kind = row[kind_col].strip().lower() if kind_col is not None else ""
        rows.append((line_no, write_smiles(g), prop, value, kind))
    inferred = _infer_kinds((p, v) for _, _, p, v, k in rows if not k)
    records = []
    for line_no, smiles, prop, value, kind in rows:
        try:
            records.append(PropertyRecord(smiles, prop, value, PropertyKind(kind) if kind else inferred[prop]))
        except (OracleError, ValueError) as exc:
            diags.append(RecordDiagnostic(line_no, str(exc)))
    diags.sort(key=lambda d: d.line_no)
    return records, diags


def load_records(path: str | Path) -> tuple[list[PropertyRecord], list[RecordDiagnostic]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return read_records(fh)


def oracle_records(molecules: Iterable[str], prop: str, oracle: Oracle,
                   kind: PropertyKind = PropertyKind.NOMINAL) -> list[PropertyRecord]:
    """Label molecules with the surrogate instead of measured values."""
    out = []
    for smiles in molecules:
        g = parse_smiles(smiles)
        score = oracle.score(g, prop)
        value = oracle.label(g, prop) if kind is PropertyKind.NOMINAL else score
        out.append(PropertyRecord(canonicalize(smiles), prop, value, kind))
    return out
