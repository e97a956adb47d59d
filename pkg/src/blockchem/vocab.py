"""Frequency-ranked building-block vocabulary with a cap/mid budget split."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .molgraph import MolecularGraph
from .tokenizer import (
    BlockKind, BuildingBlock, Coverage, Junction, TokenizationResult, reassemble,
)

FORMAT_NAME = "blockchem-vocab"
FORMAT_VERSION = 1


class VocabularyError(ValueError):
    pass


def _kind_of_form(form: str) -> BlockKind:
    return BuildingBlock.from_canonical(form).kind


def pool_of(kind: BlockKind) -> str:
    """Budget pool: whole-molecule blocks share the cap budget."""
    return "mid" if kind is BlockKind.MID else "cap"


@dataclass(frozen=True)
class VocabEntry:
    block_id: int
    canonical_form: str
    frequency: int
    kind: BlockKind


class Vocabulary:
    """Immutable block inventory; ids are dense and ordered by descending frequency."""

    def __init__(self, entries: Sequence[VocabEntry], cap_budget: int, mid_budget: int,
                 corpus_hash: str = "", embeddings: np.ndarray | None = None):
        entries = tuple(entries)
        for i, e in enumerate(entries):
            if e.block_id != i:
                raise VocabularyError(f"block ids must be dense; entry {i} has id {e.block_id}")
        by_form = {e.canonical_form: e for e in entries}
        if len(by_form) != len(entries):
            raise VocabularyError("duplicate canonical_form in vocabulary")
        n_cap = sum(pool_of(e.kind) == "cap" for e in entries)
        if n_cap > cap_budget or len(entries) - n_cap > mid_budget:
            raise VocabularyError("vocabulary exceeds its budgets")
        if embeddings is not None:
            embeddings = np.asarray(embeddings, dtype=np.float64)
            if embeddings.ndim != 2 or embeddings.shape[0] != len(entries):
                raise VocabularyError("embedding table must have one row per block")
            embeddings.setflags(write=False)
        self.entries = entries
        self.cap_budget = cap_budget
        self.mid_budget = mid_budget
        self.corpus_hash = corpus_hash
        self.embeddings = embeddings
        self._by_form = by_form

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, form: str) -> bool:
        return form in self._by_form

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.to_jsonl() == other.to_jsonl()

    def __getitem__(self, form: str) -> VocabEntry:
        return self._by_form[form]

    def id_of(self, form: str) -> int | None:
        e = self._by_form.get(form)
        return None if e is None else e.block_id

    def block(self, block_id: int) -> BuildingBlock:
        if not isinstance(block_id, (int, np.integer)) or not 0 <= block_id < len(self.entries):
            raise VocabularyError(f"block id {block_id} out of range [0, {len(self.entries)})")
        return BuildingBlock.from_canonical(self.entries[block_id].canonical_form)

    @property
    def forms(self) -> list[str]:
        return [e.canonical_form for e in self.entries]

    def of_kind(self, *kinds: BlockKind) -> list[VocabEntry]:
        return [e for e in self.entries if e.kind in kinds]

    def subset(self, forms: Iterable[str]) -> Vocabulary:
        keep = set(forms)
        kept = [e for e in self.entries if e.canonical_form in keep]
        entries = [VocabEntry(i, e.canonical_form, e.frequency, e.kind) for i, e in enumerate(kept)]
        return Vocabulary(entries, self.cap_budget, self.mid_budget, self.corpus_hash)

    def with_embeddings(self, embeddings: np.ndarray) -> Vocabulary:
        return Vocabulary(self.entries, self.cap_budget, self.mid_budget, self.corpus_hash, embeddings)

    # -- serialization -----------------------------------------------------

    def header(self) -> dict:
        return {"format": FORMAT_NAME, "version": FORMAT_VERSION, "cap_budget": self.cap_budget,
                "mid_budget": self.mid_budget, "corpus_hash": self.corpus_hash, "size": len(self)}

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        for e in self.entries:
            lines.append(json.dumps({"id": e.block_id, "canonical_form": e.canonical_form,
                                     "frequency": e.frequency, "kind": e.kind.value}, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> Vocabulary:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise VocabularyError("empty vocabulary file")
        header = json.loads(lines[0])
        if header.get("format") != FORMAT_NAME:
            raise VocabularyError("not a vocabulary file (bad header)")
        if header.get("version") != FORMAT_VERSION:
            raise VocabularyError(f"unsupported vocabulary version {header.get('version')}")
        entries = []
        for ln in lines[1:]:
            d = json.loads(ln)
            entries.append(VocabEntry(int(d["id"]), d["canonical_form"], int(d["frequency"]), BlockKind(d["kind"])))
        return cls(entries, int(header["cap_budget"]), int(header["mid_budget"]), header.get("corpus_hash", ""))

    @classmethod
    def load(cls, path: str | Path) -> Vocabulary:
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


def count_blocks(results: Iterable[TokenizationResult]) -> Counter:
    """Corpus-wide occurrence counts of canonical block forms."""
    counts: Counter = Counter()
    for r in results:
        counts.update(b.canonical_form for b in r.blocks)
    return counts


def merge_counts(shards: Iterable[Mapping[str, int]]) -> Counter:
    total: Counter = Counter()
    for shard in shards:
        total.update(shard)
    return total


def corpus_hash(counts: Mapping[str, int]) -> str:
    """Order-independent digest of the full (unfiltered) block counts."""
    h = hashlib.sha256()
    for form, n in sorted(counts.items()):
        h.update(f"{form}\t{n}\n".encode())
    return h.hexdigest()


def vocab_from_counts(counts: Mapping[str, int], cap_budget: int, mid_budget: int) -> Vocabulary:
    if cap_budget < 0 or mid_budget < 0:
        raise VocabularyError("budgets must be non-negative")
    ranked = sorted(((-n, form) for form, n in counts.items() if n > 0))
    kept, used = [], {"cap": 0, "mid": 0}
    budget = {"cap": cap_budget, "mid": mid_budget}
    for neg, form in ranked:
        kind = _kind_of_form(form)
        pool = pool_of(kind)
        if used[pool] < budget[pool]:
            used[pool] += 1
            kept.append((form, -neg, kind))
    entries = [VocabEntry(i, form, n, kind) for i, (form, n, kind) in enumerate(kept)]
    return Vocabulary(entries, cap_budget, mid_budget, corpus_hash(counts))


def build_vocab(results: Iterable[TokenizationResult], cap_budget: int, mid_budget: int) -> Vocabulary:
    """Top ``cap_budget`` cap blocks and top ``mid_budget`` mid blocks by frequency,
    ties broken by canonical form; ids follow the same order."""
    return vocab_from_counts(count_blocks(results), cap_budget, mid_budget)


@dataclass(frozen=True)
class Encoding:
    """Block ids in linearized order; ``None`` marks an out-of-vocabulary block."""

    ids: tuple[int | None, ...]
    oov: tuple[str, ...]
    junctions: tuple[Junction, ...]

    @property
    def complete(self) -> bool:
        return not self.oov


def encode(t: TokenizationResult, v: Vocabulary) -> Encoding:
    if t.coverage is not Coverage.COMPLETE:
        raise VocabularyError(f"cannot encode a tokenization with {t.coverage.value} coverage")
    ids, oov = [], []
    for b in t.blocks:
        i = v.id_of(b.canonical_form)
        ids.append(i)
        if i is None:
            oov.append(b.canonical_form)
    return Encoding(tuple(ids), tuple(oov), t.junctions)


def blocks_for(ids: Sequence[int], junctions: Sequence[Junction], v: Vocabulary) -> list[BuildingBlock]:
    """Look up blocks and stamp junction ids from the junction ends."""
    blocks = [v.block(i) for i in ids]
    stamps = [[0] * len(b.attachments) for b in blocks]
    for j in junctions:
        for bi, ai in j.ends:
            if not 0 <= bi < len(blocks) or not 0 <= ai < len(stamps[bi]):
                raise VocabularyError(f"junction {j.id} references missing attachment ({bi}, {ai})")
            stamps[bi][ai] = j.id
    return [b.with_junctions(s) for b, s in zip(blocks, stamps)]


def decode(ids: Sequence[int], junctions: Sequence[Junction], v: Vocabulary) -> MolecularGraph:
    if any(i is None for i in ids):
        raise VocabularyError("cannot decode out-of-vocabulary positions")
    return reassemble(blocks_for(ids, junctions, v), junctions)


def vocab_stats(v: Vocabulary, bins: int = 10) -> str:
    """Plain-text frequency report per kind."""
    lines = [f"blocks\t{len(v)}", f"cap_budget\t{v.cap_budget}", f"mid_budget\t{v.mid_budget}"]
    for kind in BlockKind:
        lines.append(f"{kind.value}\t{len(v.of_kind(kind))}")
    freqs = [e.frequency for e in v.entries]
    if freqs:
        lines.append(f"frequency_max\t{max(freqs)}")
        lines.append(f"frequency_min\t{min(freqs)}")
        hist = Counter(freqs)
        lines.append("frequency\tblocks")
        for f in sorted(hist, reverse=True)[:bins]:
            lines.append(f"{f}\t{hist[f]}")
    return "\n".join(lines) + "\n"

