"""Block embeddings and the combined text/block logit head (forward only).

The encoder is a small sum-aggregation message-passing network: each layer
computes ``h' = (h + sum of neighbour h) @ W + b`` with a ReLU between layers,
followed by a mean-pool readout and an affine adapter to the shared embedding
width ``D``. It stands in for a pretrained graph encoder; nothing is trained here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .molgraph import ATOMIC_NUMBERS, MolecularGraph, WILDCARD, canonical_smiles_and_order
from .tokenizer import BuildingBlock
from .vocab import Vocabulary

MODEL_FORMAT = "blockchem-encoder"
MODEL_VERSION = 1
DEFAULT_DIM = 128
DEFAULT_HIDDEN = 64
DEFAULT_LAYERS = 3


@dataclass(frozen=True)
class FeatureSpec:
    """One-hot layout: element, formal charge, aromatic flag, degree."""

    elements: tuple[str, ...] = (WILDCARD,) + tuple(e for e in ATOMIC_NUMBERS if e != WILDCARD)
    charges: tuple[int, ...] = (-2, -1, 0, 1, 2)
    max_degree: int = 5

    @property
    def width(self) -> int:
        return len(self.elements) + len(self.charges) + 2 + self.max_degree + 1

    def featurize(self, g: MolecularGraph) -> np.ndarray:
        n_el, n_ch = len(self.elements), len(self.charges)
        x = np.zeros((len(g.atoms), self.width))
        lo, hi = self.charges[0], self.charges[-1]
        for a in g.atoms:
            i = a.index
            x[i, self.elements.index(a.element)] = 1.0
            x[i, n_el + self.charges.index(min(max(a.formal_charge, lo), hi))] = 1.0
            x[i, n_el + n_ch + int(a.aromatic)] = 1.0
            x[i, n_el + n_ch + 2 + min(g.degree(i), self.max_degree)] = 1.0
        return x

    def to_json(self) -> dict:
        return {"elements": list(self.elements), "charges": list(self.charges), "max_degree": self.max_degree}

    @classmethod
    def from_json(cls, d: dict) -> FeatureSpec:
        return cls(tuple(d["elements"]), tuple(d["charges"]), int(d["max_degree"]))


@dataclass(frozen=True, eq=False)
class EncoderModel:
    feature_spec: FeatureSpec
    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    adapter: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        width = self.feature_spec.width
        if not self.layers:
            raise ValueError("encoder needs at least one layer")
        for w, b in self.layers:
            if w.ndim != 2 or w.shape[0] != width or b.shape != (w.shape[1],):
                raise ValueError(f"layer shapes {w.shape}/{b.shape} do not chain from width {width}")
            width = w.shape[1]
        a, c = self.adapter
        if a.shape[0] != width or c.shape != (a.shape[1],):
            raise ValueError(f"adapter shapes {a.shape}/{c.shape} do not match hidden width {width}")
        for arr in self._arrays():
            arr.setflags(write=False)

    def _arrays(self):
        for w, b in self.layers:
            yield w
            yield b
        yield from self.adapter

    @property
    def dim(self) -> int:
        return self.adapter[0].shape[1]

    def to_json(self) -> dict:
        def tensor(t):
            return {"shape": list(t.shape), "data": t.ravel().tolist()}
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "feature_spec": self.feature_spec.to_json(),
            "layers": [{"weight": tensor(w), "bias": tensor(b)} for w, b in self.layers],
            "adapter": {"weight": tensor(self.adapter[0]), "bias": tensor(self.adapter[1])},
        }

    @classmethod
    def from_json(cls, d: dict) -> EncoderModel:
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise ValueError("not a supported encoder model file")

        def tensor(t):
            return np.asarray(t["data"], dtype=np.float64).reshape(t["shape"])
        layers = tuple((tensor(l["weight"]), tensor(l["bias"])) for l in d["layers"])
        adapter = (tensor(d["adapter"]["weight"]), tensor(d["adapter"]["bias"]))
        return cls(FeatureSpec.from_json(d["feature_spec"]), layers, adapter)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> EncoderModel:
        return cls.from_json(json.loads(Path(path).read_text()))


def init_model(seed: int = 0, hidden: int = DEFAULT_HIDDEN, n_layers: int = DEFAULT_LAYERS,
               dim: int = DEFAULT_DIM, spec: FeatureSpec | None = None) -> EncoderModel:
    """Glorot-uniform weights and zero biases from a seeded generator."""
    spec = spec or FeatureSpec()
    rng = np.random.default_rng(seed)

    def glorot(n_in, n_out):
        limit = math.sqrt(6.0 / (n_in + n_out))
        return rng.uniform(-limit, limit, size=(n_in, n_out))
    layers, width = [], spec.width
    for _ in range(n_layers):
        layers.append((glorot(width, hidden), np.zeros(hidden)))
        width = hidden
    return EncoderModel(spec, tuple(layers), (glorot(width, dim), np.zeros(dim)))


def gnn_forward_graph(g: MolecularGraph, model: EncoderModel) -> np.ndarray:
    if not g.atoms:
        raise ValueError("cannot embed an empty graph")
    # canonical atom order makes the float reductions order-independent
    _, order = canonical_smiles_and_order(g)
    g = g.permuted(order)
    n = len(g.atoms)
    prop = np.eye(n)
    for b in g.bonds:
        prop[b.begin, b.end] = prop[b.end, b.begin] = 1.0
    h = model.feature_spec.featurize(g)
    last = len(model.layers) - 1
    for k, (w, bias) in enumerate(model.layers):
        h = prop @ h @ w + bias
        if k < last:
            h = np.maximum(h, 0.0)
    pooled = h.mean(axis=0)
    a, c = model.adapter
    return pooled @ a + c


def gnn_forward(block: BuildingBlock, model: EncoderModel) -> np.ndarray:
    """D-dimensional embedding of a block (wildcards are their own element class)."""
    return gnn_forward_graph(block.graph, model)


def embed_vocabulary(v: Vocabulary, model: EncoderModel) -> Vocabulary:
    if len(v) == 0:
        return v.with_embeddings(np.zeros((0, model.dim)))
    rows = [gnn_forward(v.block(i), model) for i in range(len(v))]
    return v.with_embeddings(np.vstack(rows))


@dataclass(frozen=True, eq=False)
class ContextVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("context vector must be a finite 1-D array")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class CombinedVocab:
    """Text ids occupy ``[0, T)``; block id ``i`` is combined id ``T + i``."""

    text_embeddings: np.ndarray
    block_vocab: Vocabulary

    def __post_init__(self):
        t = np.asarray(self.text_embeddings, dtype=np.float64)
        if t.ndim != 2:
            raise ValueError("text embeddings must be a 2-D table")
        object.__setattr__(self, "text_embeddings", t)
        e = self.block_vocab.embeddings
        if e is None:
            raise ValueError("block vocabulary has no embedding table")
        if len(t) and len(e) and t.shape[1] != e.shape[1]:
            raise ValueError("text and block embeddings differ in dimension")

    @property
    def n_text(self) -> int:
        return len(self.text_embeddings)

    @property
    def size(self) -> int:
        return self.n_text + len(self.block_vocab)

    @property
    def dim(self) -> int:
        if len(self.text_embeddings):
            return self.text_embeddings.shape[1]
        return self.block_vocab.embeddings.shape[1]

    def block_id_to_combined(self, block_id: int) -> int:
        return self.n_text + block_id


def block_logits(c: ContextVector | np.ndarray, cv: CombinedVocab) -> np.ndarray:
    """Dot product of the context with every text embedding, then every block embedding."""
    c = c.values if isinstance(c, ContextVector) else ContextVector(c).values
    if c.shape[0] != cv.dim:
        raise ValueError(f"context has dimension {c.shape[0]}, vocabulary has {cv.dim}")
    return np.concatenate([cv.text_embeddings @ c, cv.block_vocab.embeddings @ c])


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def _position_loss(logits: np.ndarray, target: int) -> float:
    # shift by the target logit so a dominant correct class gives log1p(tiny)
    d = logits - logits[target]
    m = d.max()
    if m <= 0.0:
        rest = np.delete(d, target)
        return math.log1p(float(np.exp(rest).sum()))
    return float(m + math.log(np.exp(d - m).sum()))


def cce_loss(logit_sequences: Sequence[np.ndarray] | np.ndarray, targets: Sequence[int]) -> float:
    """Mean negative log-softmax probability of each target."""
    if len(logit_sequences) != len(targets):
        raise ValueError(f"{len(logit_sequences)} logit rows but {len(targets)} targets")
    if not len(targets):
        raise ValueError("empty sequence")
    total = []
    for row, t in zip(logit_sequences, targets):
        row = np.asarray(row, dtype=np.float64)
        if not 0 <= t < row.shape[0]:
            raise ValueError(f"target {t} outside vocabulary of size {row.shape[0]}")
        total.append(_position_loss(row, int(t)))
    return math.fsum(total) / len(total)


def nearest_neighbors(block: BuildingBlock | str, cv: CombinedVocab, k: int,
                      model: EncoderModel | None = None) -> list[tuple[int, str, float]]:
    """Top-k blocks by cosine similarity, ties broken by lower block id.

    An out-of-vocabulary query is embedded on the fly, which needs ``model``.
    """
    v = cv.block_vocab
    if not 0 <= k <= len(v):
        raise ValueError(f"k={k} outside [0, {len(v)}]")
    form = block if isinstance(block, str) else block.canonical_form
    i = v.id_of(form)
    if i is not None:
        q = v.embeddings[i]
    elif model is not None:
        q = gnn_forward(BuildingBlock.from_canonical(form), model)
    else:
        raise ValueError(f"{form!r} is not in the vocabulary and no encoder was given")
    table = v.embeddings
    norms = np.linalg.norm(table, axis=1) * np.linalg.norm(q)
    dots = table @ q
    sims = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
    ranked = sorted(range(len(v)), key=lambda j: (-sims[j], j))[:k]
    return [(j, v.entries[j].canonical_form, float(sims[j])) for j in ranked]


def embedding_table_tsv(v: Vocabulary) -> str:
    if v.embeddings is None:
        raise ValueError("vocabulary has no embeddings")
    return "".join(f"{e.block_id}\t" + "\t".join(repr(float(x)) for x in row) + "\n"
                   for e, row in zip(v.entries, v.embeddings))


def read_embedding_tsv(text: str) -> np.ndarray:
    """Parse ``id\\tfloats`` rows; ids must be dense from 0."""
    rows = {}
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        rows[int(parts[0])] = [float(x) for x in parts[1:]]
    if sorted(rows) != list(range(len(rows))):
        raise ValueError("embedding ids must be dense from 0")
    if not rows:
        return np.zeros((0, 0))
    return np.array([rows[i] for i in range(len(rows))])
