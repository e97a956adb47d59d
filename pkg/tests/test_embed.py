from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockchem.embed import (
    DEFAULT_DIM,
    CombinedVocab,
    ContextVector,
    EncoderModel,
    FeatureSpec,
    block_logits,
    cce_loss,
    embed_vocabulary,
    embedding_table_tsv,
    gnn_forward,
    gnn_forward_graph,
    init_model,
    nearest_neighbors,
    read_embedding_tsv,
    softmax,
)
from blockchem.molgraph import parse_smiles
from blockchem.tokenizer import BuildingBlock, tokenize
from blockchem.vocab import VocabEntry, Vocabulary, build_vocab
from conftest import corpus_smiles, shuffled
from oracles import exact_softmax_loss, hand_dot

_corpus = corpus_smiles()
MODEL = init_model(seed=0)
VOCAB = embed_vocabulary(build_vocab([tokenize(parse_smiles(s)) for s in _corpus[:120]], 500, 500), MODEL)


def combined(n_text: int = 5, seed: int = 1) -> CombinedVocab:
    rng = np.random.default_rng(seed)
    return CombinedVocab(rng.normal(size=(n_text, DEFAULT_DIM)), VOCAB)


def test_default_shapes():
    assert MODEL.dim == 128 and len(MODEL.layers) == 3
    assert MODEL.layers[0][0].shape == (FeatureSpec().width, 64)
    assert VOCAB.embeddings.shape == (len(VOCAB), 128)


def test_zero_weights_give_zero_vector():
    zero = init_model(seed=3)
    zero = EncoderModel(zero.feature_spec, tuple((w * 0, b * 0) for w, b in zero.layers),
                        (zero.adapter[0] * 0, zero.adapter[1] * 0))
    for form in VOCAB.forms[:10]:
        assert not gnn_forward(BuildingBlock.from_canonical(form), zero).any()


def test_one_atom_identity_layer_by_hand():
    spec = FeatureSpec()
    w = spec.width
    rng = random.Random(5)
    adapter = [[rng.uniform(-1, 1) for _ in range(4)] for _ in range(w)]
    bias = [rng.uniform(-1, 1) for _ in range(4)]
    model = EncoderModel(spec, ((np.eye(w), np.zeros(w)),), (np.array(adapter), np.array(bias)))
    # methane: element C, charge 0, not aromatic, degree 0
    n_el, n_ch = len(spec.elements), len(spec.charges)
    hot = [spec.elements.index("C"), n_el + spec.charges.index(0), n_el + n_ch + 0, n_el + n_ch + 2 + 0]
    expected = [bias[j] + sum(adapter[r][j] for r in hot) for j in range(4)]
    got = gnn_forward_graph(parse_smiles("C"), model)
    assert np.allclose(got, expected, rtol=0, atol=1e-14)


def test_model_validates_shapes():
    spec = FeatureSpec()
    with pytest.raises(ValueError):
        EncoderModel(spec, ((np.zeros((spec.width + 1, 4)), np.zeros(4)),), (np.zeros((4, 2)), np.zeros(2)))
    with pytest.raises(ValueError):
        EncoderModel(spec, ((np.zeros((spec.width, 4)), np.zeros(4)),), (np.zeros((5, 2)), np.zeros(2)))


def test_model_json_round_trip(tmp_path):
    path = tmp_path / "m.json"
    MODEL.save(path)
    again = EncoderModel.load(path)
    block = BuildingBlock.from_canonical(VOCAB.forms[0])
    assert np.array_equal(gnn_forward(block, again), gnn_forward(block, MODEL))


def test_seeded_init_reproducible():
    a, b = init_model(seed=9), init_model(seed=9)
    assert all(np.array_equal(x[0], y[0]) for x, y in zip(a.layers, b.layers))
    assert not np.array_equal(init_model(seed=10).layers[0][0], a.layers[0][0])


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(_corpus), st.randoms(use_true_random=False))
def test_embedding_permutation_invariant_bitwise(smiles, rng):
    g = parse_smiles(smiles)
    assert gnn_forward_graph(shuffled(g, rng), MODEL).tobytes() == gnn_forward_graph(g, MODEL).tobytes()


def test_logits_match_hand_dot_product():
    cv = combined()
    rng = random.Random(2)
    for _ in range(5):
        c = [rng.gauss(0, 1) for _ in range(DEFAULT_DIM)]
        got = block_logits(ContextVector(np.array(c)), cv)
        table = cv.text_embeddings.tolist() + VOCAB.embeddings.tolist()
        assert len(got) == cv.size
        for g_val, row in zip(got, table):
            want = hand_dot(c, row)
            assert abs(g_val - want) <= 1e-12 * max(1.0, abs(want))


def test_zero_context_uniform():
    cv = combined()
    logits = block_logits(np.zeros(DEFAULT_DIM), cv)
    assert not logits.any()
    assert np.allclose(softmax(logits), 1.0 / cv.size)


def test_orthonormal_argmax():
    text = np.eye(DEFAULT_DIM)[:6]
    cv = CombinedVocab(text, VOCAB.with_embeddings(np.zeros_like(VOCAB.embeddings)))
    for v in range(6):
        assert int(np.argmax(block_logits(text[v], cv))) == v


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3))
def test_logits_linear_in_context(seed, alpha):
    cv = combined()
    c = np.random.default_rng(seed).normal(size=DEFAULT_DIM)
    a, b = block_logits(alpha * c, cv), alpha * block_logits(c, cv)
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_softmax_normalized(seed):
    c = np.random.default_rng(seed).normal(scale=3, size=DEFAULT_DIM)
    assert abs(softmax(block_logits(c, combined())).sum() - 1.0) <= 1e-9


@pytest.mark.parametrize("v", [2, 10, 1000])
def test_uniform_loss_is_log_v(v):
    assert abs(cce_loss([np.zeros(v)] * 3, [0, v - 1, v // 2]) - math.log(v)) <= 1e-9


def test_dominant_target_loss_tiny():
    row = np.zeros(10)
    row[3] = 50.0
    assert 0 <= cce_loss([row], [3]) < 1e-20


def test_loss_matches_exact_rational_softmax():
    # logits ln(q) for small integers q make the softmax an exact fraction
    qs = [[1, 2, 3, 4], [5, 1, 1, 2], [7, 3, 9, 1]]
    targets = [2, 0, 3]
    logits = [np.log(np.array(q, dtype=float)) for q in qs]
    assert abs(cce_loss(logits, targets) - exact_softmax_loss(qs, targets)) <= 1e-12


def test_loss_errors():
    with pytest.raises(ValueError):
        cce_loss([np.zeros(3)], [0, 1])
    with pytest.raises(ValueError):
        cce_loss([np.zeros(3)], [3])


def test_nearest_neighbors():
    cv = combined()
    q = VOCAB.forms[4]
    top = nearest_neighbors(q, cv, 3)
    assert top[0][0] == 4 and abs(top[0][2] - 1.0) < 1e-12
    everything = nearest_neighbors(q, cv, len(VOCAB))
    assert sorted(i for i, _, _ in everything) == list(range(len(VOCAB)))
    sims = [s for _, _, s in everything]
    assert sims == sorted(sims, reverse=True)


def test_neighbor_ties_by_lower_id():
    entries = [VocabEntry(i, f, 1, BuildingBlock.from_canonical(f).kind)
               for i, f in enumerate(["[*:1]C(C)=O", "[*:2]NC", "[*:3]c1ccccc1"])]
    v = Vocabulary(entries, 5, 5).with_embeddings(np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    cv = CombinedVocab(np.zeros((0, 2)), v)
    assert [i for i, _, _ in nearest_neighbors("[*:2]NC", cv, 2)] == [0, 1]


def test_oov_query_needs_model():
    cv = combined()
    with pytest.raises(ValueError):
        nearest_neighbors("[*:1]C(CCCCCCCCCC)=O", cv, 2)
    assert len(nearest_neighbors("[*:1]C(CCCCCCCCCC)=O", cv, 2, model=MODEL)) == 2


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        CombinedVocab(np.zeros((2, 7)), VOCAB)
    with pytest.raises(ValueError):
        CombinedVocab(np.zeros((2, 128)), build_vocab([], 1, 1))
    with pytest.raises(ValueError):
        block_logits(np.zeros(5), combined())


def test_embedding_tsv_round_trip():
    text = embedding_table_tsv(VOCAB)
    assert np.array_equal(read_embedding_tsv(text), VOCAB.embeddings)
    assert text.splitlines()[0].startswith("0\t")
