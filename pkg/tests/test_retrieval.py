import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from commitgen.errors import ConfigMismatch, EmptyIndex
from commitgen.retrieval import TfIdfIndex, build_index
from oracles import brute_force_rank, cosine_dict, tfidf_vectors

HAND = [["a", "a", "b"], ["b", "c"], ["c", "d", "d", "e"]]


def index_of(docs):
    return build_index(docs, [[f"m{i}"] for i in range(len(docs))], [f"c{i}" for i in range(len(docs))])


def test_idf_values():
    idx = index_of([["t", "x"], ["t", "y"]])
    assert idx.idf[idx.column["t"]] == 0.0
    idx3 = index_of(HAND)
    assert idx3.idf[idx3.column["a"]] == pytest.approx(math.log(3))
    assert idx3.idf[idx3.column["b"]] == pytest.approx(math.log(3 / 2))


def test_term_frequency():
    idx = index_of([["a", "a", "b"], ["c"]])
    row = idx.matrix.getrow(0).toarray()[0]
    assert row[idx.column["a"]] == pytest.approx(2 / 3 * math.log(2))
    assert row[idx.column["b"]] == pytest.approx(1 / 3 * math.log(2))


def test_hand_corpus_matches_brute_force():
    idx = index_of(HAND)
    for query in (["a", "c"], ["b", "b", "e"], ["d", "zzz"], ["c"]):
        order, sims = brute_force_rank(HAND, query)
        assert idx.rank(query) == order
        np.testing.assert_allclose(idx.cosines(query), sims, atol=1e-12)
        assert idx.retrieve(query).doc == order[0]


def test_self_retrieval_cosine_one():
    rng = np.random.default_rng(0)
    docs = [list(rng.choice(list("abcdefghij"), size=rng.integers(1, 12))) for _ in range(50)]
    idx = index_of(docs)
    for i, d in enumerate(docs):
        if idx.norms[i] == 0:
            continue
        hit = idx.retrieve(d)
        assert abs(hit.cosine - 1.0) <= 1e-9
        # an earlier document with the same tf-idf direction may win the tie
        assert hit.doc == i or (hit.doc < i and abs(idx.cosines(docs[hit.doc])[i] - 1.0) <= 1e-9)


def test_disjoint_query_ties_to_lowest_doc():
    idx = index_of(HAND)
    hit = idx.retrieve(["nothing", "shared"])
    assert hit.doc == 0 and hit.cosine == 0.0


def test_exclusion():
    idx = index_of([["a", "b"], ["a", "c"]])
    assert idx.retrieve_excluding(["a", "b"], "c0").commit_id == "c1"
    assert idx.retrieve_excluding(["a", "b"], "absent") == idx.retrieve(["a", "b"])
    with pytest.raises(EmptyIndex):
        index_of([["a"]]).retrieve_excluding(["a"], "c0")


def test_exclusion_gives_second_best():
    rng = np.random.default_rng(4)
    docs = [list(rng.choice(list("abcdefgh"), size=6)) for _ in range(10)]
    idx = index_of(docs)
    query = list(rng.choice(list("abcdefgh"), size=5))
    order, _ = brute_force_rank(docs, query)
    best = idx.retrieve(query)
    assert best.doc == order[0]
    assert idx.retrieve_excluding(query, best.commit_id).doc == order[1]


def test_uniform_idf_scaling_keeps_argmax():
    rng = np.random.default_rng(5)
    docs = [list(rng.choice(list("abcdefgh"), size=7)) for _ in range(12)]
    idx = index_of(docs)
    scaled = TfIdfIndex(idx.tokens, idx.df, idx.n_docs, idx.matrix * 3.7, idx.norms * 3.7,
                        idx.messages, idx.commit_ids)
    scaled.idf = idx.idf * 3.7
    for _ in range(20):
        q = list(rng.choice(list("abcdefgh"), size=4))
        assert scaled.retrieve(q).doc == idx.retrieve(q).doc


doc_lists = st.lists(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=8), min_size=1, max_size=8)


@given(doc_lists, st.lists(st.sampled_from("abcdefg"), max_size=8))
def test_cosines_match_oracle_and_are_bounded(docs, query):
    idx = index_of(docs)
    order, sims = brute_force_rank(docs, query)
    got = idx.cosines(query)
    assert ((got >= 0) & (got <= 1)).all()
    np.testing.assert_allclose(got, sims, atol=1e-9)
    assert idx.retrieve(query).doc == order[0]


@given(doc_lists)
def test_stored_norms_and_symmetry(docs):
    idx = index_of(docs)
    vecs, _ = tfidf_vectors(docs)
    for i, v in enumerate(vecs):
        assert abs(idx.norms[i] - math.sqrt(sum(x * x for x in v.values()))) < 1e-9
    for a in vecs:
        for b in vecs:
            assert cosine_dict(a, b) == pytest.approx(cosine_dict(b, a))


def test_persistence_roundtrip(tmp_path):
    idx = index_of(HAND)
    path = tmp_path / "index.json"
    idx.save(path)
    back = TfIdfIndex.load(path)
    assert back.tokens == idx.tokens and back.commit_ids == idx.commit_ids
    np.testing.assert_array_equal(back.matrix.toarray(), idx.matrix.toarray())
    np.testing.assert_array_equal(back.idf, idx.idf)
    assert back.retrieve(["a", "c"]) == idx.retrieve(["a", "c"])
    bad = idx.to_json()
    bad["format"] = "other"
    with pytest.raises(ConfigMismatch):
        TfIdfIndex.from_json(bad)


def test_empty_index():
    with pytest.raises(EmptyIndex):
        index_of([])
