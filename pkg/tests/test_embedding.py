"""Vector similarity and the embedding providers (tf-idf, hashed, remote)."""

import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _helpers import JsonServer, MappedEmbedder
from chronoline.corpus import EventSummary, Timeline
from chronoline.embedding import (
    HashedEmbedder,
    RemoteEmbedder,
    TfidfEmbedder,
    avg_sentence_embedding,
    cosine_similarity,
    hashed_embedding_provider,
    remote_embedding_provider,
    tfidf_fit,
    timeline_embedding,
)
from chronoline.errors import ContractError, ProviderError, ValidationError


class TestCosine:
    def test_hand_values(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(0.0)
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == pytest.approx(-1.0)

    def test_zero_vector_warns_and_returns_zero(self):
        with pytest.warns(RuntimeWarning):
            got = cosine_similarity(np.zeros(3), np.array([1.0, 2.0, 3.0]))
        assert got == 0.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            cosine_similarity(np.ones(3), np.ones(4))

    @given(
        st.lists(st.floats(-10, 10), min_size=2, max_size=6),
        st.floats(0.1, 100.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_scale_invariance(self, values, scale):
        v = np.asarray(values)
        if np.linalg.norm(v) < 1e-6:
            return
        w = v[::-1].copy()
        if np.linalg.norm(w) < 1e-6:
            return
        a = cosine_similarity(v, w)
        b = cosine_similarity(v * scale, w)
        assert a == pytest.approx(b, abs=1e-9)
        assert cosine_similarity(v, w) == pytest.approx(cosine_similarity(w, v))


class TestAveraging:
    def test_mean_of_sentence_vectors(self):
        emb = MappedEmbedder({
            "First one.": np.array([1.0, 0.0]),
            "Second one.": np.array([0.0, 1.0]),
        })
        got = avg_sentence_embedding("First one. Second one.", emb)
        np.testing.assert_allclose(got, [0.5, 0.5])

    def test_empty_text_rejected(self):
        emb = MappedEmbedder({})
        with pytest.raises(ValidationError):
            avg_sentence_embedding("   ", emb)

    def test_timeline_embedding_averages_entries(self):
        emb = MappedEmbedder({
            "first entry": np.array([2.0, 0.0]),
            "second entry": np.array([0.0, 4.0]),
        })
        from datetime import date
        tl = Timeline("t", (
            EventSummary.from_text(date(2011, 1, 1), "first entry"),
            EventSummary.from_text(date(2011, 1, 2), "second entry"),
        ))
        np.testing.assert_allclose(timeline_embedding(tl, emb), [1.0, 2.0])


class TestTfidf:
    def test_vocabulary_is_sorted(self, toy):
        emb = tfidf_fit(toy)
        assert list(emb.vocabulary) == sorted(emb.vocabulary)

    def test_vectors_unit_norm(self, toy):
        emb = tfidf_fit(toy)
        v = emb.embed_sentence("protesters filled the square")
        assert np.linalg.norm(v) == pytest.approx(1.0)

    def test_ubiquitous_term_gets_floor_idf(self, toy):
        emb = tfidf_fit(toy)
        idx = list(emb.vocabulary).index("the")
        assert emb.idf[idx] == pytest.approx(1.0)

    def test_unseen_tokens_ignored(self, toy):
        emb = tfidf_fit(toy)
        a = emb.embed_sentence("protesters marched")
        b = emb.embed_sentence("protesters marched zzzunseen")
        np.testing.assert_allclose(a, b)

    def test_all_unknown_is_zero_vector(self, toy):
        emb = tfidf_fit(toy)
        assert np.linalg.norm(emb.embed_sentence("zzz qqq")) == 0.0


class TestHashed:
    def test_deterministic_across_instances(self):
        a = HashedEmbedder(dim=64, seed=0).embed_sentence("some words here")
        b = hashed_embedding_provider(64, 0).embed_sentence("some words here")
        np.testing.assert_array_equal(a, b)

    def test_unit_norm_for_nonempty(self):
        v = HashedEmbedder(dim=32, seed=3).embed_sentence("alpha beta gamma")
        assert np.linalg.norm(v) == pytest.approx(1.0)

    def test_seed_changes_vectors(self):
        a = HashedEmbedder(dim=64, seed=0).embed_sentence("alpha beta")
        b = HashedEmbedder(dim=64, seed=1).embed_sentence("alpha beta")
        assert not np.allclose(a, b)

    def test_empty_text_is_zero(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            v = HashedEmbedder(dim=16, seed=0).embed_sentence("...")
        assert np.linalg.norm(v) == 0.0

    def test_dim_floor(self):
        with pytest.raises(ValidationError):
            hashed_embedding_provider(dim=1, seed=0)

    def test_distinct_words_mostly_spread_out(self):
        # pseudo-orthogonality: most single-word pairs should be far apart
        emb = HashedEmbedder(dim=64, seed=0)
        words = [f"word{i}" for i in range(100)]
        vecs = emb.embed_sentences(words)
        ok = 0
        rng = np.random.default_rng(0)
        for _ in range(100):
            i, j = rng.choice(100, size=2, replace=False)
            if abs(float(vecs[i] @ vecs[j])) < 0.5:
                ok += 1
        assert ok >= 95

    def test_batch_matches_single(self):
        emb = HashedEmbedder(dim=32, seed=5)
        texts = ["one thing", "another thing"]
        batch = emb.embed_sentences(texts)
        for row, t in zip(batch, texts):
            np.testing.assert_array_equal(row, emb.embed_sentence(t))


class TestRemote:
    def _echo_routes(self, dim=4, log=None):
        def embed(body):
            texts = body["sentences"]
            if log is not None:
                log.append(list(texts))
            vecs = [[float(len(t))] + [0.0] * (dim - 1) for t in texts]
            return 200, {"vectors": vecs}
        return {("POST", "/embed"): embed}

    def test_round_trip_preserves_order(self):
        with JsonServer(self._echo_routes()) as srv:
            emb = remote_embedding_provider(srv.url, dim=4)
            got = emb.embed_sentences(["abc", "fourteen chars"])
            assert got[0][0] == 3.0
            assert got[1][0] == 14.0

    def test_caching_avoids_repeat_requests(self):
        calls = []
        with JsonServer(self._echo_routes(log=calls)) as srv:
            emb = remote_embedding_provider(srv.url, dim=4)
            emb.embed_sentence("hello there")
            emb.embed_sentence("hello there")
            emb.embed_sentences(["hello there", "novel text"])
        flat = [t for batch in calls for t in batch]
        assert flat.count("hello there") == 1
        assert flat.count("novel text") == 1

    def test_duplicate_texts_sent_once(self):
        calls = []
        with JsonServer(self._echo_routes(log=calls)) as srv:
            emb = remote_embedding_provider(srv.url, dim=4)
            got = emb.embed_sentences(["same", "same", "other"])
        assert calls == [["same", "other"]]
        np.testing.assert_array_equal(got[0], got[1])

    def test_wrong_count_is_contract_error(self):
        routes = {("POST", "/embed"): lambda body: (200, {"vectors": [[1.0, 0.0]]})}
        with JsonServer(routes) as srv:
            emb = remote_embedding_provider(srv.url, dim=2)
            with pytest.raises(ContractError):
                emb.embed_sentences(["a", "b"])

    def test_wrong_dim_is_contract_error(self):
        routes = {("POST", "/embed"): lambda body: (200, {"vectors": [[1.0, 0.0, 0.0]]})}
        with JsonServer(routes) as srv:
            emb = remote_embedding_provider(srv.url, dim=2)
            with pytest.raises(ContractError):
                emb.embed_sentence("a")

    def test_server_error_exhausts_retries(self):
        hits = []
        def fail(body):
            hits.append(1)
            return 500, {"error": "boom"}
        with JsonServer({("POST", "/embed"): fail}) as srv:
            emb = RemoteEmbedder(srv.url, dim=2, retries=2, timeout=5.0)
            with pytest.raises(ProviderError):
                emb.embed_sentence("a")
        assert len(hits) == 3  # initial try plus two retries

    def test_cache_file_round_trip(self, tmp_path):
        cache = tmp_path / "cache.jsonl"
        calls = []
        with JsonServer(self._echo_routes(log=calls)) as srv:
            first = RemoteEmbedder(srv.url, dim=4, cache_path=cache)
            v1 = first.embed_sentence("persist me")
        assert cache.exists()
        with JsonServer(self._echo_routes(log=calls)) as srv:
            second = RemoteEmbedder(srv.url, dim=4, cache_path=cache)
            v2 = second.embed_sentence("persist me")
        np.testing.assert_array_equal(v1, v2)
        flat = [t for batch in calls for t in batch]
        assert flat.count("persist me") == 1

    def test_endpoint_normalisation(self):
        with JsonServer(self._echo_routes()) as srv:
            for suffix in ("", "/", "/embed"):
                emb = remote_embedding_provider(srv.url + suffix, dim=4)
                assert emb.embed_sentence("x")[0] == 1.0
