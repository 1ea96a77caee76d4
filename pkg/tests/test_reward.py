"""Sub-reward functions, their weighted combination, and the n-gram scorer."""

import math
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _helpers import FixedLossLm, JsonServer, MappedEmbedder, MappedLossLm
from chronoline.corpus import Article, ArticleCollection, KeywordSet, detokenize, tokenize
from chronoline.errors import ParseError, ProviderError, ValidationError
from chronoline.gppl import ScoreModel
from chronoline.reward import (
    NGramScorer,
    RemoteLmScorer,
    RewardConfig,
    RewardContext,
    calibrate_alpha,
    compound_reward,
    consistency_reward,
    language_quality_reward,
    load_reward_config,
    ngram_lm_fit,
    preference_reward,
    repetition_penalty,
    save_reward_config,
)


def _point_model(x, mean, dim=2):
    """Single-item score model whose prediction at x is ~mean."""
    return ScoreModel(
        item_ids=("m",),
        posterior_mean=np.array([mean]),
        posterior_covariance=np.array([[0.1]]),
        lengthscale=1.0,
        signal_variance=1.0,
        noise_scale=1.0,
        training_embeddings=np.asarray(x, dtype=float).reshape(1, dim),
    )


KS_POINT_TWO_FOUR = KeywordSet(
    ("k1", "k2"),
    embeddings=(
        (0.2, math.sqrt(0.96)),
        (0.4, math.sqrt(0.84)),
    ),
)


class TestRewardConfig:
    def test_validation(self):
        with pytest.raises(ValidationError):
            RewardConfig(w=1.5)
        with pytest.raises(ValidationError):
            RewardConfig(gamma2=-0.1)
        with pytest.raises(ValidationError):
            RewardConfig(gamma1=0, gamma2=0, gamma3=0, gamma4=0)
        with pytest.raises(ValidationError):
            RewardConfig(alpha=0)

    def test_file_round_trip(self, tmp_path):
        cfg = RewardConfig(w=0.7, gamma1=0.1, gamma2=0.2, gamma3=0.3, gamma4=0.4,
                           alpha=2.5, normalize_keywords=True)
        path = tmp_path / "reward.cfg"
        save_reward_config(cfg, path)
        assert load_reward_config(path) == cfg

    def test_file_tolerates_comments(self, tmp_path):
        path = tmp_path / "reward.cfg"
        path.write_text("# comment\n\nw=0.25\n")
        assert load_reward_config(path).w == 0.25

    def test_bad_line_rejected(self, tmp_path):
        path = tmp_path / "reward.cfg"
        path.write_text("w 0.25\n")
        with pytest.raises(ParseError):
            load_reward_config(path)

    def test_bad_number_rejected(self, tmp_path):
        path = tmp_path / "reward.cfg"
        path.write_text("w=abc\n")
        with pytest.raises(ParseError):
            load_reward_config(path)


class TestPreferenceReward:
    def test_blends_keywords_and_model(self):
        s = np.array([1.0, 0.0])
        model = _point_model(s, mean=0.6)
        got = preference_reward(s, KS_POINT_TWO_FOUR, model, w=0.5)
        # 0.5 * (0.2 + 0.4) + 0.5 * 0.6
        assert got == pytest.approx(0.6, abs=1e-5)

    def test_w_zero_is_pure_model_score(self):
        s = np.array([1.0, 0.0])
        model = _point_model(s, mean=-0.3)
        got = preference_reward(s, None, model, w=0.0)
        assert got == pytest.approx(-0.3, abs=1e-5)

    def test_w_one_ignores_model(self):
        s = np.array([1.0, 0.0])
        assert preference_reward(s, KS_POINT_TWO_FOUR, None, w=1.0) == pytest.approx(
            0.6, abs=1e-9
        )

    def test_identical_keyword_contributes_exactly_one(self):
        s = np.array([0.0, 1.0])
        ks = KeywordSet(("k",), embeddings=((0.0, 1.0),))
        assert preference_reward(s, ks, None, w=1.0) == pytest.approx(1.0, abs=1e-12)

    def test_normalize_averages_instead_of_summing(self):
        s = np.array([1.0, 0.0])
        summed = preference_reward(s, KS_POINT_TWO_FOUR, None, w=1.0)
        averaged = preference_reward(s, KS_POINT_TWO_FOUR, None, w=1.0,
                                     normalize_keywords=True)
        assert averaged == pytest.approx(summed / 2, abs=1e-12)

    def test_missing_inputs_rejected(self):
        s = np.array([1.0, 0.0])
        with pytest.raises(ValidationError):
            preference_reward(s, None, _point_model(s, 0.0), w=0.5)
        with pytest.raises(ValidationError):
            preference_reward(s, KeywordSet(("k",)), _point_model(s, 0.0), w=0.5)
        with pytest.raises(ValidationError):
            preference_reward(s, KS_POINT_TWO_FOUR, None, w=0.5)
        with pytest.raises(ValidationError):
            preference_reward(s, KS_POINT_TWO_FOUR, None, w=2.0)


class TestConsistencyReward:
    def test_hand_values(self):
        assert consistency_reward(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 1.0
        got = consistency_reward(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
        assert got == pytest.approx(0.70711, abs=1e-5)
        assert consistency_reward(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


class TestLanguageQuality:
    def test_hand_values(self):
        assert language_quality_reward("x", FixedLossLm(0.0), alpha=2.0) == pytest.approx(1.0, abs=1e-9)
        assert language_quality_reward("x", FixedLossLm(2.0), alpha=2.0) == pytest.approx(0.0, abs=1e-9)
        assert language_quality_reward("x", FixedLossLm(1.0), alpha=2.0) == pytest.approx(0.5, abs=1e-9)

    def test_strictly_decreasing_in_loss(self):
        values = [
            language_quality_reward("x", FixedLossLm(loss), alpha=1.0)
            for loss in (0.0, 0.3, 0.9, 1.4)
        ]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_alpha_must_be_positive(self):
        with pytest.raises(ValidationError):
            language_quality_reward("x", FixedLossLm(0.0), alpha=0.0)


class TestRepetitionPenalty:
    def test_hand_values(self):
        assert repetition_penalty(["the", "cat", "sat"]) == pytest.approx(1.0, abs=1e-9)
        assert repetition_penalty(["a", "a", "a", "a"]) == pytest.approx(0.25, abs=1e-9)
        assert repetition_penalty(["the", "cat", "and", "the", "dog"]) == pytest.approx(0.8, abs=1e-9)

    def test_empty_scores_one(self):
        assert repetition_penalty([]) == 1.0

    def test_case_insensitive(self):
        assert repetition_penalty(["The", "the"]) == repetition_penalty(["the", "the"])

    @given(st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=1, max_size=12))
    @settings(max_examples=60, deadline=None)
    def test_appending_a_duplicate_strictly_lowers_it(self, tokens):
        before = repetition_penalty(tokens)
        assert repetition_penalty(tokens + [tokens[0]]) < before


class TestCompoundReward:
    def _full_context(self):
        provider = MappedEmbedder({"alpha beta": np.array([1.0, 0.0])})
        cfg = RewardConfig(w=1.0, alpha=1.0)
        return RewardContext(
            config=cfg,
            provider=provider,
            keywords=KS_POINT_TWO_FOUR,
            source_emb=np.array([0.8, 0.6]),
            lm=FixedLossLm(0.6),
        )

    def test_equal_weight_hand_example(self):
        got = compound_reward("alpha beta", self._full_context())
        assert got.r1 == pytest.approx(0.6, abs=1e-9)
        assert got.r2 == pytest.approx(0.8, abs=1e-9)
        assert got.r3 == pytest.approx(0.4, abs=1e-9)
        assert got.r4 == pytest.approx(1.0, abs=1e-9)
        assert got.total == pytest.approx(0.7, abs=1e-9)

    def test_total_is_linear_in_weights(self):
        base = self._full_context()
        heavy = RewardContext(
            config=RewardConfig(w=1.0, alpha=1.0, gamma1=0.5, gamma2=0.1,
                                gamma3=0.25, gamma4=0.15),
            provider=base.provider,
            keywords=base.keywords,
            source_emb=base.source_emb,
            lm=base.lm,
        )
        b = compound_reward("alpha beta", heavy)
        expected = 0.5 * b.r1 + 0.1 * b.r2 + 0.25 * b.r3 + 0.15 * b.r4
        assert b.total == pytest.approx(expected, abs=1e-12)

    def test_zero_weight_components_skip_their_dependencies(self):
        cfg = RewardConfig(gamma1=0, gamma2=0, gamma3=0, gamma4=1)
        got = compound_reward("alpha beta beta", RewardContext(config=cfg))
        assert (got.r1, got.r2, got.r3) == (0.0, 0.0, 0.0)
        assert got.r4 == pytest.approx(2 / 3)
        assert got.total == pytest.approx(2 / 3)

    def test_empty_summary_fine_for_repetition_only(self):
        cfg = RewardConfig(gamma1=0, gamma2=0, gamma3=0, gamma4=1)
        got = compound_reward("", RewardContext(config=cfg))
        assert got.r4 == 1.0

    def test_empty_summary_rejected_when_it_must_be_embedded(self):
        ctx = self._full_context()
        with pytest.raises(ValidationError):
            compound_reward("", ctx)

    def test_missing_provider_rejected(self):
        cfg = RewardConfig(w=1.0)
        with pytest.raises(ValidationError):
            compound_reward("alpha beta", RewardContext(config=cfg))

    def test_missing_lm_rejected(self):
        cfg = RewardConfig(gamma1=0, gamma2=0, gamma3=1, gamma4=0)
        with pytest.raises(ValidationError):
            compound_reward("alpha beta", RewardContext(config=cfg))


def _one_sentence_corpus(text):
    return ArticleCollection("t", (Article.from_text("x", date(2011, 1, 1), text),))


class TestNGramScorer:
    def test_matches_hand_computed_backoff(self):
        lm = ngram_lm_fit(_one_sentence_corpus("a b"), n=2, discount=0.1)
        # two tokens, so the open-vocab floor is 1/3
        p_uni = 0.9 / 2 + 0.1 * (2 / 2) * (1 / 3)
        p_start = 0.9 / 1 + 0.1 * (1 / 1) * p_uni
        p_follow = 0.9 / 1 + 0.1 * (1 / 1) * p_uni
        assert lm.loss("a") == pytest.approx(-math.log(p_start), abs=1e-12)
        expected = -(math.log(p_start) + math.log(p_follow)) / 2
        assert lm.loss("a b") == pytest.approx(expected, abs=1e-12)

    def test_loss_nonnegative_and_finite_on_unseen_text(self):
        lm = ngram_lm_fit(_one_sentence_corpus("a b"), n=2, discount=0.1)
        for text in ("zzz", "a zzz b", "completely novel words"):
            loss = lm.loss(text)
            assert math.isfinite(loss)
            assert loss >= 0.0

    def test_empty_text_loss_is_zero(self):
        lm = ngram_lm_fit(_one_sentence_corpus("a b"), n=2, discount=0.1)
        assert lm.loss("") == 0.0

    def test_unigram_order_works(self):
        lm = ngram_lm_fit(_one_sentence_corpus("a b a"), n=1, discount=0.1)
        assert math.isfinite(lm.loss("a b"))
        assert lm.loss("a") < lm.loss("zzz")

    def test_verbatim_beats_shuffled(self, toy):
        lm = ngram_lm_fit(toy, n=3, discount=0.1)
        seen = "protesters filled the square demanding the governor resign"
        shuffled = "square the filled governor protesters resign demanding the"
        assert lm.loss(seen) < lm.loss(shuffled)

    def test_in_domain_beats_reversed_corpus(self, toy):
        lm = ngram_lm_fit(toy, n=3, discount=0.1)
        in_domain, reversed_domain = [], []
        for article in toy.articles:
            in_domain.append(lm.loss(article.text))
            backwards = " ".join(
                detokenize(list(reversed(tokenize(s)))) + "."
                for s in article.sentences
            )
            reversed_domain.append(lm.loss(backwards))
        assert np.mean(in_domain) < np.mean(reversed_domain)

    def test_fit_validation(self, toy):
        with pytest.raises(ValidationError):
            ngram_lm_fit(ArticleCollection("t", ()), n=2)
        with pytest.raises(ValidationError):
            ngram_lm_fit(toy, n=0)
        with pytest.raises(ValidationError):
            ngram_lm_fit(toy, discount=0.0)
        with pytest.raises(ValidationError):
            ngram_lm_fit(toy, discount=1.0)


class TestRemoteLm:
    def test_round_trip_and_cache(self):
        hits = []
        def loss_route(body):
            hits.append(body["text"])
            return 200, {"loss": 1.25}
        with JsonServer({("POST", "/loss"): loss_route}) as srv:
            lm = RemoteLmScorer(srv.url)
            assert lm.loss("same text") == 1.25
            assert lm.loss("same text") == 1.25
        assert hits == ["same text"]

    def test_failure_exhausts_retries(self):
        hits = []
        def fail(body):
            hits.append(1)
            return 500, {}
        with JsonServer({("POST", "/loss"): fail}) as srv:
            lm = RemoteLmScorer(srv.url, retries=1)
            with pytest.raises(ProviderError):
                lm.loss("x")
        assert len(hits) == 2


class TestCalibration:
    def test_takes_the_maximum(self):
        lm = MappedLossLm({"x": 2.0, "y": 3.5, "z": 1.1})
        assert calibrate_alpha(lm, ["x", "y", "z"]) == 3.5

    def test_singleton(self):
        assert calibrate_alpha(FixedLossLm(4.2), ["anything"]) == 4.2

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            calibrate_alpha(FixedLossLm(1.0), [])

    def test_calibrated_alpha_keeps_r3_in_unit_range(self):
        lm = MappedLossLm({"x": 2.0, "y": 3.5, "z": 1.1})
        alpha = calibrate_alpha(lm, ["x", "y", "z"])
        for text in ("x", "y", "z"):
            r3 = language_quality_reward(text, lm, alpha)
            assert 0.0 <= r3 <= 1.0
