"""Article ingestion, tokenisation, date-mention resolution and file formats."""

import json
from collections import Counter
from datetime import date

import pytest

from chronoline.corpus import (
    Article,
    ArticleCollection,
    EventSummary,
    KeywordSet,
    Timeline,
    detokenize,
    extract_date_mentions,
    extract_keywords_tfidf,
    load_collection,
    load_timeline,
    parse_daystamp,
    save_collection,
    save_timeline,
    split_sentences,
    tokenize,
    truncate_article,
    truncate_collection,
)
from chronoline.errors import ParseError, ValidationError


class TestTokenize:
    def test_lowercases_and_strips_punctuation(self):
        assert tokenize("The cat, sat!") == ["the", "cat", "sat"]

    def test_keeps_internal_punctuation(self):
        assert tokenize("don't stop") == ["don't", "stop"]
        # only the trailing period goes, the inner ones stay
        assert tokenize("U.S. officials") == ["u.s", "officials"]

    def test_drops_pure_punctuation_tokens(self):
        assert tokenize("wait -- what ?!") == ["wait", "what"]

    def test_empty(self):
        assert tokenize("") == []
        assert tokenize("   ") == []

    def test_detokenize_space_joins(self):
        assert detokenize(["a", "b", "c"]) == "a b c"
        assert detokenize([]) == ""


class TestSplitSentences:
    def test_basic_split(self):
        text = "Crowds gathered. Police watched. Nothing moved."
        assert split_sentences(text) == [
            "Crowds gathered.", "Police watched.", "Nothing moved.",
        ]

    def test_abbreviation_does_not_split(self):
        spans = split_sentences("Dr. Smith arrived late. He left early.")
        assert spans == ["Dr. Smith arrived late.", "He left early."]

    def test_month_abbreviation(self):
        spans = split_sentences("It happened on Jan. 5 at dawn. Nobody saw it.")
        assert spans == ["It happened on Jan. 5 at dawn.", "Nobody saw it."]

    def test_question_and_exclamation(self):
        assert split_sentences("Really? Yes! Fine.") == ["Really?", "Yes!", "Fine."]

    def test_no_boundary_before_lowercase(self):
        # ellipsis followed by lowercase is not a sentence break
        assert split_sentences("it went on... and on.") == ["it went on... and on."]

    def test_empty_text(self):
        assert split_sentences("") == []
        assert split_sentences("  \n ") == []


class TestDateMentions:
    PUB = date(2011, 3, 20)

    def test_iso_form(self):
        assert extract_date_mentions("on 2011-03-02 the", self.PUB) == Counter(
            {date(2011, 3, 2): 1}
        )

    def test_day_month_year(self):
        got = extract_date_mentions("On 2 March 2011 crowds marched.", self.PUB)
        assert got == Counter({date(2011, 3, 2): 1})

    def test_month_day_year(self):
        got = extract_date_mentions("on March 2, 2011 crowds", self.PUB)
        assert got == Counter({date(2011, 3, 2): 1})

    def test_yearless_resolves_backwards(self):
        # nearest March 2 on or before the publication date
        got = extract_date_mentions("protests on March 2 continued", self.PUB)
        assert got == Counter({date(2011, 3, 2): 1})
        later = extract_date_mentions("again on April 2 they", self.PUB)
        assert later == Counter({date(2010, 4, 2): 1})

    def test_weekday(self):
        # 2011-03-20 is a Sunday; the most recent Friday is 2011-03-18
        got = extract_date_mentions("announced Friday evening", self.PUB)
        assert got == Counter({date(2011, 3, 18): 1})
        same = extract_date_mentions("said Sunday", self.PUB)
        assert same == Counter({self.PUB: 1})

    def test_relative_words(self):
        got = extract_date_mentions("It began yesterday and goes on today", self.PUB)
        assert got == Counter({date(2011, 3, 19): 1, self.PUB: 1})

    def test_invalid_date_ignored(self):
        assert extract_date_mentions("due February 31, 2011 at", self.PUB) == Counter()
        assert extract_date_mentions("the 2011-13-40 report", self.PUB) == Counter()

    def test_counts_repeats(self):
        text = "On 2011-03-02 and again 2011-03-02."
        assert extract_date_mentions(text, self.PUB)[date(2011, 3, 2)] == 2

    def test_parse_daystamp_rejects_garbage(self):
        with pytest.raises(ValidationError):
            parse_daystamp("not-a-date")


class TestArticle:
    def test_from_text_populates_everything(self):
        a = Article.from_text("a1", date(2011, 3, 5), "One thing. Another thing.")
        assert a.sentences == ("One thing.", "Another thing.")
        assert a.text == "One thing. Another thing."

    def test_empty_text_rejected(self):
        with pytest.raises(ValidationError):
            Article.from_text("a1", date(2011, 3, 5), "   ")

    def test_collection_rejects_duplicate_ids(self):
        a = Article.from_text("a1", date(2011, 3, 5), "Something happened.")
        with pytest.raises(ValidationError, match="duplicate"):
            ArticleCollection("t", (a, a))

    def test_corpus_mention_counts_sum(self, toy):
        counts = toy.date_mention_counts()
        assert counts[date(2011, 3, 2)] == 4
        assert counts[date(2011, 3, 10)] == 4
        assert counts[date(2011, 3, 19)] == 4


class TestTimeline:
    def test_requires_strictly_increasing_dates(self):
        e1 = EventSummary.from_text(date(2011, 3, 2), "first")
        e2 = EventSummary.from_text(date(2011, 3, 2), "same day")
        with pytest.raises(ValidationError):
            Timeline("t", (e1, e2))

    def test_text_concatenates_in_order(self):
        e1 = EventSummary.from_text(date(2011, 3, 2), "first")
        e2 = EventSummary.from_text(date(2011, 3, 9), "second")
        t = Timeline("t", (e1, e2))
        assert t.text == "first second"
        assert t.dates == (date(2011, 3, 2), date(2011, 3, 9))


class TestFiles:
    def test_collection_round_trip(self, tmp_path, toy):
        path = tmp_path / "corpus.jsonl"
        save_collection(toy, path)
        back = load_collection(path, topic=toy.topic)
        assert [a.id for a in back.articles] == [a.id for a in toy.articles]
        assert back.articles[0].text == toy.articles[0].text
        assert back.articles[0].date_mentions == toy.articles[0].date_mentions

    def test_accepts_publication_date_alias(self, tmp_path):
        path = tmp_path / "alias.jsonl"
        path.write_text(json.dumps(
            {"id": "x", "publication_date": "2011-03-02", "text": "A march."}
        ) + "\n")
        got = load_collection(path)
        assert got.articles[0].publication_date == date(2011, 3, 2)

    def test_parse_error_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "date": "2011-03-02", "text": "Ok here."}\nnot json\n')
        with pytest.raises(ParseError, match="line 2"):
            load_collection(path)

    def test_missing_field_reported(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "text": "No date."}\n')
        with pytest.raises(ParseError, match="date"):
            load_collection(path)

    def test_timeline_round_trip(self, tmp_path, toy_ref):
        path = tmp_path / "timeline.jsonl"
        save_timeline(toy_ref, path)
        back = load_timeline(path)
        assert back.dates == toy_ref.dates
        assert back.text == toy_ref.text

    def test_timeline_load_sorts_by_date(self, tmp_path):
        path = tmp_path / "shuffled.jsonl"
        path.write_text(
            json.dumps({"date": "2011-03-19", "summary": "late"}) + "\n"
            + json.dumps({"date": "2011-03-02", "summary": "early"}) + "\n"
        )
        assert load_timeline(path).dates == (date(2011, 3, 2), date(2011, 3, 19))


class TestTruncate:
    def test_keeps_first_k_sentences(self):
        a = Article.from_text(
            "a1", date(2011, 3, 20),
            "First thing. Second thing. Third thing.",
        )
        assert truncate_article(a, 2).sentences == ("First thing.", "Second thing.")

    def test_mentions_recomputed_on_kept_text(self):
        a = Article.from_text(
            "a1", date(2011, 3, 20),
            "Quiet start here. The raid came on 2011-03-19 at dawn.",
        )
        assert date(2011, 3, 19) in a.date_mentions
        cut = truncate_article(a, 1)
        assert date(2011, 3, 19) not in cut.date_mentions

    def test_collection_truncation(self, toy):
        cut = truncate_collection(toy, 1)
        assert all(len(a.sentences) == 1 for a in cut.articles)

    def test_negative_budget_rejected(self, toy):
        with pytest.raises(ValidationError):
            truncate_article(toy.articles[0], -1)


class TestKeywords:
    def test_parallel_embeddings_enforced(self):
        with pytest.raises(ValidationError):
            KeywordSet(("a", "b"), embeddings=((1.0,),))

    def test_tfidf_keywords_come_from_reference(self, toy, toy_ref):
        ks = extract_keywords_tfidf(toy_ref, toy, n=10)
        assert len(ks) == 10
        reference_terms = set(tokenize(toy_ref.text))
        assert set(ks.keywords) <= reference_terms

    def test_rare_term_beats_ubiquitous_term_at_equal_tf(self):
        # equal term frequency in the reference, so document rarity decides
        ref = Timeline("t", (EventSummary.from_text(date(2011, 1, 1), "alpha beta"),))
        docs = ArticleCollection("t", (
            Article.from_text("d1", date(2011, 1, 2), "alpha beta here."),
            Article.from_text("d2", date(2011, 1, 3), "alpha again."),
            Article.from_text("d3", date(2011, 1, 4), "alpha gamma too."),
        ))
        ks = extract_keywords_tfidf(ref, docs, n=1)
        assert ks.keywords == ("beta",)

    def test_deterministic_with_lexicographic_ties(self, toy, toy_ref):
        a = extract_keywords_tfidf(toy_ref, toy, n=10)
        b = extract_keywords_tfidf(toy_ref, toy, n=10)
        assert a.keywords == b.keywords

    def test_rejects_bad_inputs(self, toy, toy_ref):
        with pytest.raises(ValidationError):
            extract_keywords_tfidf(toy_ref, toy, n=0)
        with pytest.raises(ValidationError):
            extract_keywords_tfidf(Timeline("t", ()), toy, n=3)
