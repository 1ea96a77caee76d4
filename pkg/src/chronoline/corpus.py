"""Dated article collections: ingestion, sentence splitting, date mentions, keywords.

A collection is a set of articles, each with a publication date, pre-split
sentences and a multiset of resolved date mentions.  Timelines pair dates
with event summaries.  All values here are immutable after construction and
safe to share across workers.

File formats (UTF-8, one JSON object per line):
  corpus file:   {"id": str, "date": "YYYY-MM-DD", "text": str}
  timeline file: {"date": "YYYY-MM-DD", "summary": str}
"""

from __future__ import annotations

import calendar
import json
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, replace
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ParseError, ValidationError

# A calendar day.  datetime.date already provides the invariants we need:
# valid Gregorian dates, total order, ISO-8601 serialisation via isoformat().
DayStamp = date


def parse_daystamp(s: str) -> DayStamp:
    try:
        return date.fromisoformat(s.strip())
    except ValueError as e:
        raise ValidationError(f"not a valid YYYY-MM-DD date: {s!r}") from e


# ---------------------------------------------------------------------------
# Tokenisation
#
# One shared definition used by TF-IDF, ROUGE and the repetition penalty so
# that metrics and rewards stay comparable: lowercase, split on Unicode
# whitespace, strip surrounding punctuation.
# ---------------------------------------------------------------------------


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokens with surrounding punctuation stripped."""
    tokens = []
    for raw in text.lower().split():
        start, end = 0, len(raw)
        while start < end and _is_punct(raw[start]):
            start += 1
        while end > start and _is_punct(raw[end - 1]):
            end -= 1
        if end > start:
            tokens.append(raw[start:end])
    return tokens


def detokenize(tokens: Sequence[str]) -> str:
    """Inverse of token-level generation: space-join, no truecasing."""
    return " ".join(tokens)


# ---------------------------------------------------------------------------
# Sentence splitting
# ---------------------------------------------------------------------------

# Words whose trailing period never ends a sentence.
_ABBREVIATIONS = {
    "dr", "mr", "mrs", "ms", "prof", "st", "jr", "sr", "rev", "gen", "sen",
    "rep", "gov", "capt", "sgt", "col", "lt", "cmdr", "vs", "etc", "inc",
    "ltd", "co", "corp", "approx", "dept", "est", "fig", "no", "vol",
    "e.g", "i.e", "u.s", "u.k", "u.n", "jan", "feb", "mar", "apr", "jun",
    "jul", "aug", "sep", "sept", "oct", "nov", "dec", "mon", "tue", "wed",
    "thu", "fri", "sat", "sun",
}

# Sentence-final punctuation, whitespace, then an uppercase letter or digit.
_BOUNDARY = re.compile(r"[.!?]+(\s+)(?=[A-Z0-9])")


def split_sentences(text: str) -> list[str]:
    """Split text into sentence spans.

    Boundaries are sentence-final punctuation followed by whitespace and an
    uppercase letter or digit, except after known abbreviations.  The spans,
    stripped of boundary whitespace, concatenate back to the input.
    """
    if not text.strip():
        return []
    spans = []
    start = 0
    for m in _BOUNDARY.finditer(text):
        punct_end = m.end() - len(m.group(1))
        word = text[start:punct_end].rsplit(None, 1)[-1]
        if word.rstrip(".").lower() in _ABBREVIATIONS:
            continue
        spans.append(text[start:punct_end])
        start = m.end()
    spans.append(text[start:])
    return [s.strip() for s in spans if s.strip()]


# ---------------------------------------------------------------------------
# Date-mention extraction
# ---------------------------------------------------------------------------

_MONTHS = {name.lower(): i for i, name in enumerate(calendar.month_name) if name}
_MONTHS.update({name.lower(): i for i, name in enumerate(calendar.month_abbr) if name})
_WEEKDAYS = {name.lower(): i for i, name in enumerate(calendar.day_name)}

_MONTH_RX = "|".join(sorted(_MONTHS, key=len, reverse=True))
_WEEKDAY_RX = "|".join(_WEEKDAYS)

# Ordered by specificity; one left-to-right pass avoids double counting.
_DATE_RX = re.compile(
    r"""
    (?P<iso>\b\d{4}-\d{2}-\d{2}\b)
  | \b(?P<dmy_d>\d{1,2})\s+(?P<dmy_m>%(months)s)\.?\s+(?P<dmy_y>\d{4})\b
  | \b(?P<mdy_m>%(months)s)\.?\s+(?P<mdy_d>\d{1,2})\s*,\s*(?P<mdy_y>\d{4})\b
  | \b(?P<md_m>%(months)s)\.?\s+(?P<md_d>\d{1,2})\b
  | \b(?P<weekday>%(weekdays)s)\b
  | \b(?P<relative>yesterday|today)\b
    """ % {"months": _MONTH_RX, "weekdays": _WEEKDAY_RX},
    re.IGNORECASE | re.VERBOSE,
)


def _safe_date(year: int, month: int, day: int) -> DayStamp | None:
    try:
        return date(year, month, day)
    except ValueError:
        return None


def _nearest_month_day(month: int, day: int, pub: DayStamp) -> DayStamp | None:
    # Most recent occurrence of (month, day) on or before pub.
    for year in (pub.year, pub.year - 1):
        d = _safe_date(year, month, day)
        if d is not None and d <= pub:
            return d
    return None


def extract_date_mentions(text: str, pub_date: DayStamp) -> Counter:
    """Resolve date expressions in text against the publication date.

    Recognised forms: ISO dates, "2 March 2011" / "March 2, 2011",
    year-free "March 2" and weekday names (nearest such day on or before
    pub_date), and "yesterday"/"today".  Each appearance counts once;
    unparseable or invalid fragments are ignored.
    """
    mentions: Counter = Counter()
    for m in _DATE_RX.finditer(text):
        resolved: DayStamp | None = None
        if m.group("iso"):
            try:
                resolved = date.fromisoformat(m.group("iso"))
            except ValueError:
                resolved = None
        elif m.group("dmy_d"):
            resolved = _safe_date(
                int(m.group("dmy_y")), _MONTHS[m.group("dmy_m").lower()], int(m.group("dmy_d"))
            )
        elif m.group("mdy_m"):
            resolved = _safe_date(
                int(m.group("mdy_y")), _MONTHS[m.group("mdy_m").lower()], int(m.group("mdy_d"))
            )
        elif m.group("md_m"):
            resolved = _nearest_month_day(
                _MONTHS[m.group("md_m").lower()], int(m.group("md_d")), pub_date
            )
        elif m.group("weekday"):
            target = _WEEKDAYS[m.group("weekday").lower()]
            resolved = pub_date - timedelta(days=(pub_date.weekday() - target) % 7)
        elif m.group("relative"):
            word = m.group("relative").lower()
            resolved = pub_date - timedelta(days=1) if word == "yesterday" else pub_date
        if resolved is not None:
            mentions[resolved] += 1
    return mentions


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Article:
    """A dated source document, pre-split into sentences."""

    id: str
    publication_date: DayStamp
    sentences: tuple[str, ...]
    date_mentions: Counter

    @property
    def text(self) -> str:
        return " ".join(self.sentences)

    @classmethod
    def from_text(cls, id: str, publication_date: DayStamp, text: str) -> "Article":
        sentences = tuple(split_sentences(text))
        if not sentences:
            raise ValidationError(f"article {id!r} has no sentences after ingestion")
        mentions = extract_date_mentions(" ".join(sentences), publication_date)
        return cls(id, publication_date, sentences, mentions)


@dataclass(frozen=True)
class ArticleCollection:
    topic: str
    articles: tuple[Article, ...]

    def __post_init__(self):
        ids = [a.id for a in self.articles]
        if len(ids) != len(set(ids)):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise ValidationError(f"duplicate article id {dup!r} in collection")

    def __len__(self) -> int:
        return len(self.articles)

    def date_mention_counts(self) -> Counter:
        """Corpus-wide counts of every resolved date mention."""
        total: Counter = Counter()
        for a in self.articles:
            total.update(a.date_mentions)
        return total


@dataclass(frozen=True)
class EventSummary:
    """One dated entry of a timeline; tokens are tokenize(text)."""

    date: DayStamp
    text: str
    tokens: tuple[str, ...]

    @classmethod
    def from_text(cls, date: DayStamp, text: str) -> "EventSummary":
        return cls(date, text, tuple(tokenize(text)))


@dataclass(frozen=True)
class KeywordSet:
    """User-supplied terms of interest, optionally paired with embeddings.

    embeddings stays None until a provider is attached; when present it is
    parallel to keywords.
    """

    keywords: tuple[str, ...]
    embeddings: tuple | None = None

    def __post_init__(self):
        if self.embeddings is not None and len(self.embeddings) != len(self.keywords):
            raise ValidationError("keywords and embeddings must be parallel sequences")

    def __len__(self) -> int:
        return len(self.keywords)

    def with_embeddings(self, provider) -> "KeywordSet":
        return replace(self, embeddings=tuple(provider.embed_sentence(k) for k in self.keywords))


@dataclass(frozen=True)
class Timeline:
    topic: str
    entries: tuple[EventSummary, ...]

    def __post_init__(self):
        dates = [e.date for e in self.entries]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise ValidationError("timeline entries must be strictly increasing in date")

    @property
    def dates(self) -> tuple[DayStamp, ...]:
        return tuple(e.date for e in self.entries)

    @property
    def text(self) -> str:
        """Event summaries concatenated in date order."""
        return " ".join(e.text for e in self.entries)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def load_collection(path: str | Path, topic: str | None = None) -> ArticleCollection:
    """Load a line-delimited corpus file into an ArticleCollection."""
    path = Path(path)
    articles = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e.msg}", line=lineno) from e
            if not isinstance(record, dict):
                raise ParseError("record is not an object", line=lineno)
            missing = {"id", "text"} - record.keys()
            if "date" not in record and "publication_date" not in record:
                missing.add("date")
            if missing:
                raise ParseError(f"missing fields: {sorted(missing)}", line=lineno)
            raw_date = record.get("date", record.get("publication_date"))
            try:
                pub = parse_daystamp(str(raw_date))
            except ValidationError as e:
                raise ParseError(str(e), line=lineno) from e
            articles.append(Article.from_text(str(record["id"]), pub, str(record["text"])))
    return ArticleCollection(topic or path.stem, tuple(articles))


def save_collection(collection: ArticleCollection, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for a in collection.articles:
            record = {"id": a.id, "date": a.publication_date.isoformat(), "text": a.text}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_timeline(path: str | Path, topic: str | None = None) -> Timeline:
    """Load a line-delimited timeline file ({"date", "summary"} per line)."""
    path = Path(path)
    entries = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e.msg}", line=lineno) from e
            if "date" not in record or "summary" not in record:
                raise ParseError("missing fields: need date and summary", line=lineno)
            try:
                day = parse_daystamp(str(record["date"]))
            except ValidationError as e:
                raise ParseError(str(e), line=lineno) from e
            entries.append(EventSummary.from_text(day, str(record["summary"])))
    entries.sort(key=lambda e: e.date)
    return Timeline(topic or path.stem, tuple(entries))


def save_timeline(timeline: Timeline, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for e in timeline.entries:
            record = {"date": e.date.isoformat(), "summary": e.text}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def truncate_article(a: Article, k: int = 5) -> Article:
    """Keep the first k sentences; date mentions are recomputed on kept text."""
    if k < 0:
        raise ValidationError("sentence budget must be >= 0")
    kept = a.sentences[:k]
    mentions = extract_date_mentions(" ".join(kept), a.publication_date)
    return replace(a, sentences=kept, date_mentions=mentions)


def truncate_collection(collection: ArticleCollection, k: int = 5) -> ArticleCollection:
    return ArticleCollection(
        collection.topic, tuple(truncate_article(a, k) for a in collection.articles)
    )


def extract_keywords_tfidf(
    reference: Timeline, corpus: ArticleCollection, n: int = 10
) -> KeywordSet:
    """Top-n reference terms by TF-IDF weight over the corpus documents.

    tf is the raw count in the reference text, idf = ln((1+N)/(1+df)) + 1
    with df counted over corpus documents.  Ties break lexicographically.
    The returned set has no embeddings attached yet.
    """
    if n <= 0:
        raise ValidationError("keyword count must be positive")
    if not reference.entries:
        raise ValidationError("reference timeline is empty")
    tf = Counter(tokenize(reference.text))
    n_docs = len(corpus.articles)
    df: Counter = Counter()
    for a in corpus.articles:
        df.update(set(tokenize(a.text)))
    scored = [
        (-count * (math.log((1 + n_docs) / (1 + df[term])) + 1.0), term)
        for term, count in tf.items()
    ]
    scored.sort()
    return KeywordSet(tuple(term for _, term in scored[:n]))
