"""Small synthetic corpora with planted event structure.

The toy collection covers one invented crisis topic with three events on
known dates, four articles each.  Event vocabularies overlap heavily
inside an event and barely across events, so cheap hashed embeddings can
separate them; every article names its event date explicitly, which makes
date assignment and ranking deterministic.
"""

from __future__ import annotations

import json
from datetime import date
from pathlib import Path

from .corpus import Article, ArticleCollection, EventSummary, Timeline

TOY_TOPIC = "harbour-crisis"

# (event date, [article texts])
_TOY_EVENTS = [
    (
        date(2011, 3, 2),
        [
            "Protesters filled Meridian Square on 2 March 2011 demanding the "
            "governor resign. Chanting crowds waved banners across Meridian "
            "Square while police cordons blocked every boulevard. Organisers "
            "counted forty thousand protesters by nightfall.",
            "Crowds of protesters returned to Meridian Square on 2 March 2011. "
            "Police cordons held the boulevard as banners demanded the governor "
            "resign. Witnesses described chanting that lasted past midnight.",
            "On 2 March 2011 organisers led protesters through the boulevard "
            "toward Meridian Square. Banners called on the governor to resign "
            "while police kept cordons tight. Chanting crowds filled every "
            "corner of the square.",
            "Police estimated forty thousand protesters at Meridian Square on "
            "2 March 2011. Cordons sealed the boulevard while banners and "
            "chanting pressed the governor to resign.",
        ],
    ),
    (
        date(2011, 3, 10),
        [
            "Parliament approved the emergency reform statute on 10 March 2011 "
            "after a marathon sitting. Deputies traded amendments until the "
            "statute passed by ninety votes. Opposition benches walked out "
            "before the final tally.",
            "The emergency reform statute cleared parliament on 10 March 2011. "
            "Ninety deputies backed the statute while opposition benches "
            "boycotted the tally. Amendments narrowed the emergency powers "
            "during the sitting.",
            "On 10 March 2011 deputies passed the reform statute granting "
            "emergency powers. The sitting ran overnight as amendments piled "
            "up. Opposition benches rejected the tally and walked out of "
            "parliament.",
            "A marathon parliament sitting ended on 10 March 2011 with the "
            "emergency statute approved. Deputies counted ninety votes for "
            "reform despite the opposition walkout.",
        ],
    ),
    (
        date(2011, 3, 19),
        [
            "Coalition jets struck the coastal airbase on 19 March 2011 in the "
            "first wave of strikes. Radar installations and hangars burned "
            "through the night. Naval vessels launched missiles at the runway.",
            "The coastal airbase burned after coalition jets attacked on "
            "19 March 2011. Missiles from naval vessels cratered the runway "
            "and flattened hangars. A second wave of strikes hit radar "
            "installations before dawn.",
            "On 19 March 2011 missiles cratered the runway of the coastal "
            "airbase. Coalition jets flew two waves of strikes against radar "
            "and hangars. Naval vessels shelled the installations from "
            "offshore.",
            "Strikes on 19 March 2011 left the coastal airbase in flames. "
            "Coalition jets and naval missiles destroyed hangars, radar "
            "installations and the runway.",
        ],
    ),
]

_TOY_REFERENCE = [
    (date(2011, 3, 2), "protesters filled meridian square demanding the governor resign"),
    (date(2011, 3, 10), "parliament approved the emergency reform statute by ninety votes"),
    (date(2011, 3, 19), "coalition jets and naval missiles struck the coastal airbase"),
]

TOY_KEYWORDS = [
    "protesters", "governor", "parliament", "statute", "reform",
    "coalition", "airbase", "missiles", "square", "strikes",
]


def toy_collection() -> ArticleCollection:
    """The planted 12-article, 3-event collection."""
    articles = []
    for event_index, (day, texts) in enumerate(_TOY_EVENTS):
        for article_index, text in enumerate(texts):
            articles.append(
                Article.from_text(
                    id=f"e{event_index}a{article_index}",
                    publication_date=day,
                    text=text,
                )
            )
    return ArticleCollection(TOY_TOPIC, tuple(articles))


def toy_reference() -> Timeline:
    return Timeline(
        TOY_TOPIC,
        tuple(EventSummary.from_text(day, text) for day, text in _TOY_REFERENCE),
    )


def toy_event_dates() -> tuple[date, ...]:
    return tuple(day for day, _ in _TOY_EVENTS)


def write_toy_corpus(directory: str | Path) -> tuple[Path, Path]:
    """Materialise the toy corpus and reference as line-delimited files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    corpus_path = directory / "toy_corpus.jsonl"
    with corpus_path.open("w", encoding="utf-8") as fh:
        for a in toy_collection().articles:
            fh.write(json.dumps({
                "id": a.id,
                "date": a.publication_date.isoformat(),
                "text": a.text,
            }) + "\n")
    ref_path = directory / "toy_reference.jsonl"
    with ref_path.open("w", encoding="utf-8") as fh:
        for day, text in _TOY_REFERENCE:
            fh.write(json.dumps({"date": day.isoformat(), "summary": text}) + "\n")
    return corpus_path, ref_path
