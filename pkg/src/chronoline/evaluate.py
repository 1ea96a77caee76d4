"""Timeline evaluation: date-selection F1, n-gram ROUGE, date-aligned
ROUGE, and an embedding-based soft token F1.

The aligned variants first pair predicted and reference entries by date
(exactly, or nearest within a day window) and count n-gram overlap only
inside matched pairs, with global precision/recall denominators over all
n-grams on each side.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Sequence

from .corpus import DayStamp, Timeline
from .embedding import SentenceEmbedder, cosine_similarity
from .errors import ValidationError


@dataclass(frozen=True)
class MetricReport:
    date_f1: float
    rouge1_f: float
    rouge2_f: float
    ar1_f: float
    ar2_f: float
    soft_f1: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _fscore(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def date_f1(pred_dates, ref_dates) -> tuple[float, float, float]:
    """Set precision/recall/F1 on the selected dates."""
    pred = set(pred_dates)
    ref = set(ref_dates)
    hits = len(pred & ref)
    p = hits / len(pred) if pred else 0.0
    r = hits / len(ref) if ref else 0.0
    return p, r, _fscore(p, r)


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> tuple[float, float, float]:
    """Clipped n-gram overlap; zero denominators score 0."""
    if n < 1:
        raise ValidationError("n-gram order must be >= 1")
    cand = _ngram_counts([t.casefold() for t in candidate], n)
    ref = _ngram_counts([t.casefold() for t in reference], n)
    overlap = sum(min(count, ref[gram]) for gram, count in cand.items())
    total_cand = sum(cand.values())
    total_ref = sum(ref.values())
    p = overlap / total_cand if total_cand else 0.0
    r = overlap / total_ref if total_ref else 0.0
    return p, r, _fscore(p, r)


def _match_dates(pred_dates: Sequence[DayStamp], ref_dates: Sequence[DayStamp],
                 window_days: int) -> dict[DayStamp, DayStamp]:
    """Greedy closest-first pairing of predicted to reference dates.

    Each side is matched at most once; candidates beyond the window are
    ignored.  Distance ties resolve toward earlier dates.
    """
    candidates = sorted(
        (abs((p - r).days), p, r)
        for p in pred_dates
        for r in ref_dates
        if abs((p - r).days) <= window_days
    )
    matched: dict[DayStamp, DayStamp] = {}
    used_refs = set()
    for _, p, r in candidates:
        if p in matched or r in used_refs:
            continue
        matched[p] = r
        used_refs.add(r)
    return matched


def alignment_rouge(pred: Timeline, ref: Timeline, n: int,
                    window_days: int = 0) -> tuple[float, float, float]:
    """ROUGE-n restricted to date-matched entry pairs.

    Overlap is summed over matched pairs only, while the precision and
    recall denominators count every n-gram on their side, so missing a
    date costs both precision and recall.
    """
    if n < 1:
        raise ValidationError("n-gram order must be >= 1")
    by_pred_date = {e.date: e for e in pred.entries}
    by_ref_date = {e.date: e for e in ref.entries}
    matched = _match_dates(sorted(by_pred_date), sorted(by_ref_date), window_days)

    overlap = 0
    for pred_date, ref_date in matched.items():
        cand = _ngram_counts([t.casefold() for t in by_pred_date[pred_date].tokens], n)
        refc = _ngram_counts([t.casefold() for t in by_ref_date[ref_date].tokens], n)
        overlap += sum(min(count, refc[gram]) for gram, count in cand.items())
    total_pred = sum(
        max(len(e.tokens) - n + 1, 0) for e in pred.entries
    )
    total_ref = sum(
        max(len(e.tokens) - n + 1, 0) for e in ref.entries
    )
    p = overlap / total_pred if total_pred else 0.0
    r = overlap / total_ref if total_ref else 0.0
    return p, r, _fscore(p, r)


def soft_token_f1(candidate: Sequence[str], reference: Sequence[str],
                  token_embedder: SentenceEmbedder) -> float:
    """Greedy max-cosine token matching, harmonic mean of both directions.

    Precision is the mean over candidate tokens of the best cosine to any
    reference token; recall is symmetric.  Either side empty scores 0.
    """
    if not candidate or not reference:
        return 0.0
    cand_vecs = [token_embedder.embed_sentence(t) for t in candidate]
    ref_vecs = [token_embedder.embed_sentence(t) for t in reference]
    sims = [[cosine_similarity(c, r) for r in ref_vecs] for c in cand_vecs]
    p = sum(max(row) for row in sims) / len(cand_vecs)
    r = sum(max(sims[i][j] for i in range(len(cand_vecs)))
            for j in range(len(ref_vecs))) / len(ref_vecs)
    p = min(max(p, 0.0), 1.0)
    r = min(max(r, 0.0), 1.0)
    return _fscore(p, r)


def evaluate_timeline(pred: Timeline, ref: Timeline, provider: SentenceEmbedder,
                      window_days: int = 0) -> MetricReport:
    """Full report; concatenation metrics run over date-ordered tokens."""
    if not pred.entries or not ref.entries:
        raise ValidationError("both timelines need at least one entry")
    _, _, df = date_f1(pred.dates, ref.dates)
    pred_tokens = [t for e in pred.entries for t in e.tokens]
    ref_tokens = [t for e in ref.entries for t in e.tokens]
    _, _, r1 = rouge_n(pred_tokens, ref_tokens, 1)
    _, _, r2 = rouge_n(pred_tokens, ref_tokens, 2)
    _, _, ar1 = alignment_rouge(pred, ref, 1, window_days)
    _, _, ar2 = alignment_rouge(pred, ref, 2, window_days)
    soft = soft_token_f1(pred_tokens, ref_tokens, provider)
    return MetricReport(date_f1=df, rouge1_f=r1, rouge2_f=r2,
                        ar1_f=ar1, ar2_f=ar2, soft_f1=soft)
