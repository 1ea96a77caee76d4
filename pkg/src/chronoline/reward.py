"""Sub-rewards for candidate summaries and their weighted combination.

Four signals: r1 rewards matching the annotator's keywords and learned
preferences, r2 rewards semantic consistency with the source documents,
r3 rewards language quality via a language-model loss, r4 penalises token
repetition.  The compound reward is the gamma-weighted sum; components
with zero weight are skipped and reported as 0.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import ArticleCollection, EventSummary, KeywordSet, split_sentences, tokenize
from .embedding import SentenceEmbedder, avg_sentence_embedding, cosine_similarity
from .errors import ParseError, ProviderError, ValidationError
from .gppl import ScoreModel, predict_score

__all__ = [
    "KeywordSet", "RewardConfig", "RewardBreakdown", "RewardContext", "LmScorer",
    "preference_reward", "consistency_reward", "language_quality_reward",
    "repetition_penalty", "compound_reward", "ngram_lm_fit", "calibrate_alpha",
    "NGramScorer", "RemoteLmScorer", "load_reward_config", "save_reward_config",
]


class LmScorer(Protocol):
    def loss(self, text: str) -> float:
        """Mean per-token negative log-likelihood; deterministic, >= 0."""


@dataclass(frozen=True)
class RewardConfig:
    w: float = 0.5
    gamma1: float = 0.25
    gamma2: float = 0.25
    gamma3: float = 0.25
    gamma4: float = 0.25
    alpha: float = 1.0
    normalize_keywords: bool = False

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValidationError("w must lie in [0, 1]")
        gammas = (self.gamma1, self.gamma2, self.gamma3, self.gamma4)
        if any(g < 0 for g in gammas):
            raise ValidationError("sub-reward weights must be non-negative")
        if sum(gammas) <= 0:
            raise ValidationError("at least one sub-reward weight must be positive")
        if self.alpha <= 0:
            raise ValidationError("alpha must be positive")


@dataclass(frozen=True)
class RewardBreakdown:
    r1: float
    r2: float
    r3: float
    r4: float
    total: float


@dataclass(frozen=True)
class RewardContext:
    """Everything needed to score a summary text."""

    config: RewardConfig
    provider: SentenceEmbedder | None = None
    keywords: KeywordSet | None = None
    model: ScoreModel | None = None
    source_emb: np.ndarray | None = None
    lm: LmScorer | None = None


def preference_reward(summary_emb: np.ndarray, ks: KeywordSet | None, model: ScoreModel | None,
                      w: float, normalize_keywords: bool = False) -> float:
    """w * sum_i cos(keyword_i, summary) + (1 - w) * learned score mean."""
    if not 0.0 <= w <= 1.0:
        raise ValidationError("w must lie in [0, 1]")
    keyword_term = 0.0
    if w > 0:
        if ks is None or len(ks) == 0:
            raise ValidationError("keyword term has positive weight but no keywords")
        if ks.embeddings is None:
            raise ValidationError("keywords have no embeddings attached")
        sims = [cosine_similarity(k, summary_emb) for k in ks.embeddings]
        keyword_term = sum(sims) / len(sims) if normalize_keywords else sum(sims)
    model_term = 0.0
    if w < 1:
        if model is None:
            raise ValidationError("preference term has positive weight but no fitted model")
        model_term, _ = predict_score(model, summary_emb)
    return w * keyword_term + (1.0 - w) * model_term


def consistency_reward(summary_emb: np.ndarray, source_emb: np.ndarray) -> float:
    """Cosine similarity between summary and source embeddings."""
    return cosine_similarity(summary_emb, source_emb)


def language_quality_reward(text: str, lm: LmScorer, alpha: float) -> float:
    """(alpha - loss) / alpha; negative when the loss exceeds alpha."""
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    return (alpha - lm.loss(text)) / alpha


def repetition_penalty(tokens: Sequence[str]) -> float:
    """1 - repeated/total, counting occurrences after a token's first use.

    Case-folded; an empty sequence scores 1.
    """
    if not tokens:
        return 1.0
    seen = set()
    repeated = 0
    for token in tokens:
        folded = token.casefold()
        if folded in seen:
            repeated += 1
        else:
            seen.add(folded)
    return 1.0 - repeated / len(tokens)


def compound_reward(summary: EventSummary | str, context: RewardContext) -> RewardBreakdown:
    """Gamma-weighted sum of the four sub-rewards on one summary.

    Sub-rewards with zero weight are not computed and report 0, so e.g. a
    repetition-only configuration needs no model, keywords or scorer.
    """
    cfg = context.config
    if isinstance(summary, EventSummary):
        text, tokens = summary.text, summary.tokens
    else:
        text, tokens = summary, tuple(tokenize(summary))

    emb = None
    if cfg.gamma1 > 0 or cfg.gamma2 > 0:
        if context.provider is None:
            raise ValidationError("embedding provider required for r1/r2")
        emb = avg_sentence_embedding(text, context.provider) if text.strip() else None

    def embedded() -> np.ndarray:
        if emb is None:
            raise ValidationError("cannot embed an empty summary for r1/r2")
        return emb

    r1 = r2 = r3 = r4 = 0.0
    if cfg.gamma1 > 0:
        r1 = preference_reward(embedded(), context.keywords, context.model, cfg.w,
                               cfg.normalize_keywords)
    if cfg.gamma2 > 0:
        if context.source_emb is None:
            raise ValidationError("source embedding required for r2")
        r2 = consistency_reward(embedded(), context.source_emb)
    if cfg.gamma3 > 0:
        if context.lm is None:
            raise ValidationError("language-model scorer required for r3")
        r3 = language_quality_reward(text, context.lm, cfg.alpha)
    if cfg.gamma4 > 0:
        r4 = repetition_penalty(tokens)
    total = cfg.gamma1 * r1 + cfg.gamma2 * r2 + cfg.gamma3 * r3 + cfg.gamma4 * r4
    return RewardBreakdown(r1, r2, r3, r4, total)


# ---------------------------------------------------------------------------
# Language-model scorers
# ---------------------------------------------------------------------------

_BOS = "<s>"


class NGramScorer:
    """Interpolated n-gram model with absolute discounting.

    Probabilities back off recursively to lower orders and bottom out at a
    uniform open-vocabulary floor 1/(V+1), so unseen tokens keep positive
    probability and losses stay finite.
    """

    def __init__(self, n: int, discount: float, counts: dict, vocab_size: int):
        self.n = n
        self.discount = discount
        self._counts = counts  # context tuple -> Counter of continuations
        self._floor = 1.0 / (vocab_size + 1)

    def _prob(self, token: str, context: tuple) -> float:
        if len(context) == 0:
            lower = self._floor
        else:
            lower = self._prob(token, context[1:])
        continuations = self._counts.get(context)
        if not continuations:
            return lower
        total = sum(continuations.values())
        discounted = max(continuations[token] - self.discount, 0.0) / total
        backoff_mass = self.discount * len(continuations) / total
        return discounted + backoff_mass * lower

    def loss(self, text: str) -> float:
        order = self.n - 1
        nll = 0.0
        count = 0
        for sentence in split_sentences(text):
            tokens = tokenize(sentence)
            history = [_BOS] * order
            for token in tokens:
                context = tuple(history[-order:]) if order else ()
                nll -= math.log(self._prob(token, context))
                history.append(token)
                count += 1
        return nll / count if count else 0.0


def ngram_lm_fit(corpus: ArticleCollection, n: int = 3, discount: float = 0.1) -> NGramScorer:
    """Fit the n-gram scorer on every sentence of the collection."""
    if not corpus.articles:
        raise ValidationError("cannot fit a language model on an empty collection")
    if n < 1:
        raise ValidationError("order must be at least 1")
    if not 0.0 < discount < 1.0:
        raise ValidationError("discount must lie in (0, 1)")
    counts: dict[tuple, Counter] = {}
    vocab = set()
    for article in corpus.articles:
        for sentence in article.sentences:
            tokens = tokenize(sentence)
            vocab.update(tokens)
            history = [_BOS] * (n - 1)
            for token in tokens:
                for k in range(n):
                    context = tuple(history[len(history) - k:])
                    counts.setdefault(context, Counter())[token] += 1
                history.append(token)
                history = history[-(n - 1):] if n > 1 else []
    return NGramScorer(n, discount, counts, len(vocab))


class RemoteLmScorer:
    """Client for a remote loss service: POST {"text": ..} -> {"loss": ..}."""

    def __init__(self, endpoint: str, timeout: float = 10.0, retries: int = 2):
        import requests

        self.endpoint = endpoint if endpoint.rstrip("/").endswith("/loss") \
            else endpoint.rstrip("/") + "/loss"
        self.timeout = timeout
        self.retries = retries
        self._session = requests.Session()
        self._cache: dict[str, float] = {}

    def loss(self, text: str) -> float:
        key = hashlib.sha256(text.encode("utf-8")).hexdigest()
        if key in self._cache:
            return self._cache[key]
        last_error = None
        for _ in range(self.retries + 1):
            try:
                response = self._session.post(
                    self.endpoint, json={"text": text}, timeout=self.timeout
                )
                response.raise_for_status()
                value = float(response.json()["loss"])
                self._cache[key] = value
                return value
            except Exception as e:  # noqa: BLE001 - any transport failure retries
                last_error = e
        raise ProviderError(f"loss service unreachable: {last_error}") from last_error


def calibrate_alpha(lm: LmScorer, validation_texts: Sequence[str]) -> float:
    """Maximum LM loss over the validation texts."""
    texts = list(validation_texts)
    if not texts:
        raise ValidationError("need at least one validation text")
    return max(lm.loss(t) for t in texts)


# ---------------------------------------------------------------------------
# Config file: KEY=VALUE lines for w, gamma1..gamma4, alpha,
# normalize_keywords.
# ---------------------------------------------------------------------------


def save_reward_config(cfg: RewardConfig, path: str | Path) -> None:
    lines = [
        f"w={cfg.w}",
        f"gamma1={cfg.gamma1}",
        f"gamma2={cfg.gamma2}",
        f"gamma3={cfg.gamma3}",
        f"gamma4={cfg.gamma4}",
        f"alpha={cfg.alpha}",
        f"normalize_keywords={'true' if cfg.normalize_keywords else 'false'}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_reward_config(path: str | Path) -> RewardConfig:
    values: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected KEY=VALUE", line=lineno)
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    try:
        return RewardConfig(
            w=float(values.get("w", 0.5)),
            gamma1=float(values.get("gamma1", 0.25)),
            gamma2=float(values.get("gamma2", 0.25)),
            gamma3=float(values.get("gamma3", 0.25)),
            gamma4=float(values.get("gamma4", 0.25)),
            alpha=float(values.get("alpha", 1.0)),
            normalize_keywords=values.get("normalize_keywords", "false").lower()
            in ("true", "1", "yes"),
        )
    except ValueError as e:
        raise ParseError(f"bad numeric value in reward config: {e}") from e
