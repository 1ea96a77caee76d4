"""Summary generation: a trainable bigram token policy, an extractive
centroid baseline, and timeline assembly.

The in-process policy is a smoothed bigram softmax restricted to the source
cluster's own vocabulary.  Its log-probabilities have closed-form gradients
in the logit tables, which is what makes the training module's gradient
checks possible.  External neural policies can be plugged in for
generation only via the remote protocol.
"""

from __future__ import annotations

import numpy as np

from .corpus import DayStamp, EventSummary, Timeline, detokenize, split_sentences, tokenize
from .embedding import cosine_similarity
from .errors import ProviderError, ValidationError
from .event_detection import EventCluster

END_TOKEN = "<end>"


class TokenPolicy:
    """Softmax policy over a fixed vocabulary, conditioned on the previous token.

    vocabulary lists the cluster's source tokens with the end token last.
    bigram_logits has one row per vocabulary entry plus a final row used as
    the start-of-summary context.  Action probabilities are
    softmax((unigram_logits + bigram_logits[row]) / temperature).
    """

    def __init__(self, vocabulary, unigram_logits, bigram_logits, temperature: float = 1.0):
        self.vocabulary = tuple(vocabulary)
        self.unigram_logits = np.asarray(unigram_logits, dtype=float)
        self.bigram_logits = np.asarray(bigram_logits, dtype=float)
        self.temperature = float(temperature)
        v = len(self.vocabulary)
        if v < 2 or self.vocabulary[-1] != END_TOKEN:
            raise ValidationError("vocabulary must end with the end token and be non-trivial")
        if self.unigram_logits.shape != (v,):
            raise ValidationError("unigram logits must cover the vocabulary")
        if self.bigram_logits.shape != (v + 1, v):
            raise ValidationError("bigram logits need one row per token plus a start row")
        if self.temperature <= 0:
            raise ValidationError("temperature must be positive")
        self._index = {token: i for i, token in enumerate(self.vocabulary)}

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    @property
    def end_index(self) -> int:
        return len(self.vocabulary) - 1

    @property
    def start_row(self) -> int:
        return len(self.vocabulary)

    def context_row(self, prev: int | None) -> int:
        return self.start_row if prev is None else prev

    def logits(self, row: int) -> np.ndarray:
        return (self.unigram_logits + self.bigram_logits[row]) / self.temperature

    def probs(self, row: int) -> np.ndarray:
        z = self.logits(row)
        z = z - np.max(z)
        e = np.exp(z)
        return e / e.sum()

    def log_prob(self, row: int, action: int) -> float:
        z = self.logits(row)
        z = z - np.max(z)
        return float(z[action] - np.log(np.exp(z).sum()))

    def grad_log_prob(self, row: int, action: int) -> np.ndarray:
        """d log pi(action|row) / d logits, valid for both logit tables.

        The same vector applies to unigram_logits and to bigram_logits[row];
        all other bigram rows have zero gradient.
        """
        grad = -self.probs(row)
        grad[action] += 1.0
        return grad / self.temperature

    def sample(self, rng: np.random.Generator, max_tokens: int):
        """Autoregressive draw; stops at the end token without recording it."""
        tokens: list[int] = []
        log_probs: list[float] = []
        prev: int | None = None
        for _ in range(max_tokens):
            row = self.context_row(prev)
            p = self.probs(row)
            action = int(rng.choice(self.vocab_size, p=p))
            if action == self.end_index:
                break
            tokens.append(action)
            log_probs.append(self.log_prob(row, action))
            prev = action
        return tokens, log_probs

    def greedy(self, max_tokens: int) -> list[int]:
        """Argmax decoding; ties resolve to the lower vocabulary index."""
        tokens: list[int] = []
        prev: int | None = None
        for _ in range(max_tokens):
            action = int(np.argmax(self.logits(self.context_row(prev))))
            if action == self.end_index:
                break
            tokens.append(action)
            prev = action
        return tokens

    def decode(self, indices) -> list[str]:
        return [self.vocabulary[i] for i in indices]

    def clone(self) -> "TokenPolicy":
        return TokenPolicy(
            self.vocabulary,
            self.unigram_logits.copy(),
            self.bigram_logits.copy(),
            self.temperature,
        )

    def state_dict(self) -> dict:
        return {
            "vocabulary": list(self.vocabulary),
            "unigram_logits": self.unigram_logits.tolist(),
            "bigram_logits": self.bigram_logits.tolist(),
            "temperature": self.temperature,
        }

    @classmethod
    def from_state_dict(cls, state: dict) -> "TokenPolicy":
        return cls(
            state["vocabulary"],
            np.asarray(state["unigram_logits"], dtype=float),
            np.asarray(state["bigram_logits"], dtype=float),
            state["temperature"],
        )


def policy_init_from_cluster(text: str, temperature: float = 1.0) -> TokenPolicy:
    """Build the initial policy from cluster source statistics.

    Logits are log(count + 1): unigram counts over source tokens (the end
    token counts once per sentence), bigram counts over within-sentence
    successor pairs with sentence-final tokens followed by the end token,
    and the start row from sentence-initial tokens.
    """
    sentences = [tokenize(s) for s in split_sentences(text)]
    sentences = [s for s in sentences if s]
    if not sentences:
        raise ValidationError("cluster text has no tokens")
    vocab = sorted({t for s in sentences for t in s}) + [END_TOKEN]
    index = {token: i for i, token in enumerate(vocab)}
    v = len(vocab)
    unigram = np.zeros(v)
    bigram = np.zeros((v + 1, v))
    for s in sentences:
        unigram[index[END_TOKEN]] += 1
        bigram[v, index[s[0]]] += 1
        for a, b in zip(s, s[1:]):
            unigram[index[a]] += 1
            bigram[index[a], index[b]] += 1
        unigram[index[s[-1]]] += 1
        bigram[index[s[-1]], index[END_TOKEN]] += 1
    return TokenPolicy(vocab, np.log(unigram + 1.0), np.log(bigram + 1.0), temperature)


class RemotePolicy:
    """Generation-only client for an external summariser.

    POST /sample {source, seed, max_tokens} -> {tokens, log_probs}
    POST /greedy {source, max_tokens} -> {tokens}
    No gradient interface, so training routes around it.
    """

    log_prob_grad = False

    def __init__(self, endpoint: str, timeout: float = 30.0):
        import requests

        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        try:
            response = self._session.post(
                self.endpoint + path, json=payload, timeout=self.timeout
            )
            response.raise_for_status()
            return response.json()
        except Exception as e:  # noqa: BLE001
            raise ProviderError(f"policy service failed on {path}: {e}") from e

    def sample(self, source: str, seed: int, max_tokens: int):
        body = self._post("/sample", {"source": source, "seed": seed,
                                      "max_tokens": max_tokens})
        return list(body["tokens"]), list(body["log_probs"])

    def greedy(self, source: str, max_tokens: int) -> list[str]:
        return list(self._post("/greedy", {"source": source,
                                           "max_tokens": max_tokens})["tokens"])


def centroid_opt(sentences, embeddings, budget_sentences: int,
                 centroid=None, redundancy_cap: float = 0.95) -> str:
    """Greedy extractive summary maximising similarity to the centroid.

    Each round adds the sentence whose inclusion maximises the cosine of
    the selected set's mean embedding with the cluster centroid; candidates
    too close (cosine > redundancy_cap) to an already-selected sentence are
    skipped.  Selected sentences are emitted in source order.
    """
    if budget_sentences < 0:
        raise ValidationError("sentence budget must be >= 0")
    sentences = list(sentences)
    embeddings = [np.asarray(e, dtype=float) for e in embeddings]
    if len(sentences) != len(embeddings):
        raise ValidationError("sentences and embeddings must be parallel")
    if budget_sentences == 0 or not sentences:
        return ""
    if centroid is None:
        centroid = np.mean(embeddings, axis=0)

    selected: list[int] = []
    while len(selected) < budget_sentences:
        best_idx, best_score = None, -np.inf
        for i in range(len(sentences)):
            if i in selected:
                continue
            if any(cosine_similarity(embeddings[i], embeddings[j]) > redundancy_cap
                   for j in selected):
                continue
            pooled = np.mean([embeddings[j] for j in selected] + [embeddings[i]], axis=0)
            score = cosine_similarity(pooled, centroid)
            if score > best_score:
                best_idx, best_score = i, score
        if best_idx is None:
            break
        selected.append(best_idx)
    return " ".join(sentences[i] for i in sorted(selected))


def generate_event_summary(policy, cluster: EventCluster, decode: str = "greedy",
                           max_tokens: int = 48, seed: int = 0,
                           source_text: str = "") -> EventSummary:
    """Decode one event summary; its date comes from the cluster."""
    if cluster.assigned_date is None:
        raise ValidationError("cluster must be dated before summarisation")
    if decode not in ("greedy", "sample"):
        raise ValidationError(f"unknown decode mode {decode!r}")
    if isinstance(policy, TokenPolicy):
        if decode == "greedy":
            indices = policy.greedy(max_tokens)
        else:
            indices = policy.sample(np.random.default_rng(seed), max_tokens)[0]
        tokens = policy.decode(indices)
    else:
        if decode == "greedy":
            tokens = policy.greedy(source_text, max_tokens)
        else:
            tokens = policy.sample(source_text, seed, max_tokens)[0]
    return EventSummary(cluster.assigned_date, detokenize(tokens), tuple(tokens))


def assemble_timeline(summaries, topic: str = "timeline") -> Timeline:
    """Sort entries by date, merging same-date entries by concatenation."""
    ordered = sorted(summaries, key=lambda s: s.date)
    merged: list[EventSummary] = []
    for s in ordered:
        if merged and merged[-1].date == s.date:
            prev = merged[-1]
            merged[-1] = EventSummary(
                prev.date, f"{prev.text} {s.text}".strip(), prev.tokens + s.tokens
            )
        else:
            merged.append(s)
    return Timeline(topic, tuple(merged))
