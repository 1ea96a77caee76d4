"""Sentence embedding providers and vector similarity.

All providers expose the same surface: a `name`, a fixed output `dim`, and
`embed_sentence(text) -> np.ndarray` that is deterministic in its input.
Three implementations are included: TF-IDF over a fitted collection, a
seeded hashing provider (cheap, deterministic, good for tests), and a
client for a remote encoder service.
"""

from __future__ import annotations

import hashlib
import json
import struct
import threading
import warnings
from pathlib import Path

import numpy as np

from .corpus import ArticleCollection, Timeline, split_sentences, tokenize
from .errors import ContractError, ProviderError, ValidationError

Vector = np.ndarray


def cosine_similarity(u: Vector, v: Vector) -> float:
    """u·v / (‖u‖‖v‖); a zero vector yields 0 and a warning."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValidationError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        warnings.warn("cosine of a zero vector is defined as 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


class SentenceEmbedder:
    """Base provider: subclasses set name/dim and implement embed_sentence."""

    name: str
    dim: int

    def embed_sentence(self, text: str) -> Vector:
        raise NotImplementedError

    def embed_sentences(self, texts) -> list[Vector]:
        return [self.embed_sentence(t) for t in texts]


def avg_sentence_embedding(text: str, p: SentenceEmbedder) -> Vector:
    """Mean of the per-sentence vectors of text."""
    sentences = split_sentences(text)
    if not sentences:
        raise ValidationError("cannot embed empty text")
    return np.mean(p.embed_sentences(sentences), axis=0)


def timeline_embedding(t: Timeline, p: SentenceEmbedder) -> Vector:
    """Mean of the per-entry embeddings of a timeline."""
    if not t.entries:
        raise ValidationError("cannot embed an empty timeline")
    return np.mean([avg_sentence_embedding(e.text, p) for e in t.entries], axis=0)


# ---------------------------------------------------------------------------
# TF-IDF provider
# ---------------------------------------------------------------------------


class TfidfEmbedder(SentenceEmbedder):
    def __init__(self, vocabulary: dict, idf: Vector):
        self.name = "tfidf"
        self.vocabulary = vocabulary
        self.idf = idf
        self.dim = len(vocabulary)

    def embed_sentence(self, text: str) -> Vector:
        vec = np.zeros(self.dim)
        for token in tokenize(text):
            j = self.vocabulary.get(token)
            if j is not None:
                vec[j] += 1.0
        vec *= self.idf
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec


def tfidf_fit(collection: ArticleCollection) -> TfidfEmbedder:
    """Fit a TF-IDF provider on a collection; dim = vocabulary size.

    tf is the raw in-text count, idf = ln((1+N)/(1+df)) + 1, vectors are
    L2-normalised.  Out-of-vocabulary tokens contribute nothing.
    """
    if not collection.articles:
        raise ValidationError("cannot fit TF-IDF on an empty collection")
    df = {}
    for a in collection.articles:
        for token in set(tokenize(a.text)):
            df[token] = df.get(token, 0) + 1
    vocabulary = {token: j for j, token in enumerate(sorted(df))}
    n_docs = len(collection.articles)
    idf = np.array(
        [np.log((1 + n_docs) / (1 + df[token])) + 1.0 for token in sorted(df)]
    )
    return TfidfEmbedder(vocabulary, idf)


# ---------------------------------------------------------------------------
# Hashing provider
# ---------------------------------------------------------------------------


class HashedEmbedder(SentenceEmbedder):
    def __init__(self, dim: int, seed: int):
        self.name = f"hashed-{dim}-{seed}"
        self.dim = dim
        self._key = struct.pack("<q", seed)

    def _token_coordinate(self, token: str):
        digest = hashlib.blake2b(token.encode("utf-8"), key=self._key, digest_size=9).digest()
        index = int.from_bytes(digest[:8], "little") % self.dim
        sign = 1.0 if digest[8] % 2 == 0 else -1.0
        return index, sign

    def embed_sentence(self, text: str) -> Vector:
        vec = np.zeros(self.dim)
        for token in tokenize(text):
            index, sign = self._token_coordinate(token)
            vec[index] += sign
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec


def hashed_embedding_provider(dim: int = 64, seed: int = 0) -> HashedEmbedder:
    """Deterministic stand-in for a neural encoder.

    Each token hashes (keyed by the seed) to one signed unit coordinate;
    a sentence is the L2-normalised sum of its token coordinates.
    """
    if dim < 2:
        raise ValidationError("embedding dim must be at least 2")
    return HashedEmbedder(dim, seed)


# ---------------------------------------------------------------------------
# Remote provider
# ---------------------------------------------------------------------------


class RemoteEmbedder(SentenceEmbedder):
    """Client for a sentence-encoder service with a content-hash cache.

    Wire protocol: POST {"sentences": [..]} to the endpoint, response
    {"vectors": [[..], ..]} in request order.  Results are cached in memory
    keyed by sentence content hash, optionally persisted to cache_path.
    """

    def __init__(self, endpoint: str, dim: int, timeout: float = 10.0,
                 retries: int = 2, cache_path=None):
        # requests is only needed when a remote provider is actually used
        import requests

        self.name = f"remote-{dim}"
        self.endpoint = endpoint if endpoint.rstrip("/").endswith("/embed") \
            else endpoint.rstrip("/") + "/embed"
        self.dim = dim
        self.timeout = timeout
        self.retries = retries
        self._session = requests.Session()
        self._cache: dict[str, Vector] = {}
        self._lock = threading.Lock()
        self._cache_path = Path(cache_path) if cache_path else None
        if self._cache_path is not None and self._cache_path.exists():
            with self._cache_path.open(encoding="utf-8") as fh:
                for line in fh:
                    record = json.loads(line)
                    self._cache[record["key"]] = np.array(record["vector"])

    @staticmethod
    def _key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def _persist(self, key: str, vec: Vector) -> None:
        if self._cache_path is None:
            return
        with self._cache_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps({"key": key, "vector": vec.tolist()}) + "\n")

    def _request(self, sentences: list[str]) -> list[Vector]:
        last_error = None
        for _ in range(self.retries + 1):
            try:
                response = self._session.post(
                    self.endpoint, json={"sentences": sentences}, timeout=self.timeout
                )
                response.raise_for_status()
                vectors = response.json()["vectors"]
                break
            except Exception as e:  # noqa: BLE001 - any transport failure retries
                last_error = e
        else:
            raise ProviderError(f"embedding service unreachable: {last_error}") from last_error
        if len(vectors) != len(sentences):
            raise ContractError(
                f"service returned {len(vectors)} vectors for {len(sentences)} sentences"
            )
        out = []
        for v in vectors:
            arr = np.asarray(v, dtype=float)
            if arr.shape != (self.dim,):
                raise ContractError(f"expected dim {self.dim}, service returned {arr.shape}")
            out.append(arr)
        return out

    def embed_sentences(self, texts) -> list[Vector]:
        texts = list(texts)
        with self._lock:
            missing = [t for t in texts if self._key(t) not in self._cache]
            # dedupe while preserving order
            missing = list(dict.fromkeys(missing))
        if missing:
            fetched = self._request(missing)
            with self._lock:
                for text, vec in zip(missing, fetched):
                    key = self._key(text)
                    if key not in self._cache:
                        self._cache[key] = vec
                        self._persist(key, vec)
        with self._lock:
            return [self._cache[self._key(t)].copy() for t in texts]

    def embed_sentence(self, text: str) -> Vector:
        return self.embed_sentences([text])[0]


def remote_embedding_provider(endpoint: str, dim: int, timeout: float = 10.0,
                              retries: int = 2, cache_path=None) -> RemoteEmbedder:
    return RemoteEmbedder(endpoint, dim, timeout=timeout, retries=retries,
                          cache_path=cache_path)
