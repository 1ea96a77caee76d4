"""Event detection: cluster article vectors, date, rank and select clusters.

Two clustering algorithms are provided (average-linkage agglomerative under
cosine distance, and Markov clustering), followed by date assignment from
member date mentions, ranking by corpus-wide mention counts, and top-l
selection with same-date merging.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import DayStamp
from .errors import ParseError, UndatableClusterError, ValidationError


@dataclass(frozen=True)
class EventCluster:
    """A group of articles treated as one event.

    assigned_date and mention_count stay at their defaults until the
    cluster has been dated and ranked.
    """

    members: tuple[str, ...]
    centroid: np.ndarray
    assigned_date: DayStamp | None = None
    mention_count: int = 0

    def __post_init__(self):
        if not self.members:
            raise ValidationError("cluster must have at least one member")


@dataclass(frozen=True)
class ClusterSet:
    clusters: tuple[EventCluster, ...]
    provider_name: str

    def __post_init__(self):
        seen = set()
        for c in self.clusters:
            for member in c.members:
                if member in seen:
                    raise ValidationError(f"article {member!r} appears in two clusters")
                seen.add(member)

    def __len__(self) -> int:
        return len(self.clusters)


def _check_vectors(vectors: Mapping[str, np.ndarray]) -> tuple[list[str], np.ndarray]:
    if not vectors:
        raise ValidationError("need at least one vector to cluster")
    ids = sorted(vectors)
    rows = [np.asarray(vectors[i], dtype=float) for i in ids]
    dims = {r.shape for r in rows}
    if len(dims) > 1:
        raise ValidationError(f"inconsistent vector dimensions: {sorted(dims)}")
    return ids, np.vstack(rows)


def _cosine_matrix(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms == 0, 1.0, norms)
    unit = matrix / safe
    sims = unit @ unit.T
    return np.clip(sims, -1.0, 1.0)


def _centroid(matrix: np.ndarray, rows: Sequence[int]) -> np.ndarray:
    return matrix[list(rows)].mean(axis=0)


def cluster_agglomerative(
    vectors: Mapping[str, np.ndarray], threshold: float = 0.7, provider_name: str = ""
) -> ClusterSet:
    """Average-linkage agglomerative clustering under cosine distance.

    Pairs keep merging while the minimum inter-cluster distance is at most
    the threshold; distance ties break toward the pair with the smallest
    member ids.  Output clusters are ordered by smallest member id.
    """
    if not 0.0 <= threshold <= 2.0:
        raise ValidationError("threshold must lie in [0, 2] for cosine distance")
    ids, matrix = _check_vectors(vectors)
    n = len(ids)
    dist = 1.0 - _cosine_matrix(matrix)

    # active cluster id -> member row indices; pairwise distances kept in a
    # dict and updated with the Lance-Williams rule for average linkage.
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}
    pair_dist = {(i, j): dist[i, j] for i in range(n) for j in range(i + 1, n)}

    def min_member(c: int) -> str:
        return min(ids[r] for r in clusters[c])

    while len(clusters) > 1:
        best = min(
            pair_dist.items(),
            key=lambda kv: (kv[1], sorted((min_member(kv[0][0]), min_member(kv[0][1])))),
        )
        (a, b), d = best
        if d > threshold:
            break
        size_a, size_b = len(clusters[a]), len(clusters[b])
        for c in clusters:
            if c in (a, b):
                continue
            d_ac = pair_dist.pop((min(a, c), max(a, c)))
            d_bc = pair_dist.pop((min(b, c), max(b, c)))
            pair_dist[(min(a, c), max(a, c))] = (size_a * d_ac + size_b * d_bc) / (
                size_a + size_b
            )
        del pair_dist[(a, b)]
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]

    built = [
        EventCluster(
            members=tuple(sorted(ids[r] for r in rows)),
            centroid=_centroid(matrix, rows),
        )
        for rows in clusters.values()
    ]
    built.sort(key=lambda c: c.members[0])
    return ClusterSet(tuple(built), provider_name)


def cluster_markov(
    vectors: Mapping[str, np.ndarray],
    inflation: float = 2.0,
    max_iter: int = 100,
    provider_name: str = "",
) -> ClusterSet:
    """Markov clustering on the cosine-similarity graph.

    Negative similarities are clipped to 0 and self-loops set to 1; the
    row-stochastic matrix is alternately squared (expansion) and raised
    elementwise to the inflation power with row renormalisation, until the
    update changes by less than 1e-6.  Clusters are the connected
    components of the converged support.
    """
    if inflation <= 1.0:
        raise ValidationError("inflation must exceed 1")
    ids, matrix = _check_vectors(vectors)
    n = len(ids)
    sims = np.clip(_cosine_matrix(matrix), 0.0, None)
    np.fill_diagonal(sims, 1.0)
    m = sims / sims.sum(axis=1, keepdims=True)

    converged = False
    for _ in range(max_iter):
        expanded = m @ m
        inflated = expanded ** inflation
        inflated /= inflated.sum(axis=1, keepdims=True)
        if np.max(np.abs(inflated - m)) < 1e-6:
            m = inflated
            converged = True
            break
        m = inflated
    if not converged:
        warnings.warn(
            f"markov clustering did not converge within {max_iter} iterations",
            RuntimeWarning,
            stacklevel=2,
        )

    support = (m > 1e-6) | (m > 1e-6).T
    labels = [-1] * n
    label = 0
    for start in range(n):
        if labels[start] != -1:
            continue
        stack = [start]
        labels[start] = label
        while stack:
            u = stack.pop()
            for v in np.nonzero(support[u])[0]:
                if labels[v] == -1:
                    labels[v] = label
                    stack.append(int(v))
        label += 1

    built = []
    for target in range(label):
        rows = [i for i in range(n) if labels[i] == target]
        built.append(
            EventCluster(
                members=tuple(sorted(ids[r] for r in rows)),
                centroid=_centroid(matrix, rows),
            )
        )
    built.sort(key=lambda c: c.members[0])
    return ClusterSet(tuple(built), provider_name)


def assign_cluster_date(
    members: Sequence[str], mentions: Mapping[str, Counter]
) -> DayStamp:
    """Modal date among member mentions; ties resolve to the earliest date."""
    pooled: Counter = Counter()
    for member in members:
        pooled.update(mentions.get(member, ()))
    if not pooled:
        raise UndatableClusterError(f"cluster {list(members)} has no date mentions")
    return min(pooled, key=lambda d: (-pooled[d], d))


def assign_dates(cs: ClusterSet, mentions: Mapping[str, Counter]) -> ClusterSet:
    """Date every cluster, dropping those without any mention."""
    dated = []
    for c in cs.clusters:
        try:
            dated.append(replace(c, assigned_date=assign_cluster_date(c.members, mentions)))
        except UndatableClusterError:
            continue
    return ClusterSet(tuple(dated), cs.provider_name)


def rank_clusters(cs: ClusterSet, corpus_mentions: Mapping[DayStamp, int]) -> ClusterSet:
    """Order clusters by how often their assigned date is mentioned corpus-wide.

    Descending count, then earlier date, then more members, then smallest
    member id.  mention_count is filled in from corpus_mentions.
    """
    if any(c.assigned_date is None for c in cs.clusters):
        raise ValidationError("all clusters must be dated before ranking")
    counted = [
        replace(c, mention_count=int(corpus_mentions.get(c.assigned_date, 0)))
        for c in cs.clusters
    ]
    counted.sort(
        key=lambda c: (-c.mention_count, c.assigned_date, -len(c.members), c.members[0])
    )
    return ClusterSet(tuple(counted), cs.provider_name)


def merge_same_date(ranked: ClusterSet) -> ClusterSet:
    """Union clusters that share an assigned date, keeping the best rank."""
    merged: dict[DayStamp, EventCluster] = {}
    order: list[DayStamp] = []
    for c in ranked.clusters:
        if c.assigned_date not in merged:
            merged[c.assigned_date] = c
            order.append(c.assigned_date)
            continue
        prev = merged[c.assigned_date]
        sizes = len(prev.members) + len(c.members)
        centroid = (
            prev.centroid * len(prev.members) + c.centroid * len(c.members)
        ) / sizes
        merged[c.assigned_date] = replace(
            prev, members=tuple(sorted(prev.members + c.members)), centroid=centroid
        )
    return ClusterSet(tuple(merged[d] for d in order), ranked.provider_name)


def select_top_l(ranked: ClusterSet, l: int) -> tuple[EventCluster, ...]:
    """First min(l, count) clusters after same-date merging."""
    if l < 1:
        raise ValidationError("l must be at least 1")
    return merge_same_date(ranked).clusters[:l]


# ---------------------------------------------------------------------------
# Cluster file format: one header line {"provider": name} then one JSON
# record per cluster {"members", "centroid", "assigned_date", "mention_count"}.
# ---------------------------------------------------------------------------


def save_clusters(cs: ClusterSet, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"provider": cs.provider_name}) + "\n")
        for c in cs.clusters:
            record = {
                "members": list(c.members),
                "centroid": np.asarray(c.centroid, dtype=float).tolist(),
                "assigned_date": c.assigned_date.isoformat() if c.assigned_date else None,
                "mention_count": c.mention_count,
            }
            fh.write(json.dumps(record) + "\n")


def load_clusters(path: str | Path) -> ClusterSet:
    path = Path(path)
    clusters = []
    provider = ""
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e.msg}", line=lineno) from e
            if lineno == 1 and "provider" in record and "members" not in record:
                provider = record["provider"]
                continue
            if "members" not in record or "centroid" not in record:
                raise ParseError("cluster record needs members and centroid", line=lineno)
            assigned = record.get("assigned_date")
            clusters.append(
                EventCluster(
                    members=tuple(record["members"]),
                    centroid=np.asarray(record["centroid"], dtype=float),
                    assigned_date=date.fromisoformat(assigned) if assigned else None,
                    mention_count=int(record.get("mention_count", 0)),
                )
            )
    return ClusterSet(tuple(clusters), provider)
