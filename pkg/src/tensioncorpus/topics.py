"""Topic discovery: k-means over normalized embeddings, class-based TF-IDF
keywords, and the human topic-rating protocol."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KMEANS_MAX_ITER = 300
KMEANS_TOL = 1e-6
DEFAULT_K = 64
DEFAULT_TOP_N = 10


@dataclass
class Topic:
    id: int
    keywords: list[tuple[str, float]] = field(default_factory=list)
    member_ids: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class TopicRating:
    paragraph_id: str
    rater_id: str
    score: int

    def __post_init__(self):
        if self.score not in (0, 1, 2):
            raise ValueError("rating score must be 0, 1 or 2")


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return matrix / norms


def _kmeans_pp_init(matrix: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = matrix.shape[0]
    centroids = np.empty((k, matrix.shape[1]))
    first = rng.integers(n)
    centroids[0] = matrix[first]
    closest_sq = np.sum((matrix - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest_sq.sum()
        if total <= 0:
            choice = rng.integers(n)
        else:
            choice = rng.choice(n, p=closest_sq / total)
        centroids[i] = matrix[choice]
        dist = np.sum((matrix - centroids[i]) ** 2, axis=1)
        closest_sq = np.minimum(closest_sq, dist)
    return centroids


def kmeans_cluster(
    vectors: list[np.ndarray] | np.ndarray,
    k: int,
    seed: int,
    return_history: bool = False,
):
    """Cosine-normalized k-means with k-means++ seeding; deterministic by seed.

    Returns the assignment list; with return_history=True also the per-
    iteration objective values (sum of squared distances to the assigned
    centroid), which are non-increasing.
    """
    matrix = np.asarray(vectors, dtype=np.float64)
    n = matrix.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} must be in [1, {n}]")
    matrix = _normalize_rows(matrix)
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(matrix, k, rng)

    objective_history = []
    assignments = np.zeros(n, dtype=int)
    for _ in range(KMEANS_MAX_ITER):
        distances = ((matrix[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assignments = distances.argmin(axis=1)
        objective_history.append(float(distances[np.arange(n), assignments].sum()))
        new_centroids = centroids.copy()
        for c in range(k):
            members = matrix[assignments == c]
            if len(members):
                new_centroids[c] = members.mean(axis=0)
        movement = float(np.linalg.norm(new_centroids - centroids))
        centroids = new_centroids
        if movement < KMEANS_TOL:
            break
    result = assignments.tolist()
    if return_history:
        return result, objective_history
    return result


def ctfidf_keywords(
    clusters: dict[int, list["StemBag"]], top_n: int = DEFAULT_TOP_N
) -> dict[int, list[tuple[str, float]]]:
    """Class-based TF-IDF keywords per cluster.

    W(t,c) = tf(t,c) * ln(1 + A / f(t)) with f(t) the corpus-wide count of t
    and A the average token count per class. Top-n by weight, ties broken
    lexicographically.
    """
    for cid, bags in clusters.items():
        if not bags:
            raise ValueError(f"cluster {cid} is empty")
    class_counts: dict[int, dict[str, int]] = {}
    corpus_counts: dict[str, int] = {}
    total_tokens = 0
    for cid, bags in clusters.items():
        merged: dict[str, int] = {}
        for bag in bags:
            for stem, count in bag.counts.items():
                merged[stem] = merged.get(stem, 0) + count
                corpus_counts[stem] = corpus_counts.get(stem, 0) + count
                total_tokens += count
        class_counts[cid] = merged
    avg_tokens = total_tokens / len(clusters) if clusters else 0.0

    keywords: dict[int, list[tuple[str, float]]] = {}
    for cid, merged in class_counts.items():
        weighted = [
            (stem, tf * math.log(1 + avg_tokens / corpus_counts[stem]))
            for stem, tf in merged.items()
        ]
        weighted.sort(key=lambda item: (-item[1], item[0]))
        keywords[cid] = weighted[:top_n]
    return keywords


def average_topic_rating(ratings: list[TopicRating], rater_id: str) -> float:
    """Arithmetic mean of one rater's scores; errors when they rated nothing."""
    scores = [r.score for r in ratings if r.rater_id == rater_id]
    if not scores:
        raise ValueError(f"no ratings for rater {rater_id!r}")
    return sum(scores) / len(scores)


def sample_for_rating(paragraph_ids: list[str], n: int, seed: int) -> list[str]:
    """Uniform sample without replacement, deterministic by seed."""
    if n > len(paragraph_ids):
        raise ValueError(f"cannot sample {n} of {len(paragraph_ids)} paragraphs")
    rng = np.random.default_rng(seed)
    indices = rng.choice(len(paragraph_ids), size=n, replace=False)
    return [paragraph_ids[i] for i in indices]


def assign_topics(
    paragraph_ids: list[str],
    vectors: list[np.ndarray],
    bags: list["StemBag"],
    k: int = DEFAULT_K,
    seed: int = 0,
    top_n: int = DEFAULT_TOP_N,
) -> list[Topic]:
    """Cluster embedded paragraphs and extract keywords per cluster.

    Paragraphs with empty stem bags must be excluded by the caller; they
    carry no topic.
    """
    assignments = kmeans_cluster(vectors, k=k, seed=seed)
    clusters: dict[int, list] = {}
    members: dict[int, list[str]] = {}
    for pid, bag, cluster in zip(paragraph_ids, bags, assignments):
        clusters.setdefault(cluster, []).append(bag)
        members.setdefault(cluster, []).append(pid)
    keywords = ctfidf_keywords(clusters, top_n=top_n)
    return [
        Topic(id=cid, keywords=keywords[cid], member_ids=members[cid])
        for cid in sorted(clusters)
    ]
