"""Paragraph embeddings: deterministic hashing provider, external-service
client with an on-disk cache, and cosine nearest-neighbor queries."""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

from .preprocess import StemBag

# fixed seed so hash embeddings are reproducible across runs and platforms
_HASH_SEED = 0x5EEDC0FFEE11D00D
DEFAULT_HASH_DIM = 512


class TransportError(RuntimeError):
    """Network-level failure talking to an embedding service; retryable."""


class ProtocolError(RuntimeError):
    """The embedding service violated its response contract."""


@dataclass(frozen=True)
class EmbeddingProvider:
    id: str
    dimension: int
    kind: str  # HashingTfidf | ExternalService
    url: str | None = None

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("embedding dimension must be >= 2")
        if self.kind not in ("HashingTfidf", "ExternalService"):
            raise ValueError(f"unknown provider kind: {self.kind!r}")


def hashing_provider(dimension: int = DEFAULT_HASH_DIM) -> EmbeddingProvider:
    return EmbeddingProvider(id=f"hash-{dimension}", dimension=dimension, kind="HashingTfidf")


@dataclass
class EmbeddingVector:
    values: np.ndarray
    provider_id: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.norm = float(np.linalg.norm(self.values))

    @property
    def dimension(self) -> int:
        return self.values.shape[0]


def _stable_hash(stem: str) -> int:
    digest = hashlib.blake2b(
        stem.encode("utf-8"), digest_size=16, key=_HASH_SEED.to_bytes(8, "little")
    ).digest()
    return int.from_bytes(digest, "little")


def hash_embed(
    bag: StemBag, dimension: int = DEFAULT_HASH_DIM, idf_table: dict[str, float] | None = None
) -> EmbeddingVector:
    """Signed feature hashing of a stem bag, tf-idf weighted, L2-normalized.

    The empty bag maps to the zero vector (norm 0).
    """
    if dimension < 2:
        raise ValueError("dimension must be >= 2")
    values = np.zeros(dimension, dtype=np.float64)
    for stem, tf in bag.counts.items():
        h = _stable_hash(stem)
        index = h % dimension
        sign = 1.0 if (h >> 127) & 1 == 0 else -1.0
        idf = idf_table.get(stem, 1.0) if idf_table else 1.0
        values[index] += sign * tf * idf
    norm = np.linalg.norm(values)
    if norm > 0:
        values /= norm
    return EmbeddingVector(values, provider_id=f"hash-{dimension}")


def build_idf_table(bags: list[StemBag]) -> dict[str, float]:
    """Smoothed inverse document frequency over a corpus of stem bags."""
    n = len(bags)
    df: dict[str, int] = {}
    for bag in bags:
        for stem in bag.counts:
            df[stem] = df.get(stem, 0) + 1
    return {stem: math.log((1 + n) / (1 + d)) + 1.0 for stem, d in df.items()}


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def nearest_neighbors(
    query_id: str,
    k: int,
    vectors: dict[str, EmbeddingVector],
) -> list[tuple[str, float]]:
    """Top-k pool entries by cosine similarity to the query, excluding it.

    Descending similarity; ties break by ascending paragraph id. Exhaustive
    scan: the corpus is small enough that no index is warranted.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if query_id not in vectors:
        raise KeyError(f"paragraph {query_id!r} has no embedding")
    query = vectors[query_id]
    scored = [
        (pid, cosine(query.values, vec.values))
        for pid, vec in vectors.items()
        if pid != query_id
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


# ---------------------------------------------------------------------------
# External-service client with binary cache


class EmbeddingCache:
    """Vectors persisted as binary records keyed by (provider id, text hash)."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, provider_id: str, text: str) -> Path:
        key = hashlib.sha256(f"{provider_id}\x00{text}".encode("utf-8")).hexdigest()
        return self.directory / provider_id / f"{key}.npy"

    def get(self, provider_id: str, text: str) -> np.ndarray | None:
        path = self._path(provider_id, text)
        if not path.exists():
            return None
        return np.load(path)

    def put(self, provider_id: str, text: str, values: np.ndarray) -> None:
        path = self._path(provider_id, text)
        path.parent.mkdir(parents=True, exist_ok=True)
        buffer = io.BytesIO()
        np.save(buffer, np.asarray(values, dtype=np.float64))
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(buffer.getvalue())
        tmp.replace(path)


class ExternalEmbeddingClient:
    """HTTP client for a batch embedding service.

    Request:  POST {url} with JSON {"texts": [...]}.
    Response: JSON {"embeddings": [[...], ...]}, one float array per text,
    in input order, each of the provider's dimension.
    """

    def __init__(
        self,
        provider: EmbeddingProvider,
        cache: EmbeddingCache | None = None,
        client: httpx.Client | None = None,
    ):
        if provider.kind != "ExternalService" or not provider.url:
            raise ValueError("provider must be an ExternalService with a url")
        self.provider = provider
        self.cache = cache
        self._client = client or httpx.Client(timeout=30.0)

    def fetch_embeddings(self, texts: list[str]) -> list[EmbeddingVector]:
        if not texts:
            return []
        missing = []
        results: list[np.ndarray | None] = []
        for text in texts:
            cached = self.cache.get(self.provider.id, text) if self.cache else None
            results.append(cached)
            if cached is None:
                missing.append(text)

        if missing:
            fetched = self._post_batch(missing)
            it = iter(fetched)
            for i, text in enumerate(texts):
                if results[i] is None:
                    values = next(it)
                    results[i] = values
                    if self.cache:
                        self.cache.put(self.provider.id, text, values)

        return [EmbeddingVector(v, self.provider.id) for v in results]

    def _post_batch(self, texts: list[str]) -> list[np.ndarray]:
        try:
            response = self._client.post(self.provider.url, json={"texts": texts})
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(f"embedding service request failed: {exc}") from exc
        try:
            payload = response.json()
            rows = payload["embeddings"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed embedding response: {exc}") from exc
        if len(rows) != len(texts):
            raise ProtocolError(
                f"partial response: {len(rows)} embeddings for {len(texts)} texts"
            )
        vectors = []
        for row in rows:
            values = np.asarray(row, dtype=np.float64)
            if values.ndim != 1 or values.shape[0] != self.provider.dimension:
                raise ProtocolError(
                    f"dimension mismatch: expected {self.provider.dimension}, "
                    f"got {values.shape}"
                )
            vectors.append(values)
        return vectors
