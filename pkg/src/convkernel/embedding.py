"""Embedding backbones and the trainable projections in front of them.

The backbone is a frozen, pluggable text-to-vector function. Two providers
ship: a dependency-free feature-hashing embedder (the default; deterministic
across processes and platforms) and an HTTP client for a remote sidecar
speaking the wire protocol below. Only the projection matrices and the
classifier head ever train.

Wire protocol (consumed here, served by the embed_service package):
  POST /embed         {"texts": [str]} -> {"dim": int, "vectors": [[float]]}
  POST /embed_joined  same shape; each text is a pre-joined sequence using
                      the literal marker strings "[CLS]" and "[SEP]"
  GET  /health        {"status": "ok", "dim": int, "model": str}
"""

from __future__ import annotations

import hashlib
import re
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
import requests

from .errors import DimensionMismatchError, EmptyWindowError, ProviderUnavailableError

_TOKEN_RE = re.compile(r"[a-z0-9]+")

BEGIN_MARKER = "[CLS]"
SEP_MARKER = "[SEP]"


class EmbeddingProvider(ABC):
    """Contract every backbone satisfies: one finite vector per text.

    deterministic=True providers are referentially transparent: the same
    input text always yields the same vector.
    """

    name: str
    dimension: int
    deterministic: bool
    max_tokens: int

    @abstractmethod
    def embed(self, texts) -> np.ndarray:
        """(len(texts), dimension) float64 array, request order preserved."""

    def embed_joined(self, joined) -> np.ndarray:
        """Embed pre-joined marker sequences; defaults to embed()."""
        return self.embed(joined)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.dimension,
            "deterministic": self.deterministic,
        }


def hash_features(text: str) -> list[str]:
    """Unigram + adjacent-bigram features of the lowercased alnum tokens."""
    tokens = _TOKEN_RE.findall(text.lower())
    return tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]


class HashEmbedder(EmbeddingProvider):
    """Signed feature-hashing embedder.

    Each feature is hashed with blake2b into one of `dimension` buckets with
    a +/-1 sign; the bucket sums are L2-normalized. Text with no tokens maps
    to the zero vector. Deterministic by construction (no process hash seed
    involvement), so it anchors every reproducibility contract in the suite.
    """

    def __init__(self, dimension: int = 256):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.name = f"hash-{dimension}"
        self.deterministic = True
        self.max_tokens = 4096

    def _embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension)
        for feat in hash_features(text):
            digest = hashlib.blake2b(feat.encode("utf-8"), digest_size=16).digest()
            idx = int.from_bytes(digest[:8], "little") % self.dimension
            sign = 1.0 if digest[8] % 2 == 0 else -1.0
            vec[idx] += sign
        norm = np.linalg.norm(vec)
        if norm > 0.0:
            vec /= norm
        return vec

    def embed(self, texts) -> np.ndarray:
        return np.stack([self._embed_one(t) for t in texts]) if texts else np.zeros((0, self.dimension))


class RemoteProvider(EmbeddingProvider):
    """HTTP client for an embedding sidecar.

    Dimension and model name come from GET /health at construction time.
    Connection failures, timeouts and 5xx responses are retried `retries`
    times, then raised as ProviderUnavailableError.
    """

    def __init__(self, base_url: str, timeout: float = 30.0, retries: int = 3,
                 max_tokens: int = 512):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.max_tokens = max_tokens
        self.deterministic = True
        self._session = requests.Session()
        health = self._request("GET", "/health")
        self.dimension = int(health["dim"])
        self.name = f"remote:{health.get('model', 'unknown')}"

    def _request(self, method: str, path: str, payload=None) -> dict:
        url = self.base_url + path
        last_err = None
        for _ in range(self.retries + 1):
            try:
                resp = self._session.request(method, url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_err = exc
                continue
            if resp.status_code >= 500:
                last_err = RuntimeError(f"{url} -> HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise ProviderUnavailableError(
                    f"{url} -> HTTP {resp.status_code}: {resp.text[:200]}"
                )
            return resp.json()
        raise ProviderUnavailableError(f"{url} unreachable: {last_err}")

    def _embed_via(self, path: str, texts) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.dimension))
        body = self._request("POST", path, {"texts": texts})
        vectors = np.asarray(body["vectors"], dtype=float)
        if int(body["dim"]) != self.dimension or vectors.shape != (len(texts), self.dimension):
            raise DimensionMismatchError(
                f"{path} returned shape {vectors.shape}, expected ({len(texts)}, {self.dimension})"
            )
        return vectors

    def embed(self, texts) -> np.ndarray:
        return self._embed_via("/embed", texts)

    def embed_joined(self, joined) -> np.ndarray:
        return self._embed_via("/embed_joined", joined)


class CachingProvider(EmbeddingProvider):
    """In-memory cache wrapper keyed by (provider name, input text).

    Results are bit-identical to cache-disabled runs because exact vectors
    are stored. Concurrent readers are safe; writes take a lock.
    """

    def __init__(self, inner: EmbeddingProvider):
        self.inner = inner
        self.name = inner.name
        self.dimension = inner.dimension
        self.deterministic = inner.deterministic
        self.max_tokens = inner.max_tokens
        self._lock = threading.Lock()
        self._plain: dict[str, np.ndarray] = {}
        self._joined: dict[str, np.ndarray] = {}

    def _cached(self, cache, texts, compute) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.dimension))
        missing = [t for t in texts if t not in cache]
        if missing:
            unique = list(dict.fromkeys(missing))
            fresh = compute(unique)
            with self._lock:
                for text, vec in zip(unique, fresh):
                    cache[text] = vec
        return np.stack([cache[t] for t in texts])

    def embed(self, texts) -> np.ndarray:
        return self._cached(self._plain, texts, self.inner.embed)

    def embed_joined(self, joined) -> np.ndarray:
        return self._cached(self._joined, joined, self.inner.embed_joined)


def embed_text(provider: EmbeddingProvider, text: str) -> np.ndarray:
    """One backbone vector for one text."""
    vec = provider.embed([text])[0]
    if vec.shape != (provider.dimension,):
        raise DimensionMismatchError(
            f"provider {provider.name} returned shape {vec.shape}, "
            f"declared dimension {provider.dimension}"
        )
    return vec


@dataclass
class ProjectionParams:
    """Trainable linear maps in front of the frozen backbone.

    w_comment projects the target embedding, w_window the mean-pooled
    window embedding; both are (d_model, d_backbone).
    """

    w_comment: np.ndarray
    w_window: np.ndarray

    def __post_init__(self):
        if self.w_comment.shape != self.w_window.shape:
            raise DimensionMismatchError(
                f"projection shapes differ: {self.w_comment.shape} vs {self.w_window.shape}"
            )

    @property
    def d_model(self) -> int:
        return self.w_comment.shape[0]

    @property
    def d_backbone(self) -> int:
        return self.w_comment.shape[1]

    @classmethod
    def init(cls, d_backbone: int, d_model: int | None = None, *,
             seed: int = 0, noise: float = 0.01) -> "ProjectionParams":
        """Identity-shaped start (eye + small uniform noise): near-pass-through."""
        d_model = d_backbone if d_model is None else d_model
        rng = np.random.default_rng(seed)
        shape = (d_model, d_backbone)
        return cls(
            w_comment=np.eye(*shape) + rng.uniform(-noise, noise, shape),
            w_window=np.eye(*shape) + rng.uniform(-noise, noise, shape),
        )


def _project(w: np.ndarray, vec: np.ndarray) -> np.ndarray:
    if w.shape[1] != vec.shape[0]:
        raise DimensionMismatchError(
            f"projection expects backbone dim {w.shape[1]}, got vector of {vec.shape[0]}"
        )
    return w @ vec


def embed_comment(params: ProjectionParams, provider: EmbeddingProvider, text: str) -> np.ndarray:
    """w_comment @ backbone(text); the retrieval-side target embedding."""
    return _project(params.w_comment, embed_text(provider, text))


def embed_window(params: ProjectionParams, provider: EmbeddingProvider, window_texts) -> np.ndarray:
    """w_window @ mean of member backbone embeddings.

    Empty windows are masked upstream and must never reach this point.
    """
    window_texts = list(window_texts)
    if not window_texts:
        raise EmptyWindowError("cannot embed an empty window")
    mean = provider.embed(window_texts).mean(axis=0)
    return _project(params.w_window, mean)


@dataclass
class JoinConfig:
    """Token budgets for the joined target+window sequence.

    per_comment_tokens caps each comment individually; max_tokens caps the
    whole sequence (None means the provider's declared maximum). Counting
    uses whitespace tokens so the surviving text is preserved verbatim.
    """

    per_comment_tokens: int = 64
    max_tokens: int | None = None


@dataclass
class JoinStats:
    """Truncation telemetry; joins stay silent otherwise."""

    comments_truncated: int = 0
    sequences_truncated: int = 0


def join_texts(target_text: str, window_texts, config: JoinConfig | None = None,
               *, provider_max: int | None = None, stats: JoinStats | None = None) -> str:
    """Render "[CLS] target [SEP] member [SEP] ... [SEP]" with truncation.

    Comments are clipped to per_comment_tokens each; the assembled sequence
    is tail-truncated to the overall cap. An empty window list yields the
    context-free form "[CLS] target [SEP]".
    """
    config = config or JoinConfig()
    cap = config.per_comment_tokens

    def clip(text: str) -> list[str]:
        tokens = text.split()
        if len(tokens) > cap:
            if stats is not None:
                stats.comments_truncated += 1
            return tokens[:cap]
        return tokens

    parts = [BEGIN_MARKER, *clip(target_text), SEP_MARKER]
    for member in window_texts:
        parts.extend(clip(member))
        parts.append(SEP_MARKER)

    limit = config.max_tokens
    if limit is None:
        limit = provider_max
    if limit is not None and len(parts) > limit:
        parts = parts[:limit]
        if stats is not None:
            stats.sequences_truncated += 1
    return " ".join(parts)


def embed_joined(provider: EmbeddingProvider, joined: str) -> np.ndarray:
    """One backbone vector for a pre-joined sequence."""
    vec = provider.embed_joined([joined])[0]
    if vec.shape != (provider.dimension,):
        raise DimensionMismatchError(
            f"provider {provider.name} returned shape {vec.shape}, "
            f"declared dimension {provider.dimension}"
        )
    return vec
