"""Pluggable text-embedding providers with a content-addressed binary cache.

Three provider kinds are supported: ``remote-endpoint`` speaks a minimal HTTP
embedding API ({model, input: [str]} in, {data: [{embedding: [...]}]} out),
``deterministic-test`` computes portable feature-hashing vectors locally, and
``file-import`` serves vectors only from a previously imported cache file.

Cache keys are sha256 over the provider id and the normalized text, separated
by a NUL byte, so one proof embedded under two providers caches separately.

Cache file layout (all integers little-endian): magic ``PGEC``, format
version u16, provider id as u16 length plus UTF-8 bytes, dim u32, entry
count u64, then per entry a 32-byte key followed by dim float32 values.
"""

from __future__ import annotations

import hashlib
import os
import struct
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import mathtext
from .rng import fnv1a64

CACHE_MAGIC = b"PGEC"
CACHE_VERSION = 1

PROVIDER_KINDS = ("remote-endpoint", "deterministic-test", "file-import")


class EmbeddingError(Exception):
    """Base class for embedding failures."""


class EmptyTextError(EmbeddingError):
    """Text was empty (or whitespace-only) after normalization."""


class DimensionMismatchError(EmbeddingError):
    """A provider returned a vector whose length differs from its declared dim."""


class RemoteEmbedError(EmbeddingError):
    """Remote endpoint failed after exhausting retries, or replied malformed."""


class CacheFormatError(EmbeddingError):
    """Cache file is corrupt; the message names the byte offset."""


class EmbedBatchError(EmbeddingError):
    """One or more items of a batch failed; successful items are cached."""

    def __init__(self, item_errors: list[tuple[int, str]], succeeded: int):
        self.item_errors = item_errors
        self.succeeded = succeeded
        detail = "; ".join(f"item {i}: {msg}" for i, msg in item_errors[:5])
        more = "" if len(item_errors) <= 5 else f" (+{len(item_errors) - 5} more)"
        super().__init__(
            f"{len(item_errors)} of {succeeded + len(item_errors)} items failed "
            f"({succeeded} succeeded): {detail}{more}"
        )


@dataclass(frozen=True)
class ProviderConfig:
    provider_id: str
    kind: str
    dim: int
    endpoint_url: str = ""
    credential_env: str = ""
    needs_math_merge: bool = False
    max_batch: int = 64
    max_retries: int = 5
    max_in_flight: int = 4
    model: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PROVIDER_KINDS:
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.dim <= 0:
            raise ValueError(f"provider dim must be positive, got {self.dim}")
        if self.kind == "remote-endpoint" and not self.endpoint_url:
            raise ValueError(f"provider {self.provider_id!r} is remote but has no endpoint URL")
        if self.max_batch < 1 or self.max_in_flight < 1:
            raise ValueError("max_batch and max_in_flight must be at least 1")


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray
    dim: int
    provider_id: str
    content_hash: bytes


def content_hash(provider_id: str, normalized_text: str) -> bytes:
    """sha256 over provider id, a NUL separator, and the normalized text."""
    h = hashlib.sha256()
    h.update(provider_id.encode("utf-8"))
    h.update(b"\x00")
    h.update(normalized_text.encode("utf-8"))
    return h.digest()


def hash_embed(text: str, dim: int, seed: int, provider_id: str = "hash") -> EmbeddingVector:
    """Portable feature-hashing embedding over math-merged tokens.

    Each token of merge_math_tokens(normalize(text)) is hashed with FNV-1a 64
    over the 8-byte little-endian seed followed by the token's UTF-8 bytes.
    The hash picks a bucket (h mod dim) and a sign (+1 when the top bit is 0,
    else -1); signed counts are accumulated in float64, L2-normalized, and
    stored as float32. Texts with equal token multisets map to equal vectors.
    """
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    normalized = mathtext.normalize(text)
    tokens = mathtext.merge_math_tokens(normalized).tokens
    seed_bytes = struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF)
    acc = np.zeros(dim, dtype=np.float64)
    for tok in tokens:
        h = fnv1a64(seed_bytes + tok.encode("utf-8"))
        sign = 1.0 if (h >> 63) == 0 else -1.0
        acc[h % dim] += sign
    norm = float(np.linalg.norm(acc))
    if norm > 0.0:
        acc /= norm
    values = acc.astype(np.float32)
    values.flags.writeable = False
    return EmbeddingVector(
        values=values,
        dim=dim,
        provider_id=provider_id,
        content_hash=content_hash(provider_id, normalized),
    )


class EmbeddingCache:
    """In-memory content-addressed vector store with a portable binary file format.

    Reads are lock-free; writes are serialized. One cache instance is bound
    to a single (provider_id, dim) pair.
    """

    def __init__(self, provider_id: str, dim: int):
        if dim <= 0:
            raise ValueError(f"dim must be positive, got {dim}")
        self.provider_id = provider_id
        self.dim = dim
        self._entries: dict[bytes, np.ndarray] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: bytes) -> bool:
        return key in self._entries

    def get(self, key: bytes):
        return self._entries.get(key)

    def put(self, key: bytes, values: np.ndarray) -> None:
        vec = np.asarray(values, dtype=np.float32)
        if vec.ndim != 1 or vec.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"vector has shape {vec.shape}, cache dim is {self.dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise EmbeddingError("refusing to cache a non-finite vector")
        if len(key) != 32:
            raise ValueError(f"cache key must be 32 bytes, got {len(key)}")
        vec = vec.copy()
        vec.flags.writeable = False
        with self._lock:
            self._entries[key] = vec

    def export(self, path) -> int:
        """Write every entry to a cache file; returns the entry count.

        Entries are written in sorted key order so exports of equal caches
        are byte-identical.
        """
        with self._lock:
            items = sorted(self._entries.items())
        pid = self.provider_id.encode("utf-8")
        buf = bytearray()
        buf += CACHE_MAGIC
        buf += struct.pack("<H", CACHE_VERSION)
        buf += struct.pack("<H", len(pid)) + pid
        buf += struct.pack("<I", self.dim)
        buf += struct.pack("<Q", len(items))
        for key, vec in items:
            buf += key
            buf += vec.astype("<f4").tobytes()
        tmp = f"{path}.tmp.{os.getpid()}"
        with open(tmp, "wb") as fh:
            fh.write(buf)
        os.replace(tmp, path)
        return len(items)

    def import_file(self, path) -> int:
        """Merge entries from a cache file; returns the number imported."""
        with open(path, "rb") as fh:
            data = fh.read()
        offset = 0

        def take(n: int, what: str) -> bytes:
            nonlocal offset
            if offset + n > len(data):
                raise CacheFormatError(f"truncated {what} at offset {offset}")
            chunk = data[offset : offset + n]
            offset += n
            return chunk

        if take(4, "magic") != CACHE_MAGIC:
            raise CacheFormatError("bad magic bytes at offset 0")
        (version,) = struct.unpack("<H", take(2, "version"))
        if version != CACHE_VERSION:
            raise CacheFormatError(f"unsupported cache version {version} at offset 4")
        (pid_len,) = struct.unpack("<H", take(2, "provider id length"))
        pid = take(pid_len, "provider id").decode("utf-8")
        (dim,) = struct.unpack("<I", take(4, "dim"))
        if pid != self.provider_id:
            raise ValueError(
                f"cache file is for provider {pid!r}, this cache is {self.provider_id!r}"
            )
        if dim != self.dim:
            raise ValueError(f"cache file dim {dim} conflicts with cache dim {self.dim}")
        (count,) = struct.unpack("<Q", take(8, "entry count"))
        imported: dict[bytes, np.ndarray] = {}
        for i in range(count):
            key = bytes(take(32, f"entry {i} key"))
            raw = take(4 * dim, f"entry {i} vector")
            vec = np.frombuffer(raw, dtype="<f4").astype(np.float32)
            if not np.all(np.isfinite(vec)):
                raise CacheFormatError(f"non-finite values in entry {i}")
            vec.flags.writeable = False
            imported[key] = vec
        if offset != len(data):
            raise CacheFormatError(f"trailing garbage at offset {offset}")
        with self._lock:
            self._entries.update(imported)
        return count


def _default_transport(url: str, headers: dict, payload: dict):
    import requests

    resp = requests.post(url, json=payload, headers=headers, timeout=60.0)
    try:
        body = resp.json()
    except ValueError:
        body = {}
    return resp.status_code, body


class DeterministicBackend:
    """Pure local backend computing hash_embed vectors; counts invocations."""

    def __init__(self, cfg: ProviderConfig):
        self.cfg = cfg
        self.calls = 0
        self._lock = threading.Lock()

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        with self._lock:
            self.calls += 1
        return [
            hash_embed(t, self.cfg.dim, self.cfg.seed, provider_id=self.cfg.provider_id).values
            for t in texts
        ]


class ImportOnlyBackend:
    """Backend for file-import providers: never computes, only the cache serves."""

    def __init__(self, cfg: ProviderConfig):
        self.cfg = cfg
        self.calls = 0

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        raise EmbeddingError(
            f"provider {self.cfg.provider_id!r} is import-only; "
            f"{len(texts)} text(s) missing from the cache"
        )


class RemoteBackend:
    """HTTP embedding client with exponential-backoff retries.

    Retries (initial delay 0.5 s, doubling) fire on transport errors, 429,
    and 5xx statuses; other statuses fail immediately. A dimension mismatch
    in a 200 response is a hard error and is never retried. max_retries
    counts retries, so at most max_retries + 1 requests go out per chunk.
    """

    def __init__(self, cfg: ProviderConfig, transport=None, sleep=time.sleep):
        self.cfg = cfg
        self.calls = 0
        self._transport = transport or _default_transport
        self._sleep = sleep
        self._lock = threading.Lock()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.cfg.credential_env:
            token = os.environ.get(self.cfg.credential_env)
            if token is None:
                raise EmbeddingError(
                    f"credential environment variable {self.cfg.credential_env!r} is not set"
                )
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _parse(self, body, expected: int) -> list[np.ndarray]:
        data = body.get("data") if isinstance(body, dict) else None
        if not isinstance(data, list) or len(data) != expected:
            got = len(data) if isinstance(data, list) else "missing"
            raise RemoteEmbedError(f"malformed response: expected {expected} items, got {got}")
        out = []
        for item in data:
            emb = item.get("embedding") if isinstance(item, dict) else None
            vec = np.asarray(emb, dtype=np.float64) if emb is not None else None
            if vec is None or vec.ndim != 1:
                raise RemoteEmbedError("malformed response item: no embedding array")
            if vec.shape[0] != self.cfg.dim:
                raise DimensionMismatchError(
                    f"provider {self.cfg.provider_id!r} returned {vec.shape[0]} values, "
                    f"declared dim is {self.cfg.dim}"
                )
            if not np.all(np.isfinite(vec)):
                raise RemoteEmbedError("non-finite embedding values in response")
            out.append(vec.astype(np.float32))
        return out

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        with self._lock:
            self.calls += 1
        headers = self._headers()
        payload = {"model": self.cfg.model or self.cfg.provider_id, "input": list(texts)}
        delay = 0.5
        last = "no attempt made"
        for attempt in range(self.cfg.max_retries + 1):
            try:
                status, body = self._transport(self.cfg.endpoint_url, headers, payload)
            except (DimensionMismatchError, RemoteEmbedError):
                raise
            except Exception as exc:
                last = f"transport error: {exc}"
                retryable = True
            else:
                if status == 200:
                    return self._parse(body, len(texts))
                last = f"HTTP status {status}"
                retryable = status == 429 or status >= 500
            if not retryable or attempt == self.cfg.max_retries:
                raise RemoteEmbedError(
                    f"embedding request failed after {attempt + 1} attempt(s): {last}"
                )
            self._sleep(delay)
            delay *= 2.0
        raise RemoteEmbedError(f"embedding request failed: {last}")


def make_backend(cfg: ProviderConfig, transport=None, sleep=time.sleep):
    if cfg.kind == "deterministic-test":
        return DeterministicBackend(cfg)
    if cfg.kind == "remote-endpoint":
        return RemoteBackend(cfg, transport=transport, sleep=sleep)
    return ImportOnlyBackend(cfg)


class Embedder:
    """Embeds texts through one provider, consulting the cache first."""

    def __init__(self, cfg: ProviderConfig, cache: EmbeddingCache | None = None, backend=None):
        if cache is not None and (cache.provider_id != cfg.provider_id or cache.dim != cfg.dim):
            raise ValueError("cache provider/dim does not match provider config")
        self.cfg = cfg
        self.cache = cache if cache is not None else EmbeddingCache(cfg.provider_id, cfg.dim)
        self.backend = backend if backend is not None else make_backend(cfg)

    def _prepare(self, text: str) -> tuple[bytes, str]:
        normalized = mathtext.normalize(text)
        if not normalized.strip():
            raise EmptyTextError("text is empty after normalization")
        key = content_hash(self.cfg.provider_id, normalized)
        if self.cfg.kind == "remote-endpoint" and self.cfg.needs_math_merge:
            prepared = " ".join(mathtext.merge_math_tokens(normalized).tokens)
        else:
            prepared = normalized
        return key, prepared

    def _wrap(self, key: bytes, values: np.ndarray) -> EmbeddingVector:
        return EmbeddingVector(
            values=values, dim=self.cfg.dim, provider_id=self.cfg.provider_id, content_hash=key
        )

    def embed(self, text: str) -> EmbeddingVector:
        key, prepared = self._prepare(text)
        vec = self.cache.get(key)
        if vec is None:
            (computed,) = self.backend.embed_texts([prepared])
            self.cache.put(key, computed)
            vec = self.cache.get(key)
        return self._wrap(key, vec)

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        """Embed many texts, preserving order.

        Cache misses are deduplicated, chunked to at most max_batch texts per
        provider call, and issued with at most max_in_flight chunks in flight.
        If any item fails, the rest are still cached and an EmbedBatchError
        carrying (index, message) pairs and the success count is raised.
        """
        n = len(texts)
        keys: list[bytes | None] = [None] * n
        item_errors: list[tuple[int, str]] = []
        pending: dict[bytes, tuple[str, list[int]]] = {}

        for i, text in enumerate(texts):
            try:
                key, prepared = self._prepare(text)
            except EmbeddingError as exc:
                item_errors.append((i, str(exc)))
                continue
            keys[i] = key
            if self.cache.get(key) is None:
                if key in pending:
                    pending[key][1].append(i)
                else:
                    pending[key] = (prepared, [i])

        pending_keys = list(pending.keys())
        chunks = [
            pending_keys[lo : lo + self.cfg.max_batch]
            for lo in range(0, len(pending_keys), self.cfg.max_batch)
        ]

        def run_chunk(chunk_keys: list[bytes]):
            chunk_texts = [pending[k][0] for k in chunk_keys]
            return self.backend.embed_texts(chunk_texts)

        failures: dict[bytes, str] = {}
        if len(chunks) == 1:
            results = {0: None}
            try:
                results[0] = run_chunk(chunks[0])
            except EmbeddingError as exc:
                for k in chunks[0]:
                    failures[k] = str(exc)
            if results[0] is not None:
                for k, vec in zip(chunks[0], results[0]):
                    self.cache.put(k, vec)
        elif chunks:
            workers = min(self.cfg.max_in_flight, len(chunks))
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(run_chunk, c) for c in chunks]
                for chunk_keys, fut in zip(chunks, futures):
                    try:
                        vectors = fut.result()
                    except EmbeddingError as exc:
                        for k in chunk_keys:
                            failures[k] = str(exc)
                        continue
                    for k, vec in zip(chunk_keys, vectors):
                        self.cache.put(k, vec)

        out: list[EmbeddingVector | None] = [None] * n
        for i, key in enumerate(keys):
            if key is None:
                continue
            vec = self.cache.get(key)
            if vec is None:
                item_errors.append((i, failures.get(key, "vector unavailable")))
            else:
                out[i] = self._wrap(key, vec)

        if item_errors:
            item_errors.sort(key=lambda e: e[0])
            raise EmbedBatchError(item_errors, succeeded=sum(v is not None for v in out))
        return [v for v in out if v is not None]
