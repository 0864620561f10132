"""Text embedding behind a provider abstraction.

Two providers share the same surface: a deterministic hashed character
3-gram embedder that needs no model downloads, and a thin HTTP client
for a remote embedding service. All emitted vectors are unit-norm
float32 of the configured dimension; similarity everywhere in the stack
is the inner product of such vectors.
"""

from __future__ import annotations

import numpy as np
import httpx

from .errors import InvalidInputError, ProtocolError, TransportError

# splitmix64 finalizer constants
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SEED_MIX = np.uint64(0x9E3779B97F4A7C15)


def _splitmix(h: np.ndarray) -> np.ndarray:
    h = h.copy()
    h ^= h >> np.uint64(30)
    h *= _M1
    h ^= h >> np.uint64(27)
    h *= _M2
    h ^= h >> np.uint64(31)
    return h


def normalize(vec: np.ndarray) -> np.ndarray:
    """L2-normalize to float32. Raises on the zero vector."""
    v = np.asarray(vec, dtype=np.float32)
    norm = float(np.linalg.norm(v.astype(np.float64)))
    if norm == 0.0:
        raise InvalidInputError("cannot normalize a zero vector")
    v = v / np.float32(norm)
    # renormalize in float32 so downstream inner products stay within 1e-6 of 1
    v = v / np.linalg.norm(v)
    return v


class HashedNgramEmbedder:
    """Deterministic bag-of-hashed-character-3-grams embedder.

    Each 3-gram of the space-padded text is hashed with a seeded 64-bit
    mix; the hash picks one of ``dim`` buckets and one spare bit picks a
    +/-1 sign. Bucket sums are L2-normalized. Pure function of
    (text, seed, dim), and lexical overlap translates into inner-product
    similarity, which is what the snippeting comparisons rely on.
    """

    kind = "reference"

    def __init__(self, dim: int = 64, seed: int = 13):
        if dim < 2:
            raise InvalidInputError(f"embedding dim must be >= 2, got {dim}")
        self.dim = dim
        self.seed = seed
        mixed = ((seed & 0xFFFFFFFFFFFFFFFF) * int(_SEED_MIX)) & 0xFFFFFFFFFFFFFFFF
        self._seed64 = np.uint64(mixed)

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise InvalidInputError("cannot embed empty or whitespace-only text")
        # pad so even 1-char inputs yield a 3-gram and word boundaries count
        data = np.frombuffer(f" {text} ".encode("utf-8"), dtype=np.uint8)
        grams = (
            (data[:-2].astype(np.uint64) << np.uint64(16))
            | (data[1:-1].astype(np.uint64) << np.uint64(8))
            | data[2:].astype(np.uint64)
        )
        h = _splitmix(grams ^ self._seed64)
        buckets = (h % np.uint64(self.dim)).astype(np.int64)
        signs = np.where((h >> np.uint64(63)) & np.uint64(1), -1.0, 1.0)
        vec = np.zeros(self.dim, dtype=np.float64)
        np.add.at(vec, buckets, signs)
        if not np.any(vec):
            # degenerate cancellation: fall back to a single deterministic bucket
            vec[int(h[0] % np.uint64(self.dim))] = 1.0
        return normalize(vec)

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        out = []
        for i, text in enumerate(texts):
            try:
                out.append(self.embed(text))
            except InvalidInputError as exc:
                raise InvalidInputError(f"batch element {i}: {exc}") from exc
        return out


class RemoteEmbedder:
    """Client for an embedding service speaking the bulk JSON protocol.

    POST {base_url}/embed with {"texts": [...]} must return
    {"vectors": [[...], ...]}. Returned vectors are normalized here, so
    services may return raw (unnormalized) embeddings.
    """

    kind = "remote"

    def __init__(
        self,
        base_url: str,
        dim: int,
        timeout_ms: int = 5000,
        client: httpx.Client | None = None,
    ):
        self.dim = dim
        self._client = client or httpx.Client(
            base_url=base_url, timeout=timeout_ms / 1000.0
        )

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        for i, text in enumerate(texts):
            if not text or not text.strip():
                raise InvalidInputError(f"batch element {i}: empty text")
        if not texts:
            return []
        try:
            resp = self._client.post("/embed", json={"texts": texts})
        except httpx.TimeoutException as exc:
            raise TransportError(f"embedding service timed out: {exc}", kind="timeout") from exc
        except httpx.TransportError as exc:
            raise TransportError(f"embedding service unreachable: {exc}", kind="refused") from exc
        resp.raise_for_status()
        vectors = resp.json().get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            got = len(vectors) if isinstance(vectors, list) else "no"
            raise ProtocolError(
                f"embedding service returned {got} vectors for {len(texts)} texts"
            )
        out = []
        for i, values in enumerate(vectors):
            if len(values) != self.dim:
                raise ProtocolError(
                    f"batch element {i}: dimension {len(values)} != configured {self.dim}"
                )
            out.append(normalize(np.asarray(values, dtype=np.float64)))
        return out
