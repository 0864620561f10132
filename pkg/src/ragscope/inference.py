"""Generation and attention attribution behind a pluggable model backend.

Two backends speak the same interface: a deterministic reference model
(seeded hash decoding + similarity-softmax attention, exactly
recomputable in tests) and an HTTP client for a remote model server.
The gateway runs generation, fetches the raw attention tensor, truncates
each output row to the input positions and renormalizes, then reduces
the tensor to per-output-token attributions, per-document cumulative
scores, and selection sums.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from typing import Protocol, Sequence

import httpx
import numpy as np

from .context import ContextLayout
from .embedder import HashedNgramEmbedder
from .errors import GenerationError, InvalidInputError, ProtocolError, TransportError

ROW_SUM_TOL = 1e-5


@dataclass(frozen=True)
class AttentionTensor:
    """Per-layer, per-head attention over input tokens only.

    weights has shape (layers, heads, out_len, in_len); every row is
    normalized to sum to 1 after truncation away from generated-token
    positions.
    """

    weights: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise InvalidInputError(
                f"attention tensor must be 4-D, got shape {self.weights.shape}"
            )

    @property
    def layers(self) -> int:
        return self.weights.shape[0]

    @property
    def heads(self) -> int:
        return self.weights.shape[1]

    @property
    def out_len(self) -> int:
        return self.weights.shape[2]

    @property
    def in_len(self) -> int:
        return self.weights.shape[3]


@dataclass(frozen=True)
class TokenAttribution:
    """Mean attention across layers and heads: (out_len, in_len), row-stochastic."""

    matrix: np.ndarray

    @property
    def out_len(self) -> int:
        return self.matrix.shape[0]

    @property
    def in_len(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class DocumentAttentionScore:
    doc_id: int
    raw: float  # mean over output rows of the mass on this document's span
    share: float  # raw / sum of raws over all document segments


@dataclass(frozen=True)
class GenerationResult:
    output_tokens: tuple[str, ...]
    attribution: TokenAttribution
    doc_scores: tuple[DocumentAttentionScore, ...]
    layout: ContextLayout
    backend_info: dict


class ModelBackend(Protocol):
    def info(self) -> dict: ...

    def generate(
        self, prompt_tokens: Sequence[str], max_tokens: int, seed: int
    ) -> list[str]: ...

    def attention(
        self, prompt_tokens: Sequence[str], output_tokens: Sequence[str]
    ) -> np.ndarray:
        """(layers, heads, out_len, in_len + out_len); row o normalized over
        the first in_len + o columns, zero beyond."""
        ...


class ReferenceModel:
    """Deterministic stand-in for a real language model.

    Decoding: the next token is vocab[H % |vocab|] where vocab is the
    sorted set of distinct prompt tokens and H hashes the decode seed
    together with the full context so far (prompt plus generated
    tokens). Decoding stops after max_tokens or right after emitting a
    ".".

    Attention: head (l, h) carries a fixed temperature tau drawn once
    from the model seed; the row for output o is
    softmax_i(tau * <e(out_o), e(ctx_i)>) over input positions plus
    outputs before o, where e is the hashed-ngram embedder. Everything
    is reproducible from (model seed, decode seed, tokens) alone, which
    lets tests recompute the closed form independently.
    """

    def __init__(self, layers: int = 2, heads: int = 4, seed: int = 0, dim: int = 64):
        if layers < 1 or heads < 1:
            raise InvalidInputError("layers and heads must be >= 1")
        self.layers = layers
        self.heads = heads
        self.seed = seed
        self.embedder = HashedNgramEmbedder(dim=dim, seed=seed + 1)
        rng = np.random.default_rng(seed)
        self.temperatures = rng.uniform(0.5, 4.0, size=(layers, heads))
        self.model_name = "hashed-sim-reference"

    def info(self) -> dict:
        return {
            "model_name": self.model_name,
            "layers": self.layers,
            "heads": self.heads,
        }

    def generate(self, prompt_tokens, max_tokens, seed):
        if not prompt_tokens:
            raise InvalidInputError("prompt is empty")
        if max_tokens < 1:
            raise InvalidInputError(f"max_tokens must be >= 1, got {max_tokens}")
        vocab = sorted(set(prompt_tokens))
        context = list(prompt_tokens)
        out: list[str] = []
        for _ in range(max_tokens):
            h = hashlib.blake2b(digest_size=8)
            h.update(f"{self.seed}:{seed}:".encode())
            h.update("\x00".join(context).encode())
            tok = vocab[int.from_bytes(h.digest(), "little") % len(vocab)]
            out.append(tok)
            context.append(tok)
            if tok == ".":
                break
        return out

    def attention(self, prompt_tokens, output_tokens):
        if not prompt_tokens or not output_tokens:
            raise InvalidInputError("prompt and output must be non-empty")
        in_len = len(prompt_tokens)
        out_len = len(output_tokens)
        all_tokens = list(prompt_tokens) + list(output_tokens)
        embs = np.asarray(
            self.embedder.embed_batch(all_tokens), dtype=np.float64
        )
        e_in = embs  # context rows; e_out slices the tail
        e_out = embs[in_len:]
        # sims[o][i] = <e(out_o), e(ctx_i)>
        sims = e_out @ e_in.T
        weights = np.zeros(
            (self.layers, self.heads, out_len, in_len + out_len), dtype=np.float64
        )
        for l in range(self.layers):
            for h in range(self.heads):
                tau = self.temperatures[l, h]
                for o in range(out_len):
                    span = in_len + o  # inputs plus outputs before o
                    logits = tau * sims[o, :span]
                    logits -= logits.max()
                    ex = np.exp(logits)
                    weights[l, h, o, :span] = ex / ex.sum()
        return weights


class RemoteModelClient:
    """Client for the model-server wire protocol (/generate, /attention, /info)."""

    def __init__(
        self,
        base_url: str,
        timeout_ms: int = 30_000,
        client: httpx.Client | None = None,
    ):
        self.base_url = base_url
        self._client = client or httpx.Client(
            base_url=base_url, timeout=timeout_ms / 1000.0
        )

    def _post(self, path: str, body: dict) -> dict:
        try:
            resp = self._client.post(path, json=body)
        except httpx.TimeoutException as exc:
            raise TransportError(f"model server timed out on {path}: {exc}", kind="timeout") from exc
        except httpx.TransportError as exc:
            raise TransportError(f"model server unreachable on {path}: {exc}", kind="refused") from exc
        if resp.status_code != 200:
            raise TransportError(f"model server HTTP {resp.status_code} on {path}: {resp.text}")
        return resp.json()

    def info(self) -> dict:
        try:
            resp = self._client.get("/info")
        except httpx.TimeoutException as exc:
            raise TransportError(f"model server timed out on /info: {exc}", kind="timeout") from exc
        except httpx.TransportError as exc:
            raise TransportError(f"model server unreachable on /info: {exc}", kind="refused") from exc
        if resp.status_code != 200:
            raise TransportError(f"model server HTTP {resp.status_code} on /info")
        return resp.json()

    def generate(self, prompt_tokens, max_tokens, seed):
        payload = self._post(
            "/generate",
            {"prompt_tokens": list(prompt_tokens), "max_tokens": max_tokens, "seed": seed},
        )
        toks = payload.get("output_tokens")
        if not isinstance(toks, list):
            raise ProtocolError("model server /generate returned no output_tokens list")
        return [str(t) for t in toks]

    def attention(self, prompt_tokens, output_tokens):
        payload = self._post(
            "/attention",
            {"prompt_tokens": list(prompt_tokens), "output_tokens": list(output_tokens)},
        )
        try:
            weights = np.asarray(payload["weights"], dtype=np.float64)
        except (KeyError, ValueError) as exc:
            raise ProtocolError(f"model server /attention payload malformed: {exc}") from exc
        if weights.ndim != 4:
            raise ProtocolError(
                f"model server /attention weights must be 4-D, got shape {weights.shape}"
            )
        declared = (int(payload.get("layers", -1)), int(payload.get("heads", -1)))
        if declared != weights.shape[:2]:
            raise ProtocolError(
                f"declared layers/heads {declared} do not match weights shape {weights.shape[:2]}"
            )
        return weights


class InferenceGateway:
    """Serializes access to one backend and owns the attribution math."""

    def __init__(self, backend: ModelBackend, max_in_flight: int = 1):
        self.backend = backend
        self._gate = threading.Semaphore(max(1, max_in_flight))
        self._info: dict | None = None

    def info(self) -> dict:
        if self._info is None:
            self._info = self.backend.info()
        return self._info

    def generate(self, prompt_tokens, max_tokens: int = 100, seed: int = 0) -> list[str]:
        if not prompt_tokens:
            raise InvalidInputError("prompt is empty")
        if max_tokens < 1:
            raise InvalidInputError(f"max_tokens must be >= 1, got {max_tokens}")
        with self._gate:
            out = self.backend.generate(prompt_tokens, max_tokens, seed)
        if not out:
            raise GenerationError("backend returned zero tokens")
        if len(out) > max_tokens:
            raise ProtocolError(
                f"backend returned {len(out)} tokens, over the {max_tokens} limit"
            )
        return out

    def attention_forward(self, prompt_tokens, output_tokens) -> AttentionTensor:
        """Raw backend tensor -> input-only rows.

        The backend normalizes each output row over inputs plus earlier
        outputs (causal). Attribution is defined over input tokens, so
        rows are cut at in_len and renormalized — the one lossy step in
        the pipeline.
        """
        if not prompt_tokens or not output_tokens:
            raise InvalidInputError("prompt and output must be non-empty")
        in_len = len(prompt_tokens)
        out_len = len(output_tokens)
        with self._gate:
            raw = self.backend.attention(prompt_tokens, output_tokens)
        info = self.info()
        if raw.shape[0] != info["layers"] or raw.shape[1] != info["heads"]:
            raise ProtocolError(
                f"backend returned {raw.shape[0]}x{raw.shape[1]} layers/heads, "
                f"declared {info['layers']}x{info['heads']}"
            )
        if raw.shape[2] != out_len or raw.shape[3] < in_len:
            raise ProtocolError(
                f"backend tensor shape {raw.shape} does not cover "
                f"out_len={out_len}, in_len={in_len}"
            )
        trunc = raw[:, :, :, :in_len]
        sums = trunc.sum(axis=3, keepdims=True)
        if np.any(sums <= 0):
            raise ProtocolError("attention row carries no mass on input positions")
        return AttentionTensor(weights=trunc / sums)


def aggregate_attribution(tensor: AttentionTensor) -> TokenAttribution:
    """Mean over (layer, head); stays row-stochastic."""
    return TokenAttribution(matrix=tensor.weights.mean(axis=(0, 1)))


def score_documents(
    attr: TokenAttribution, layout: ContextLayout
) -> list[DocumentAttentionScore]:
    """Cumulative per-document attention.

    raw(d) averages over output rows the attribution mass falling in d's
    token span; share rescales raws to sum to 1 across documents.
    """
    if attr.in_len != layout.prompt_len:
        raise InvalidInputError(
            f"attribution covers {attr.in_len} tokens but layout has {layout.prompt_len}"
        )
    doc_segments = layout.document_segments()
    raws = [
        float(attr.matrix[:, seg.token_start : seg.token_end].sum() / attr.out_len)
        for seg in doc_segments
    ]
    total = sum(raws)
    return [
        DocumentAttentionScore(
            doc_id=seg.doc_id,
            raw=raw,
            share=(raw / total) if total > 0 else 0.0,
        )
        for seg, raw in zip(doc_segments, raws)
    ]


def selection_attribution(
    attr: TokenAttribution, selected_outputs
) -> tuple[np.ndarray, np.ndarray]:
    """Summed attribution for a set of output rows.

    Returns (sums, scaled): sums[i] = sum over selected rows of
    attr[o][i]; scaled is sums over its max (for display), all zeros
    when the selection is empty.
    """
    sel = sorted(set(int(o) for o in selected_outputs))
    if any(o < 0 or o >= attr.out_len for o in sel):
        raise InvalidInputError(f"selection out of range [0, {attr.out_len})")
    if not sel:
        zeros = np.zeros(attr.in_len)
        return zeros, zeros.copy()
    sums = attr.matrix[sel].sum(axis=0)
    peak = sums.max()
    scaled = sums / peak if peak > 0 else sums.copy()
    return sums, scaled
