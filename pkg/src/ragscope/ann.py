"""Graph-based approximate nearest-neighbor index for one partition.

Build follows the greedy insert-and-prune recipe used by flat graph ANN
indexes: start from a random bounded-degree graph, then for each node run
a beam search from the medoid entry point, prune the visited set down to
at most R diverse neighbors (slack factor alpha), and add reverse edges,
re-pruning any node that overflows. Two passes are made, the first with
alpha = 1 and the second with the configured alpha. A final repair step
guarantees every node is reachable from the entry point, which in turn
guarantees that a beam as wide as the partition degenerates to exact
search.

All similarity is inner product over unit vectors. Scores are computed
in float64 via an elementwise multiply-and-sum so that the same vector
yields bitwise-identical scores regardless of batch shape; ties are
broken by ascending id everywhere.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IndexCorruptError, IndexFormatError, InvalidInputError

MAGIC = b"RVIX"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQQIQ")  # magic, version, d, count, global_offset, R, entry


@dataclass(frozen=True)
class BuildParams:
    R: int = 48
    L_build: int = 64
    alpha: float = 1.2


@dataclass(frozen=True)
class PartitionManifest:
    partition_id: int
    global_offset: int
    count: int


@dataclass(frozen=True)
class SearchHit:
    doc_id: int
    score: float


def _dots(mat: np.ndarray, q: np.ndarray) -> np.ndarray:
    # multiply-and-sum keeps per-row reduction order independent of batch size
    return np.sum(mat * q, axis=1)


def _l2_from_ip(ip: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(0.0, 2.0 - 2.0 * ip))


class AnnGraph:
    """Immutable after build/load; safe for concurrent searches."""

    def __init__(
        self,
        vectors: np.ndarray,
        neighbors: list[list[int]],
        entry_point: int,
        global_offset: int,
        params: BuildParams,
    ):
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        self.neighbors = neighbors
        self.entry_point = entry_point
        self.global_offset = global_offset
        self.params = params
        self._v64 = self.vectors.astype(np.float64)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1] if self.vectors.ndim == 2 else 0

    def search(self, query: np.ndarray, k: int, L_search: int) -> list[SearchHit]:
        """Top-k by inner product; sorted score desc, ties by ascending doc_id.

        With ``L_search >= count`` every node is scored, so the result
        equals exact search. Fewer than k hits are returned only when the
        partition holds fewer than k vectors.
        """
        if k < 1:
            raise InvalidInputError(f"k must be >= 1, got {k}")
        if L_search < k:
            raise InvalidInputError(f"L_search ({L_search}) must be >= k ({k})")
        if self.count == 0:
            return []
        q = np.asarray(query, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.dim:
            raise InvalidInputError(
                f"query dimension {q.shape[0]} != index dimension {self.dim}"
            )
        pool, _ = _beam_search(
            self._v64, self.neighbors, self.entry_point, q, L_search
        )
        pool.sort(key=lambda t: (-t[0], t[1]))
        return [
            SearchHit(doc_id=node + self.global_offset, score=score)
            for score, node in pool[:k]
        ]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        count, d = self.vectors.shape if self.vectors.ndim == 2 else (0, 0)
        blob = bytearray()
        blob += _HEADER.pack(
            MAGIC,
            FORMAT_VERSION,
            d,
            count,
            self.global_offset,
            self.params.R,
            self.entry_point,
        )
        blob += self.vectors.astype("<f4").tobytes()
        for adj in self.neighbors:
            blob += np.asarray([len(adj)] + list(adj), dtype="<u4").tobytes()
        path.write_bytes(bytes(blob))


def load(path: str | Path) -> AnnGraph:
    """Inverse of :meth:`AnnGraph.save`; bit-identical round trip."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise IndexCorruptError(f"{path}: file shorter than header")
    magic, version, d, count, global_offset, R, entry = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise IndexFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"{path}: unsupported format version {version}")
    pos = _HEADER.size
    vec_bytes = count * d * 4
    if len(raw) < pos + vec_bytes:
        raise IndexCorruptError(f"{path}: truncated vector section")
    vectors = np.frombuffer(raw, dtype="<f4", count=count * d, offset=pos).reshape(
        count, d
    )
    pos += vec_bytes
    neighbors: list[list[int]] = []
    ids = np.frombuffer(raw, dtype="<u4", offset=pos)
    cursor = 0
    for node in range(count):
        if cursor >= ids.size:
            raise IndexCorruptError(f"{path}: truncated adjacency at node {node}")
        degree = int(ids[cursor])
        cursor += 1
        if degree > R:
            raise IndexCorruptError(
                f"{path}: node {node} degree {degree} exceeds R={R}"
            )
        if cursor + degree > ids.size:
            raise IndexCorruptError(f"{path}: truncated adjacency at node {node}")
        adj = ids[cursor : cursor + degree].astype(int).tolist()
        if any(v >= count or v == node for v in adj):
            raise IndexCorruptError(f"{path}: invalid neighbor id at node {node}")
        neighbors.append(adj)
        cursor += degree
    if cursor != ids.size:
        raise IndexCorruptError(f"{path}: {ids.size - cursor} trailing words")
    if count > 0 and entry >= count:
        raise IndexCorruptError(f"{path}: entry point {entry} out of range")
    return AnnGraph(
        vectors=vectors.copy(),
        neighbors=neighbors,
        entry_point=int(entry),
        global_offset=int(global_offset),
        params=BuildParams(R=R),
    )


def build(
    vectors: np.ndarray | list,
    manifest: PartitionManifest,
    params: BuildParams = BuildParams(),
    seed: int = 0,
) -> AnnGraph:
    """Build the partition graph. Deterministic given (inputs, params, seed)."""
    vecs = np.ascontiguousarray(np.asarray(vectors, dtype=np.float32))
    if vecs.size == 0:
        vecs = vecs.reshape(0, vecs.shape[1] if vecs.ndim == 2 else 0)
    if vecs.ndim != 2:
        raise InvalidInputError(f"vectors must be 2-D, got shape {vecs.shape}")
    count = vecs.shape[0]
    if count != manifest.count:
        raise InvalidInputError(
            f"manifest count {manifest.count} != vector count {count}"
        )
    if count == 0:
        return AnnGraph(vecs, [], 0, manifest.global_offset, params)
    v64 = vecs.astype(np.float64)
    if count == 1:
        return AnnGraph(vecs, [[]], 0, manifest.global_offset, params)

    rng = np.random.default_rng(seed)
    R = params.R
    r_init = min(R, count - 1)
    adj: list[list[int]] = []
    for i in range(count):
        picks = rng.choice(count - 1, size=r_init, replace=False)
        adj.append([int(p) + (1 if p >= i else 0) for p in picks])

    centroid = v64.mean(axis=0)
    entry = int(np.argmax(_dots(v64, centroid)))

    order = rng.permutation(count)
    for alpha in (1.0, params.alpha):
        for i in order:
            i = int(i)
            _, expanded = _beam_search(v64, adj, entry, v64[i], params.L_build)
            cand = dict(expanded)
            cand.pop(i, None)
            extra = [n for n in adj[i] if n != i and n not in cand]
            if extra:
                cand.update(zip(extra, _dots(v64[extra], v64[i]).tolist()))
            adj[i] = _robust_prune(v64, i, cand, alpha, R)
            for j in adj[i]:
                if i not in adj[j]:
                    adj[j].append(i)
                    if len(adj[j]) > R:
                        jc = dict(
                            zip(adj[j], _dots(v64[adj[j]], v64[j]).tolist())
                        )
                        adj[j] = _robust_prune(v64, j, jc, alpha, R)

    _ensure_reachable(v64, adj, entry, R)
    return AnnGraph(vecs, adj, entry, manifest.global_offset, params)


def _beam_search(
    v64: np.ndarray,
    adj: list[list[int]],
    entry: int,
    q: np.ndarray,
    L: int,
) -> tuple[list[tuple[float, int]], dict[int, float]]:
    """Best-first graph search keeping the top-L scored nodes.

    Returns (pool, expanded): pool holds (score, node) for the best L
    nodes scored; expanded maps each node whose adjacency was walked to
    its score (the prune candidates at build time). Expansion stops only
    when the best unexpanded candidate scores strictly below the worst
    pooled node, so a wider beam always expands a superset.
    """
    s_entry = float(_dots(v64[entry : entry + 1], q)[0])
    visited = {entry}
    cand = [(-s_entry, entry)]
    pool: list[tuple[float, int]] = [(s_entry, entry)]
    expanded: dict[int, float] = {}
    while cand:
        neg_s, u = heapq.heappop(cand)
        s = -neg_s
        if len(pool) >= L and s < pool[0][0]:
            break
        expanded[u] = s
        fresh = [v for v in adj[u] if v not in visited]
        if not fresh:
            continue
        visited.update(fresh)
        scores = _dots(v64[fresh], q)
        for v, sv in zip(fresh, scores.tolist()):
            heapq.heappush(cand, (-sv, v))
            if len(pool) < L:
                heapq.heappush(pool, (sv, v))
            elif sv > pool[0][0]:
                heapq.heappushpop(pool, (sv, v))
    return pool, expanded


def _robust_prune(
    v64: np.ndarray, p: int, candidates: dict[int, float], alpha: float, R: int
) -> list[int]:
    """Occlusion-pruned neighbor selection.

    ``candidates`` maps node id -> inner product with p. Nodes are taken
    closest-first; picking s discards every remaining r with
    alpha * dist(s, r) <= dist(p, r). Ties resolve to the lower id.
    """
    if not candidates:
        return []
    ids = np.fromiter(candidates.keys(), dtype=np.int64)
    dists = _l2_from_ip(np.fromiter(candidates.values(), dtype=np.float64))
    order = np.lexsort((ids, dists))
    ids = ids[order]
    dists = dists[order]
    selected: list[int] = []
    while ids.size and len(selected) < R:
        s = int(ids[0])
        selected.append(s)
        if ids.size == 1 or len(selected) == R:
            break
        rest_ids = ids[1:]
        rest_d = dists[1:]
        d_sr = _l2_from_ip(_dots(v64[rest_ids], v64[s]))
        keep = alpha * d_sr > rest_d
        ids = rest_ids[keep]
        dists = rest_d[keep]
    return selected


def _ensure_reachable(
    v64: np.ndarray, adj: list[list[int]], entry: int, R: int
) -> None:
    """Repair the graph so every node is reachable from the entry point.

    Each unreachable node is linked from its nearest reachable node,
    preferring nodes with spare degree and never evicting an edge added
    by an earlier repair. Rarely does anything on realistic builds.
    """
    count = len(adj)
    pinned: set[tuple[int, int]] = set()
    for _ in range(count * R + 1):
        reached = _bfs(adj, entry, count)
        if len(reached) == count:
            return
        reached_arr = np.fromiter(sorted(reached), dtype=np.int64)
        for u in sorted(set(range(count)) - reached):
            scores = _dots(v64[reached_arr], v64[u])
            order = np.lexsort((reached_arr, -scores))
            placed = False
            for idx in order:
                v = int(reached_arr[idx])
                if len(adj[v]) < R:
                    adj[v].append(u)
                    pinned.add((v, u))
                    placed = True
                    break
            if not placed:
                for idx in order:
                    v = int(reached_arr[idx])
                    evictable = [w for w in adj[v] if (v, w) not in pinned]
                    if not evictable:
                        continue
                    ips = _dots(v64[evictable], v64[v])
                    worst = min(
                        range(len(evictable)), key=lambda t: (ips[t], -evictable[t])
                    )
                    adj[v].remove(evictable[worst])
                    adj[v].append(u)
                    pinned.add((v, u))
                    placed = True
                    break
            if not placed:  # pragma: no cover - every edge pinned
                raise RuntimeError("connectivity repair exhausted eviction slots")
    raise RuntimeError("connectivity repair did not converge")  # pragma: no cover


def _bfs(adj: list[list[int]], entry: int, count: int) -> set[int]:
    seen = {entry}
    frontier = [entry]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return seen
