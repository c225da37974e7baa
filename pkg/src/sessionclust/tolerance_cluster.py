"""Threshold (tolerance) clustering of sessions.

Two sessions are tolerant of each other when the Jaccard similarity of
their visited-category sets is at least ``p``.  The tolerance class of a
session is its similarity upper approximation; overlapping classes are
merged until nothing changes, which gives the connected components of the
threshold graph.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .feature_space import distinct_pages
from .session_ingest import SessionDataset

__all__ = [
    "DEFAULT_THRESHOLD",
    "SimilarityMatrix",
    "ToleranceRelation",
    "ClusterSet",
    "UnionFind",
    "jaccard_similarity",
    "similarity_matrix",
    "upper_approximation",
    "merge_tolerance_classes",
    "threshold_components",
    "tolerance_clusters",
]

DEFAULT_THRESHOLD = 0.5


class UnionFind:
    """Disjoint sets over 0..n-1 with path halving and union by size."""

    def __init__(self, n: int) -> None:
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def groups(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return list(out.values())


@dataclass(frozen=True)
class ClusterSet:
    """A hard partition of item ids.

    Clusters are stored with members ascending and clusters ordered by
    their smallest member, so equal partitions compare equal.
    """

    clusters: tuple[tuple[Hashable, ...], ...]
    labels: tuple[Hashable, ...] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        clusters = [tuple(sorted(c)) for c in self.clusters]
        if any(len(c) == 0 for c in clusters):
            raise ValueError("clusters must be non-empty")
        seen: set = set()
        for c in clusters:
            overlap = seen.intersection(c)
            if overlap or len(set(c)) != len(c):
                raise ValueError(f"item(s) in more than one cluster: {sorted(overlap) or c}")
            seen.update(c)
        labels = self.labels
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != len(clusters):
                raise ValueError("one label per cluster required")
            order = sorted(range(len(clusters)), key=lambda k: clusters[k][0])
            labels = tuple(labels[k] for k in order)
        clusters.sort(key=lambda c: c[0])
        object.__setattr__(self, "clusters", tuple(clusters))
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_assignments(cls, assignments: Mapping[Hashable, Hashable]) -> "ClusterSet":
        """Build from an ``item -> cluster label`` mapping."""
        groups: dict = {}
        for item, lab in assignments.items():
            groups.setdefault(lab, []).append(item)
        labs = list(groups)
        return cls(tuple(tuple(groups[k]) for k in labs), tuple(labs))

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    @property
    def items(self) -> frozenset:
        return frozenset(i for c in self.clusters for i in c)

    @property
    def n_items(self) -> int:
        return sum(len(c) for c in self.clusters)

    def as_sets(self) -> set[frozenset]:
        return {frozenset(c) for c in self.clusters}

    def assignments(self) -> dict:
        """``item -> 1-based cluster index`` in canonical cluster order."""
        return {i: k for k, c in enumerate(self.clusters, start=1) for i in c}

    def refines(self, other: "ClusterSet") -> bool:
        where = other.assignments()
        return all(len({where[i] for i in c}) == 1 for c in self.clusters)

    def to_dict(self, threshold: float | None = None) -> dict:
        out: dict = {}
        if threshold is not None:
            out["threshold"] = threshold
        out["clusters"] = [list(c) for c in self.clusters]
        return out

    def to_json(self, threshold: float | None = None) -> str:
        return json.dumps(self.to_dict(threshold))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["item_id", "cluster_id"])
        rows = sorted(self.assignments().items(), key=lambda kv: kv[0])
        w.writerows(rows)
        return buf.getvalue()

    @classmethod
    def from_dict(cls, obj: dict) -> "ClusterSet":
        if "clusters" not in obj:
            raise ValueError("cluster JSON needs a 'clusters' key")
        return cls(tuple(tuple(c) for c in obj["clusters"]))

    @classmethod
    def from_json(cls, text: str) -> "ClusterSet":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_csv(cls, text: str) -> "ClusterSet":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["item_id", "cluster_id"]:
            raise ValueError("cluster CSV must start with header item_id,cluster_id")
        assign = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ValueError(f"line {lineno}: expected item_id,cluster_id")
            item = _maybe_int(row[0].strip())
            if item in assign:
                raise ValueError(f"line {lineno}: item {item!r} listed twice")
            assign[item] = _maybe_int(row[1].strip())
        return cls.from_assignments(assign)


def _maybe_int(tok: str):
    try:
        return int(tok)
    except ValueError:
        return tok


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric similarity with unit diagonal, stored as the strict upper
    triangle in row-major order (same layout as ``scipy.spatial.distance.pdist``)."""

    ids: tuple[Hashable, ...]
    condensed: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.ids)
        if self.condensed.shape != (n * (n - 1) // 2,):
            raise ValueError("condensed vector has the wrong length")

    @property
    def n(self) -> int:
        return len(self.ids)

    def _offset(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        return self.n * i - i * (i + 1) // 2 + (j - i - 1)

    def value(self, i: int, j: int) -> float:
        """Similarity between the items at positions ``i`` and ``j``."""
        if i == j:
            return 1.0
        return float(self.condensed[self._offset(i, j)])

    def __getitem__(self, ij) -> float:
        return self.value(*ij)

    def row(self, i: int) -> np.ndarray:
        n = self.n
        out = np.empty(n)
        out[i] = 1.0
        if i:
            js = np.arange(i)
            out[:i] = self.condensed[n * js - js * (js + 1) // 2 + (i - js - 1)]
        start = self._offset(i, i + 1) if i + 1 < n else 0
        out[i + 1:] = self.condensed[start:start + n - i - 1]
        return out

    def to_dense(self) -> np.ndarray:
        n = self.n
        dense = np.eye(n)
        iu = np.triu_indices(n, k=1)
        dense[iu] = self.condensed
        dense[(iu[1], iu[0])] = self.condensed
        return dense

    @classmethod
    def from_dense(cls, dense, ids: Sequence[Hashable] | None = None) -> "SimilarityMatrix":
        dense = np.asarray(dense, dtype=float)
        n = dense.shape[0]
        if dense.shape != (n, n) or not np.allclose(dense, dense.T):
            raise ValueError("similarity matrix must be square and symmetric")
        if not np.allclose(np.diag(dense), 1.0):
            raise ValueError("similarity matrix must have a unit diagonal")
        if dense.min(initial=0.0) < 0 or dense.max(initial=1.0) > 1:
            raise ValueError("similarities must lie in [0, 1]")
        ids = tuple(range(1, n + 1)) if ids is None else tuple(ids)
        return cls(ids, dense[np.triu_indices(n, k=1)].copy())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["", *self.ids])
        for i, ident in enumerate(self.ids):
            w.writerow([ident, *(repr(float(v)) for v in self.row(i))])
        return buf.getvalue()


def jaccard_similarity(a: Iterable[int], b: Iterable[int]) -> float:
    a, b = frozenset(a), frozenset(b)
    if not a or not b:
        raise ValueError("Jaccard similarity of an empty page set is undefined")
    return len(a & b) / len(a | b)


def _incidence(data: SessionDataset) -> np.ndarray:
    """0/1 matrix of which categories each session visited (n by categories)."""
    n, k = len(data), data.num_categories
    lengths = np.fromiter((len(s.visits) for s in data.sessions), dtype=np.int64, count=n)
    codes = np.fromiter(itertools.chain.from_iterable(s.visits for s in data.sessions),
                        dtype=np.int64, count=int(lengths.sum()))
    inc = np.zeros((n, k), dtype=np.int8)
    inc[np.repeat(np.arange(n), lengths), codes - 1] = 1
    return inc


def _unique_rows(inc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct page sets (as 0/1 rows) and each session's index into them."""
    k = inc.shape[1]
    if k > 62:
        uniq, inverse = np.unique(inc, axis=0, return_inverse=True)
        return uniq, inverse.reshape(-1)
    bits = np.int64(1) << np.arange(k, dtype=np.int64)
    masks = inc.astype(np.int64) @ bits
    umasks, inverse = np.unique(masks, return_inverse=True)
    uniq = ((umasks[:, None] & bits[None, :]) != 0).astype(np.int8)
    return uniq, inverse.reshape(-1)


def _jaccard_rows(inc: np.ndarray, sizes: np.ndarray, lo: int, hi: int, offset: int) -> np.ndarray:
    """Jaccard of rows lo..hi-1 against rows offset..end."""
    inter = inc[lo:hi] @ inc[offset:].T
    union = sizes[lo:hi, None] + sizes[None, offset:] - inter
    return inter / union


def _row_blocks(n: int, n_blocks: int) -> list[tuple[int, int]]:
    n_blocks = max(1, min(n_blocks, n))
    edges = np.linspace(0, n, n_blocks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def similarity_matrix(data: SessionDataset, n_jobs: int = 1) -> SimilarityMatrix:
    """Pairwise Jaccard similarity of distinct-page sets for every session pair.

    Rows are split into blocks that write disjoint slices of the condensed
    vector, so the result does not depend on ``n_jobs``.
    """
    n = len(data)
    if n == 0:
        raise ValueError("dataset is empty")
    inc = _incidence(data).astype(np.int32)
    sizes = inc.sum(axis=1)
    out = np.empty(n * (n - 1) // 2)

    def fill(block):
        lo, hi = block
        for i in range(lo, hi):
            if i + 1 >= n:
                continue
            start = n * i - i * (i + 1) // 2
            inter = inc[i + 1:] @ inc[i]
            out[start:start + n - i - 1] = inter / (sizes[i] + sizes[i + 1:] - inter)

    blocks = _row_blocks(n, 4 * n_jobs if n_jobs > 1 else 1)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(fill, blocks))
    else:
        for b in blocks:
            fill(b)
    return SimilarityMatrix(data.ids, out)


@dataclass(frozen=True)
class ToleranceRelation:
    threshold: float
    ids: tuple[Hashable, ...]
    classes: tuple[frozenset, ...]

    def __getitem__(self, ident) -> frozenset:
        return self.classes[self.ids.index(ident)]

    def as_dict(self) -> dict:
        return {ident: cls for ident, cls in zip(self.ids, self.classes)}

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "upper_approximations": {
                str(ident): sorted(cls) for ident, cls in zip(self.ids, self.classes)
            },
        }


def _check_threshold(p: float) -> float:
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"threshold p must lie in (0, 1], got {p}")
    return p


def upper_approximation(sim: SimilarityMatrix, p: float = DEFAULT_THRESHOLD) -> ToleranceRelation:
    """R(T_i) = every item whose similarity to T_i is at least ``p``."""
    p = _check_threshold(p)
    ids = sim.ids
    classes = []
    for i in range(sim.n):
        hits = np.flatnonzero(sim.row(i) >= p)
        classes.append(frozenset(ids[j] for j in hits))
    return ToleranceRelation(p, ids, tuple(classes))


def merge_tolerance_classes(rel: ToleranceRelation) -> ClusterSet:
    """Merge overlapping tolerance classes until the partition is stable."""
    index = {ident: k for k, ident in enumerate(rel.ids)}
    uf = UnionFind(len(rel.ids))
    for k, cls in enumerate(rel.classes):
        for other in cls:
            uf.union(k, index[other])
    return ClusterSet(tuple(tuple(rel.ids[k] for k in g) for g in uf.groups()))


def threshold_components(data: SessionDataset, p: float = DEFAULT_THRESHOLD,
                         block_size: int = 2048) -> ClusterSet:
    """Same partition as ``merge_tolerance_classes`` without the n-by-n matrix.

    Sessions sharing a page set are collapsed first; the distinct sets are
    then compared block by block.
    """
    p = _check_threshold(p)
    if len(data) == 0:
        raise ValueError("dataset is empty")
    uniq, inverse = _unique_rows(_incidence(data))
    uniq = uniq.astype(float)  # BLAS matmul; counts stay exact
    m = len(uniq)
    sizes = uniq.sum(axis=1)
    uf = UnionFind(m)
    comp = np.arange(m)
    block_size = max(1, min(block_size, 4_000_000 // m))
    for lo in range(0, m, block_size):
        hi = min(lo + block_size, m)
        sims = _jaccard_rows(uniq, sizes, lo, hi, lo)
        rows, cols = np.nonzero(sims >= p)
        a, b = comp[rows + lo], comp[cols + lo]
        cross = a != b
        if not cross.any():
            continue
        # only distinct component pairs need a union
        for key in np.unique(a[cross] * m + b[cross]).tolist():
            uf.union(key // m, key % m)
        comp = np.fromiter((uf.find(x) for x in comp.tolist()), dtype=np.int64, count=m)
    root = comp.tolist()
    groups: dict[int, list] = {}
    for s, u in zip(data.sessions, inverse.tolist()):
        groups.setdefault(root[u], []).append(s.id)
    return ClusterSet(tuple(tuple(g) for g in groups.values()))


def tolerance_clusters(data: SessionDataset, p: float = DEFAULT_THRESHOLD,
                       n_jobs: int = 1) -> tuple[ToleranceRelation, ClusterSet]:
    """Similarity matrix, upper approximations, and merged clusters in one call."""
    rel = upper_approximation(similarity_matrix(data, n_jobs), p)
    return rel, merge_tolerance_classes(rel)
