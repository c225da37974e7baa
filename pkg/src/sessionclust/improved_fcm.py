"""Fuzzy c-means with entropy seeded centers and thresholded center updates.

The loop differs from textbook FCM in two places:

* the number of clusters is not an input; ``entropy_init`` picks low-entropy
  data points as centers until every point is covered;
* a center is recomputed as the plain mean of the points whose largest
  membership falls on it *and* is at least ``alpha``.  Points below the
  threshold (ambiguous or noisy ones) do not move any center.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .feature_space import FeatureWeights
from .tolerance_cluster import ClusterSet, ToleranceRelation, merge_tolerance_classes

__all__ = [
    "FcmConfig",
    "FcmResult",
    "weighted_distance",
    "pairwise_distances",
    "entropy_init",
    "update_memberships",
    "update_centers_thresholded",
    "objective",
    "run_fcm",
    "harden",
    "merge_clusters",
]


@dataclass(frozen=True)
class FcmConfig:
    """Parameters of ``run_fcm``.

    ``seed`` is carried for provenance only: every tie in the algorithm is
    broken deterministically, so no random draws are made.
    """

    alpha: float = 0.5
    m: float = 2.0
    max_iter: int = 300
    epsilon: float = 1e-6
    seed: int = 42
    init_beta: float = 0.5
    weights: FeatureWeights | None = None
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.m > 1.0:
            raise ValueError(f"fuzzifier m must exceed 1, got {self.m}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")
        if not 0.0 < self.init_beta < 1.0:
            raise ValueError(f"init_beta must lie in (0, 1), got {self.init_beta}")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be at least 1")


@dataclass
class FcmResult:
    centers: np.ndarray
    memberships: np.ndarray
    iterations: int
    converged: bool
    objective_trace: list[float] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return self.centers.shape[0]

    def to_dict(self, include_memberships: bool = True) -> dict:
        out = {
            "centers": self.centers.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "objective_trace": list(self.objective_trace),
        }
        if include_memberships:
            out["memberships"] = self.memberships.tolist()
        return out

    def to_json(self, include_memberships: bool = True) -> str:
        return json.dumps(self.to_dict(include_memberships))


def _weight_array(w, dim: int) -> np.ndarray:
    if w is None:
        return np.ones(dim)
    arr = w.as_array() if isinstance(w, FeatureWeights) else np.asarray(w, dtype=float)
    if arr.shape != (dim,):
        raise ValueError(f"{arr.shape[0] if arr.ndim else 0} weights for {dim} features")
    return arr


def weighted_distance(x, c, w=None) -> float:
    """``sqrt(sum_i w_i (x_i - c_i)^2)``; plain Euclidean when ``w`` is None."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    if x.shape != c.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {c.shape}")
    wa = _weight_array(w, x.shape[-1])
    return float(np.sqrt(np.sum(wa * (x - c) ** 2)))


def pairwise_distances(a, b, w=None, n_jobs: int = 1) -> np.ndarray:
    """Weighted Euclidean distance between every row of ``a`` and every row of ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    sw = np.sqrt(_weight_array(w, a.shape[1]))
    a, b = a * sw, b * sw
    out = np.empty((a.shape[0], b.shape[0]))

    def fill(rows):
        lo, hi = rows
        diff = a[lo:hi, None, :] - b[None, :, :]
        out[lo:hi] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    step = max(1, min(a.shape[0], 2_000_000 // max(1, b.shape[0] * a.shape[1])))
    blocks = [(lo, min(lo + step, a.shape[0])) for lo in range(0, a.shape[0], step)]
    if n_jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(fill, blocks))
    else:
        for blk in blocks:
            fill(blk)
    return out


def _binary_entropy_terms(s: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(s > 0, s * np.log2(np.where(s > 0, s, 1.0)), 0.0)
        u = np.where(s < 1, (1 - s) * np.log2(np.where(s < 1, 1 - s, 1.0)), 0.0)
    return -(t + u)


def entropy_init(points, beta: float = 0.5, w=None, n_jobs: int = 1) -> np.ndarray:
    """Pick initial centers among the data points; their count is the output's length.

    Similarity between points is ``1 - d / d_max`` with ``d_max`` the largest
    pairwise distance in the data.  Each round selects the remaining point
    whose summed binary entropy against the other remaining points is
    smallest, makes it a center, and removes it together with every remaining
    point at similarity ``>= beta`` to it.  Rounds repeat until no point is
    left.

    Duplicate points are collapsed and counted, and each entropy sum is taken
    over sorted terms, so the selected centers do not depend on input order.
    Ties go to the lexicographically smallest vector.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("entropy_init needs a non-empty 2-d array of points")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    uniq, counts = np.unique(X, axis=0, return_counts=True)
    if len(uniq) == 1:
        return uniq.copy()

    dist = pairwise_distances(uniq, uniq, w, n_jobs)
    d_max = dist.max()
    if d_max == 0.0:
        # only zero-weight coordinates differ
        return uniq[:1].copy()
    sim = 1.0 - dist / d_max
    terms = _binary_entropy_terms(sim) * counts[None, :]

    remaining = np.ones(len(uniq), dtype=bool)
    chosen = []
    while remaining.any():
        idx = np.flatnonzero(remaining)
        sub = np.sort(terms[np.ix_(idx, idx)], axis=1)
        ent = sub.sum(axis=1)
        # uniq is lexicographically sorted, so the first minimum is the smallest vector
        best = idx[int(np.argmin(ent))]
        chosen.append(best)
        remaining &= ~(sim[best] >= beta)
        remaining[best] = False
    return uniq[chosen].copy()


def update_memberships(points, centers, m: float = 2.0, w=None, n_jobs: int = 1) -> np.ndarray:
    """Standard FCM membership update.

    ``u_ij = 1 / sum_k (d_ij / d_ik)^(2/(m-1))``.  A point sitting exactly on
    one or more centers splits its membership evenly over those centers.
    """
    if not m > 1.0:
        raise ValueError(f"fuzzifier m must exceed 1, got {m}")
    d = pairwise_distances(points, centers, w, n_jobs)
    n, c = d.shape
    u = np.empty((n, c))
    zero = d == 0.0
    hit = zero.any(axis=1)
    if hit.any():
        z = zero[hit].astype(float)
        u[hit] = z / z.sum(axis=1, keepdims=True)
    rest = ~hit
    if rest.any():
        dr = d[rest]
        # scale by the row minimum so the power never overflows
        r = (dr.min(axis=1, keepdims=True) / dr) ** (2.0 / (m - 1.0))
        u[rest] = r / r.sum(axis=1, keepdims=True)
    return u


def update_centers_thresholded(points, memberships, previous, alpha: float = 0.5) -> np.ndarray:
    """Mean of the points whose top membership is in cluster k and reaches ``alpha``.

    A cluster with no qualifying point keeps its previous center.
    """
    X = np.asarray(points, dtype=float)
    U = np.asarray(memberships, dtype=float)
    prev = np.asarray(previous, dtype=float)
    if U.shape != (X.shape[0], prev.shape[0]):
        raise ValueError("membership matrix shape does not match points and centers")
    owner = np.argmax(U, axis=1)
    top = U[np.arange(len(U)), owner]
    keep = top >= alpha
    new = prev.copy()
    for k in range(prev.shape[0]):
        sel = keep & (owner == k)
        if sel.any():
            new[k] = X[sel].mean(axis=0)
    return new


def objective(points, centers, memberships, m: float = 2.0, w=None) -> float:
    d = pairwise_distances(points, centers, w)
    return float(np.sum(np.asarray(memberships) ** m * d ** 2))


def run_fcm(points, config: FcmConfig | None = None, centers=None) -> FcmResult:
    """Cluster ``points`` (n by d).

    ``centers`` overrides the entropy initialisation when given.
    """
    cfg = config or FcmConfig()
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("run_fcm needs a non-empty 2-d array of points")
    w = cfg.weights
    if centers is None:
        C = entropy_init(X, cfg.init_beta, w, cfg.n_jobs)
    else:
        C = np.array(centers, dtype=float)
    trace: list[float] = []
    converged = False
    it = 0
    while it < cfg.max_iter:
        it += 1
        U = update_memberships(X, C, cfg.m, w, cfg.n_jobs)
        trace.append(objective(X, C, U, cfg.m, w))
        new = update_centers_thresholded(X, U, C, cfg.alpha)
        shift = max(weighted_distance(a, b, w) for a, b in zip(new, C))
        C = new
        if shift < cfg.epsilon:
            converged = True
            break
    U = update_memberships(X, C, cfg.m, w, cfg.n_jobs)
    return FcmResult(C, U, it, converged, trace)


def harden(memberships, ids: Sequence[Hashable] | None = None) -> ClusterSet:
    """Assign each item to its largest membership (ties to the lower index).

    Labels on the returned clusters are the 1-based center indices; centers
    that own no item are dropped.
    """
    U = np.asarray(memberships, dtype=float)
    ids = list(range(1, U.shape[0] + 1)) if ids is None else list(ids)
    owner = np.argmax(U, axis=1)
    groups: dict[int, list] = {}
    for ident, k in zip(ids, owner.tolist()):
        groups.setdefault(k, []).append(ident)
    ks = sorted(groups)
    return ClusterSet(tuple(tuple(groups[k]) for k in ks), tuple(k + 1 for k in ks))


def merge_clusters(points, clusters: ClusterSet, p: float, ids: Sequence[Hashable] | None = None,
                   w=None) -> ClusterSet:
    """Optional post-pass: merge hardened clusters whose centroids are similar.

    Centroid similarity is ``1 - d / d_max`` over the centroids, and clusters
    are joined through the same tolerance merge used for sessions.
    """
    X = np.asarray(points, dtype=float)
    ids = list(range(1, X.shape[0] + 1)) if ids is None else list(ids)
    pos = {ident: i for i, ident in enumerate(ids)}
    cents = np.array([X[[pos[i] for i in c]].mean(axis=0) for c in clusters.clusters])
    d = pairwise_distances(cents, cents, w)
    d_max = d.max()
    sim = np.ones_like(d) if d_max == 0 else 1.0 - d / d_max
    keys = tuple(range(len(cents)))
    rel = ToleranceRelation(p, keys, tuple(frozenset(np.flatnonzero(sim[k] >= p).tolist())
                                           for k in keys))
    merged = merge_tolerance_classes(rel)
    return ClusterSet(tuple(tuple(i for k in g for i in clusters.clusters[k])
                            for g in merged.clusters))
