"""Session vectorization and entropy based feature weights.

Probabilities are plain relative frequencies and logarithms are base 2.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .session_ingest import Session, SessionDataset

__all__ = [
    "WEIGHT_METHODS",
    "FeatureWeights",
    "distinct_pages",
    "frequency_vector",
    "frequency_matrix",
    "entropy",
    "information_gain",
    "split_info",
    "gain_ratio",
    "discretize",
    "compute_feature_weights",
]

WEIGHT_METHODS = ("uniform", "info_gain", "gain_ratio")


@dataclass(frozen=True)
class FeatureWeights:
    weights: tuple[float, ...]
    method: str = "uniform"

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.method not in WEIGHT_METHODS:
            raise ValueError(f"unknown weighting method {self.method!r}")
        if any(not w >= 0 for w in self.weights):
            raise ValueError("feature weights must be non-negative")

    @classmethod
    def uniform(cls, n_features: int) -> "FeatureWeights":
        return cls((1.0,) * n_features, "uniform")

    def __len__(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def to_dict(self) -> dict:
        return {"method": self.method, "weights": list(self.weights)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "FeatureWeights":
        return cls(tuple(obj["weights"]), obj["method"])

    @classmethod
    def from_json(cls, text: str) -> "FeatureWeights":
        return cls.from_dict(json.loads(text))


def distinct_pages(s: Session | Sequence[int]) -> frozenset[int]:
    visits = s.visits if isinstance(s, Session) else s
    return frozenset(visits)


def frequency_vector(s: Session | Sequence[int], num_categories: int,
                     normalized: bool = False) -> np.ndarray:
    """Per-category visit counts of one session (code ``c`` lands in slot ``c-1``)."""
    visits = s.visits if isinstance(s, Session) else s
    vec = np.bincount(np.asarray(visits, dtype=np.int64) - 1,
                      minlength=num_categories).astype(float)
    if len(vec) != num_categories:
        raise ValueError(f"category code above {num_categories}")
    if normalized:
        vec /= len(visits)
    return vec


def frequency_matrix(data: SessionDataset, normalized: bool = True) -> np.ndarray:
    """Stack ``frequency_vector`` for every session into an (n, categories) array."""
    k = data.num_categories
    out = np.zeros((len(data), k))
    for i, s in enumerate(data.sessions):
        out[i] = frequency_vector(s, k, normalized)
    return out


def _h(probs) -> float:
    # 0 * log2(0) taken as 0
    return -math.fsum(p * math.log2(p) for p in probs if p > 0)


def entropy(dist: Sequence[float]) -> float:
    """Shannon entropy in bits of a discrete probability distribution."""
    dist = [float(p) for p in dist]
    if not dist:
        raise ValueError("empty distribution")
    if any(p < 0 or math.isnan(p) for p in dist):
        raise ValueError("probabilities must be non-negative")
    if abs(math.fsum(dist) - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {math.fsum(dist)}, not 1")
    return max(_h(dist), 0.0)


def _freqs(values: Sequence[Hashable]) -> list[float]:
    n = len(values)
    return [c / n for c in Counter(values).values()]


def _conditional_entropy(feature_values, labels) -> float:
    n = len(labels)
    groups: dict = {}
    for v, y in zip(feature_values, labels):
        groups.setdefault(v, []).append(y)
    return math.fsum(len(ys) / n * _h(_freqs(ys)) for ys in groups.values())


def _check_pair(feature_values, labels) -> None:
    if len(feature_values) != len(labels):
        raise ValueError(
            f"{len(feature_values)} feature values but {len(labels)} labels")
    if len(labels) == 0:
        raise ValueError("no items")


def information_gain(feature_values: Sequence[Hashable], labels: Sequence[Hashable]) -> float:
    """Entropy of the labels minus their entropy once the feature value is known."""
    feature_values, labels = list(feature_values), list(labels)
    _check_pair(feature_values, labels)
    gain = _h(_freqs(labels)) - _conditional_entropy(feature_values, labels)
    # clamp rounding residue; the true value is never negative
    return max(gain, 0.0)


def split_info(feature_values: Sequence[Hashable]) -> float:
    feature_values = list(feature_values)
    if not feature_values:
        raise ValueError("no feature values")
    return max(_h(_freqs(feature_values)), 0.0)


def gain_ratio(feature_values: Sequence[Hashable], labels: Sequence[Hashable]) -> float:
    """Information gain normalised by the feature's own entropy.

    A constant feature has zero split info and gets ratio 0.
    """
    feature_values, labels = list(feature_values), list(labels)
    gain = information_gain(feature_values, labels)
    si = split_info(feature_values)
    if si == 0.0:
        return 0.0
    return min(gain / si, 1.0)


def discretize(column, n_bins: int | None = None) -> np.ndarray:
    """Map a numeric column to integer bin ids.

    Columns with at most ``n_bins`` distinct values are kept as they are (the
    usual case for visit counts); otherwise equal-width binning into
    ``n_bins = ceil(log2 n) + 1`` bins is applied.
    """
    col = np.asarray(column, dtype=float)
    n = len(col)
    if n_bins is None:
        n_bins = math.ceil(math.log2(n)) + 1 if n > 1 else 1
    uniq, inverse = np.unique(col, return_inverse=True)
    if len(uniq) <= n_bins:
        return inverse.reshape(-1)
    edges = np.linspace(col.min(), col.max(), n_bins + 1)
    return np.clip(np.digitize(col, edges[1:-1], right=False), 0, n_bins - 1)


def compute_feature_weights(features, labels: Sequence[Hashable] | None = None,
                            method: str = "gain_ratio",
                            n_bins: int | None = None) -> FeatureWeights:
    """One weight per column of ``features`` (n items by d features)."""
    if method not in WEIGHT_METHODS:
        raise ValueError(f"unknown weighting method {method!r}")
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-d array")
    if method == "uniform":
        return FeatureWeights.uniform(X.shape[1])
    if labels is None:
        raise ValueError(f"method {method!r} needs labels")
    labels = list(labels)
    if len(labels) != X.shape[0]:
        raise ValueError(f"{X.shape[0]} rows but {len(labels)} labels")
    score = gain_ratio if method == "gain_ratio" else information_gain
    weights = [score(discretize(X[:, j], n_bins).tolist(), labels)
               for j in range(X.shape[1])]
    return FeatureWeights(tuple(weights), method)
