"""External validity scores comparing a clustering with reference classes."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Collection, Hashable

from .tolerance_cluster import ClusterSet

__all__ = [
    "EvalReport",
    "precision",
    "recall",
    "f_pair",
    "purity",
    "inverse_purity",
    "purity_f",
    "evaluate",
]


def precision(c: Collection[Hashable], l: Collection[Hashable]) -> float:
    """Fraction of cluster ``c`` that belongs to class ``l``."""
    c, l = set(c), set(l)
    if not c:
        raise ValueError("precision of an empty cluster is undefined")
    return len(c & l) / len(c)


def recall(c: Collection[Hashable], l: Collection[Hashable]) -> float:
    """Fraction of class ``l`` captured by cluster ``c``."""
    if not l:
        raise ValueError("recall against an empty class is undefined")
    return precision(l, c)


def _f(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def f_pair(c: Collection[Hashable], l: Collection[Hashable]) -> float:
    """Harmonic mean of precision and recall; 0 for disjoint sets."""
    return _f(precision(c, l), recall(c, l))


def _universe(clusters: ClusterSet, labels: ClusterSet) -> int:
    a, b = clusters.items, labels.items
    if a != b:
        only_c = sorted(a - b, key=repr)
        only_l = sorted(b - a, key=repr)
        raise ValueError(
            f"clusters and labels cover different items: only in clusters {only_c[:10]}, "
            f"only in labels {only_l[:10]}")
    if not a:
        raise ValueError("no items to evaluate")
    return len(a)


def _overlaps(clusters: ClusterSet, labels: ClusterSet) -> list[list[int]]:
    """Contingency table: rows are clusters, columns are label classes."""
    where = labels.assignments()
    table = [[0] * len(labels) for _ in clusters.clusters]
    for row, c in zip(table, clusters.clusters):
        for item in c:
            row[where[item] - 1] += 1
    return table


def purity(clusters: ClusterSet, labels: ClusterSet) -> float:
    """Size-weighted average over clusters of their best precision."""
    n = _universe(clusters, labels)
    return sum(max(row) for row in _overlaps(clusters, labels)) / n


def inverse_purity(clusters: ClusterSet, labels: ClusterSet) -> float:
    """Size-weighted average over label classes of their best recall."""
    return purity(labels, clusters)


def purity_f(clusters: ClusterSet, labels: ClusterSet) -> float:
    """Size-weighted average over label classes of the best F against any cluster."""
    n = _universe(clusters, labels)
    table = _overlaps(clusters, labels)
    total = 0.0
    for j, l in enumerate(labels.clusters):
        best = 0.0
        for i, c in enumerate(clusters.clusters):
            inter = table[i][j]
            if inter:
                best = max(best, _f(inter / len(c), inter / len(l)))
        total += len(l) * best
    return total / n


@dataclass
class EvalReport:
    purity: float
    inverse_purity: float
    purity_f: float
    n: int
    per_pair: list[dict] | None = field(default=None)

    CSV_FIELDS = ("purity", "inverse_purity", "purity_f", "n")

    def to_dict(self) -> dict:
        out = {
            "purity": self.purity,
            "inverse_purity": self.inverse_purity,
            "purity_f": self.purity_f,
            "n": self.n,
        }
        if self.per_pair is not None:
            out["per_pair"] = self.per_pair
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_FIELDS)
        w.writerow([repr(self.purity), repr(self.inverse_purity), repr(self.purity_f), self.n])
        return buf.getvalue()


def evaluate(clusters: ClusterSet, labels: ClusterSet, per_pair: bool = False) -> EvalReport:
    n = _universe(clusters, labels)
    pairs = None
    if per_pair:
        pairs = []
        for i, c in enumerate(clusters.clusters, start=1):
            for j, l in enumerate(labels.clusters, start=1):
                p, r = precision(c, l), recall(c, l)
                pairs.append({"cluster": i, "label": j, "precision": p,
                              "recall": r, "f": _f(p, r)})
    return EvalReport(purity(clusters, labels), inverse_purity(clusters, labels),
                      purity_f(clusters, labels), n, pairs)
