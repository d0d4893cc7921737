"""Diagnostics for labels the hierarchy fails to place well.

A label is "placed" at the first merge that puts it into a cluster with at
least ``m`` members. Labels placed late (or never joining anything bigger than
a pair until the end) are the under-identified ones. Ranking uses the merge
step rather than the height, so reports are comparable across linkages.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from hiertree.cooccur import CooccurrenceStats
from hiertree.errors import ValidationError
from hiertree.hclust import Dendrogram, cut


@dataclass(frozen=True)
class LabelDiagnostics:
    label: str
    appearances: int
    top1: int | None
    merge_step: int
    merge_height: float


@dataclass(frozen=True)
class DiagnosticsReport:
    m: int
    q: int
    labels: tuple[LabelDiagnostics, ...]
    well_placed: tuple[str, ...]
    late: tuple[str, ...]
    well_placed_median: float
    late_median: float
    overall_median: float

    def to_json(self) -> str:
        from hiertree import __version__

        doc = {
            "hiertree_version": __version__,
            "m": self.m,
            "q": self.q,
            "medians": {
                "well_placed": self.well_placed_median,
                "late": self.late_median,
                "overall": self.overall_median,
            },
            "well_placed": list(self.well_placed),
            "late": list(self.late),
            "labels": [
                {
                    "label": d.label,
                    "appearances": d.appearances,
                    "top1": d.top1,
                    "merge_step": d.merge_step,
                    "merge_height": d.merge_height,
                }
                for d in self.labels
            ],
        }
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _align(t: Dendrogram, stats: CooccurrenceStats) -> np.ndarray:
    if t.labels is None:
        if stats.n_labels != t.n_leaves:
            raise ValidationError("unlabelled tree and counts disagree on the number of labels")
        return np.arange(t.n_leaves)
    index = {name: i for i, name in enumerate(stats.labels)}
    missing = [name for name in t.labels if name not in index]
    if missing:
        raise ValidationError(f"tree labels missing from the counts: {missing[:10]}")
    return np.array([index[name] for name in t.labels])


def placement_steps(t: Dendrogram, m: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based merge index (and height) at which each leaf first sits in a cluster of size >= m."""
    n = t.n_leaves
    step = np.full(n, n - 1, dtype=np.int64)
    height = np.zeros(n)
    members: list[list[int] | None] = [[i] for i in range(n)]
    for j, mg in enumerate(t.merges):
        joined = members[mg.left] + members[mg.right]
        if mg.size >= m:
            for child in (mg.left, mg.right):
                if t.size_of(child) < m:
                    for leaf in members[child]:
                        step[leaf] = j
                        height[leaf] = mg.height
        members.append(joined if mg.size < m else [])
        members[mg.left] = members[mg.right] = None
    return step, height


def late_merger_report(t: Dendrogram, stats: CooccurrenceStats, m: int = 3, q: int = 50) -> DiagnosticsReport:
    """Rank labels from earliest to latest placement and report the two extremes.

    Labels that never occur in any prediction set always rank last.
    """
    n = t.n_leaves
    if not 2 <= m <= n:
        raise ValidationError(f"m must be in 2..{n}, got {m}")
    if not 1 <= q <= n:
        raise ValidationError(f"q must be in 1..{n}, got {q}")
    rows = _align(t, stats)
    appearances = stats.single[rows]
    top1 = stats.top1[rows] if stats.top1 is not None else None
    step, height = placement_steps(t, m)
    names = t.leaf_names()

    order = sorted(range(n), key=lambda i: (appearances[i] == 0, step[i], i))
    diags = tuple(
        LabelDiagnostics(
            names[i],
            int(appearances[i]),
            int(top1[i]) if top1 is not None else None,
            int(step[i]) + 1,
            float(height[i]),
        )
        for i in order
    )
    early = order[:q]
    late = order[::-1][:q]
    return DiagnosticsReport(
        m,
        q,
        diags,
        tuple(names[i] for i in early),
        tuple(names[i] for i in late),
        float(np.median(appearances[early])),
        float(np.median(appearances[late])),
        float(np.median(appearances)),
    )


def balance_entropy(sizes: Sequence[int]) -> float:
    """Shannon entropy of the cluster-size distribution divided by log(k); 1.0 for k = 1."""
    sizes = np.asarray([s for s in sizes if s > 0], dtype=float)
    k = len(sizes)
    if k == 0:
        raise ValidationError("no clusters")
    if k == 1:
        return 1.0
    p = sizes / sizes.sum()
    return float(-(p * np.log(p)).sum() / math.log(k))


@dataclass(frozen=True)
class ClusterProfile:
    k: int
    sizes: tuple[int, ...]
    members: tuple[tuple[str, ...], ...]
    balance: float

    def to_json(self) -> str:
        from hiertree import __version__

        doc = {
            "hiertree_version": __version__,
            "k": self.k,
            "balance": self.balance,
            "clusters": [{"size": s, "members": list(mem)} for s, mem in zip(self.sizes, self.members)],
        }
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def cluster_profile(t: Dendrogram, k: int, registry=None) -> ClusterProfile:
    names = tuple(getattr(registry, "names", registry)) if registry is not None else t.leaf_names()
    if len(names) != t.n_leaves:
        raise ValidationError(f"{len(names)} names for a tree with {t.n_leaves} leaves")
    clusters = cut(t, k).clusters
    sizes = tuple(len(c) for c in clusters)
    return ClusterProfile(
        int(k),
        sizes,
        tuple(tuple(names[i] for i in c) for c in clusters),
        balance_entropy(sizes),
    )
