"""Synthetic prediction logs with a planted label grouping, plus partition agreement scoring.

Labels are split into ``groups`` blocks. Every video of label ``x`` gets a top-k
set holding ``x`` and ``k - 1`` distinct distractors. Each distractor comes from
x's own block with probability ``p_in`` and from the other blocks otherwise,
falling back to the other pool once one runs dry. Within a pool, labels are
drawn in proportion to their video counts, so a label with few videos also
turns up rarely as a distractor.

Randomness comes from numpy's PCG64, one stream per label spawned from
``SeedSequence(seed)``. Output is label-major, video-minor.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from hiertree.errors import ValidationError
from hiertree.ingest import LabelRegistry, PredictionDataset, PredictionRecord


@dataclass(frozen=True)
class PlantedConfig:
    groups: int = 4
    labels_per_group: int = 5
    videos_per_label: int = 50
    k: int = 5
    p_in: float = 0.9
    seed: int = 0
    # probability that the truth is ranked first; otherwise it takes a random lower rank
    p_top1: float = 0.75
    scarce_labels: tuple[int, ...] = ()
    scarcity: int = 10
    video_prefix: str = field(default="")

    def __post_init__(self):
        object.__setattr__(self, "scarce_labels", tuple(int(x) for x in self.scarce_labels))
        if self.groups < 1 or self.labels_per_group < 1:
            raise ValidationError("groups and labels_per_group must be positive")
        if self.n_labels < 2:
            raise ValidationError("need at least two labels in total")
        if self.videos_per_label < 1:
            raise ValidationError("videos_per_label must be >= 1")
        if not 0.5 < self.p_in <= 1.0:
            raise ValidationError(f"p_in must be in (0.5, 1], got {self.p_in}")
        if not 0.0 <= self.p_top1 <= 1.0:
            raise ValidationError(f"p_top1 must be in [0, 1], got {self.p_top1}")
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if self.k > self.n_labels:
            raise ValidationError(f"k={self.k} exceeds the {self.n_labels} available labels")
        if self.scarcity < 1:
            raise ValidationError("scarcity must be >= 1")
        for lab in self.scarce_labels:
            if not 0 <= lab < self.n_labels:
                raise ValidationError(f"scarce label {lab} out of range")

    @property
    def n_labels(self) -> int:
        return self.groups * self.labels_per_group

    def label_name(self, i: int) -> str:
        return f"g{i // self.labels_per_group}_l{i % self.labels_per_group}"

    def video_counts(self) -> np.ndarray:
        counts = np.full(self.n_labels, self.videos_per_label, dtype=np.int64)
        for lab in self.scarce_labels:
            counts[lab] = max(1, self.videos_per_label // self.scarcity)
        return counts


def _draw(rng, pool: list[int], weights: np.ndarray) -> int:
    w = weights[pool].astype(float)
    pick = int(rng.choice(len(pool), p=w / w.sum()))
    return pool.pop(pick)


def generate_planted(cfg: PlantedConfig) -> tuple[PredictionDataset, tuple[int, ...]]:
    """Return the synthetic dataset and the planted group index of every label."""
    n, size = cfg.n_labels, cfg.labels_per_group
    group = tuple(i // size for i in range(n))
    counts = cfg.video_counts()
    streams = np.random.SeedSequence(cfg.seed).spawn(n)
    records = []
    for label in range(n):
        rng = np.random.Generator(np.random.PCG64(streams[label]))
        g = group[label]
        inside_all = [x for x in range(g * size, (g + 1) * size) if x != label]
        outside_all = [x for x in range(n) if group[x] != g]
        for v in range(counts[label]):
            inside, outside = list(inside_all), list(outside_all)
            chosen = []
            for _ in range(cfg.k - 1):
                use_in = rng.random() < cfg.p_in
                if (use_in and inside) or not outside:
                    chosen.append(_draw(rng, inside, counts))
                else:
                    chosen.append(_draw(rng, outside, counts))
            rank = 0 if rng.random() < cfg.p_top1 or cfg.k == 1 else int(rng.integers(1, cfg.k))
            order = chosen[:rank] + [label] + chosen[rank:]
            scores = np.sort(rng.dirichlet(np.ones(cfg.k)))[::-1]
            top = tuple((lab, round(float(s), 6)) for lab, s in zip(order, scores))
            # rounding can create equal neighbours but never an increase
            vid = f"{cfg.video_prefix}s{cfg.seed}_{cfg.label_name(label)}_{v:04d}"
            records.append(PredictionRecord(vid, label, top))
    registry = LabelRegistry(tuple(cfg.label_name(i) for i in range(n)))
    return PredictionDataset(registry, tuple(records), cfg.k), group


def partition_json(cfg: PlantedConfig, group: Sequence[int]) -> str:
    from hiertree import __version__

    blocks: dict[int, list[str]] = {}
    for i, g in enumerate(group):
        blocks.setdefault(g, []).append(cfg.label_name(i))
    doc = {"hiertree_version": __version__, "groups": [blocks[g] for g in sorted(blocks)]}
    return json.dumps(doc, indent=2) + "\n"


def chained_outlier_distances(
    groups: int = 4,
    labels_per_group: int = 5,
    n_outliers: int = 6,
    seed: int = 0,
) -> tuple[np.ndarray, tuple[int, ...]]:
    """Distance matrix with tight planted groups plus a trail of far-off outlier labels.

    Within-group distances lie in [0.05, 0.25] and between-group distances in
    [0.6, 0.7]. Outliers sit at [0.9, 1.0] from everything, so single linkage
    builds one large cluster first and attaches the outliers one at a time at
    the very end. Outliers are assigned to group ``groups`` in the returned
    partition.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    n_core = groups * labels_per_group
    n = n_core + n_outliers
    part = tuple([i // labels_per_group for i in range(n_core)] + [groups] * n_outliers)
    d = np.empty((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if i >= n_core or j >= n_core:
                lo, hi = 0.9, 1.0
            elif part[i] == part[j]:
                lo, hi = 0.05, 0.25
            else:
                lo, hi = 0.6, 0.7
            d[i, j] = d[j, i] = rng.uniform(lo, hi)
    np.fill_diagonal(d, 0.0)
    return d, part


def _as_labels(p) -> tuple[list, list]:
    if isinstance(p, Mapping):
        keys = list(p.keys())
        return keys, [p[key] for key in keys]
    return list(range(len(p))), list(p)


def adjusted_rand_index(p1, p2) -> float:
    """Pair-counting adjusted Rand index between two partitions of the same items.

    Partitions are mappings item -> cluster, or sequences of cluster ids
    indexed by item. Returns 1.0 when both partitions are trivial in the same way.
    """
    keys1, c1 = _as_labels(p1)
    keys2, c2 = _as_labels(p2)
    if isinstance(p1, Mapping) != isinstance(p2, Mapping):
        raise ValidationError("both partitions must be mappings or both sequences")
    if isinstance(p1, Mapping):
        if set(keys1) != set(keys2):
            raise ValidationError("partitions cover different item universes")
        c2 = [p2[key] for key in keys1]
    elif len(c1) != len(c2):
        raise ValidationError(f"partitions cover {len(c1)} and {len(c2)} items")
    n = len(c1)
    if n == 0:
        raise ValidationError("empty partitions")
    _, a = np.unique(np.array(c1, dtype=object).astype(str), return_inverse=True)
    _, b = np.unique(np.array(c2, dtype=object).astype(str), return_inverse=True)
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)

    def pairs(x):
        x = np.asarray(x, dtype=np.int64)
        return int((x * (x - 1) // 2).sum())

    index = pairs(table)
    rows = pairs(table.sum(axis=1))
    cols = pairs(table.sum(axis=0))
    total = n * (n - 1) // 2
    expected = rows * cols / total if total else 0.0
    best = (rows + cols) / 2
    if best == expected:
        return 1.0
    return (index - expected) / (best - expected)
