"""Accuracy of a classifier measured at every level of a label hierarchy.

A record counts as correct at cut ``k`` when its predicted label lands in the
same cluster as its ground-truth label.
"""

from __future__ import annotations

import io
import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from hiertree.errors import ValidationError
from hiertree.hclust import Dendrogram, cut
from hiertree.ingest import PredictionDataset


@dataclass(frozen=True)
class EvalSet:
    """Ground-truth label ids paired with the classifier's ranked predictions.

    ``preds[r][0]`` is record r's top-1 prediction; further entries only matter
    for the top-m extension.
    """

    truth: tuple[int, ...]
    preds: tuple[tuple[int, ...], ...]
    video_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.truth:
            raise ValidationError("evaluation set is empty")
        if len(self.truth) != len(self.preds):
            raise ValidationError("truth and prediction lists differ in length")
        if any(len(p) == 0 for p in self.preds):
            raise ValidationError("every evaluation record needs at least one prediction")

    def __len__(self):
        return len(self.truth)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]]) -> EvalSet:
        pairs = list(pairs)
        return cls(tuple(int(t) for t, _ in pairs), tuple((int(p),) for _, p in pairs))

    @classmethod
    def from_dataset(cls, ds: PredictionDataset, labels: Sequence[str] | None = None) -> EvalSet:
        """Build from parsed records, mapping label names onto ``labels`` (a tree's leaves) if given."""
        names = ds.registry.names
        if labels is None:
            remap = list(range(len(names)))
        else:
            index = {name: i for i, name in enumerate(labels)}
            remap = [index.get(name, -1) for name in names]
        truth, preds, vids = [], [], []
        for rec in ds.records:
            if rec.truth is None:
                raise ValidationError(f"evaluation record {rec.video_id!r} has no ground truth")
            ids = [remap[rec.truth]] + [remap[lab] for lab in rec.labels]
            if min(ids) < 0:
                bad = [names[x] for x in [rec.truth, *rec.labels] if remap[x] < 0]
                raise ValidationError(f"evaluation record {rec.video_id!r} uses labels not in the tree: {bad}")
            truth.append(ids[0])
            preds.append(tuple(ids[1:]))
            vids.append(rec.video_id)
        return cls(tuple(truth), tuple(preds), tuple(vids))

    def check_labels(self, n_labels: int) -> None:
        for t, p in zip(self.truth, self.preds):
            if not 0 <= t < n_labels or not all(0 <= x < n_labels for x in p):
                raise ValidationError(f"evaluation label id outside 0..{n_labels - 1}")


@dataclass(frozen=True)
class AccuracyCurve:
    points: tuple[tuple[int, float], ...]
    n_leaves: int

    @property
    def ks(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.points)

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([a for _, a in self.points])

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("k,accuracy,n_clusters_avg_size\n")
        for k, acc in self.points:
            out.write(f"{k},{acc:.12g},{self.n_leaves / k:.12g}\n")
        return out.getvalue()


def _check_k(t: Dendrogram, k) -> int:
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= t.n_leaves:
        raise ValidationError(f"k must be an integer in 1..{t.n_leaves}, got {k!r}")
    return int(k)


def level_accuracy(t: Dendrogram, e: EvalSet, k: int, *, topm: int = 1) -> float:
    """Fraction of records whose truth shares a cluster of ``cut(t, k)`` with the prediction.

    ``topm > 1`` credits a record if any of its first ``topm`` predictions
    co-clusters with the truth. That is an extension; the default is top-1.
    """
    k = _check_k(t, k)
    e.check_labels(t.n_leaves)
    if topm < 1:
        raise ValidationError("topm must be >= 1")
    member = cut(t, k).member
    hits = sum(
        any(member[p] == member[truth] for p in preds[:topm])
        for truth, preds in zip(e.truth, e.preds)
    )
    return hits / len(e)


def accuracy_curve(t: Dendrogram, e: EvalSet, ks: Iterable[int] | None = None, *, topm: int = 1) -> AccuracyCurve:
    """Level accuracy at each k in ``ks`` (default: every k from 1 to N), in one pass over the merges."""
    n = t.n_leaves
    ks = list(range(1, n + 1)) if ks is None else [_check_k(t, k) for k in ks]
    if not ks:
        raise ValidationError("no k values requested")
    e.check_labels(n)
    if topm < 1:
        raise ValidationError("topm must be >= 1")
    steps = t.join_steps()
    # merge index at which each record first becomes correct (-1: correct at every level)
    first_ok = np.array(
        [min(steps[truth, p] for p in preds[:topm]) for truth, preds in zip(e.truth, e.preds)],
        dtype=np.int64,
    )
    first_ok.sort()
    total = len(e)
    points = []
    for k in ks:
        # the cut at k keeps merges 0..n-k-1
        hits = int(np.searchsorted(first_ok, n - k, side="left"))
        points.append((k, hits / total))
    return AccuracyCurve(tuple(points), n)


@dataclass(frozen=True)
class ComparisonReport:
    methods: tuple[str, ...]
    ks: tuple[int, ...]
    table: np.ndarray
    auc: tuple[float, ...]
    best: tuple[tuple[str, ...], ...]

    @property
    def ranking(self) -> list[tuple[str, float]]:
        order = sorted(range(len(self.methods)), key=lambda i: (-self.auc[i], self.methods[i]))
        return [(self.methods[i], self.auc[i]) for i in order]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join(["k", *self.methods, "best"]) + "\n")
        for row, k, best in zip(self.table, self.ks, self.best):
            out.write(",".join([str(k), *(f"{x:.12g}" for x in row), "|".join(best)]) + "\n")
        return out.getvalue()

    def to_json(self) -> str:
        from hiertree import __version__

        doc = {
            "hiertree_version": __version__,
            "ranking": [{"method": m, "auc": a} for m, a in self.ranking],
            "per_k": [
                {"k": k, "best": list(best), "accuracy": float(row.max())}
                for k, row, best in zip(self.ks, self.table, self.best)
            ],
        }
        return json.dumps(doc, indent=2) + "\n"


def _method_name(key) -> str:
    return "-".join(key) if isinstance(key, tuple) else str(key)


def _area(ks: np.ndarray, acc: np.ndarray) -> float:
    if len(ks) == 1:
        return float(acc[0])
    return float(np.trapezoid(acc, ks) / (ks[-1] - ks[0]))


def compare_methods(curves: Mapping[object, AccuracyCurve]) -> ComparisonReport:
    """Rank hierarchies by normalised area under their accuracy-vs-k curves.

    Keys are usually ``(measure, linkage)`` tuples; they are rendered as
    ``"measure-linkage"``. Every curve must use the same k grid.
    """
    if not curves:
        raise ValidationError("no curves to compare")
    methods = tuple(_method_name(key) for key in curves)
    if len(set(methods)) != len(methods):
        raise ValidationError("duplicate method names")
    grids = {c.ks for c in curves.values()}
    if len(grids) != 1:
        raise ValidationError("curves were evaluated on different k grids")
    ks = next(iter(grids))
    table = np.column_stack([c.accuracies for c in curves.values()])
    order = np.argsort(ks, kind="stable")
    ks_sorted = np.asarray(ks, dtype=float)[order]
    auc = tuple(_area(ks_sorted, table[order, i]) for i in range(len(methods)))
    best = tuple(tuple(m for m, x in zip(methods, row) if x == row.max()) for row in table)
    return ComparisonReport(methods, ks, table, auc, best)
