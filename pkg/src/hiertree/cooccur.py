"""Co-occurrence counts over prediction sets and the similarity/distance matrices built on them.

Every probability here is a ratio of integer counts, so measures are computed
from the counts directly (one rounding per value) instead of chaining
floating-point probabilities.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from hiertree.errors import DegenerateInputError, ValidationError
from hiertree.ingest import PredictionDataset

MEASURES = ("confidence", "lift", "cosine", "kulczynski")
DISTANCE_MEASURES = ("confidence", "lift")
LIFT_NORMS = ("off-diagonal", "include-diagonal")
UNCOVERED_POLICIES = ("error", "drop")


@dataclass(frozen=True)
class CooccurrenceStats:
    """Set count, per-label counts and the symmetric pair-count matrix.

    ``pair`` holds c_ij off the diagonal and c_i on it, so ``pair[i, i] == single[i]``.
    ``top1`` (optional) counts records whose first prediction is the label.
    """

    labels: tuple[str, ...]
    n_sets: int
    single: np.ndarray
    pair: np.ndarray
    top1: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.labels)
        if self.single.shape != (n,) or self.pair.shape != (n, n):
            raise ValidationError("count arrays do not match the number of labels")
        for arr in (self.single, self.pair) + ((self.top1,) if self.top1 is not None else ()):
            arr.setflags(write=False)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def index(self, label: str | int) -> int:
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < self.n_labels:
                raise ValidationError(f"label id {label} out of range")
            return int(label)
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown label {label!r}") from None


@dataclass(frozen=True)
class SimilarityMatrix:
    measure: str
    labels: tuple[str, ...]
    values: np.ndarray


@dataclass(frozen=True)
class DistanceMatrix:
    measure: str
    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        n = len(self.labels)
        if v.shape != (n, n):
            raise ValidationError(f"distance matrix shape {v.shape} does not match {n} labels")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def validate(self) -> None:
        v = self.values
        if not np.all(np.isfinite(v)):
            raise DegenerateInputError("distance matrix contains NaN or infinite entries")
        if not np.array_equal(v, v.T):
            raise ValidationError("distance matrix is not symmetric")
        if np.any(np.diag(v) != 0):
            raise ValidationError("distance matrix diagonal is not zero")
        if v.min() < 0 or v.max() > 1:
            raise ValidationError("distance matrix has entries outside [0, 1]")


# -- counting -----------------------------------------------------------------

def count_cooccurrences(ds: PredictionDataset) -> CooccurrenceStats:
    """Count label and label-pair occurrences over the dataset's prediction sets."""
    n_labels = ds.n_labels
    rows, cols = [], []
    top1 = np.zeros(n_labels, dtype=np.int64)
    for r, rec in enumerate(ds.records):
        labs = rec.labels
        rows.extend([r] * len(labs))
        cols.extend(labs)
        top1[labs[0]] += 1
    data = np.ones(len(rows), dtype=np.int64)
    incidence = sparse.csr_matrix((data, (rows, cols)), shape=(len(ds.records), n_labels))
    pair = np.asarray((incidence.T @ incidence).toarray(), dtype=np.int64)
    single = pair.diagonal().copy()
    return CooccurrenceStats(ds.registry.names, len(ds.records), single, pair, top1)


def merge_stats(parts: Sequence[CooccurrenceStats]) -> CooccurrenceStats:
    """Sum counts from datasets partitioned over the same label universe."""
    if not parts:
        raise ValidationError("nothing to merge")
    labels = parts[0].labels
    if any(p.labels != labels for p in parts):
        raise ValidationError("cannot merge counts over different label universes")
    top1 = None
    if all(p.top1 is not None for p in parts):
        top1 = sum(p.top1 for p in parts[1:]) + parts[0].top1
    return CooccurrenceStats(
        labels,
        sum(p.n_sets for p in parts),
        sum(p.single for p in parts[1:]) + parts[0].single,
        sum(p.pair for p in parts[1:]) + parts[0].pair,
        top1,
    )


def subset_stats(stats: CooccurrenceStats, keep: Sequence[int]) -> CooccurrenceStats:
    keep = np.asarray(keep, dtype=int)
    return CooccurrenceStats(
        tuple(stats.labels[i] for i in keep),
        stats.n_sets,
        stats.single[keep].copy(),
        stats.pair[np.ix_(keep, keep)].copy(),
        stats.top1[keep].copy() if stats.top1 is not None else None,
    )


# -- pairwise measures --------------------------------------------------------

def _marginals(stats, i, j):
    i, j = stats.index(i), stats.index(j)
    ci, cj = int(stats.single[i]), int(stats.single[j])
    return i, j, ci, cj, int(stats.pair[i, j])


def confidence(stats: CooccurrenceStats, i, j) -> float:
    """P(i | j): the fraction of sets containing j that also contain i."""
    i, j, ci, cj, cij = _marginals(stats, i, j)
    if cj == 0:
        raise DegenerateInputError(f"confidence undefined: label {stats.labels[j]!r} occurs in no set")
    return cij / cj


def lift(stats: CooccurrenceStats, i, j) -> float:
    i, j, ci, cj, cij = _marginals(stats, i, j)
    if ci == 0 or cj == 0:
        raise DegenerateInputError("lift undefined: a label occurs in no set")
    return (cij * stats.n_sets) / (ci * cj)


def cosine_similarity(stats: CooccurrenceStats, i, j) -> float:
    """Geometric mean of the two confidences, c_ij / sqrt(c_i * c_j)."""
    i, j, ci, cj, cij = _marginals(stats, i, j)
    if ci == 0 or cj == 0:
        raise DegenerateInputError("cosine undefined: a label occurs in no set")
    return float(cij / np.sqrt(ci * cj))


def kulczynski_similarity(stats: CooccurrenceStats, i, j) -> float:
    i, j, ci, cj, cij = _marginals(stats, i, j)
    if ci == 0 or cj == 0:
        raise DegenerateInputError("Kulczynski undefined: a label occurs in no set")
    return (cij / cj + cij / ci) / 2


def _pair_counts(stats: CooccurrenceStats, laplace: float) -> np.ndarray:
    if laplace < 0:
        raise ValidationError("laplace smoothing must be non-negative")
    if laplace == 0:
        return stats.pair
    pair = stats.pair.astype(float)
    off = ~np.eye(stats.n_labels, dtype=bool)
    pair[off] += laplace
    return pair


def similarity_matrix(stats: CooccurrenceStats, measure: str, *, laplace: float = 0.0) -> SimilarityMatrix:
    """Full N x N matrix of one measure. ``values[i, j]`` is the measure for (i, j)."""
    if measure not in MEASURES:
        raise ValidationError(f"unknown measure {measure!r}; expected one of {MEASURES}")
    c = stats.single
    if np.any(c == 0):
        missing = [stats.labels[i] for i in np.flatnonzero(c == 0)]
        raise DegenerateInputError(f"{measure} undefined for labels that occur in no set: {missing}")
    pair = _pair_counts(stats, laplace)
    if measure == "confidence":
        values = pair / c[None, :]
    elif measure == "lift":
        values = (pair * stats.n_sets) / np.outer(c, c)
    elif measure == "cosine":
        values = pair / np.sqrt(np.outer(c, c))
    else:
        values = (pair / c[None, :] + pair / c[:, None]) / 2
    values = np.asarray(values, dtype=float)
    values.setflags(write=False)
    return SimilarityMatrix(measure, stats.labels, values)


# -- distances ----------------------------------------------------------------

def _covered(stats: CooccurrenceStats, uncovered: str) -> CooccurrenceStats:
    if uncovered not in UNCOVERED_POLICIES:
        raise ValidationError(f"unknown uncovered-label policy {uncovered!r}")
    zero = np.flatnonzero(stats.single == 0)
    if zero.size == 0:
        return stats
    if uncovered == "error":
        names = [stats.labels[i] for i in zero]
        raise DegenerateInputError(
            f"{len(names)} label(s) occur in no prediction set: {names} "
            "(add data covering them or drop them with --drop-uncovered)"
        )
    keep = np.flatnonzero(stats.single > 0)
    if keep.size < 2:
        raise DegenerateInputError("fewer than two labels remain after dropping uncovered labels")
    return subset_stats(stats, keep)


def confidence_distance(
    stats: CooccurrenceStats, *, laplace: float = 0.0, uncovered: str = "error"
) -> DistanceMatrix:
    """1 minus the geometric mean of the two confidences; zero diagonal."""
    stats = _covered(stats, uncovered)
    pair = _pair_counts(stats, laplace)
    root = np.sqrt(np.outer(stats.single, stats.single))
    # (root - c_ij) / root equals 1 - cosine without the cancellation near cosine = 1
    d = np.clip((root - pair) / root, 0.0, 1.0)
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix("confidence", stats.labels, d)


def lift_distance(
    stats: CooccurrenceStats,
    *,
    norm: str = "off-diagonal",
    laplace: float = 0.0,
    uncovered: str = "error",
) -> DistanceMatrix:
    """Min-max normalised lift turned into a distance in [0, 1].

    The min and max are taken over off-diagonal pairs by default; ``norm=
    "include-diagonal"`` also admits the self-lifts n / c_i.
    """
    if norm not in LIFT_NORMS:
        raise ValidationError(f"unknown lift normalisation {norm!r}; expected one of {LIFT_NORMS}")
    stats = _covered(stats, uncovered)
    lifts = similarity_matrix(stats, "lift", laplace=laplace).values
    if norm == "off-diagonal":
        domain = lifts[~np.eye(stats.n_labels, dtype=bool)]
    else:
        domain = lifts.ravel()
    lo, hi = domain.min(), domain.max()
    if not hi > lo:
        raise DegenerateInputError("all lift values are equal; min-max normalisation is undefined")
    d = np.clip(1.0 - (lifts - lo) / (hi - lo), 0.0, 1.0)
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix("lift", stats.labels, d)


def distance_matrix(stats: CooccurrenceStats, measure: str, **options) -> DistanceMatrix:
    if measure == "confidence":
        options.pop("norm", None)
        return confidence_distance(stats, **options)
    if measure == "lift":
        return lift_distance(stats, **options)
    raise ValidationError(f"no distance defined for measure {measure!r}; expected one of {DISTANCE_MEASURES}")
