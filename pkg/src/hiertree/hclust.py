"""Agglomerative clustering of labels from a precomputed distance matrix.

Leaves are clusters ``0..N-1``; the cluster formed by merge ``j`` gets id
``N + j``. Each step merges the closest pair of active clusters. Ties on the
exact minimum go to the pair with the lexicographically smallest
``(min id, max id)``. Inter-cluster distances are maintained with the
Lance-Williams recurrences below, where ``u = s + t`` is the merged cluster::

    single    min(d(s,v), d(t,v))
    complete  max(d(s,v), d(t,v))
    average   (|s| d(s,v) + |t| d(t,v)) / (|s| + |t|)
    weighted  (d(s,v) + d(t,v)) / 2
    ward      sqrt(((|v|+|s|) d(s,v)^2 + (|v|+|t|) d(t,v)^2 - |v| d(s,t)^2) / (|s|+|t|+|v|))

Ward is applied to whatever distances it is given; nothing checks that they
are Euclidean.
"""

from __future__ import annotations

import json
import re
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from hiertree.errors import DegenerateInputError, ValidationError

LINKAGES = ("single", "complete", "average", "weighted", "ward")
EXPORT_FORMATS = ("newick", "json", "dot")


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    n_leaves: int
    merges: tuple[Merge, ...]
    labels: tuple[str, ...] | None = None
    linkage: str | None = None
    measure: str | None = None
    _sizes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n_leaves
        merges = tuple(m if isinstance(m, Merge) else Merge(*m) for m in self.merges)
        object.__setattr__(self, "merges", merges)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != n:
                raise ValidationError(f"{len(self.labels)} labels for a tree with {n} leaves")
        if n < 2:
            raise ValidationError("a dendrogram needs at least two leaves")
        if len(merges) != n - 1:
            raise ValidationError(f"expected {n - 1} merges, got {len(merges)}")
        sizes = np.ones(2 * n - 1, dtype=np.int64)
        used = np.zeros(2 * n - 1, dtype=bool)
        for j, m in enumerate(merges):
            for child in (m.left, m.right):
                if not 0 <= child < n + j:
                    raise ValidationError(f"merge {j} references cluster {child} before it exists")
                if used[child]:
                    raise ValidationError(f"cluster {child} is merged more than once")
                used[child] = True
            if m.left == m.right:
                raise ValidationError(f"merge {j} joins cluster {m.left} with itself")
            if not np.isfinite(m.height) or m.height < 0:
                raise ValidationError(f"merge {j} has invalid height {m.height}")
            sizes[n + j] = sizes[m.left] + sizes[m.right]
            if m.size != sizes[n + j]:
                raise ValidationError(f"merge {j} size {m.size} != {sizes[n + j]}")
        sizes.setflags(write=False)
        object.__setattr__(self, "_sizes", sizes)

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def size_of(self, cluster: int) -> int:
        return int(self._sizes[cluster])

    def leaf_names(self) -> tuple[str, ...]:
        return self.labels if self.labels is not None else tuple(str(i) for i in range(self.n_leaves))

    def members(self) -> list[list[int]]:
        """Sorted leaf ids under every cluster id 0..2N-2."""
        n = self.n_leaves
        out = [[i] for i in range(n)]
        for m in self.merges:
            out.append(sorted(out[m.left] + out[m.right]))
        return out

    def join_steps(self) -> np.ndarray:
        """N x N matrix: index of the merge that first puts leaves i and j together (-1 on the diagonal)."""
        n = self.n_leaves
        steps = np.full((n, n), -1, dtype=np.int64)
        mem = [np.array([i]) for i in range(n)]
        for j, m in enumerate(self.merges):
            a, b = mem[m.left], mem[m.right]
            steps[np.ix_(a, b)] = j
            steps[np.ix_(b, a)] = j
            mem.append(np.concatenate([a, b]))
            mem[m.left] = mem[m.right] = None
        return steps

    def to_json(self) -> str:
        from hiertree import __version__

        head = {
            "hiertree_version": __version__,
            "linkage": self.linkage,
            "measure": self.measure,
            "n_leaves": self.n_leaves,
            "labels": list(self.leaf_names()),
        }
        lines = ["{"]
        lines += [f"  {json.dumps(k)}: {json.dumps(v, ensure_ascii=False)}," for k, v in head.items()]
        lines.append('  "merges": [')
        rows = [f"    {json.dumps([m.left, m.right, float(m.height), m.size])}" for m in self.merges]
        lines.append(",\n".join(rows))
        lines.append("  ]")
        lines.append("}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_json(cls, text: str) -> Dendrogram:
        try:
            obj = json.loads(text)
            merges = tuple(Merge(int(a), int(b), float(h), int(s)) for a, b, h, s in obj["merges"])
            n = int(obj["n_leaves"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"not a dendrogram JSON document: {exc}") from None
        labels = obj.get("labels")
        return cls(n, merges, tuple(labels) if labels is not None else None, obj.get("linkage"), obj.get("measure"))


@dataclass(frozen=True)
class CutAssignment:
    k: int
    member: tuple[int, ...]

    @property
    def clusters(self) -> list[list[int]]:
        out = [[] for _ in range(self.k)]
        for label, c in enumerate(self.member):
            out[c].append(label)
        return out


# -- agglomeration ------------------------------------------------------------

def _lance_williams(linkage, ds, dt, dst, ns, nt, nv):
    if linkage == "single":
        return np.minimum(ds, dt)
    if linkage == "complete":
        return np.maximum(ds, dt)
    if linkage == "average":
        return (ns * ds + nt * dt) / (ns + nt)
    if linkage == "weighted":
        return (ds + dt) / 2
    num = (nv + ns) * ds * ds + (nv + nt) * dt * dt - nv * (dst * dst)
    return np.sqrt(np.maximum(num, 0.0) / (ns + nt + nv))


def agglomerate(D, linkage: str = "single") -> Dendrogram:
    """Cluster the labels of distance matrix ``D`` bottom-up under ``linkage``.

    ``D`` is a :class:`~hiertree.cooccur.DistanceMatrix` or a square array.
    """
    if linkage not in LINKAGES:
        raise ValidationError(f"unknown linkage {linkage!r}; expected one of {LINKAGES}")
    labels = getattr(D, "labels", None)
    measure = getattr(D, "measure", None)
    d = np.array(getattr(D, "values", D), dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValidationError(f"distance matrix must be square, got shape {d.shape}")
    n = d.shape[0]
    if n < 2:
        raise ValidationError("need at least two labels to cluster")
    if not np.all(np.isfinite(d)):
        raise DegenerateInputError("distance matrix contains NaN or infinite entries")
    if not np.array_equal(d, d.T):
        raise ValidationError("distance matrix is not symmetric")
    if d.min() < 0:
        raise ValidationError("distance matrix has negative entries")

    np.fill_diagonal(d, np.inf)
    ids = np.arange(n)
    size = np.ones(n, dtype=float)
    active = np.ones(n, dtype=bool)
    merges = []
    for step in range(n - 1):
        height = d.min()
        hits = np.flatnonzero(d == height)
        rows, cols = np.divmod(hits, n)
        upper = rows < cols
        rows, cols = rows[upper], cols[upper]
        if rows.size > 1:
            lo = np.minimum(ids[rows], ids[cols])
            hi = np.maximum(ids[rows], ids[cols])
            pick = np.lexsort((hi, lo))[0]
            s, t = rows[pick], cols[pick]
        else:
            s, t = rows[0], cols[0]

        ns, nt = size[s], size[t]
        with np.errstate(invalid="ignore", over="ignore"):
            new = _lance_williams(linkage, d[s], d[t], height, ns, nt, size)
        # every supported linkage is monotone; this only absorbs rounding
        new = np.maximum(new, height)
        active[t] = False
        new[~active] = np.inf
        new[s] = np.inf
        d[s, :] = new
        d[:, s] = new
        d[t, :] = np.inf
        d[:, t] = np.inf

        a, b = int(ids[s]), int(ids[t])
        merges.append(Merge(min(a, b), max(a, b), float(height), int(ns + nt)))
        ids[s] = n + step
        size[s] = ns + nt
    return Dendrogram(n, tuple(merges), labels, linkage, measure)


def cut(t: Dendrogram, k: int) -> CutAssignment:
    """Flat partition into ``k`` clusters by undoing the last ``k - 1`` merges.

    Cluster indices follow the smallest label id in each cluster.
    """
    n = t.n_leaves
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= n:
        raise ValidationError(f"k must be an integer in 1..{n}, got {k!r}")
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for j, m in enumerate(t.merges[: n - k]):
        parent[find(m.left)] = n + j
        parent[find(m.right)] = n + j
    index = {}
    member = []
    for leaf in range(n):
        root = find(leaf)
        if root not in index:
            index[root] = len(index)
        member.append(index[root])
    return CutAssignment(int(k), tuple(member))


# -- export -------------------------------------------------------------------

_NEWICK_UNSAFE = re.compile(r"[\s()\[\]':;,]")


def _newick_name(name: str) -> str:
    if _NEWICK_UNSAFE.search(name):
        return "'" + name.replace("'", "''") + "'"
    return name


def _num(x: float) -> str:
    return f"{x:.12g}"


def _names(t: Dendrogram, registry) -> tuple[str, ...]:
    if registry is None:
        return t.leaf_names()
    names = tuple(getattr(registry, "names", registry))
    if len(names) != t.n_leaves:
        raise ValidationError(f"{len(names)} names for a tree with {t.n_leaves} leaves")
    return names


def to_newick(t: Dendrogram, registry=None) -> str:
    names = _names(t, registry)
    n = t.n_leaves
    text = [_newick_name(x) for x in names]
    height = [0.0] * n
    for m in t.merges:
        parts = [f"{text[c]}:{_num(m.height - height[c])}" for c in (m.left, m.right)]
        text.append("(" + ",".join(parts) + ")")
        height.append(m.height)
        text[m.left] = text[m.right] = None
    return text[-1] + ";\n"


def to_dot(t: Dendrogram, registry=None) -> str:
    names = _names(t, registry)
    n = t.n_leaves
    lines = ["digraph dendrogram {", "  node [shape=box];"]
    for i, name in enumerate(names):
        lines.append(f"  n{i} [label={json.dumps(name, ensure_ascii=False)}];")
    for j, m in enumerate(t.merges):
        node = n + j
        lines.append(f'  n{node} [shape=ellipse, label="{_num(m.height)}"];')
        lines.append(f"  n{node} -> n{m.left};")
        lines.append(f"  n{node} -> n{m.right};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_tree(t: Dendrogram, registry=None, format: str = "newick") -> str:
    """Render a dendrogram as Newick, JSON (the tree document itself) or Graphviz DOT."""
    if format == "newick":
        return to_newick(t, registry)
    if format == "dot":
        return to_dot(t, registry)
    if format == "json":
        if registry is not None:
            t = Dendrogram(t.n_leaves, t.merges, _names(t, registry), t.linkage, t.measure)
        return t.to_json()
    raise ValidationError(f"unknown export format {format!r}; expected one of {EXPORT_FORMATS}")


def relabel(t: Dendrogram, labels: Sequence[str]) -> Dendrogram:
    return Dendrogram(t.n_leaves, t.merges, tuple(labels), t.linkage, t.measure)
