"""On-disk formats: the binary cache for datasets/counts, distance CSVs, atomic writes.

Cache layout: the 8-byte magic ``HIERTREE``, a big-endian uint16 format version,
then a zlib-compressed UTF-8 JSON document whose ``kind`` is ``dataset`` or ``stats``.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import zlib
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from hiertree.cooccur import CooccurrenceStats, DistanceMatrix
from hiertree.errors import ValidationError
from hiertree.ingest import LabelRegistry, PredictionDataset, PredictionRecord

MAGIC = b"HIERTREE"
CACHE_VERSION = 1


@contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to ``<path>.partial`` and rename on success; a failed write leaves the .partial behind."""
    path = Path(path)
    partial = path.with_name(path.name + ".partial")
    kwargs = {"encoding": "utf-8", "newline": ""} if "b" not in mode else {}
    with open(partial, mode, **kwargs) as fh:
        yield fh
    os.replace(partial, path)


def write_text(path, text: str) -> None:
    with atomic_write(path) as fh:
        fh.write(text)


# -- binary cache -------------------------------------------------------------

def _dataset_doc(ds: PredictionDataset) -> dict:
    return {
        "kind": "dataset",
        "k": ds.k,
        "labels": list(ds.registry.names),
        "records": [[r.video_id, r.truth, [list(e) for e in r.top]] for r in ds.records],
    }


def _stats_doc(stats: CooccurrenceStats) -> dict:
    return {
        "kind": "stats",
        "labels": list(stats.labels),
        "n_sets": stats.n_sets,
        "single": stats.single.tolist(),
        "pair": stats.pair.ravel().tolist(),
        "top1": stats.top1.tolist() if stats.top1 is not None else None,
    }


def dumps_cache(obj) -> bytes:
    from hiertree import __version__

    if isinstance(obj, PredictionDataset):
        doc = _dataset_doc(obj)
    elif isinstance(obj, CooccurrenceStats):
        doc = _stats_doc(obj)
    else:
        raise TypeError(f"cannot cache {type(obj).__name__}")
    doc["hiertree_version"] = __version__
    payload = json.dumps(doc, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return MAGIC + struct.pack(">H", CACHE_VERSION) + zlib.compress(payload, 6)


def loads_cache(blob: bytes):
    if not blob.startswith(MAGIC) or len(blob) < len(MAGIC) + 2:
        raise ValidationError("not a hiertree cache file")
    (version,) = struct.unpack(">H", blob[len(MAGIC) : len(MAGIC) + 2])
    if version != CACHE_VERSION:
        raise ValidationError(f"cache format version {version} is not supported (expected {CACHE_VERSION})")
    try:
        doc = json.loads(zlib.decompress(blob[len(MAGIC) + 2 :]).decode("utf-8"))
    except (zlib.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"corrupt cache file: {exc}") from None
    if doc.get("kind") == "dataset":
        records = tuple(
            PredictionRecord(vid, truth, tuple((int(lab), score) for lab, score in top))
            for vid, truth, top in doc["records"]
        )
        return PredictionDataset(LabelRegistry(tuple(doc["labels"])), records, int(doc["k"]))
    if doc.get("kind") == "stats":
        n = len(doc["labels"])
        top1 = doc.get("top1")
        return CooccurrenceStats(
            tuple(doc["labels"]),
            int(doc["n_sets"]),
            np.array(doc["single"], dtype=np.int64),
            np.array(doc["pair"], dtype=np.int64).reshape(n, n),
            np.array(top1, dtype=np.int64) if top1 is not None else None,
        )
    raise ValidationError(f"unknown cache kind {doc.get('kind')!r}")


def save_cache(obj, path) -> None:
    with atomic_write(path, "wb") as fh:
        fh.write(dumps_cache(obj))


def load_cache(path):
    return loads_cache(Path(path).read_bytes())


# -- distance CSV -------------------------------------------------------------

def distance_to_csv(D: DistanceMatrix) -> str:
    """Square CSV; the corner cell names the source measure, row/column headers name labels."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([D.measure or "label", *D.labels])
    for name, row in zip(D.labels, D.values):
        writer.writerow([name, *(f"{x:.12g}" for x in row)])
    return out.getvalue()


def distance_from_csv(text: str) -> DistanceMatrix:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if len(rows) < 3:
        raise ValidationError("distance CSV needs a header and at least two rows")
    corner, *labels = rows[0]
    if len(rows) - 1 != len(labels):
        raise ValidationError(f"distance CSV has {len(labels)} columns but {len(rows) - 1} rows")
    if [r[0] for r in rows[1:]] != labels:
        raise ValidationError("distance CSV row labels do not match the header")
    try:
        values = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise ValidationError(f"non-numeric distance value: {exc}") from None
    if values.shape != (len(labels), len(labels)):
        raise ValidationError("distance CSV is not square")
    measure = corner if corner in ("confidence", "lift") else None
    D = DistanceMatrix(measure, tuple(labels), values)
    D.validate()
    return D
