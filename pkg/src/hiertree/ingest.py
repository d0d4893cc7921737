"""Parsing of prediction logs into top-k prediction sets.

Two line-oriented formats are accepted:

JSONL, one record per line::

    {"video_id": "v1", "truth": "archery", "top": [{"label": "archery", "score": 0.9}, ...]}

CSV with a header row::

    video_id,truth,label1,score1,...,labelk,scorek

An empty CSV truth cell (or a JSON ``null``) means the ground truth is absent.
Scores are optional per record, but a record either scores every entry or none.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from hiertree.errors import ValidationError

FORMATS = ("jsonl", "csv")


@dataclass(frozen=True)
class LabelRegistry:
    names: tuple[str, ...]
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(names) < 2:
            raise ValidationError(f"label registry needs at least 2 labels, got {len(names)}")
        index = {}
        for i, name in enumerate(names):
            if not isinstance(name, str) or not name:
                raise ValidationError(f"label #{i} is empty or not a string")
            if name in index:
                raise ValidationError(f"duplicate label {name!r} in registry")
            index[name] = i
        object.__setattr__(self, "index", index)

    def __len__(self):
        return len(self.names)

    def id(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise ValidationError(f"unknown label {name!r}") from None


@dataclass(frozen=True)
class PredictionRecord:
    video_id: str
    truth: int | None
    top: tuple[tuple[int, float | None], ...]

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(lab for lab, _ in self.top)

    @property
    def predicted(self) -> int:
        return self.top[0][0]


@dataclass(frozen=True)
class PredictionDataset:
    registry: LabelRegistry
    records: tuple[PredictionRecord, ...]
    k: int

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ValidationError("no records")
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        n = len(self.registry)
        for rec in self.records:
            _check_record(rec, n, self.k)

    @property
    def n_labels(self) -> int:
        return len(self.registry)


def _check_record(rec: PredictionRecord, n_labels: int, k: int) -> None:
    where = f"record {rec.video_id!r}"
    if not 1 <= len(rec.top) <= k:
        raise ValidationError(f"{where}: top list has {len(rec.top)} entries, expected 1..{k}")
    ids = [lab for lab, _ in rec.top]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{where}: duplicate label in top list")
    for lab in ids + ([rec.truth] if rec.truth is not None else []):
        if not 0 <= lab < n_labels:
            raise ValidationError(f"{where}: label id {lab} outside registry")
    scores = [s for _, s in rec.top]
    if any(s is None for s in scores):
        if not all(s is None for s in scores):
            raise ValidationError(f"{where}: scores must be given for all entries or none")
        return
    for s in scores:
        if not 0.0 <= s <= 1.0:
            raise ValidationError(f"{where}: score {s} outside [0, 1]")
    if any(a < b for a, b in zip(scores, scores[1:])):
        raise ValidationError(f"{where}: scores are not sorted in descending order")


# -- raw line parsing ---------------------------------------------------------

def _parse_score(raw, lineno: int) -> float | None:
    if raw is None or raw == "":
        return None
    try:
        score = float(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"line {lineno}: score {raw!r} is not a number") from None
    if math.isnan(score) or not 0.0 <= score <= 1.0:
        raise ValidationError(f"line {lineno}: score {raw!r} outside [0, 1]")
    return score


def _jsonl_rows(lines: Iterable[str]):
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        if not isinstance(obj, dict) or "top" not in obj or "video_id" not in obj:
            raise ValidationError(f"line {lineno}: expected an object with 'video_id' and 'top'")
        truth = obj.get("truth")
        if truth is not None and (not isinstance(truth, str) or not truth):
            raise ValidationError(f"line {lineno}: 'truth' must be a non-empty string or null")
        top = obj["top"]
        if not isinstance(top, list):
            raise ValidationError(f"line {lineno}: 'top' must be a list")
        entries = []
        for e in top:
            if not isinstance(e, dict) or not isinstance(e.get("label"), str) or not e["label"]:
                raise ValidationError(f"line {lineno}: each top entry needs a non-empty 'label'")
            entries.append((e["label"], _parse_score(e.get("score"), lineno)))
        yield lineno, str(obj["video_id"]), truth, entries


def _csv_rows(lines: Iterable[str]):
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        return
    if len(header) < 2 or header[0].strip() != "video_id" or header[1].strip() != "truth":
        raise ValidationError("line 1: CSV header must start with 'video_id,truth'")
    for row in reader:
        lineno = reader.line_num
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) < 2:
            raise ValidationError(f"line {lineno}: expected video_id and truth columns")
        rest = row[2:]
        if len(rest) % 2:
            rest = rest + [""]
        entries = []
        for label, score in zip(rest[::2], rest[1::2]):
            label = label.strip()
            if not label:
                if score.strip():
                    raise ValidationError(f"line {lineno}: score without a label")
                continue
            entries.append((label, _parse_score(score.strip(), lineno)))
        yield lineno, row[0], row[1].strip() or None, entries


def _order_and_truncate(entries, k: int, lineno: int, pad_short: bool):
    names = [lab for lab, _ in entries]
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise ValidationError(f"line {lineno}: duplicate label {dup!r} within one record")
    scored = [s is not None for _, s in entries]
    if any(scored) and not all(scored):
        raise ValidationError(f"line {lineno}: scores must be given for all entries or none")
    if all(scored):
        # stable: equal scores keep their listed order
        entries = sorted(entries, key=lambda e: -e[1])
    if len(entries) < k and not pad_short:
        raise ValidationError(
            f"line {lineno}: record has {len(entries)} predictions, fewer than k={k} "
            "(use pad_short to accept short records)"
        )
    if not entries:
        raise ValidationError(f"line {lineno}: record has no predictions")
    return entries[:k]


def parse_predictions(
    stream: str | Iterable[str],
    format: str = "jsonl",
    k: int = 5,
    *,
    pad_short: bool = False,
    labels: Sequence[str] | None = None,
) -> PredictionDataset:
    """Parse a prediction log into a :class:`PredictionDataset`.

    Each record is sorted by descending score (stable) and truncated to its top
    ``k`` entries. Label ids follow first appearance in the stream, scanning each
    record's truth and then its retained predictions in rank order. Passing
    ``labels`` fixes the universe up front; any other label is then an error.
    """
    if format not in FORMATS:
        raise ValidationError(f"unknown format {format!r}; expected one of {FORMATS}")
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValidationError(f"k must be a positive integer, got {k!r}")
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    fixed = labels is not None
    names: list[str] = list(labels) if fixed else []
    index = {name: i for i, name in enumerate(names)}

    def intern(name: str, lineno: int) -> int:
        if name not in index:
            if fixed:
                raise ValidationError(f"line {lineno}: label {name!r} not in the label universe")
            index[name] = len(names)
            names.append(name)
        return index[name]

    rows = _jsonl_rows(stream) if format == "jsonl" else _csv_rows(stream)
    raw_records = []
    for lineno, video_id, truth, entries in rows:
        kept = _order_and_truncate(entries, k, lineno, pad_short)
        truth_id = intern(truth, lineno) if truth is not None else None
        top = tuple((intern(lab, lineno), s) for lab, s in kept)
        raw_records.append(PredictionRecord(video_id, truth_id, top))
    if not raw_records:
        raise ValidationError("no records")
    return PredictionDataset(LabelRegistry(tuple(names)), tuple(raw_records), k)


def serialize_jsonl(ds: PredictionDataset) -> str:
    """Write a dataset back out in the JSONL record format."""
    names = ds.registry.names
    out = []
    for rec in ds.records:
        top = []
        for lab, score in rec.top:
            entry = {"label": names[lab]}
            if score is not None:
                entry["score"] = score
            top.append(entry)
        truth = names[rec.truth] if rec.truth is not None else None
        out.append(json.dumps({"video_id": rec.video_id, "truth": truth, "top": top}, ensure_ascii=False))
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class CoverageReport:
    labels: tuple[str, ...]
    counts: tuple[int, ...]

    @property
    def uncovered(self) -> list[str]:
        return [name for name, c in zip(self.labels, self.counts) if c == 0]

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.labels, self.counts))


def coverage_report(ds: PredictionDataset) -> CoverageReport:
    """Count, for every registry label, the records whose top-k set contains it."""
    counts = [0] * ds.n_labels
    for rec in ds.records:
        for lab in rec.labels:
            counts[lab] += 1
    return CoverageReport(ds.registry.names, tuple(counts))
