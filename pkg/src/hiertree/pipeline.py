"""The full measure x linkage experiment grid, driven by a config file."""

from __future__ import annotations

import logging
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

from hiertree.cooccur import DISTANCE_MEASURES, count_cooccurrences, distance_matrix
from hiertree.diagnose import late_merger_report
from hiertree.errors import HiertreeError, ValidationError
from hiertree.evaluate import EvalSet, accuracy_curve, compare_methods
from hiertree.hclust import LINKAGES, agglomerate, export_tree
from hiertree.ingest import FORMATS, parse_predictions
from hiertree.io import distance_from_csv, distance_to_csv, save_cache, write_text

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)


class StageError(HiertreeError):
    """Wraps an error with the pipeline stage it came from; keeps the original exit code."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 3 if isinstance(cause, OSError) else 1)


@dataclass(frozen=True)
class PipelineConfig:
    input: str
    eval: str
    out_dir: str
    format: str = "jsonl"
    eval_format: str | None = None
    k: int = 5
    measures: tuple[str, ...] = DISTANCE_MEASURES
    linkages: tuple[str, ...] = LINKAGES
    ks: str = "1..N"
    topm: int = 1
    pad_short: bool = False
    lift_norm: str = "off-diagonal"
    laplace: float = 0.0
    drop_uncovered: bool = False
    m: int = 3
    q: int = 50
    jobs: int = 1

    def validate(self, check_files: bool = True) -> None:
        for name in self.measures:
            if name not in DISTANCE_MEASURES:
                raise ValidationError(f"unknown measure {name!r}; expected one of {DISTANCE_MEASURES}")
        for name in self.linkages:
            if name not in LINKAGES:
                raise ValidationError(f"unknown linkage {name!r}; expected one of {LINKAGES}")
        if not self.measures or not self.linkages:
            raise ValidationError("the grid needs at least one measure and one linkage")
        for fmt in (self.format, self.eval_format or self.format):
            if fmt not in FORMATS:
                raise ValidationError(f"unknown format {fmt!r}")
        if self.k < 1 or self.topm < 1 or self.jobs < 1:
            raise ValidationError("k, topm and jobs must be positive")
        if check_files:
            for path in (self.input, self.eval):
                if not Path(path).is_file():
                    raise ValidationError(f"input file not found: {path}")


def load_config(path) -> dict:
    """Read a TOML file of pipeline settings into a plain dict (keys use underscores)."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return {key.replace("-", "_"): value for key, value in raw.items()}


def build_config(file_values: dict, overrides: dict) -> PipelineConfig:
    """Merge config-file values with command-line overrides; overrides win, ``None`` means unset."""
    merged = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(merged) - known)
    if unknown:
        raise ValidationError(f"unknown config keys: {unknown}")
    for key in ("input", "eval", "out_dir"):
        if key not in merged:
            raise ValidationError(f"missing required setting {key!r}")
    for key in ("measures", "linkages"):
        if isinstance(merged.get(key), str):
            merged[key] = [x.strip() for x in merged[key].split(",") if x.strip()]
        if key in merged:
            merged[key] = tuple(merged[key])
    try:
        return PipelineConfig(**merged)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None


def parse_ks(text: str, n: int) -> list[int]:
    """Parse a k grid such as ``1..N``, ``2..50``, ``1..N:10`` or ``1,5,10``; ``N`` is the leaf count."""
    ks: list[int] = []
    for part in str(text).split(","):
        part = part.strip().replace("N", str(n))
        try:
            if ".." in part:
                lo, rest = part.split("..", 1)
                hi, _, step = rest.partition(":")
                ks.extend(range(int(lo), int(hi) + 1, int(step) if step else 1))
            elif part:
                ks.append(int(part))
        except ValueError:
            raise ValidationError(f"cannot parse k grid {text!r}") from None
    bad = [k for k in ks if not 1 <= k <= n]
    if bad or not ks:
        raise ValidationError(f"k grid {text!r} must select values within 1..{n}")
    return ks


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (HiertreeError, OSError) as exc:
        raise StageError(name, exc) from exc


def run_grid(cfg: PipelineConfig) -> Path:
    """Run every (measure, linkage) cell and write artifacts under ``cfg.out_dir``.

    Layout::

        dataset.bin  stats.bin  comparison.csv  comparison.json
        <measure>-<linkage>/distance.csv tree.json tree.nwk curve.csv diagnostics.json
    """
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def read(path, fmt, k, pad):
        with open(path, encoding="utf-8") as fh:
            return parse_predictions(fh, fmt, k, pad_short=pad)

    ds = _stage("ingest", read, cfg.input, cfg.format, cfg.k, cfg.pad_short)
    eval_ds = _stage("ingest", read, cfg.eval, cfg.eval_format or cfg.format, cfg.topm, True)
    overlap = {r.video_id for r in ds.records} & {r.video_id for r in eval_ds.records}
    if overlap:
        log.warning("%d video ids occur in both the mining and evaluation sets", len(overlap))
    stats = _stage("distance", count_cooccurrences, ds)
    _stage("ingest", save_cache, ds, out / "dataset.bin")
    _stage("distance", save_cache, stats, out / "stats.bin")

    distance_files = {}
    for measure in cfg.measures:
        options = {"laplace": cfg.laplace, "uncovered": "drop" if cfg.drop_uncovered else "error"}
        if measure == "lift":
            options["norm"] = cfg.lift_norm
        D = _stage("distance", distance_matrix, stats, measure, **options)
        path = out / f"distance-{measure}.csv"
        _stage("distance", write_text, path, distance_to_csv(D))
        distance_files[measure] = path

    def cell(measure, linkage):
        cell_dir = out / f"{measure}-{linkage}"
        cell_dir.mkdir(exist_ok=True)
        _stage("distance", shutil.copyfile, distance_files[measure], cell_dir / "distance.csv")
        # cluster what was written, so the grid matches the file-by-file CLI route
        D = _stage("cluster", lambda: distance_from_csv(distance_files[measure].read_text(encoding="utf-8")))
        tree = _stage("cluster", agglomerate, D, linkage)
        _stage("cluster", write_text, cell_dir / "tree.json", tree.to_json())
        _stage("export", write_text, cell_dir / "tree.nwk", export_tree(tree, format="newick"))
        evalset = _stage("accuracy", EvalSet.from_dataset, eval_ds, tree.labels)
        ks = _stage("accuracy", parse_ks, cfg.ks, tree.n_leaves)
        curve = _stage("accuracy", accuracy_curve, tree, evalset, ks, topm=cfg.topm)
        _stage("accuracy", write_text, cell_dir / "curve.csv", curve.to_csv())
        n = tree.n_leaves
        report = _stage("diagnose", late_merger_report, tree, stats, min(cfg.m, n), min(cfg.q, n))
        _stage("diagnose", write_text, cell_dir / "diagnostics.json", report.to_json())
        return curve

    jobs = [(m, lk) for m in cfg.measures for lk in cfg.linkages]
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            curves = list(pool.map(lambda job: cell(*job), jobs))
    else:
        curves = [cell(*job) for job in jobs]

    report = _stage("compare", compare_methods, dict(zip(jobs, curves)))
    _stage("compare", write_text, out / "comparison.csv", report.to_csv())
    _stage("compare", write_text, out / "comparison.json", report.to_json())
    return out

