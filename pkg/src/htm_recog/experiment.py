"""Training, testing, delta sweeps and architecture comparisons.

Two architectures are supported:

``SP_TM``
    every training image is preprocessed and pooled, and the resulting
    feature maps are folded into one class map per class, binarized at sigma.
``SP_ONLY``
    the training images of a class are averaged in grayscale first; the
    average is preprocessed and pooled once to give that class's template.

Test images always go through the same preprocessing and pooler and are
matched against the templates by XOR mismatch count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path

from . import imaging
from .corpus import CorpusManifest, ImageSource, ManifestEntry, SplitSpec, split
from .errors import ConfigError, HtmError, ParseError
from .imaging import GrayImage
from .matcher import ScoreVector, classify_many
from .spatial_pooler import FeatureMap, SpConfig, extract, read_spfm, write_spfm
from .temporal_memory import (
    BinaryClassMap,
    ClassMap,
    TmConfig,
    binarize,
    new_class_map,
    train_update,
    write_class_map,
)

CSV_HEADER = ["delta", "train_size", "architecture", "class_id", "category", "correct", "total", "accuracy"]
ALL = "*"

ARCHITECTURE_TITLES = {
    "SP_ONLY": "Spatial Pooler",
    "SP_TM": "Spatial Pooler and Temporal Memory",
}


class Architecture(str, Enum):
    SP_ONLY = "SP_ONLY"
    SP_TM = "SP_TM"


class EntryError(HtmError):
    """A pipeline failure tied to one corpus file."""

    def __init__(self, path, cause):
        self.path = path
        self.cause = cause
        super().__init__(f"{path}: {cause}")


@dataclass(frozen=True)
class ExperimentConfig:
    sp: SpConfig = field(default_factory=SpConfig)
    tm: TmConfig = field(default_factory=TmConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    filter_radius: int = 1
    architecture: Architecture = Architecture.SP_TM
    center_crop: bool = False

    def __post_init__(self):
        if self.filter_radius < 1:
            raise ConfigError(f"filter_radius must be >= 1, got {self.filter_radius}")
        object.__setattr__(self, "architecture", Architecture(self.architecture))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["architecture"] = self.architecture.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {"sp", "tm", "split", "filter_radius", "architecture", "center_crop"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(
                sp=SpConfig(**d.pop("sp", {})),
                tm=TmConfig(**d.pop("tm", {})),
                split=SplitSpec(**d.pop("split", {})),
                **d,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def config_hash(self) -> str:
        return stable_hash(self.to_dict())


def stable_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# --- pipeline ---------------------------------------------------------------


def preprocess(img: GrayImage, cfg: ExperimentConfig) -> GrayImage:
    if cfg.center_crop:
        img = imaging.center_crop(img, cfg.sp.n * cfg.sp.m)
    return imaging.stddev_filter(img, cfg.filter_radius)


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


class Pipeline:
    """Preprocessing + pooling with a per-path feature cache.

    Runs sharing a pipeline share the pooler seed, so compared runs differ
    only in what happens after feature extraction.
    """

    def __init__(self, cfg: ExperimentConfig, source: ImageSource, workers: int = 1):
        self.cfg = cfg
        self.source = source
        self.workers = workers
        self._features: dict[str, FeatureMap] = {}

    def _guard(self, entry, fn, *args):
        try:
            return fn(*args)
        except ParseError:
            raise
        except (HtmError, OSError, ValueError) as exc:
            raise EntryError(entry.path, exc) from exc

    def gray(self, entry: ManifestEntry) -> GrayImage:
        return self._guard(entry, self.source, entry)

    def _feature(self, entry: ManifestEntry) -> FeatureMap:
        img = self.gray(entry)
        return self._guard(entry, lambda: extract(preprocess(img, self.cfg), self.cfg.sp))

    def features(self, entries) -> list[FeatureMap]:
        todo = [e for e in dict.fromkeys(entries) if e.path not in self._features]
        for e, fm in zip(todo, _map(self._feature, todo, self.workers)):
            self._features[e.path] = fm
        return [self._features[e.path] for e in entries]

    def averaged_template(self, class_id: int, entries) -> BinaryClassMap:
        grays = [self.gray(e) for e in entries]
        first = entries[0]
        avg = self._guard(first, imaging.average, grays)
        fm = self._guard(first, lambda: extract(preprocess(avg, self.cfg), self.cfg.sp))
        return BinaryClassMap.from_feature_map(class_id, fm)


def _by_class(entries):
    groups = defaultdict(list)
    for e in entries:
        groups[e.class_id].append(e)
    return dict(sorted(groups.items()))


@dataclass
class Model:
    """Trained templates; ``class_maps`` holds the analog maps for SP_TM."""

    architecture: Architecture
    binary_maps: list[BinaryClassMap]
    class_maps: list[ClassMap] | None = None


def train_model(pipeline: Pipeline, cfg: ExperimentConfig, train_entries) -> Model:
    groups = _by_class(train_entries)
    if cfg.architecture is Architecture.SP_ONLY:
        maps = [pipeline.averaged_template(cid, es) for cid, es in groups.items()]
        return Model(cfg.architecture, maps)
    feats = dict(zip(train_entries, pipeline.features(train_entries)))
    class_maps = []
    for cid, es in groups.items():
        first = feats[es[0]]
        cmap = new_class_map(cid, first.cols_w, first.cols_h, cfg.tm)
        for e in es:
            cmap = pipeline._guard(e, train_update, cmap, feats[e], cfg.tm)
        class_maps.append(cmap)
    return Model(cfg.architecture, [binarize(c, cfg.tm) for c in class_maps], class_maps)


@dataclass(frozen=True)
class Prediction:
    path: str
    true_class: int
    predicted: int
    scores: ScoreVector
    category: str | None = None

    @property
    def correct(self) -> bool:
        return self.true_class == self.predicted


@dataclass
class RunResult:
    config: ExperimentConfig
    records: list[Prediction]
    duration: float = 0.0

    @property
    def correct(self) -> int:
        return sum(r.correct for r in self.records)

    @property
    def total(self) -> int:
        return len(self.records)

    @property
    def total_accuracy(self) -> float:
        return self.correct / self.total if self.records else 0.0

    def _group(self, key):
        out = {}
        for r in self.records:
            c, t = out.get(key(r), (0, 0))
            out[key(r)] = (c + r.correct, t + 1)
        return out

    @property
    def per_class(self) -> dict[int, float]:
        return {k: c / t for k, (c, t) in sorted(self._group(lambda r: r.true_class).items())}

    @property
    def per_category(self) -> dict[str, float]:
        """Accuracy per manifest category; empty when no entry carries one."""
        if all(r.category is None for r in self.records):
            return {}
        groups = self._group(lambda r: r.category or "")
        return {k: c / t for k, (c, t) in groups.items()}

    @property
    def category_mean(self) -> float | None:
        """Unweighted mean of the per-category accuracies, if categories exist."""
        per_cat = self.per_category
        return sum(per_cat.values()) / len(per_cat) if per_cat else None

    @property
    def tie_count(self) -> int:
        return sum(r.scores.is_tie for r in self.records)


def evaluate(pipeline: Pipeline, cfg: ExperimentConfig, model: Model, test_entries) -> list[Prediction]:
    feats = pipeline.features(test_entries)
    outcomes = classify_many(feats, model.binary_maps)
    return [
        Prediction(e.path, e.class_id, pred, scores, e.category)
        for e, (pred, scores) in zip(test_entries, outcomes)
    ]


def _run_with(pipeline: Pipeline, cfg: ExperimentConfig, manifest: CorpusManifest) -> RunResult:
    start = time.perf_counter()
    train_entries, test_entries = split(manifest, cfg.split)
    model = train_model(pipeline, cfg, train_entries)
    records = evaluate(pipeline, cfg, model, test_entries)
    return RunResult(cfg, records, time.perf_counter() - start)


def run(cfg: ExperimentConfig, manifest: CorpusManifest, images=None, workers: int = 1) -> RunResult:
    """Train on the configured split and classify every test image."""
    pipeline = Pipeline(cfg, ImageSource(manifest, images), workers)
    return _run_with(pipeline, cfg, manifest)


@dataclass
class SweepTable:
    deltas: list[float]
    train_sizes: list[int]
    cells: dict[tuple[float, int], RunResult]

    @property
    def results(self) -> list[RunResult]:
        return [self.cells[(d, z)] for z in self.train_sizes for d in self.deltas]

    def accuracy(self, delta: float, train_size: int) -> float:
        return self.cells[(delta, train_size)].total_accuracy


def delta_sweep(base: ExperimentConfig, deltas, train_sizes, manifest: CorpusManifest,
                images=None, workers: int = 1) -> SweepTable:
    """Evaluate SP_TM for every (delta, train size) pair with one shared pooler."""
    deltas = [float(d) for d in deltas]
    train_sizes = [int(z) for z in train_sizes]
    if not deltas or not train_sizes:
        raise ConfigError("a sweep needs at least one delta and one train size")
    base = replace(base, architecture=Architecture.SP_TM)
    pipeline = Pipeline(base, ImageSource(manifest, images), workers)
    cells = {}
    for z in train_sizes:
        for d in deltas:
            try:
                cfg = replace(base, tm=replace(base.tm, delta=d),
                              split=replace(base.split, train_per_class=z))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            cells[(d, z)] = _run_with(pipeline, cfg, manifest)
    return SweepTable(deltas, train_sizes, cells)


def compare_architectures(cfg: ExperimentConfig, manifest: CorpusManifest, images=None,
                          workers: int = 1) -> tuple[RunResult, RunResult]:
    """Run SP_ONLY and SP_TM with the same pooler; returns ``(sp_only, sp_tm)``."""
    pipeline = Pipeline(cfg, ImageSource(manifest, images), workers)
    sp_only = _run_with(pipeline, replace(cfg, architecture=Architecture.SP_ONLY), manifest)
    sp_tm = _run_with(pipeline, replace(cfg, architecture=Architecture.SP_TM), manifest)
    return sp_only, sp_tm


# --- reporting ---------------------------------------------------------------


def _categories(results) -> list[str]:
    seen = {}
    for res in results:
        for r in res.records:
            if r.category is not None:
                seen.setdefault(r.category, None)
    return list(seen)


def result_rows(res: RunResult) -> list[list]:
    cfg = res.config
    prefix = [repr(cfg.tm.delta), cfg.split.train_per_class, cfg.architecture.value]
    cells = defaultdict(lambda: [0, 0])
    for r in res.records:
        for key in ((r.true_class, r.category or ""), (ALL, r.category or ""), (ALL, ALL)):
            cells[key][0] += r.correct
            cells[key][1] += 1
    has_categories = any(r.category is not None for r in res.records)
    rows = []
    class_keys = sorted(k for k in cells if k[0] != ALL)
    for key in class_keys:
        c, t = cells[key]
        rows.append(prefix + [key[0], key[1], c, t, repr(c / t)])
    if has_categories:
        for cat in _categories([res]):
            c, t = cells[(ALL, cat)]
            rows.append(prefix + [ALL, cat, c, t, repr(c / t)])
    c, t = cells[(ALL, ALL)]
    rows.append(prefix + [ALL, ALL, c, t, repr(c / t if t else 0.0)])
    return rows


def results_csv(results) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for res in results:
        writer.writerows(result_rows(res))
    return buf.getvalue()


def predictions_csv(results) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["delta", "train_size", "architecture", "path", "true_class",
                     "predicted_class", "category", "best_score", "margin", "tied", "scores"])
    for res in results:
        cfg = res.config
        for r in res.records:
            writer.writerow([
                repr(cfg.tm.delta), cfg.split.train_per_class, cfg.architecture.value,
                r.path, r.true_class, r.predicted, r.category or "", r.scores.best,
                r.scores.margin(), int(r.scores.is_tie), " ".join(map(str, r.scores.scores)),
            ])
    return buf.getvalue()


def summary(results, key) -> dict:
    runs = []
    for res in results:
        runs.append({
            "config": res.config.to_dict(),
            "correct": res.correct,
            "total": res.total,
            "total_accuracy": res.total_accuracy,
            "per_category": res.per_category,
            "category_mean": res.category_mean,
            "per_class": {str(k): v for k, v in res.per_class.items()},
            "tie_count": res.tie_count,
        })
    return {"key": key, "hash": stable_hash(key), "runs": runs}


def write_results(out_dir, results, key) -> dict[str, Path]:
    """Write results, predictions, summary and timing files named by ``key``'s hash.

    All files except ``timing_*.json`` are byte-identical across reruns of
    the same configuration.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    h = stable_hash(key)
    paths = {
        "results": out_dir / f"results_{h}.csv",
        "predictions": out_dir / f"predictions_{h}.csv",
        "summary": out_dir / f"summary_{h}.json",
        "timing": out_dir / f"timing_{h}.json",
    }
    paths["results"].write_text(results_csv(results), encoding="utf-8")
    paths["predictions"].write_text(predictions_csv(results), encoding="utf-8")
    paths["summary"].write_text(
        json.dumps(summary(results, key), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    timing = [{"architecture": r.config.architecture.value, "delta": r.config.tm.delta,
               "train_size": r.config.split.train_per_class, "seconds": r.duration}
              for r in results]
    paths["timing"].write_text(json.dumps(timing, indent=2) + "\n", encoding="utf-8")
    return paths


def comparison_table(sp_only: RunResult, sp_tm: RunResult) -> str:
    """Side-by-side accuracy table, one row per architecture."""
    cats = _categories([sp_only, sp_tm])
    header = ["Architecture"] + cats + ["Total"] + (["Category mean"] if cats else [])
    rows = []
    for res in (sp_only, sp_tm):
        per_cat = res.per_category
        cells = [f"{100 * per_cat[c]:.2f}%" for c in cats]
        tail = [f"{100 * res.total_accuracy:.2f}%"]
        if cats:
            tail.append(f"{100 * res.category_mean:.2f}%")
        rows.append([ARCHITECTURE_TITLES[res.config.architecture.value]] + cells + tail)
    return _format_table(header, rows)


def sweep_table(table: SweepTable) -> str:
    header = ["train_size"] + [f"delta={d:g}" for d in table.deltas]
    rows = [[str(z)] + [f"{100 * table.accuracy(d, z):.2f}%" for d in table.deltas]
            for z in table.train_sizes]
    return _format_table(header, rows)


def _format_table(header, rows) -> str:
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    fmt = lambda r: " | ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip()
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), sep] + [fmt(r) for r in rows])


# --- model persistence -------------------------------------------------------


def save_model(out_dir, model: Model, cfg: ExperimentConfig) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = []
    for bmap in model.binary_maps:
        write_spfm(out_dir / f"class_{bmap.class_id:04d}.spfm", bmap.bits)
        ids.append(bmap.class_id)
    for cmap in model.class_maps or []:
        write_class_map(out_dir / f"class_{cmap.class_id:04d}.htmc", cmap)
    meta = {"config": cfg.to_dict(), "class_ids": ids}
    target = out_dir / "model.json"
    target.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target


def load_model(model_dir) -> tuple[Model, ExperimentConfig]:
    model_dir = Path(model_dir)
    meta_path = model_dir / "model.json"
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        cfg = ExperimentConfig.from_dict(meta["config"])
        ids = [int(i) for i in meta["class_ids"]]
    except (json.JSONDecodeError, KeyError, TypeError, ConfigError) as exc:
        raise ParseError(f"invalid model metadata ({exc})", meta_path) from None
    maps = []
    for cid in ids:
        fm = read_spfm(model_dir / f"class_{cid:04d}.spfm")
        maps.append(BinaryClassMap(cid, fm.bits))
    return Model(cfg.architecture, maps), cfg


def evaluate_model(model: Model, cfg: ExperimentConfig, manifest: CorpusManifest,
               images=None, workers: int = 1) -> RunResult:
    """Classify the configured test split against a previously trained model."""
    start = time.perf_counter()
    pipeline = Pipeline(cfg, ImageSource(manifest, images), workers)
    _, test_entries = split(manifest, cfg.split)
    records = evaluate(pipeline, cfg, model, test_entries)
    return RunResult(cfg, records, time.perf_counter() - start)

