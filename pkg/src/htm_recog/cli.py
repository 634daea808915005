"""``htm-recog`` command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import jsonschema

from . import __version__
from .corpus import ImageSource, load_manifest, split, synth_corpus, write_corpus
from .errors import HtmError
from .experiment import (
    ExperimentConfig,
    Pipeline,
    compare_architectures,
    comparison_table,
    delta_sweep,
    evaluate_model,
    load_model,
    preprocess,
    save_model,
    sweep_table,
    train_model,
    write_results,
)
from .imaging import load_gray
from .spatial_pooler import extract, write_pbm, write_spfm

_unit = {"type": "number", "minimum": 0, "maximum": 1}
_count = {"type": "integer", "minimum": 1}
_session = {"type": "integer", "enum": [1, 2]}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "htm-recog experiment configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "manifest": {"type": "string", "description": "corpus manifest, relative to the config file"},
        "sp": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": _count,
                "m": _count,
                "gamma": _unit,
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            },
        },
        "tm": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "delta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "sigma": _unit,
                "init": _unit,
            },
        },
        "split": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "train_per_class": _count,
                "test_per_class": _count,
                "train_session": _session,
                "test_session": _session,
            },
        },
        "filter_radius": _count,
        "architecture": {"enum": ["SP_ONLY", "SP_TM"]},
        "center_crop": {"type": "boolean"},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "deltas": {"type": "array", "minItems": 1,
                           "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}},
                "train_sizes": {"type": "array", "minItems": 1, "items": _count},
            },
        },
    },
}

DEFAULT_DELTAS = [0.01, 0.05, 0.1, 0.2, 0.5]


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --- configuration -----------------------------------------------------------


def _schema_at(path: list[str]):
    node = CONFIG_SCHEMA
    for key in path:
        props = node.get("properties")
        if props is None or key not in props:
            return None
        node = props[key]
    return node


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``dotted.key=value`` overrides; values are parsed as JSON when possible."""
    raw = json.loads(json.dumps(raw))
    for item in overrides or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"override {item!r} is not of the form key=value")
        path = key.split(".")
        if _schema_at(path) is None or "properties" in _schema_at(path):
            raise UsageError(f"unknown config key {key!r}")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = raw
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = parsed
    return raw


def load_config(path, overrides=None) -> tuple[dict, Path | None]:
    """Return the validated raw config dict and the directory it was read from."""
    raw, base = {}, None
    if path is not None:
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        base = path.parent
    raw = apply_overrides(raw, overrides)
    err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(raw))
    if err is not None:
        where = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise DataError(f"{path or 'config'}: field {where}: {err.message}")
    return raw, base


def experiment_config(raw: dict, source="config") -> ExperimentConfig:
    body = {k: v for k, v in raw.items() if k not in ("manifest", "sweep")}
    try:
        return ExperimentConfig.from_dict(body)
    except HtmError as exc:
        raise DataError(f"{source}: {exc}") from None


def _manifest_path(args, raw, base):
    if getattr(args, "manifest", None):
        return Path(args.manifest)
    if "manifest" in raw:
        p = Path(raw["manifest"])
        return p if p.is_absolute() or base is None else base / p
    raise UsageError("no corpus manifest given (use --manifest or the config's 'manifest' key)")


# --- subcommands -------------------------------------------------------------


def cmd_synth(args):
    manifest, images = synth_corpus(args.classes, args.per_session, args.width, args.height,
                                    args.noise, args.seed)
    target = write_corpus(args.out, manifest, images)
    print(f"wrote {len(manifest.entries)} images and {target}")


def cmd_extract(args):
    raw, _ = load_config(args.config, args.set)
    cfg = experiment_config(raw, args.config or "config")
    img = load_gray(args.image)
    try:
        fm = extract(preprocess(img, cfg), cfg.sp)
    except HtmError as exc:
        raise DataError(f"{args.image}: {exc}") from None
    write_pbm(args.out, fm)
    if args.raw:
        write_spfm(args.raw, fm.bits)
    print(f"{fm.cols_w}x{fm.cols_h} feature map, {int(fm.bits.sum())} active -> {args.out}")


def _setup(args):
    raw, base = load_config(args.config, args.set)
    cfg = experiment_config(raw, args.config or "config")
    mpath = _manifest_path(args, raw, base)
    return raw, cfg, mpath, load_manifest(mpath)


def cmd_train(args):
    _, cfg, _, manifest = _setup(args)
    pipeline = Pipeline(cfg, ImageSource(manifest), args.workers)
    train_entries, _ = split(manifest, cfg.split)
    model = train_model(pipeline, cfg, train_entries)
    target = save_model(args.out, model, cfg)
    print(f"trained {len(model.binary_maps)} class maps ({cfg.architecture.value}) -> {target}")


def cmd_test(args):
    model, cfg = load_model(args.model)
    if args.config is not None or args.set:
        raw, _ = load_config(args.config, args.set)
        merged = cfg.to_dict()
        for key, value in raw.items():
            if isinstance(value, dict) and key in merged:
                merged[key].update(value)
            elif key not in ("manifest", "sweep"):
                merged[key] = value
        cfg = experiment_config(merged)
        cfg = replace(cfg, architecture=model.architecture)
    else:
        raw = {}
    if not args.manifest and "manifest" not in raw:
        raise UsageError("test needs --manifest")
    mpath = _manifest_path(args, raw, Path(args.config).parent if args.config else None)
    manifest = load_manifest(mpath)
    result = evaluate_model(model, cfg, manifest, workers=args.workers)
    key = {"command": "test", "manifest": str(mpath), "config": cfg.to_dict()}
    paths = write_results(args.out, [result], key)
    print(f"accuracy {100 * result.total_accuracy:.2f}% "
          f"({result.correct}/{result.total}) -> {paths['results']}")


def cmd_sweep(args):
    raw, cfg, mpath, manifest = _setup(args)
    sweep = raw.get("sweep", {})
    deltas = args.deltas or sweep.get("deltas") or DEFAULT_DELTAS
    sizes = args.train_sizes or sweep.get("train_sizes") or [cfg.split.train_per_class]
    table = delta_sweep(cfg, deltas, sizes, manifest, workers=args.workers)
    key = {"command": "sweep", "manifest": str(mpath), "config": cfg.to_dict(),
           "deltas": table.deltas, "train_sizes": table.train_sizes}
    paths = write_results(args.out, table.results, key)
    print(sweep_table(table))
    print(f"results -> {paths['results']}")


def cmd_compare(args):
    _, cfg, mpath, manifest = _setup(args)
    sp_only, sp_tm = compare_architectures(cfg, manifest, workers=args.workers)
    key = {"command": "compare", "manifest": str(mpath), "config": cfg.to_dict()}
    paths = write_results(args.out, [sp_only, sp_tm], key)
    print(comparison_table(sp_only, sp_tm))
    print(f"results -> {paths['results']}")


def cmd_schema(args):
    print(json.dumps(CONFIG_SCHEMA, indent=2))


# --- parser ------------------------------------------------------------------


def _csv_floats(text):
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _csv_ints(text):
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="htm-recog", description="HTM spatial pooler and class-map recognition pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def config_flags(p, manifest=True):
        p.add_argument("--config", help="JSON experiment configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value by dotted key, e.g. tm.delta=0.01 (repeatable)")
        if manifest:
            p.add_argument("--manifest", help="corpus manifest (overrides the config's 'manifest')")

    def workers_flag(p):
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                       help="parallel feature-extraction workers (default: %(default)s)")

    p = sub.add_parser("synth", help="generate a synthetic two-session corpus")
    p.add_argument("--classes", type=int, default=10, help="number of classes (default: %(default)s)")
    p.add_argument("--per-session", type=int, default=13,
                   help="images per class per session (default: %(default)s)")
    p.add_argument("--width", type=int, default=32, help="image width (default: %(default)s)")
    p.add_argument("--height", type=int, default=32, help="image height (default: %(default)s)")
    p.add_argument("--noise", type=float, default=0.3,
                   help="per-pixel replacement probability (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default: %(default)s)")
    p.add_argument("--out", required=True, help="output directory for PGMs and manifest.tsv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="run preprocessing and the spatial pooler on one image")
    p.add_argument("--image", required=True, help="input PGM or PPM")
    config_flags(p, manifest=False)
    p.add_argument("--out", required=True, help="output PBM path")
    p.add_argument("--raw", help="also write the raw SPFM bit dump here")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train class maps (or averaged templates) and save them")
    config_flags(p)
    workers_flag(p)
    p.add_argument("--out", required=True, help="model output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("test", help="classify the test split against a saved model")
    p.add_argument("--model", required=True, help="model directory written by 'train'")
    config_flags(p)
    workers_flag(p)
    p.add_argument("--out", default="results", help="results directory (default: %(default)s)")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("sweep", help="accuracy grid over delta and training-set size")
    config_flags(p)
    workers_flag(p)
    p.add_argument("--deltas", type=_csv_floats, help="comma-separated delta values")
    p.add_argument("--train-sizes", type=_csv_ints, help="comma-separated training-set sizes")
    p.add_argument("--out", default="results", help="results directory (default: %(default)s)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="spatial pooler alone vs spatial pooler + temporal memory")
    config_flags(p)
    workers_flag(p)
    p.add_argument("--out", default="results", help="results directory (default: %(default)s)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("schema", help="print the configuration JSON schema")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 1
    if getattr(args, "workers", 1) < 1:
        print("htm-recog: error: --workers must be >= 1", file=sys.stderr)
        return 1
    try:
        args.func(args)
    except UsageError as exc:
        print(f"htm-recog: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, HtmError) as exc:
        print(f"htm-recog: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"htm-recog: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
