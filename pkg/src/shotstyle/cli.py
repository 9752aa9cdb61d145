"""Command-line front end.

    shotstyle synth     --profiles 6 --films 15 --seed 7 --out bench/
    shotstyle features  --manifest bench/manifest.csv --scale-mode 3 --out feats.csv
    shotstyle evaluate  --features feats.csv --model gnb --protocol loo
    shotstyle embed     --features feats.csv --out map.csv
    shotstyle chords    --features feats.csv --out chords/

A JSON file given with ``--config`` presets any option (keys are option
names with dashes or underscores); options on the command line win.
Exit status is 0 on success, 2 for bad input and 3 for internal errors; on
failure a single JSON object describing the error is printed to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chords import SCALE3_COLORS, SCALE7_COLORS, chord_export
from .corpus import load_corpus
from .embed import EmbedConfig, tsne
from .errors import InputError, ShotStyleError
from .evaluation import (
    EvalReport,
    ModelSpec,
    ablation,
    expand_grid,
    fit_predict,
    importance_profiles,
    loocv,
    mapping_csv,
    period_dataset,
)
from .learn import dump_model, forest_fit, gnb_fit
from .shotfeat import DURATION_CLASSES, FeatureConfig
from .synth import build_benchmark, default_profiles, write_benchmark
from .table import corpus_dataset, read_feature_table, write_feature_table
from .trend import director_trends, trends_csv

DATA_DIR_ENV = "SHOTSTYLE_DATA_DIR"

DEFAULT_GRIDS = {
    "gnb": {"epsilon_scale": [1e-9, 1e-7, 1e-5, 1e-3, 1e-2, 1e-1]},
    "knn": {"k": [1, 3, 5, 7, 9]},
    "forest": {"trees": [50, 100, 200]},
}


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _emit(text: str, out: str | None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _corpus(args):
    data_dir = args.data_dir or os.environ.get(DATA_DIR_ENV)
    vocabulary = 7 if getattr(args, "scale_mode", 3) == 7 else "auto"
    return load_corpus(args.manifest, data_dir, vocabulary, getattr(args, "fill", "strict"))


def _spec(args) -> ModelSpec:
    if args.model == "gnb":
        return ModelSpec.make("gnb", epsilon_scale=args.epsilon_scale)
    if args.model == "knn":
        return ModelSpec.make("knn", k=args.k)
    return ModelSpec.make("forest", trees=args.trees, max_features=args.max_features, seed=args.seed)


def _grid(args, spec: ModelSpec):
    if not args.grid_search:
        return None
    lattice = DEFAULT_GRIDS[spec.kind]
    fixed = {k: v for k, v in spec.params if k not in lattice}
    return [ModelSpec.make(spec.kind, **fixed, **dict(g.params)) for g in expand_grid(spec.kind, **lattice)]


def _write_report(report: EvalReport, out: str | None, label_header: str):
    text = report.format_text(label_header)
    sys.stdout.write(text)
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.txt").write_text(text, encoding="utf-8")
        (d / "report.csv").write_text(report.to_csv(), encoding="utf-8")
        (d / "confusion.csv").write_text(report.confusion.to_csv(), encoding="utf-8")
        (d / "predictions.csv").write_text(report.predictions_csv(), encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args):
    corpus = _corpus(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["film_id", "director", "year", "n_shots", "shot_runtime_s", "track_seconds", "vocabulary"])
    for f in corpus.films:
        w.writerow(
            [
                f.film_id,
                f.director,
                f.year,
                len(f.shot_list) if f.shot_list else "",
                f"{f.shot_list.total_duration:.1f}" if f.shot_list else "",
                len(f.scale_track) if f.scale_track else "",
                f.scale_track.vocabulary if f.scale_track else "",
            ]
        )
    _emit(buf.getvalue(), args.out)
    print(f"{len(corpus)} films, {len(corpus.directors)} directors", file=sys.stderr)


def cmd_features(args):
    corpus = _corpus(args)
    config = FeatureConfig(
        scale_mode=args.scale_mode,
        accessory=args.accessory,
        normalization=args.normalization,
        frame_rate=args.frame_rate,
    )
    data = corpus_dataset(corpus, config)
    table, side = write_feature_table(args.out, data)
    print(f"wrote {data.n} x {data.d} features to {table} (layout {side.name})", file=sys.stderr)


def cmd_classify(args):
    train = read_feature_table(args.features)
    query = read_feature_table(args.query)
    spec = _spec(args)
    grid = _grid(args, spec)
    if grid:
        from .evaluation import grid_search

        spec = grid_search(train, grid, args.inner_folds, args.seed)
    pred = fit_predict(spec, train, query.x)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["film_id", "predicted"])
    w.writerows(zip(query.ids, pred))
    _emit(buf.getvalue(), args.out)
    if args.save_model:
        p = spec.resolved()
        if spec.kind == "gnb":
            model = gnb_fit(train, p["epsilon_scale"])
        elif spec.kind == "forest":
            model = forest_fit(train, p["trees"], p["max_features"], p["seed"])
        else:
            raise InputError("knn has no fitted model to save")
        Path(args.save_model).write_text(dump_model(model) + "\n", encoding="utf-8")


def cmd_evaluate(args):
    data = read_feature_table(args.features)
    spec = _spec(args)
    report = loocv(data, spec, _grid(args, spec), args.inner_folds, args.seed)
    _write_report(report, args.out, "author")


def cmd_period(args):
    data = period_dataset(read_feature_table(args.features))
    spec = _spec(args)
    report = loocv(data, spec, _grid(args, spec), args.inner_folds, args.seed)
    _write_report(report, args.out, "period")


def cmd_ablate(args):
    data = read_feature_table(args.features)
    blocks = args.blocks.split(",") if args.blocks else [*data.feature_layout.block_names, "all"]
    spec = _spec(args)
    scores = ablation(data, blocks, spec, _grid(args, spec), args.inner_folds, args.seed)
    _emit(mapping_csv(scores), args.out)


def cmd_importance(args):
    data = read_feature_table(args.features)
    blocks = args.blocks.split(",") if args.blocks else None
    table = importance_profiles(data, blocks, args.trees, args.max_features, args.seed)
    _emit(table.to_csv(), args.out)


def cmd_embed(args):
    data = read_feature_table(args.features)
    config = EmbedConfig(
        target_dims=args.dims,
        perplexity=args.perplexity,
        iterations=args.iterations,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )
    y = tsne(data.x, config)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["film_id", "director", *"xyz"[: args.dims]])
    for fid, label, row in zip(data.ids, data.y, y):
        w.writerow([fid, label, *(f"{v:.6f}" for v in row)])
    _emit(buf.getvalue(), args.out)


def cmd_trends(args):
    corpus = _corpus(args)
    trends = director_trends(corpus, args.statistic, "auto", args.iterations, args.seed)
    counts = {d: sum(1 for f in films if f.shot_list is not None) for d, films in corpus.by_director().items()}
    _emit(trends_csv(trends, counts), args.out)


def cmd_chords(args):
    data = read_feature_table(args.features)
    layout = data.feature_layout
    if layout is None:
        raise InputError("chords need a feature table with a layout sidecar")
    if args.kind == "duration":
        dist_block, trans_block, labels, colors = "ddistr", "dtrans", DURATION_CLASSES, None
    else:
        dist_block, trans_block = "sdistr", "strans"
        labels = tuple(n[len("sdistr[") : -1] for n in layout.names[layout.slice("sdistr")])
        colors = SCALE3_COLORS if len(labels) == 3 else SCALE7_COLORS
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    k = len(labels)
    for director in data.class_set:
        rows = data.x[data.y == director]
        dist = rows[:, layout.slice(dist_block)].mean(axis=0)
        trans = rows[:, layout.slice(trans_block)].mean(axis=0).reshape(k, k)
        _, svg = chord_export(dist, trans, labels, colors, title=f"{director} {args.kind}")
        (out / f"{args.kind}_{director}.svg").write_text(svg, encoding="utf-8")
    print(f"wrote {len(data.class_set)} chord diagrams to {out}", file=sys.stderr)


def cmd_synth(args):
    profiles = default_profiles(
        args.profiles,
        seed=args.seed,
        scale_vocabulary=args.scale_mode,
        jitter=args.jitter if args.jitter > 0 else None,
        shared_scale=args.shared_scale,
        film_length_s=(args.min_length, args.max_length),
    )
    bench = build_benchmark(profiles, args.films, seed=args.seed)
    manifest = write_benchmark(bench, args.out)
    print(f"wrote {len(bench.corpus)} films to {manifest}", file=sys.stderr)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_corpus_args(p):
    p.add_argument("--manifest", required=True)
    p.add_argument("--data-dir", default=None, help=f"defaults to ${DATA_DIR_ENV}, then the manifest's directory")
    p.add_argument("--fill", choices=["strict", "forward"], default="strict")


def _add_model_args(p):
    p.add_argument("--model", choices=["gnb", "knn", "forest"], default="gnb")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-features", choices=["sqrt", "all"], default="sqrt")
    p.add_argument("--epsilon-scale", type=float, default=1e-9)
    p.add_argument("--grid-search", action="store_true")
    p.add_argument("--inner-folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shotstyle", description="Shot-based film style analysis.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", default=None, help="JSON file presetting options")
        p.set_defaults(func=func)
        return p

    p = command("ingest", cmd_ingest, "validate a manifest and summarize its films")
    _add_corpus_args(p)
    p.add_argument("--scale-mode", type=int, choices=[3, 7], default=3)
    p.add_argument("--out")

    p = command("features", cmd_features, "compute the feature table")
    _add_corpus_args(p)
    p.add_argument("--scale-mode", type=int, choices=[3, 7], default=3)
    p.add_argument("--accessory", action="store_true")
    p.add_argument("--normalization", choices=["row", "joint"], default="row")
    p.add_argument("--frame-rate", type=float, default=25.0)
    p.add_argument("--out", required=True)

    p = command("classify", cmd_classify, "train on one feature table and label another")
    p.add_argument("--features", required=True)
    p.add_argument("--query", required=True)
    _add_model_args(p)
    p.add_argument("--save-model")
    p.add_argument("--out")

    p = command("evaluate", cmd_evaluate, "leave-one-out authorship attribution")
    p.add_argument("--features", required=True)
    p.add_argument("--protocol", choices=["loo"], default="loo")
    _add_model_args(p)
    p.add_argument("--out", help="directory for report, confusion and prediction tables")

    p = command("period", cmd_period, "leave-one-out production-period prediction")
    p.add_argument("--features", required=True)
    _add_model_args(p)
    p.add_argument("--out")

    p = command("ablate", cmd_ablate, "accuracy of single feature blocks")
    p.add_argument("--features", required=True)
    p.add_argument("--blocks", help="comma-separated block names; 'a+b' joins blocks, 'all' is the full vector")
    _add_model_args(p)
    p.add_argument("--out")

    p = command("importance", cmd_importance, "one-against-all forest importance per director")
    p.add_argument("--features", required=True)
    p.add_argument("--blocks")
    p.add_argument("--trees", type=int, default=200)
    p.add_argument("--max-features", choices=["sqrt", "all"], default="sqrt")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = command("embed", cmd_embed, "t-SNE map of the feature table")
    p.add_argument("--features", required=True)
    p.add_argument("--dims", type=int, choices=[2, 3], default=2)
    p.add_argument("--perplexity", type=float, default=15.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--learning-rate", type=float, default=200.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = command("trends", cmd_trends, "robust duration-vs-year trends per director")
    _add_corpus_args(p)
    p.add_argument("--statistic", choices=["mean", "median"], default="mean")
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = command("chords", cmd_chords, "per-director chord diagrams (SVG)")
    p.add_argument("--features", required=True)
    p.add_argument("--kind", choices=["duration", "scale"], default="duration")
    p.add_argument("--out", required=True)

    p = command("synth", cmd_synth, "generate a planted-truth benchmark corpus")
    p.add_argument("--profiles", type=int, default=6)
    p.add_argument("--films", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale-mode", type=int, choices=[3, 7], default=3)
    p.add_argument("--jitter", type=float, default=100.0, help="Dirichlet concentration; 0 disables")
    p.add_argument("--shared-scale", action="store_true")
    p.add_argument("--min-length", type=float, default=3600.0)
    p.add_argument("--max-length", type=float, default=6000.0)
    p.add_argument("--out", required=True)
    return parser


def _load_config(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise InputError(f"config {path}: expected a JSON object")
    return {k.replace("-", "_"): v for k, v in doc.items()}


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    config = _load_config(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    dests = set()
    for sp in subparsers.choices.values():
        names = {a.dest for a in sp._actions}
        dests |= names
        for a in sp._actions:
            if a.dest in config:
                # required options become optional once the config supplies them
                a.required = False
        sp.set_defaults(**{k: v for k, v in config.items() if k in names})
    unknown = sorted(set(config) - dests)
    if unknown:
        raise InputError(f"config {known.config}: unknown option(s) {unknown}")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ShotStyleError, ValueError, OSError, KeyError) as exc:
        code = exc.code if isinstance(exc, ShotStyleError) else type(exc).__name__
        print(json.dumps({"error": code, "message": str(exc), "exit": 2}), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit": 3}), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
