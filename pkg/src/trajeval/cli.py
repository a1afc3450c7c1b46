"""Command-line pipeline: synth -> tag -> predict-cv -> evaluate -> report.

Exit codes: 0 success, 1 internal failure, 2 bad input.  File arguments
accept ``-`` for standard streams where a single file is involved.
"""

import argparse
import dataclasses
import math
import os
import sys
import traceback
from typing import Iterable

from . import io as tio
from .baseline import NotPredictableError, predict_cv
from .core import HorizonGrid, Scene, TrajevalError, default_horizon_grid
from .metrics import MetricStore
from .synth import gen_scenes
from .tagging import TAG_ORDER, Tag, TagParams, TagSet, tag_frequencies, tag_track


def _in_stream(path: str):
    return sys.stdin if path == "-" else path


def _out_stream(path: str):
    return sys.stdout if path == "-" else path


def _info_stream(args):
    """Summaries go to stdout unless the data itself is written there."""
    return sys.stderr if getattr(args, "out", None) == "-" else sys.stdout


def load_tag_params(path: str) -> TagParams:
    """Read TagParams overrides from a ``key = value`` text file."""
    field_types = {f.name: f.type for f in dataclasses.fields(TagParams)}
    overrides = {}
    with open(path, encoding="utf-8") as fp:
        for line_no, raw in enumerate(fp, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise TrajevalError(f"{path}:{line_no}: expected 'key = value'")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in field_types:
                raise TrajevalError(f"{path}:{line_no}: unknown parameter {key!r}")
            try:
                overrides[key] = int(value) if field_types[key] in (int, "int") else float(value)
            except ValueError:
                raise TrajevalError(f"{path}:{line_no}: bad value for {key}: {value!r}") from None
    try:
        return TagParams(**overrides)
    except ValueError as e:
        raise TrajevalError(f"{path}: {e}") from None


def _scene_reader(args) -> tuple[Iterable[Scene], list]:
    skipped: list[tuple[int, Exception]] = []

    def on_skip(line_no, err):
        skipped.append((line_no, err))
        print(f"warning: skipped {err}", file=sys.stderr)

    scenes = tio.parse_scenes(_in_stream(args.scenes), lenient=args.lenient, on_skip=on_skip)
    return scenes, skipped


def _parse_pattern_arg(text: str) -> tuple[str, int]:
    pattern, sep, count = text.partition("=")
    if sep and not count.isdigit():
        raise TrajevalError(f"bad --pattern {text!r}: expected TAGS or TAGS=COUNT")
    return pattern.strip(), int(count) if sep else 1


def cmd_synth(args) -> int:
    composition = [_parse_pattern_arg(p) for p in args.pattern]
    records = []

    def scene_iter():
        for scene, expected in gen_scenes(composition, args.scenes, args.seed):
            for track in scene.tracks:
                records.append(tio.TagRecord(scene.scene_id, track.track_id, track.ru_class, expected[track.track_id]))
            yield scene

    tio.write_scenes(scene_iter(), _out_stream(args.out))
    if args.tags_out:
        tio.write_tags(records, _out_stream(args.tags_out))
    print(f"wrote {args.scenes} scenes ({len(records)} tracks) to {args.out}", file=_info_stream(args))
    return 0


def _print_frequency_table(tagsets: list[TagSet], out) -> None:
    n_ttp = sum(1 for ts in tagsets if Tag.TTP in ts)
    overall = tag_frequencies(tagsets)
    ttp = tag_frequencies(tagsets, restrict_to=Tag.TTP) if n_ttp else None
    print(f"tracks: {len(tagsets)} (TTP: {n_ttp})", file=out)
    print(f"{'tag':<4} {'name':<13} {'all':>8} {'TTP':>8}", file=out)
    for tag in TAG_ORDER:
        ttp_s = f"{100 * ttp[tag]:.2f}%" if ttp is not None else "-"
        print(f"{tag.value:<4} {tag.label:<13} {100 * overall[tag]:7.2f}% {ttp_s:>8}", file=out)
    if ttp is None:
        print("note: no TTP tracks, TTP column empty", file=sys.stderr)


def cmd_tag(args) -> int:
    params = load_tag_params(args.params) if args.params else TagParams()
    scenes, _skipped = _scene_reader(args)
    records = []
    tagsets = []
    n_scenes = 0
    for scene in scenes:
        n_scenes += 1
        for track in scene.tracks:
            tags = tag_track(track, params)
            records.append(tio.TagRecord(scene.scene_id, track.track_id, track.ru_class, tags))
            tagsets.append(tags)
    if n_scenes == 0:
        raise TrajevalError(f"no scenes in {args.scenes}")
    tio.write_tags(records, _out_stream(args.out))
    if not tagsets:
        raise TrajevalError(f"no tracks in {args.scenes}")
    _print_frequency_table(tagsets, _info_stream(args))
    return 0


def cmd_predict_cv(args) -> int:
    grid = default_horizon_grid()
    scenes, _skipped = _scene_reader(args)
    records = []
    skipped_tracks = 0
    for scene in scenes:
        for track in scene.tracks:
            try:
                prediction = predict_cv(track, grid)
            except NotPredictableError:
                skipped_tracks += 1
                continue
            records.append(tio.PredictionRecord(scene.scene_id, args.model, prediction))
    tio.write_predictions(grid.horizons, records, _out_stream(args.out))
    print(
        f"predicted {len(records)} tracks, skipped {skipped_tracks} (invalid at prediction origin)",
        file=_info_stream(args),
    )
    return 0


def _load_predictions(paths: list[str], grid: HorizonGrid):
    """records per model per scene: {model: {scene_id: [PredictionSet]}}"""
    by_model: dict[str, dict[str, list]] = {}
    keys = []
    for path in paths:
        horizons, records = tio.parse_predictions(path)
        if len(horizons) != len(grid) or any(
            not math.isclose(a, b, rel_tol=0.0, abs_tol=1e-9) for a, b in zip(horizons, grid.horizons)
        ):
            raise TrajevalError(f"{path}: declared horizons do not match the evaluation grid")
        for rec in records:
            by_model.setdefault(rec.model, {}).setdefault(rec.scene_id, []).append(rec.prediction)
            keys.append((rec.scene_id, rec.prediction.track_id, rec.model))
    return by_model, keys


def _evaluate_one_scene(scene: Scene, ctx) -> tuple:
    """Evaluate every model against one scene; returns mergeable partial results."""
    from .metrics import evaluate_scene

    seen = {(scene.scene_id, t.track_id) for t in scene.tracks}
    if ctx["ttp_only"]:
        kept = [
            track
            for track in scene.tracks
            if (rec := ctx["tags"].get((scene.scene_id, track.track_id))) is not None and Tag.TTP in rec.tags
        ]
        scene = Scene(scene.scene_id, scene.timestamps, scene.current_index, kept)
    population = {t.track_id for t in scene.tracks}
    missing_tags = []
    per_model = {}
    for model in ctx["models"]:
        store = MetricStore(fde_all_mode=ctx["fde_all_mode"])
        counters = {"evaluated": 0, "missing": 0, "no_future": 0}
        predictions = ctx["predictions"][model].get(scene.scene_id, [])
        if ctx["ttp_only"]:
            predictions = [p for p in predictions if p.track_id in population]
        result = evaluate_scene(scene, predictions, ctx["grid"])
        counters["missing"] += len(result.missing)
        for error in result.errors:
            rec = ctx["tags"].get((scene.scene_id, error.track_id))
            if rec is None:
                missing_tags.append((scene.scene_id, error.track_id))
                continue
            if rec.ru_class is not error.ru_class:
                raise TrajevalError(
                    f"tag record for {scene.scene_id}/{error.track_id} says {rec.ru_class.value}, "
                    f"scene says {error.ru_class.value}"
                )
            if not error.evaluated_horizons:
                counters["no_future"] += 1
                continue
            counters["evaluated"] += 1
            store.accumulate(error, rec.tags, model)
        per_model[model] = (store, counters)
    return per_model, seen, len(population), missing_tags


def cmd_evaluate(args) -> int:
    grid = default_horizon_grid()
    tag_records = tio.parse_tags(args.tags)
    tags = {(r.scene_id, r.track_id): r for r in tag_records}
    predictions, prediction_keys = _load_predictions(args.predictions, grid)
    models = sorted(predictions)
    ctx = {
        "grid": grid,
        "tags": tags,
        "predictions": predictions,
        "models": models,
        "ttp_only": args.ttp_only,
        "fde_all_mode": args.fde_all,
    }

    merged: dict[str, MetricStore] = {m: MetricStore(fde_all_mode=args.fde_all) for m in models}
    seen: set = set()
    missing_tags: list = []
    totals = {m: {"evaluated": 0, "missing": 0, "no_future": 0} for m in models}
    n_scenes = 0
    n_tracks = 0

    scenes, _skipped = _scene_reader(args)
    jobs = args.jobs or os.cpu_count() or 1
    for per_model, scene_seen, scene_tracks, scene_missing_tags in _map_scenes(scenes, ctx, jobs):
        n_scenes += 1
        n_tracks += scene_tracks
        seen |= scene_seen
        missing_tags.extend(scene_missing_tags)
        for model in models:
            store, counters = per_model[model]
            merged[model].merge(store)
            for k, v in counters.items():
                totals[model][k] += v

    if missing_tags:
        distinct = sorted(set(missing_tags))
        listing = ", ".join(f"{s}/{t}" for s, t in distinct[:20])
        raise TrajevalError(f"no tag record for {len(distinct)} evaluated tracks: {listing}")
    orphans = sorted({(s, t, m) for (s, t, m) in prediction_keys if (s, t) not in seen})
    if orphans:
        listing = ", ".join(f"{s}/{t} ({m})" for s, t, m in orphans[:20])
        raise TrajevalError(f"{len(orphans)} predictions reference unknown scenes/tracks: {listing}")

    out_store = MetricStore(fde_all_mode=args.fde_all)
    for model in models:
        out_store.merge(merged[model])
    cells = out_store.cells()
    tio.write_report(cells, _out_stream(args.out))
    if not cells:
        print("warning: no evaluated tracks, report is empty", file=sys.stderr)
    for model in models:
        t = totals[model]
        print(
            f"model={model} scenes={n_scenes} tracks={n_tracks} evaluated={t['evaluated']} "
            f"missing-prediction={t['missing']} no-valid-future={t['no_future']}",
            file=_info_stream(args),
        )
    return 0


def _map_scenes(scenes, ctx, jobs: int):
    if jobs <= 1:
        for scene in scenes:
            yield _evaluate_one_scene(scene, ctx)
        return
    import multiprocessing

    global _WORKER_CTX
    _WORKER_CTX = ctx
    try:
        pool = multiprocessing.Pool(jobs)
    except OSError as e:  # restricted environments
        print(f"warning: cannot start worker pool ({e}), running single-threaded", file=sys.stderr)
        for scene in scenes:
            yield _evaluate_one_scene(scene, ctx)
        return
    try:
        yield from pool.imap(_worker_eval, scenes, chunksize=16)
    finally:
        pool.close()
        pool.join()


_WORKER_CTX = None


def _worker_eval(scene):
    return _evaluate_one_scene(scene, _WORKER_CTX)


def cmd_report(args) -> int:
    cells = tio.parse_report(_in_stream(args.metrics))
    if args.format == "machine":
        tio.write_report(cells, _out_stream(args.out))
    else:
        tio.write_text(tio.render_report(cells, group_by=args.group_by), _out_stream(args.out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajeval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic scenes with known tags")
    p.add_argument("--pattern", action="append", required=True, metavar="TAGS[=COUNT]",
                   help="per-scene track pattern, e.g. T5=3 or T3+T2 (repeatable)")
    p.add_argument("--scenes", type=int, default=1, help="number of scenes to generate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="scene file to write ('-' for stdout)")
    p.add_argument("--tags-out", help="sidecar file with the declared tags per track")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("tag", help="tag tracks and print tag frequencies")
    p.add_argument("--scenes", required=True, help="scene file ('-' for stdin)")
    p.add_argument("--out", required=True, help="tag file to write ('-' for stdout)")
    p.add_argument("--params", help="TagParams overrides (key = value lines)")
    p.add_argument("--lenient", action="store_true", help="skip malformed scene lines")
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("predict-cv", help="constant-velocity predictions for every track")
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", default="cv", help="model name stored in the prediction records")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_predict_cv)

    p = sub.add_parser("evaluate", help="score prediction files against scenes")
    p.add_argument("--scenes", required=True)
    p.add_argument("--predictions", action="append", required=True, help="prediction file (repeatable)")
    p.add_argument("--tags", required=True, help="tag file produced by 'tag'")
    p.add_argument("--out", required=True, help="metric report CSV")
    p.add_argument("--grid", choices=["default"], default="default")
    p.add_argument("--ttp-only", action="store_true", help="evaluate only tracks tagged TTP")
    p.add_argument("--fde-all", choices=["final", "mean"], default="final",
                   help="all-horizons minFDE: final evaluated horizon or mean over horizons")
    p.add_argument("--jobs", type=int, default=0, help="worker processes (0 = all cores)")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render a metric report")
    p.add_argument("--metrics", required=True, help="metric report CSV ('-' for stdin)")
    p.add_argument("--format", choices=["human", "machine"], default="human")
    p.add_argument("--group-by", choices=["tag", "horizon"], default="horizon")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except TrajevalError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
