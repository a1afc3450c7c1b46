"""File formats: scenes, predictions, tags and metric reports.

Scenes, predictions and tags are newline-delimited JSON (UTF-8, one record
per line); metric reports are long-format CSV.  Floats are serialized with
enough digits to round-trip exactly.  Parsers report the line number and the
field path of the first problem; scene parsing can alternatively skip and
count malformed lines.

Scene records::

    {"scene_id": ..., "timestamps": [... 91 ...], "current_index": 10,
     "tracks": [{"id": ..., "class": "vehicle|pedestrian|cyclist",
                 "is_ttp": false, "states": [... 91 ...]}]}

A state is ``{"x", "y", "vx", "vy", "heading", "valid"}``; invalid states
shrink to ``{"valid": false}``.  ``vx``/``vy`` may be omitted for
position-only sources (velocities are then synthesized by finite
differences) and a missing ``heading`` defaults to zero.

Prediction files start with a header line declaring the horizon grid::

    {"format": "trajeval-predictions", "version": 1, "horizons": [...]}
    {"scene_id": ..., "track_id": ..., "model": ...,
     "trajectories": [[[x, y] per horizon] per mode], "confidences": [...]}

Tag records are ``{"scene_id", "track_id", "ru_class", "tags": ["T5", ...]}``.
"""

import csv
import json
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .core import (
    CURRENT_INDEX,
    N_FRAMES,
    PredictionSet,
    RUClass,
    Scene,
    Track,
    TrajevalError,
    synthesize_velocities,
)
from .metrics import Metric, MetricCell, _key_sort
from .tagging import TAG_ORDER, Tag, TagSet


class FormatError(TrajevalError):
    """Malformed input file; the message carries line number and field path."""

    def __init__(self, problem: str, line_no: int | None = None, path: str | None = None):
        parts = []
        if line_no is not None:
            parts.append(f"line {line_no}")
        if path:
            parts.append(path)
        parts.append(problem)
        super().__init__(": ".join(parts))
        self.line_no = line_no
        self.path = path


@contextmanager
def _opened(source, mode: str):
    if hasattr(source, "read") or hasattr(source, "write"):
        yield source
    else:
        with open(source, mode, encoding="utf-8", newline="") as fp:
            yield fp


def _require(obj: dict, key: str, line_no: int, path: str):
    if not isinstance(obj, dict):
        raise FormatError("expected an object", line_no, path)
    if key not in obj:
        raise FormatError(f"missing field {key!r}", line_no, path)
    return obj[key]


def _num(value, line_no: int, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError("expected a number", line_no, path)
    return float(value)


def _boolean(value, line_no: int, path: str) -> bool:
    if not isinstance(value, bool):
        raise FormatError("expected a boolean", line_no, path)
    return value


def _string(value, line_no: int, path: str) -> str:
    if not isinstance(value, str):
        raise FormatError("expected a string", line_no, path)
    return value


def _array(value, line_no: int, path: str) -> list:
    if not isinstance(value, list):
        raise FormatError("expected an array", line_no, path)
    return value


def _json_line(line: str, line_no: int):
    try:
        return json.loads(line)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON ({e.msg})", line_no) from None


# ---------------------------------------------------------------- scenes

def _parse_track(obj, line_no: int, path: str) -> Track:
    track_id = _string(_require(obj, "id", line_no, path), line_no, f"{path}.id")
    class_name = _string(_require(obj, "class", line_no, path), line_no, f"{path}.class")
    try:
        ru_class = RUClass(class_name)
    except ValueError:
        raise FormatError(f"unknown class {class_name!r}", line_no, f"{path}.class") from None
    is_ttp = _boolean(_require(obj, "is_ttp", line_no, path), line_no, f"{path}.is_ttp")
    states = _array(_require(obj, "states", line_no, path), line_no, f"{path}.states")
    if len(states) != N_FRAMES:
        raise FormatError(f"expected {N_FRAMES} states, got {len(states)}", line_no, f"{path}.states")

    xy = np.zeros((N_FRAMES, 2))
    vxy = np.zeros((N_FRAMES, 2))
    heading = np.zeros(N_FRAMES)
    valid = np.zeros(N_FRAMES, dtype=bool)
    have_velocity = True
    for i, state in enumerate(states):
        spath = f"{path}.states[{i}]"
        valid[i] = _boolean(_require(state, "valid", line_no, spath), line_no, f"{spath}.valid")
        if not valid[i]:
            continue
        xy[i, 0] = _num(_require(state, "x", line_no, spath), line_no, f"{spath}.x")
        xy[i, 1] = _num(_require(state, "y", line_no, spath), line_no, f"{spath}.y")
        if "vx" in state and "vy" in state:
            vxy[i, 0] = _num(state["vx"], line_no, f"{spath}.vx")
            vxy[i, 1] = _num(state["vy"], line_no, f"{spath}.vy")
        else:
            have_velocity = False
        if "heading" in state:
            heading[i] = _num(state["heading"], line_no, f"{spath}.heading")
    if not have_velocity:
        vxy = synthesize_velocities(xy, valid)
    try:
        return Track(track_id, ru_class, xy, vxy, heading, valid, is_ttp)
    except ValueError as e:
        raise FormatError(str(e), line_no, path) from None


def parse_scene_line(line: str, line_no: int = 0) -> Scene:
    obj = _json_line(line, line_no)
    scene_id = _string(_require(obj, "scene_id", line_no, "scene_id"), line_no, "scene_id")
    timestamps = _array(_require(obj, "timestamps", line_no, ""), line_no, "timestamps")
    stamps = [_num(v, line_no, f"timestamps[{i}]") for i, v in enumerate(timestamps)]
    current = _require(obj, "current_index", line_no, "")
    if isinstance(current, bool) or not isinstance(current, int):
        raise FormatError("expected an integer", line_no, "current_index")
    tracks_obj = _array(_require(obj, "tracks", line_no, ""), line_no, "tracks")
    tracks = [_parse_track(t, line_no, f"tracks[{i}]") for i, t in enumerate(tracks_obj)]
    try:
        return Scene(scene_id, np.asarray(stamps), current, tracks)
    except ValueError as e:
        raise FormatError(str(e), line_no) from None


def parse_scenes(source, lenient: bool = False, on_skip=None) -> Iterator[Scene]:
    """Stream scenes from a file path or text stream.

    Strict mode raises :class:`FormatError` on the first malformed line;
    lenient mode skips it, invoking ``on_skip(line_no, error)`` if given.
    Memory stays bounded by one scene regardless of file size.
    """
    with _opened(source, "r") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                yield parse_scene_line(line, line_no)
            except FormatError as e:
                if not lenient:
                    raise
                if on_skip is not None:
                    on_skip(line_no, e)


def _state_objs(track: Track) -> list:
    xs, ys = track.xy[:, 0].tolist(), track.xy[:, 1].tolist()
    vxs, vys = track.vxy[:, 0].tolist(), track.vxy[:, 1].tolist()
    hs, vs = track.heading.tolist(), track.valid.tolist()
    return [
        {"x": xs[i], "y": ys[i], "vx": vxs[i], "vy": vys[i], "heading": hs[i], "valid": True}
        if vs[i]
        else {"valid": False}
        for i in range(N_FRAMES)
    ]


def scene_to_line(scene: Scene) -> str:
    obj = {
        "scene_id": scene.scene_id,
        "timestamps": scene.timestamps.tolist(),
        "current_index": CURRENT_INDEX,
        "tracks": [
            {"id": t.track_id, "class": t.ru_class.value, "is_ttp": t.is_ttp, "states": _state_objs(t)}
            for t in scene.tracks
        ],
    }
    return json.dumps(obj, separators=(",", ":"))


def write_scenes(scenes: Iterable[Scene], dest) -> int:
    n = 0
    with _opened(dest, "w") as fp:
        for scene in scenes:
            fp.write(scene_to_line(scene))
            fp.write("\n")
            n += 1
    return n


def write_text(text: str, dest) -> None:
    with _opened(dest, "w") as fp:
        fp.write(text)


# ----------------------------------------------------------- predictions

PREDICTION_FORMAT = "trajeval-predictions"


@dataclass(frozen=True, slots=True)
class PredictionRecord:
    scene_id: str
    model: str
    prediction: PredictionSet


def write_predictions(horizons: Iterable[float], records: Iterable[PredictionRecord], dest) -> int:
    n = 0
    with _opened(dest, "w") as fp:
        header = {"format": PREDICTION_FORMAT, "version": 1, "horizons": [float(h) for h in horizons]}
        fp.write(json.dumps(header, separators=(",", ":")))
        fp.write("\n")
        for rec in records:
            obj = {
                "scene_id": rec.scene_id,
                "track_id": rec.prediction.track_id,
                "model": rec.model,
                "trajectories": rec.prediction.trajectories.tolist(),
                "confidences": rec.prediction.confidences.tolist(),
            }
            fp.write(json.dumps(obj, separators=(",", ":")))
            fp.write("\n")
            n += 1
    return n


def parse_predictions(source) -> tuple[tuple[float, ...], list[PredictionRecord]]:
    """Read a prediction file; returns (declared horizons, records)."""
    with _opened(source, "r") as fp:
        header_line = fp.readline()
        if not header_line.strip():
            raise FormatError("empty prediction file (missing header)", 1)
        header = _json_line(header_line, 1)
        if _require(header, "format", 1, "") != PREDICTION_FORMAT:
            raise FormatError(f"not a {PREDICTION_FORMAT} file", 1, "format")
        horizons = tuple(
            _num(v, 1, f"horizons[{i}]")
            for i, v in enumerate(_array(_require(header, "horizons", 1, ""), 1, "horizons"))
        )
        records = []
        for line_no, line in enumerate(fp, start=2):
            if not line.strip():
                continue
            obj = _json_line(line, line_no)
            scene_id = _string(_require(obj, "scene_id", line_no, ""), line_no, "scene_id")
            track_id = _string(_require(obj, "track_id", line_no, ""), line_no, "track_id")
            model = _string(_require(obj, "model", line_no, ""), line_no, "model")
            trajs = _array(_require(obj, "trajectories", line_no, ""), line_no, "trajectories")
            for k, traj in enumerate(trajs):
                traj = _array(traj, line_no, f"trajectories[{k}]")
                if len(traj) != len(horizons):
                    raise FormatError(
                        f"trajectory has {len(traj)} points, header declares {len(horizons)} horizons",
                        line_no,
                        f"trajectories[{k}]",
                    )
            confidences = _array(_require(obj, "confidences", line_no, ""), line_no, "confidences")
            try:
                prediction = PredictionSet(track_id, np.asarray(trajs, dtype=float), np.asarray(confidences, dtype=float))
            except ValueError as e:
                raise FormatError(str(e), line_no) from None
            records.append(PredictionRecord(scene_id, model, prediction))
    return horizons, records


# ------------------------------------------------------------------ tags

@dataclass(frozen=True, slots=True)
class TagRecord:
    scene_id: str
    track_id: str
    ru_class: RUClass
    tags: TagSet


def write_tags(records: Iterable[TagRecord], dest) -> int:
    n = 0
    with _opened(dest, "w") as fp:
        for rec in records:
            obj = {
                "scene_id": rec.scene_id,
                "track_id": rec.track_id,
                "ru_class": rec.ru_class.value,
                "tags": list(rec.tags.codes()),
            }
            fp.write(json.dumps(obj, separators=(",", ":")))
            fp.write("\n")
            n += 1
    return n


def parse_tags(source) -> list[TagRecord]:
    records = []
    with _opened(source, "r") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            obj = _json_line(line, line_no)
            scene_id = _string(_require(obj, "scene_id", line_no, ""), line_no, "scene_id")
            track_id = _string(_require(obj, "track_id", line_no, ""), line_no, "track_id")
            class_name = _string(_require(obj, "ru_class", line_no, ""), line_no, "ru_class")
            try:
                ru_class = RUClass(class_name)
            except ValueError:
                raise FormatError(f"unknown class {class_name!r}", line_no, "ru_class") from None
            codes = _array(_require(obj, "tags", line_no, ""), line_no, "tags")
            try:
                tags = TagSet.from_codes(_string(c, line_no, f"tags[{i}]") for i, c in enumerate(codes))
            except ValueError as e:
                raise FormatError(str(e), line_no, "tags") from None
            records.append(TagRecord(scene_id, track_id, ru_class, tags))
    return records


# --------------------------------------------------------------- reports

REPORT_COLUMNS = ("model", "ru_class", "tag", "horizon", "metric", "count", "mean", "std", "max")
ALL_TOKEN = "ALL"


def write_report(cells: Iterable[MetricCell], dest) -> int:
    """Machine-readable long-format CSV, stable-ordered, full precision."""
    cells = sorted(cells, key=lambda c: _key_sort((c.model, c.ru_class, c.tag, c.horizon, c.metric)))
    with _opened(dest, "w") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for c in cells:
            writer.writerow(
                [
                    c.model,
                    c.ru_class.value,
                    ALL_TOKEN if c.tag is None else c.tag.value,
                    ALL_TOKEN if c.horizon is None else repr(c.horizon),
                    c.metric.value,
                    c.count,
                    repr(c.mean),
                    repr(c.std),
                    repr(c.max),
                ]
            )
    return len(cells)


def parse_report(source) -> list[MetricCell]:
    cells = []
    with _opened(source, "r") as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if header != list(REPORT_COLUMNS):
            raise FormatError(f"expected header {','.join(REPORT_COLUMNS)}", 1)
        by_code = {tag.value: tag for tag in Tag}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(REPORT_COLUMNS):
                raise FormatError(f"expected {len(REPORT_COLUMNS)} columns, got {len(row)}", line_no)
            model, class_name, tag_s, horizon_s, metric_s, count_s, mean_s, std_s, max_s = row
            try:
                cells.append(
                    MetricCell(
                        model=model,
                        ru_class=RUClass(class_name),
                        tag=None if tag_s == ALL_TOKEN else by_code[tag_s],
                        horizon=None if horizon_s == ALL_TOKEN else float(horizon_s),
                        metric=Metric(metric_s),
                        count=int(count_s),
                        mean=float(mean_s),
                        std=float(std_s),
                        max=float(max_s),
                    )
                )
            except (ValueError, KeyError) as e:
                raise FormatError(f"bad cell ({e})", line_no) from None
    return cells


def _column_label(key, group_by: str) -> str:
    if key is None:
        return ALL_TOKEN
    if group_by == "tag":
        return key.value
    return f"{key:.1f}s"


def render_report(cells: Iterable[MetricCell], group_by: str = "tag") -> str:
    """Human-readable grouped table.

    ``group_by="tag"`` shows the all-horizons mean per tag column;
    ``group_by="horizon"`` shows mean/std/max per horizon column for the
    unconditioned tag population.  Values are in meters with 3 decimals;
    per column, ``*`` marks the lowest and ``!`` the highest mean across
    models (only when models disagree).
    """
    if group_by not in ("tag", "horizon"):
        raise TrajevalError(f"unknown group key {group_by!r} (expected 'tag' or 'horizon')")
    cells = list(cells)
    if group_by == "tag":
        selected = [c for c in cells if c.horizon is None]
        columns = [None, *TAG_ORDER]
        columns = [k for k in columns if k is None or any(c.tag is k for c in selected)]
        key_of = lambda c: c.tag
    else:
        selected = [c for c in cells if c.tag is None]
        columns = [None, *sorted({c.horizon for c in selected if c.horizon is not None})]
        key_of = lambda c: c.horizon

    models = sorted({c.model for c in selected})
    table: dict[tuple, MetricCell] = {}
    rows_by_model: dict[str, list[tuple[RUClass, Metric]]] = {m: [] for m in models}
    for c in selected:
        table[(c.model, c.ru_class, c.metric, key_of(c))] = c
        row = (c.ru_class, c.metric)
        if row not in rows_by_model[c.model]:
            rows_by_model[c.model].append(row)
    class_order = {cls: i for i, cls in enumerate(RUClass)}
    metric_order = {m: i for i, m in enumerate(Metric)}
    for m in models:
        rows_by_model[m].sort(key=lambda r: (class_order[r[0]], metric_order[r[1]]))

    def fmt(cell: MetricCell | None) -> str:
        if cell is None:
            return "-"
        if group_by == "horizon":
            return f"{cell.mean:.3f}/{cell.std:.3f}/{cell.max:.3f}"
        return f"{cell.mean:.3f}"

    marked: dict[tuple, str] = {}
    if len(models) > 1:
        for ru_class in RUClass:
            for metric in Metric:
                for col in columns:
                    present = {m: table.get((m, ru_class, metric, col)) for m in models}
                    means = {m: c.mean for m, c in present.items() if c is not None}
                    if len(means) < 2 or min(means.values()) == max(means.values()):
                        continue
                    lo, hi = min(means.values()), max(means.values())
                    for m, v in means.items():
                        if v == lo:
                            marked[(m, ru_class, metric, col)] = "*"
                        elif v == hi:
                            marked[(m, ru_class, metric, col)] = "!"

    headers = ["class", "metric", *(_column_label(c, group_by) for c in columns)]
    body_by_model = {}
    for m in models:
        body = []
        for ru_class, metric in rows_by_model[m]:
            row = [ru_class.value, metric.value]
            for col in columns:
                cell = table.get((m, ru_class, metric, col))
                row.append(marked.get((m, ru_class, metric, col), "") + fmt(cell))
            body.append(row)
        body_by_model[m] = body

    widths = [len(h) for h in headers]
    for body in body_by_model.values():
        for row in body:
            for i, value in enumerate(row):
                widths[i] = max(widths[i], len(value))

    def fmt_row(row):
        left = [row[0].ljust(widths[0]), row[1].ljust(widths[1])]
        right = [v.rjust(w) for v, w in zip(row[2:], widths[2:])]
        return "  ".join(left + right).rstrip()

    lines = []
    if group_by == "tag":
        lines.append("mean error [m] over all evaluated horizons, by tag")
    else:
        lines.append("mean/std/max error [m] by prediction horizon")
    if len(models) > 1:
        lines.append("markers: * lowest, ! highest mean per column across models")
    lines.append("")
    for m in models:
        lines.append(f"model: {m}")
        lines.append(fmt_row(headers))
        for row in body_by_model[m]:
            lines.append(fmt_row(row))
        lines.append("")
    if group_by == "tag":
        legend = "  ".join(f"{tag.value}={tag.label}" for tag in TAG_ORDER)
        lines.append(f"tags: {legend}")
        lines.append("")
    return "\n".join(lines)
