"""Displacement metrics and their aggregation.

Both metrics score the best of the K candidate trajectories for one track.
The average displacement error at a horizon averages the point-wise error
over every earlier grid horizon with valid ground truth, with the minimum
taken over whole trajectories, so one candidate is charged for the entire
prefix.  The final displacement error looks at a single horizon.  Results
are aggregated into (model, class, tag, horizon, metric) cells carrying
count/mean/std/max, built on a mergeable accumulator so partial runs can
be combined.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import CURRENT_INDEX, HorizonGrid, PredictionSet, RUClass, Scene, Track, TrajevalError
from .tagging import TAG_ORDER, Tag, TagSet


class Metric(Enum):
    MIN_ADE = "minADE"
    MIN_FDE = "minFDE"


class NotEvaluableError(TrajevalError):
    """Ground truth is missing at every horizon the metric would use."""


class UnknownTrackError(TrajevalError):
    """A prediction references a track id the scene does not contain."""


def _check_grid_match(preds: PredictionSet, grid: HorizonGrid) -> None:
    if preds.n_horizons != len(grid):
        raise ValueError(
            f"prediction {preds.track_id!r} has {preds.n_horizons} points per trajectory, "
            f"grid has {len(grid)} horizons"
        )


def displacement_matrix(track: Track, preds: PredictionSet, grid: HorizonGrid) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode, per-horizon Euclidean error plus the ground-truth validity row.

    Returns ``(dist, gt_valid)`` with ``dist`` of shape (K, H); columns
    where ``gt_valid`` is false are zero filler and must not be read.
    """
    _check_grid_match(preds, grid)
    frames = CURRENT_INDEX + np.asarray(grid.frame_offsets)
    gt_valid = track.valid[frames]
    diff = preds.trajectories - track.xy[frames][None, :, :]
    dist = np.hypot(diff[:, :, 0], diff[:, :, 1])
    dist[:, ~gt_valid] = 0.0
    return dist, gt_valid


def min_ade(track: Track, preds: PredictionSet, grid: HorizonGrid, horizon: float) -> float:
    """Best-of-K average displacement error up to ``horizon``.

    Averages over the grid horizons at or before ``horizon`` where ground
    truth is valid; raises :class:`NotEvaluableError` when there are none.
    """
    dist, gt_valid = displacement_matrix(track, preds, grid)
    stop = grid.index_of(horizon) + 1
    cols = np.flatnonzero(gt_valid[:stop])
    if cols.size == 0:
        raise NotEvaluableError(f"track {track.track_id!r}: no valid ground truth at or before {horizon} s")
    return float(dist[:, cols].mean(axis=1).min())


def min_fde(track: Track, preds: PredictionSet, grid: HorizonGrid, horizon: float) -> float:
    """Best-of-K displacement error at exactly ``horizon``."""
    dist, gt_valid = displacement_matrix(track, preds, grid)
    i = grid.index_of(horizon)
    if not gt_valid[i]:
        raise NotEvaluableError(f"track {track.track_id!r}: ground truth invalid at {horizon} s")
    return float(dist[:, i].min())


@dataclass(frozen=True, slots=True)
class PerTrackError:
    """All metric values for one (track, prediction) pair.

    ``minade`` is keyed by every horizon with at least one valid ground
    truth point at or before it; ``minfde`` and ``evaluated_horizons``
    cover exactly the horizons with valid ground truth.
    """

    track_id: str
    ru_class: RUClass
    minade: dict[float, float]
    minfde: dict[float, float]
    evaluated_horizons: tuple[float, ...]


@dataclass(frozen=True, slots=True)
class SceneEvaluation:
    scene_id: str
    errors: tuple[PerTrackError, ...]
    missing: tuple[str, ...]  # scene tracks with no prediction


def evaluate_pair(track: Track, preds: PredictionSet, grid: HorizonGrid) -> PerTrackError:
    """Metric values for one track against one prediction set, at every grid horizon."""
    dist, gt_valid = displacement_matrix(track, preds, grid)
    minade: dict[float, float] = {}
    minfde: dict[float, float] = {}
    evaluated = []
    running = np.zeros(dist.shape[0])
    n_included = 0
    for i, h in enumerate(grid.horizons):
        if gt_valid[i]:
            running = running + dist[:, i]
            n_included += 1
            minfde[h] = float(dist[:, i].min())
            evaluated.append(h)
        if n_included:
            minade[h] = float((running / n_included).min())
    return PerTrackError(
        track_id=track.track_id,
        ru_class=track.ru_class,
        minade=minade,
        minfde=minfde,
        evaluated_horizons=tuple(evaluated),
    )


def evaluate_scene(scene: Scene, predictions: list[PredictionSet], grid: HorizonGrid) -> SceneEvaluation:
    """Score every prediction against its scene track.

    Tracks without a prediction are listed in ``missing`` rather than
    silently dropped; predictions for ids the scene does not know raise
    :class:`UnknownTrackError` naming every orphan.
    """
    known = {t.track_id for t in scene.tracks}
    orphans = sorted({p.track_id for p in predictions} - known)
    if orphans:
        raise UnknownTrackError(f"scene {scene.scene_id!r}: predictions for unknown tracks {orphans}")
    errors = []
    predicted = set()
    for preds in predictions:
        predicted.add(preds.track_id)
        errors.append(evaluate_pair(scene.track_by_id(preds.track_id), preds, grid))
    errors.sort(key=lambda e: e.track_id)
    missing = tuple(sorted(known - predicted))
    return SceneEvaluation(scene.scene_id, tuple(errors), missing)


class StreamStats:
    """Mergeable (count, sum, sum-of-squares, min, max) accumulator."""

    __slots__ = ("count", "total", "total_sq", "minimum", "maximum")

    def __init__(self):
        self.count = 0
        self.total = 0.0
        self.total_sq = 0.0
        self.minimum = math.inf
        self.maximum = -math.inf

    def add(self, value: float) -> None:
        self.count += 1
        self.total += value
        self.total_sq += value * value
        if value < self.minimum:
            self.minimum = value
        if value > self.maximum:
            self.maximum = value

    def merge(self, other: "StreamStats") -> None:
        self.count += other.count
        self.total += other.total
        self.total_sq += other.total_sq
        if other.minimum < self.minimum:
            self.minimum = other.minimum
        if other.maximum > self.maximum:
            self.maximum = other.maximum

    @property
    def mean(self) -> float:
        # clamped into the observed range to absorb float drift of the sum
        return min(max(self.total / self.count, self.minimum), self.maximum)

    @property
    def std(self) -> float:
        """Population standard deviation (zero for a single sample)."""
        if self.minimum == self.maximum:
            return 0.0  # constant stream; the sum-of-squares form would leave noise
        m = self.total / self.count
        return math.sqrt(max(0.0, self.total_sq / self.count - m * m))


# aggregation keys: None stands for the unconditioned "ALL" row
CellKey = tuple[str, RUClass, "Tag | None", "float | None", Metric]

_CLASS_ORDER = {c: i for i, c in enumerate(RUClass)}
_TAG_SORT = {tag: i for i, tag in enumerate(TAG_ORDER)}
_METRIC_ORDER = {m: i for i, m in enumerate(Metric)}


def _key_sort(key: CellKey):
    model, ru_class, tag, horizon, metric = key
    return (
        model,
        _CLASS_ORDER[ru_class],
        -1 if tag is None else _TAG_SORT[tag],
        (-math.inf if horizon is None else horizon),
        _METRIC_ORDER[metric],
    )


@dataclass(frozen=True, slots=True)
class MetricCell:
    """One aggregated report cell."""

    model: str
    ru_class: RUClass
    tag: Tag | None
    horizon: float | None
    metric: Metric
    count: int
    mean: float
    std: float
    max: float

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("cells are only emitted once they hold a sample")
        if self.std < 0 or self.max < self.mean:
            raise ValueError("inconsistent cell statistics")


class MetricStore:
    """Accumulates per-track errors into report cells.

    The all-horizons row averages each track's per-horizon minADE over its
    evaluated horizons before accumulating; for minFDE it takes the final
    evaluated horizon by default (``fde_all_mode="mean"`` averages across
    horizons instead).  Stores for disjoint work chunks can be merged.
    """

    def __init__(self, fde_all_mode: str = "final"):
        if fde_all_mode not in ("final", "mean"):
            raise ValueError(f"unknown fde_all_mode {fde_all_mode!r}")
        self.fde_all_mode = fde_all_mode
        self._cells: dict[CellKey, StreamStats] = {}

    def _add(self, key: CellKey, value: float) -> None:
        stats = self._cells.get(key)
        if stats is None:
            stats = self._cells[key] = StreamStats()
        stats.add(value)

    def accumulate(self, error: PerTrackError, tags: TagSet, model: str) -> None:
        if not error.evaluated_horizons:
            return
        ade_all = sum(error.minade[h] for h in error.evaluated_horizons) / len(error.evaluated_horizons)
        if self.fde_all_mode == "final":
            fde_all = error.minfde[error.evaluated_horizons[-1]]
        else:
            fde_all = sum(error.minfde.values()) / len(error.minfde)
        for tag in [*tags, None]:
            for h, v in error.minade.items():
                self._add((model, error.ru_class, tag, h, Metric.MIN_ADE), v)
            for h, v in error.minfde.items():
                self._add((model, error.ru_class, tag, h, Metric.MIN_FDE), v)
            self._add((model, error.ru_class, tag, None, Metric.MIN_ADE), ade_all)
            self._add((model, error.ru_class, tag, None, Metric.MIN_FDE), fde_all)

    def merge(self, other: "MetricStore") -> None:
        if other.fde_all_mode != self.fde_all_mode:
            raise ValueError("cannot merge stores with different fde_all_mode")
        for key, stats in other._cells.items():
            mine = self._cells.get(key)
            if mine is None:
                mine = self._cells[key] = StreamStats()
            mine.merge(stats)

    def __len__(self) -> int:
        return len(self._cells)

    def cells(self) -> list[MetricCell]:
        """All non-empty cells in stable report order."""
        out = []
        for key in sorted(self._cells, key=_key_sort):
            model, ru_class, tag, horizon, metric = key
            stats = self._cells[key]
            out.append(
                MetricCell(
                    model=model,
                    ru_class=ru_class,
                    tag=tag,
                    horizon=horizon,
                    metric=metric,
                    count=stats.count,
                    mean=stats.mean,
                    std=stats.std,
                    max=stats.maximum,
                )
            )
        return out
