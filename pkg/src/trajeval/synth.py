"""Seeded generator of scenes with known tags and known prediction errors.

Tracks are built from kinematic templates (constant velocity, ramp up/down,
circular arcs, small-radius wander, stand-still) combined with observation
validity patterns, so the full tag set of every generated track is known by
construction under default :class:`~trajeval.tagging.TagParams`.  All
template parameters keep a wide margin to every tagging threshold, which
makes the declared tags stable under rigid transforms.

Patterns are written as '+'-joined tag codes: ``"T5"``, ``"T3+T2"``,
``"T1+T7+T10"``.  Unrequested dimensions default to full observation and
NTTP; the declared tag set also contains whatever the template implies
(e.g. a plain ``"T3"`` track is also ``T8`` and ``T11``).
"""

import math
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .core import (
    CURRENT_INDEX,
    FRAME_DT_S,
    HorizonGrid,
    N_FRAMES,
    N_OBSERVED,
    PredictionSet,
    RUClass,
    Scene,
    Track,
    TrajevalError,
    wrap_heading,
)
from .tagging import Tag, TagSet

# margins around the default stillness threshold (0.01 m/s): template frames
# are either exactly still or at least MOVING_SPEED_MIN fast
MOVING_SPEED_MIN = 0.02

_T = np.arange(N_FRAMES) * FRAME_DT_S - CURRENT_INDEX * FRAME_DT_S  # seconds from origin

_BEHAVIOR = {Tag.STARTING, Tag.STOPPING, Tag.STILL}
_SHAPE = {Tag.STRAIGHT, Tag.NON_STRAIGHT}
_OBS = {Tag.LATE, Tag.VERY_LATE, Tag.FULL, Tag.REAPPEARANCE}


class UnsatisfiablePatternError(TrajevalError):
    """The requested tag combination cannot be realized by any track."""


def parse_pattern(pattern: "str | Iterable[Tag]") -> frozenset[Tag]:
    if isinstance(pattern, str):
        codes = [p.strip() for p in pattern.split("+") if p.strip()]
        by_code = {tag.value: tag for tag in Tag}
        try:
            tags = frozenset(by_code[c] for c in codes)
        except KeyError as e:
            raise TrajevalError(f"unknown tag code {e.args[0]!r} in pattern {pattern!r}") from None
    else:
        tags = frozenset(pattern)
    validate_pattern(tags)
    return tags


def validate_pattern(tags: frozenset[Tag]) -> None:
    def conflict(*bad: Tag):
        codes = ", ".join(t.value for t in sorted(bad, key=list(Tag).index))
        raise UnsatisfiablePatternError(f"conflicting tags: {codes}")

    if Tag.STRAIGHT in tags and Tag.NON_STRAIGHT in tags:
        conflict(Tag.STRAIGHT, Tag.NON_STRAIGHT)
    behavior = tags & _BEHAVIOR
    if len(behavior) > 1:
        conflict(*behavior)
    if Tag.STILL in tags and (tags & _SHAPE):
        conflict(Tag.STILL, *(tags & _SHAPE))  # a still track never moves a full chord
    if Tag.TTP in tags and Tag.NTTP in tags:
        conflict(Tag.TTP, Tag.NTTP)
    if Tag.FULL in tags and (tags & (_OBS - {Tag.FULL})):
        conflict(Tag.FULL, *(tags & (_OBS - {Tag.FULL})))
    if Tag.REAPPEARANCE in tags and (tags & {Tag.LATE, Tag.VERY_LATE}):
        conflict(Tag.REAPPEARANCE, *(tags & {Tag.LATE, Tag.VERY_LATE}))


def declared_tags(pattern: frozenset[Tag]) -> TagSet:
    """The full tag set a track generated for ``pattern`` will carry."""
    validate_pattern(pattern)
    tags = set(pattern)
    if Tag.VERY_LATE in tags:
        tags.add(Tag.LATE)
    if not tags & _OBS:
        tags.add(Tag.FULL)
    if Tag.TTP not in tags:
        tags.add(Tag.NTTP)
    return TagSet(frozenset(tags))


def _ramp_profile(rise: bool, t0: float, ramp: float, v: float) -> tuple[np.ndarray, np.ndarray]:
    """(distance, speed) over the frame times for a speed ramp at t0."""
    t = _T
    if rise:
        s = np.clip((t - t0) / ramp, 0.0, 1.0) * v
        dist = np.where(
            t <= t0,
            0.0,
            np.where(t <= t0 + ramp, 0.5 * (t - t0) ** 2 * v / ramp, v * (t - t0 - 0.5 * ramp)),
        )
    else:
        s = v - np.clip((t - t0) / ramp, 0.0, 1.0) * v
        dist = v * (t - t[0]) - np.where(
            t <= t0,
            0.0,
            np.where(t <= t0 + ramp, 0.5 * (t - t0) ** 2 * v / ramp, v * (t - t0 - 0.5 * ramp)),
        )
    return dist, s


def _clamp_speeds(vxy: np.ndarray) -> np.ndarray:
    """Push per-frame speeds away from the stillness threshold."""
    sp = np.hypot(vxy[:, 0], vxy[:, 1])
    out = vxy.copy()
    out[sp <= 0.01] = 0.0
    squeeze = (sp > 0.01) & (sp < MOVING_SPEED_MIN)
    out[squeeze] *= (MOVING_SPEED_MIN / sp[squeeze])[:, None]
    return out


def _straight(p0, theta, dist, spd):
    u = np.array([math.cos(theta), math.sin(theta)])
    xy = p0[None, :] + dist[:, None] * u[None, :]
    vxy = spd[:, None] * u[None, :]
    heading = np.full(N_FRAMES, theta)
    return xy, vxy, heading


def _arc(p0, theta, dist, spd, radius, turn):
    phi0 = math.atan2(-turn * math.cos(theta), turn * math.sin(theta))
    center = p0 - radius * np.array([math.cos(phi0), math.sin(phi0)])
    phi = phi0 + turn * dist / radius
    xy = center[None, :] + radius * np.stack([np.cos(phi), np.sin(phi)], axis=1)
    tx, ty = -turn * np.sin(phi), turn * np.cos(phi)
    vxy = spd[:, None] * np.stack([tx, ty], axis=1)
    heading = np.arctan2(ty, tx)
    return xy, vxy, heading


def _behavior_curve(rng: np.random.Generator, behavior: Tag | None, shape: Tag | None):
    p0 = rng.uniform(-300.0, 300.0, size=2)
    theta = rng.uniform(-math.pi, math.pi)
    turn = float(rng.choice([-1.0, 1.0]))

    if behavior is Tag.STILL:
        xy = np.repeat(p0[None, :], N_FRAMES, axis=0)
        return xy, np.zeros((N_FRAMES, 2)), np.full(N_FRAMES, theta)

    if behavior is Tag.STARTING:
        ramp = rng.uniform(0.5, 1.5)
        if shape is None:
            v, t0 = rng.uniform(0.05, 0.09), rng.uniform(2.0, 4.0)
        elif shape is Tag.STRAIGHT:
            v, t0 = rng.uniform(1.0, 5.0), rng.uniform(0.5, 2.0)
        else:
            v, t0 = rng.uniform(1.5, 4.0), rng.uniform(1.2, 2.2)
        dist, spd = _ramp_profile(True, t0, ramp, v)
    elif behavior is Tag.STOPPING:
        ramp = rng.uniform(0.5, 1.5)
        if shape is None:
            v, t0 = rng.uniform(0.05, 0.09), rng.uniform(1.0, 3.0)
        elif shape is Tag.STRAIGHT:
            v, t0 = rng.uniform(1.0, 8.0), rng.uniform(1.5, 4.0)
        else:
            v, t0 = rng.uniform(2.5, 6.0), rng.uniform(1.5, 4.0)
        dist, spd = _ramp_profile(False, t0, ramp, v)
    elif shape is Tag.STRAIGHT:
        v = rng.uniform(0.3, 15.0)
        dist, spd = v * (_T - _T[0]), np.full(N_FRAMES, v)
    elif shape is Tag.NON_STRAIGHT:
        v = rng.uniform(0.8, 8.0)
        dist, spd = v * (_T - _T[0]), np.full(N_FRAMES, v)
    else:
        # wander: constant speed on a tiny circle, so the chord stays short
        v, radius = rng.uniform(0.3, 1.0), rng.uniform(0.05, 0.15)
        dist, spd = v * (_T - _T[0]), np.full(N_FRAMES, v)
        xy, vxy, heading = _arc(p0, theta, dist, spd, radius, turn)
        return xy, _clamp_speeds(vxy), heading

    if shape is Tag.NON_STRAIGHT:
        sweep = rng.uniform(2.0, 2.8)
        radius = max(float(dist[-1]), 1e-6) / sweep
        xy, vxy, heading = _arc(p0, theta, dist, spd, radius, turn)
    else:
        xy, vxy, heading = _straight(p0, theta, dist, spd)
    return xy, _clamp_speeds(vxy), heading


def _validity_mask(rng: np.random.Generator, pattern: frozenset[Tag]) -> np.ndarray:
    valid = np.ones(N_FRAMES, dtype=bool)
    if Tag.VERY_LATE in pattern:
        valid[: CURRENT_INDEX] = False
    elif Tag.LATE in pattern:
        n = int(rng.integers(2, 4))
        valid[: N_OBSERVED - n] = False
    elif Tag.REAPPEARANCE in pattern:
        last_seen = int(rng.integers(0, 9))
        reappear = int(rng.integers(N_OBSERVED, 21))
        valid[last_seen + 1 : reappear] = False
    return valid


def gen_track(pattern: "str | frozenset[Tag]", rng: np.random.Generator, track_id: str) -> tuple[Track, TagSet]:
    """One track realizing ``pattern`` plus its full declared tag set."""
    tags = parse_pattern(pattern)
    expected = declared_tags(tags)
    behavior = next(iter(tags & _BEHAVIOR), None)
    shape = next(iter(tags & _SHAPE), None)
    xy, vxy, heading = _behavior_curve(rng, behavior, shape)
    valid = _validity_mask(rng, tags)
    ru_class = RUClass(rng.choice([c.value for c in RUClass]))
    track = Track(track_id, ru_class, xy, vxy, heading, valid, is_ttp=Tag.TTP in tags)
    return track, expected


def _normalize_composition(composition) -> list[tuple[frozenset[Tag], int]]:
    items = composition.items() if isinstance(composition, Mapping) else composition
    out = []
    for pattern, count in items:
        if count < 0:
            raise TrajevalError(f"negative count {count} for pattern {pattern!r}")
        out.append((parse_pattern(pattern), int(count)))
    if not any(c for _, c in out):
        raise TrajevalError("composition requests no tracks")
    return out


def gen_scene(
    composition,
    seed: int,
    scene_id: str = "scene-00000",
    base_time: float = 0.0,
) -> tuple[Scene, dict[str, TagSet]]:
    """A scene whose tracks realize ``composition`` (pattern -> count).

    Reproducible: the same arguments yield an identical scene.  Returns the
    scene and the declared tag set per track id.
    """
    normalized = _normalize_composition(composition)
    rng = np.random.default_rng(seed)
    tracks, expected = [], {}
    i = 0
    for pattern, count in normalized:
        for _ in range(count):
            track, tags = gen_track(pattern, rng, f"t{i:03d}")
            tracks.append(track)
            expected[track.track_id] = tags
            i += 1
    timestamps = base_time + np.arange(N_FRAMES) * FRAME_DT_S
    return Scene(scene_id, timestamps, CURRENT_INDEX, tracks), expected


def gen_scenes(
    composition,
    n_scenes: int,
    seed: int,
    scene_id_prefix: str = "scene-",
) -> Iterator[tuple[Scene, dict[str, TagSet]]]:
    """Stream of independent scenes, one child seed per scene."""
    for i in range(n_scenes):
        yield gen_scene(
            composition,
            seed=np.random.SeedSequence([seed, i]),
            scene_id=f"{scene_id_prefix}{i:05d}",
            base_time=10.0 * i,
        )


def gen_prediction_with_error(
    track: Track,
    grid: HorizonGrid,
    targets: "float | Mapping[float, float]",
    seed: int = 0,
    extra_modes: int = 0,
) -> PredictionSet:
    """A prediction whose best-mode displacement at each targeted horizon is exact.

    The ground truth is offset perpendicular to the local motion direction
    by the target magnitude, so ``min_fde`` recovers each target and
    ``min_ade`` recovers their running means.  ``extra_modes`` adds strictly
    worse trajectories that never win the minimum.
    """
    rng = np.random.default_rng(seed)
    frames = CURRENT_INDEX + np.asarray(grid.frame_offsets)
    gt_valid = track.valid[frames]
    if isinstance(targets, Mapping):
        target_by_index = {}
        for h, value in targets.items():
            i = grid.index_of(h)
            if not gt_valid[i]:
                raise TrajevalError(f"target at {h} s but ground truth is invalid there")
            target_by_index[i] = float(value)
        offsets = np.array([target_by_index.get(i, 0.0) for i in range(len(grid))])
    else:
        offsets = np.full(len(grid), float(targets))
        if offsets.any() and not gt_valid.all():
            raise TrajevalError("scalar target requires valid ground truth at every horizon")

    normals = np.zeros((len(grid), 2))
    anchor = np.zeros((len(grid), 2))
    for i, frame in enumerate(frames):
        if gt_valid[i]:
            anchor[i] = track.xy[frame]
            v = track.vxy[frame]
            n = math.hypot(v[0], v[1])
            normals[i] = (-v[1] / n, v[0] / n) if n > 1e-9 else (0.0, 1.0)
        else:
            anchor[i] = track.xy[CURRENT_INDEX]
            normals[i] = (0.0, 1.0)

    modes = [anchor + offsets[:, None] * normals]
    for _ in range(extra_modes):
        pad = rng.uniform(1.0, 5.0, size=len(grid))
        modes.append(anchor + (offsets + pad)[:, None] * normals)
    confidences = np.array([1.0] + [0.1] * extra_modes)
    return PredictionSet(track.track_id, np.stack(modes), confidences)
