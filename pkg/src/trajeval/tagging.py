"""Movement-type tagging of road-user tracks.

Eleven tags describe what a trajectory does:

    T1  Straight       stays close to the chord between its endpoints
    T2  Non-straight   deviates from that chord
    T3  Starting       still while observed, moves in the future
    T4  Stopping       moves while observed, comes to rest in the future
    T5  Still          still while observed and in the future
    T6  Late           first seen at most a few frames before the origin
    T7  Very late      first seen only at the origin frame
    T8  Full           valid through the whole observation window
    T9  Reappearance   unobserved at the origin, seen before and after
    T10 TTP            flagged as a required prediction
    T11 NTTP           not flagged

T1/T2 need a minimum amount of displacement to be meaningful, T3/T4/T5 are
mutually exclusive, T7 implies T6, T8 excludes T6, and exactly one of
T10/T11 holds.  All thresholds live in :class:`TagParams`.
"""

import math
from dataclasses import dataclass, fields
from enum import Enum
from typing import Iterable, Iterator

import numpy as np

from .core import CURRENT_INDEX, N_FRAMES, N_OBSERVED, Track


class Tag(Enum):
    STRAIGHT = "T1"
    NON_STRAIGHT = "T2"
    STARTING = "T3"
    STOPPING = "T4"
    STILL = "T5"
    LATE = "T6"
    VERY_LATE = "T7"
    FULL = "T8"
    REAPPEARANCE = "T9"
    TTP = "T10"
    NTTP = "T11"

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    Tag.STRAIGHT: "Straight",
    Tag.NON_STRAIGHT: "Non-straight",
    Tag.STARTING: "Starting",
    Tag.STOPPING: "Stopping",
    Tag.STILL: "Still",
    Tag.LATE: "Late",
    Tag.VERY_LATE: "Very late",
    Tag.FULL: "Full",
    Tag.REAPPEARANCE: "Reappearance",
    Tag.TTP: "TTP",
    Tag.NTTP: "NTTP",
}

TAG_ORDER: tuple[Tag, ...] = tuple(Tag)
_ORDER_INDEX = {tag: i for i, tag in enumerate(TAG_ORDER)}


@dataclass(frozen=True, slots=True)
class TagSet:
    """An immutable set of tags satisfying the tag partition laws."""

    tags: frozenset[Tag]

    def __post_init__(self):
        t = self.tags
        if Tag.STRAIGHT in t and Tag.NON_STRAIGHT in t:
            raise ValueError("T1 and T2 are mutually exclusive")
        if len(t & {Tag.STARTING, Tag.STOPPING, Tag.STILL}) > 1:
            raise ValueError("at most one of T3/T4/T5 may hold")
        if Tag.VERY_LATE in t and Tag.LATE not in t:
            raise ValueError("T7 implies T6")
        if Tag.FULL in t and Tag.LATE in t:
            raise ValueError("T8 excludes T6")
        if (Tag.TTP in t) == (Tag.NTTP in t):
            raise ValueError("exactly one of T10/T11 must hold")

    @classmethod
    def of(cls, *tags: Tag) -> "TagSet":
        return cls(frozenset(tags))

    @classmethod
    def from_codes(cls, codes: Iterable[str]) -> "TagSet":
        by_code = {tag.value: tag for tag in Tag}
        try:
            return cls(frozenset(by_code[c] for c in codes))
        except KeyError as e:
            raise ValueError(f"unknown tag code {e.args[0]!r}") from None

    def codes(self) -> tuple[str, ...]:
        return tuple(tag.value for tag in self)

    def __contains__(self, tag: Tag) -> bool:
        return tag in self.tags

    def __iter__(self) -> Iterator[Tag]:
        return iter(sorted(self.tags, key=_ORDER_INDEX.__getitem__))

    def __len__(self) -> int:
        return len(self.tags)


@dataclass(frozen=True, slots=True)
class TagParams:
    """Thresholds behind the tag definitions.

    ``still_speed_max`` is the stillness cutoff in m/s.  The shape tags
    compare the maximum chord deviation against ``straight_max_deviation``
    and only apply once the chord is at least ``min_chord_for_shape`` long.
    Late/very-late are counted in valid observation frames, and a stop must
    hold for ``stop_dwell_frames`` valid frames to count.
    """

    still_speed_max: float = 0.01
    straight_max_deviation: float = 0.5
    min_chord_for_shape: float = 1.0
    late_max_frames: int = 3
    very_late_max_frames: int = 1
    stop_dwell_frames: int = 5

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"{f.name} must be strictly positive")
        if self.very_late_max_frames > self.late_max_frames:
            raise ValueError("very_late_max_frames must not exceed late_max_frames")
        # a full observation window must never count as late (keeps T8 -> not T6)
        if self.late_max_frames >= N_OBSERVED:
            raise ValueError(f"late_max_frames must be below {N_OBSERVED}")


def _chord_deviation(points: np.ndarray) -> tuple[float, float]:
    """Chord length between first and last point, and the max perpendicular
    distance of all points to the infinite chord line."""
    a, b = points[0], points[-1]
    chord_vec = b - a
    chord = float(math.hypot(chord_vec[0], chord_vec[1]))
    if chord == 0.0:
        return 0.0, 0.0
    rel = points - a
    cross = np.abs(rel[:, 0] * chord_vec[1] - rel[:, 1] * chord_vec[0])
    return chord, float(cross.max() / chord)


def tag_track(track: Track, params: TagParams | None = None) -> TagSet:
    """Assign the full tag set to one track."""
    params = params or TagParams()
    valid = track.valid
    speeds = track.speeds()
    obs_idx = np.flatnonzero(valid[:N_OBSERVED])
    fut_idx = np.flatnonzero(valid[N_OBSERVED:]) + N_OBSERVED

    tags: set[Tag] = set()
    thr = params.still_speed_max
    still_obs = bool((speeds[obs_idx] <= thr).all())
    moves_fut = bool((speeds[fut_idx] > thr).any())

    if still_obs and moves_fut:
        tags.add(Tag.STARTING)
    elif still_obs and fut_idx.size > 0:
        tags.add(Tag.STILL)
    elif not still_obs:
        # stopping: some future frame after which every valid frame is still,
        # with enough still frames to count as a dwell
        all_idx = track.valid_frames
        moving = all_idx[speeds[all_idx] > thr]
        first_rest = 0 if moving.size == 0 else int(moving[-1]) + 1
        earliest_fut = max(N_OBSERVED, first_rest)
        if earliest_fut < N_FRAMES:
            dwell = int((all_idx >= earliest_fut).sum())
            if dwell >= params.stop_dwell_frames:
                tags.add(Tag.STOPPING)

    all_idx = track.valid_frames
    chord, deviation = _chord_deviation(track.xy[all_idx])
    if chord >= params.min_chord_for_shape:
        tags.add(Tag.STRAIGHT if deviation <= params.straight_max_deviation else Tag.NON_STRAIGHT)

    n_obs_valid = obs_idx.size
    if n_obs_valid == N_OBSERVED:
        tags.add(Tag.FULL)
    if valid[CURRENT_INDEX] and n_obs_valid <= params.late_max_frames:
        contiguous = obs_idx[0] == CURRENT_INDEX - n_obs_valid + 1
        if contiguous:
            tags.add(Tag.LATE)
            if n_obs_valid <= params.very_late_max_frames:
                tags.add(Tag.VERY_LATE)
    if not valid[CURRENT_INDEX] and obs_idx.size > 0 and fut_idx.size > 0:
        tags.add(Tag.REAPPEARANCE)

    tags.add(Tag.TTP if track.is_ttp else Tag.NTTP)
    return TagSet(frozenset(tags))


def tag_frequencies(tagsets: Iterable[TagSet], restrict_to: Tag | None = None) -> dict[Tag, float]:
    """Fraction of tag sets containing each tag.

    With ``restrict_to`` the population is limited to tag sets containing
    that tag (e.g. ``Tag.TTP`` for challenge-only frequencies).  An empty
    restricted population yields all-zero fractions.
    """
    tagsets = list(tagsets)
    if not tagsets:
        raise ValueError("tag_frequencies needs at least one tag set")
    if restrict_to is not None:
        tagsets = [ts for ts in tagsets if restrict_to in ts]
    n = len(tagsets)
    counts = {tag: 0 for tag in TAG_ORDER}
    for ts in tagsets:
        for tag in ts.tags:
            counts[tag] += 1
    return {tag: (counts[tag] / n if n else 0.0) for tag in TAG_ORDER}
