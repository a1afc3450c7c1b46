"""Core domain types shared by the whole toolkit.

A scene is a fixed 9.1 s window sampled at 10 Hz: 11 observation frames
(indices 0..10, the last one being the prediction origin) followed by 80
future frames (indices 11..90).  Every road user in the scene is a track
with a per-frame validity mask.  Predictions are scored on a grid of
future horizons expressed in seconds after the prediction origin.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

FRAME_RATE_HZ = 10
FRAME_DT_S = 0.1
CURRENT_INDEX = 10
N_OBSERVED = 11
N_FUTURE = 80
N_FRAMES = N_OBSERVED + N_FUTURE
TIMESTAMP_TOL_S = 1e-6


class TrajevalError(Exception):
    """Base class for input and contract errors raised by this package."""


class RUClass(Enum):
    """Road-user class."""

    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    CYCLIST = "cyclist"


@dataclass(frozen=True, slots=True)
class State:
    """Kinematic state of one road user at one frame.

    When ``valid`` is false the kinematic fields carry no information and
    must not be read; accessors in this package never hand them out.
    """

    x: float = 0.0
    y: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    heading: float = 0.0
    valid: bool = True


def speed(state: State) -> float:
    """Speed in m/s of a valid state.  Raises on an invalid state."""
    if not state.valid:
        raise ValueError("speed of an invalid state is undefined; filter by validity first")
    return math.hypot(state.vx, state.vy)


def wrap_heading(theta):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), 2.0 * np.pi)


def synthesize_velocities(xy: np.ndarray, valid: np.ndarray, dt: float = FRAME_DT_S) -> np.ndarray:
    """Finite-difference velocities for sources that only provide positions.

    Each valid frame gets the difference towards the next valid position
    divided by the elapsed time; the last valid frame falls back to the
    difference from the previous valid position.  A track with a single
    valid frame gets zero velocity.  Invalid frames stay zero.
    """
    xy = np.asarray(xy, dtype=float)
    valid = np.asarray(valid, dtype=bool)
    vxy = np.zeros_like(xy)
    idx = np.flatnonzero(valid)
    if idx.size < 2:
        return vxy
    for a, b in zip(idx[:-1], idx[1:]):
        vxy[a] = (xy[b] - xy[a]) / ((b - a) * dt)
    last, prev = idx[-1], idx[-2]
    vxy[last] = (xy[last] - xy[prev]) / ((last - prev) * dt)
    return vxy


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class Track:
    """One road user over the 91-frame scene window.

    Immutable and array-backed.  Kinematic rows of invalid frames are
    zeroed at construction so equal tracks compare equal and serialized
    output is canonical; headings of valid frames are wrapped into
    (-pi, pi].
    """

    __slots__ = ("track_id", "ru_class", "xy", "vxy", "heading", "valid", "is_ttp")

    def __init__(
        self,
        track_id: str,
        ru_class: RUClass,
        xy: np.ndarray,
        vxy: np.ndarray,
        heading: np.ndarray,
        valid: np.ndarray,
        is_ttp: bool = False,
    ):
        xy = np.asarray(xy, dtype=float).copy()
        vxy = np.asarray(vxy, dtype=float).copy()
        heading = np.asarray(heading, dtype=float).copy()
        valid = np.asarray(valid, dtype=bool).copy()
        if xy.shape != (N_FRAMES, 2) or vxy.shape != (N_FRAMES, 2):
            raise ValueError(f"track {track_id!r}: expected {N_FRAMES} states, got shape {xy.shape}")
        if heading.shape != (N_FRAMES,) or valid.shape != (N_FRAMES,):
            raise ValueError(f"track {track_id!r}: heading/valid must have {N_FRAMES} entries")
        if not valid.any():
            raise ValueError(f"track {track_id!r}: at least one valid state is required")
        if not (np.isfinite(xy[valid]).all() and np.isfinite(vxy[valid]).all() and np.isfinite(heading[valid]).all()):
            raise ValueError(f"track {track_id!r}: non-finite kinematics at a valid frame")
        heading[valid] = wrap_heading(heading[valid])
        xy[~valid] = 0.0
        vxy[~valid] = 0.0
        heading[~valid] = 0.0
        object.__setattr__(self, "track_id", str(track_id))
        object.__setattr__(self, "ru_class", RUClass(ru_class))
        object.__setattr__(self, "xy", _as_readonly(xy))
        object.__setattr__(self, "vxy", _as_readonly(vxy))
        object.__setattr__(self, "heading", _as_readonly(heading))
        object.__setattr__(self, "valid", _as_readonly(valid))
        object.__setattr__(self, "is_ttp", bool(is_ttp))

    def __setattr__(self, name, value):
        raise AttributeError("Track is immutable")

    @classmethod
    def from_states(cls, track_id: str, ru_class: RUClass, states: Sequence[State], is_ttp: bool = False) -> "Track":
        if len(states) != N_FRAMES:
            raise ValueError(f"track {track_id!r}: expected {N_FRAMES} states, got {len(states)}")
        xy = np.array([(s.x, s.y) for s in states], dtype=float)
        vxy = np.array([(s.vx, s.vy) for s in states], dtype=float)
        heading = np.array([s.heading for s in states], dtype=float)
        valid = np.array([s.valid for s in states], dtype=bool)
        return cls(track_id, ru_class, xy, vxy, heading, valid, is_ttp)

    def state_at(self, frame: int) -> State:
        if not 0 <= frame < N_FRAMES:
            raise IndexError(f"frame {frame} outside 0..{N_FRAMES - 1}")
        return State(
            x=float(self.xy[frame, 0]),
            y=float(self.xy[frame, 1]),
            vx=float(self.vxy[frame, 0]),
            vy=float(self.vxy[frame, 1]),
            heading=float(self.heading[frame]),
            valid=bool(self.valid[frame]),
        )

    @property
    def valid_frames(self) -> np.ndarray:
        """Indices of valid frames, ascending."""
        return np.flatnonzero(self.valid)

    def speeds(self) -> np.ndarray:
        """Per-frame speed; entries at invalid frames are zero filler."""
        return np.hypot(self.vxy[:, 0], self.vxy[:, 1])

    def __reduce__(self):
        return (Track, (self.track_id, self.ru_class, self.xy, self.vxy, self.heading, self.valid, self.is_ttp))

    def __eq__(self, other):
        if not isinstance(other, Track):
            return NotImplemented
        return (
            self.track_id == other.track_id
            and self.ru_class is other.ru_class
            and self.is_ttp == other.is_ttp
            and np.array_equal(self.valid, other.valid)
            and np.array_equal(self.xy, other.xy)
            and np.array_equal(self.vxy, other.vxy)
            and np.array_equal(self.heading, other.heading)
        )

    def __repr__(self):
        return (
            f"Track({self.track_id!r}, {self.ru_class.value}, ttp={self.is_ttp}, "
            f"valid={int(self.valid.sum())}/{N_FRAMES})"
        )


class Scene:
    """One 9.1 s segment: timestamps, the prediction origin, and all tracks."""

    __slots__ = ("scene_id", "timestamps", "current_index", "tracks", "_by_id")

    def __init__(self, scene_id: str, timestamps: np.ndarray, current_index: int, tracks: Iterable[Track]):
        timestamps = np.asarray(timestamps, dtype=float).copy()
        tracks = tuple(tracks)
        if timestamps.shape != (N_FRAMES,):
            raise ValueError(f"scene {scene_id!r}: expected {N_FRAMES} timestamps, got {timestamps.shape[0]}")
        spacing = np.diff(timestamps)
        if not np.all(np.abs(spacing - FRAME_DT_S) <= TIMESTAMP_TOL_S):
            raise ValueError(f"scene {scene_id!r}: timestamps must be spaced {FRAME_DT_S} s apart")
        if int(current_index) != CURRENT_INDEX:
            raise ValueError(f"scene {scene_id!r}: current_index must be {CURRENT_INDEX}, got {current_index}")
        ids = [t.track_id for t in tracks]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"scene {scene_id!r}: duplicate track ids {dupes}")
        object.__setattr__(self, "scene_id", str(scene_id))
        object.__setattr__(self, "timestamps", _as_readonly(timestamps))
        object.__setattr__(self, "current_index", CURRENT_INDEX)
        object.__setattr__(self, "tracks", tracks)
        object.__setattr__(self, "_by_id", {t.track_id: t for t in tracks})

    def __setattr__(self, name, value):
        raise AttributeError("Scene is immutable")

    def track_by_id(self, track_id: str) -> Track:
        try:
            return self._by_id[track_id]
        except KeyError:
            raise KeyError(f"scene {self.scene_id!r} has no track {track_id!r}") from None

    def __reduce__(self):
        return (Scene, (self.scene_id, self.timestamps, self.current_index, self.tracks))

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return (
            self.scene_id == other.scene_id
            and np.array_equal(self.timestamps, other.timestamps)
            and self.tracks == other.tracks
        )

    def __repr__(self):
        return f"Scene({self.scene_id!r}, tracks={len(self.tracks)})"


@dataclass(frozen=True, slots=True)
class HorizonGrid:
    """Future horizons (seconds after the prediction origin) and their frame offsets."""

    horizons: tuple[float, ...]
    frame_offsets: tuple[int, ...]

    def __post_init__(self):
        if len(self.horizons) != len(self.frame_offsets):
            raise ValueError("horizons and frame_offsets must have equal length")
        if not self.horizons:
            raise ValueError("grid must contain at least one horizon")
        for h, off in zip(self.horizons, self.frame_offsets):
            if not 1 <= off <= N_FUTURE:
                raise ValueError(f"horizon {h}: frame offset {off} outside 1..{N_FUTURE}")
            if abs(h * FRAME_RATE_HZ - off) > 1e-6:
                raise ValueError(f"horizon {h} does not sit on the {FRAME_RATE_HZ} Hz frame lattice")
        if any(b <= a for a, b in zip(self.frame_offsets, self.frame_offsets[1:])):
            raise ValueError("horizons must be strictly increasing")

    @classmethod
    def from_horizons(cls, horizons: Iterable[float]) -> "HorizonGrid":
        horizons = tuple(float(h) for h in horizons)
        offsets = tuple(int(round(h * FRAME_RATE_HZ)) for h in horizons)
        return cls(horizons, offsets)

    def index_of(self, horizon: float) -> int:
        for i, h in enumerate(self.horizons):
            if math.isclose(h, horizon, rel_tol=0.0, abs_tol=1e-9):
                return i
        raise ValueError(f"horizon {horizon} is not in the grid")

    def __len__(self) -> int:
        return len(self.horizons)


def default_horizon_grid() -> HorizonGrid:
    """The 2 Hz evaluation grid: 0.1 s, 0.6 s, ..., 7.6 s (16 horizons)."""
    return HorizonGrid.from_horizons(0.1 + k / 2 for k in range(16))


class PredictionSet:
    """K candidate trajectories with confidences for one track.

    Trajectory points are (x, y) pairs, one per grid horizon.  Confidences
    are carried through the file formats but ignored by the displacement
    metrics, which always score the best candidate.
    """

    __slots__ = ("track_id", "trajectories", "confidences")

    def __init__(self, track_id: str, trajectories: np.ndarray, confidences: np.ndarray):
        trajectories = np.asarray(trajectories, dtype=float).copy()
        confidences = np.asarray(confidences, dtype=float).copy()
        if trajectories.ndim != 3 or trajectories.shape[0] < 1 or trajectories.shape[2] != 2:
            raise ValueError(f"prediction {track_id!r}: trajectories must have shape (K, H, 2)")
        if confidences.shape != (trajectories.shape[0],):
            raise ValueError(f"prediction {track_id!r}: need one confidence per trajectory")
        if not np.isfinite(trajectories).all():
            raise ValueError(f"prediction {track_id!r}: non-finite trajectory point")
        if not (np.isfinite(confidences).all() and (confidences >= 0).all()):
            raise ValueError(f"prediction {track_id!r}: confidences must be finite and non-negative")
        object.__setattr__(self, "track_id", str(track_id))
        object.__setattr__(self, "trajectories", _as_readonly(trajectories))
        object.__setattr__(self, "confidences", _as_readonly(confidences))

    def __setattr__(self, name, value):
        raise AttributeError("PredictionSet is immutable")

    @property
    def n_modes(self) -> int:
        return self.trajectories.shape[0]

    @property
    def n_horizons(self) -> int:
        return self.trajectories.shape[1]

    def __reduce__(self):
        return (PredictionSet, (self.track_id, self.trajectories, self.confidences))

    def __eq__(self, other):
        if not isinstance(other, PredictionSet):
            return NotImplemented
        return (
            self.track_id == other.track_id
            and np.array_equal(self.trajectories, other.trajectories)
            and np.array_equal(self.confidences, other.confidences)
        )

    def __repr__(self):
        return f"PredictionSet({self.track_id!r}, K={self.n_modes}, H={self.n_horizons})"


def _rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def rigid_transform_track(track: Track, angle: float, offset: tuple[float, float]) -> Track:
    """Rotate by ``angle`` about the origin, then translate by ``offset``."""
    rot = _rotation(angle)
    xy = track.xy @ rot.T + np.asarray(offset, dtype=float)
    vxy = track.vxy @ rot.T
    heading = wrap_heading(track.heading + angle)
    return Track(track.track_id, track.ru_class, xy, vxy, heading, track.valid, track.is_ttp)


def rigid_transform_scene(scene: Scene, angle: float, offset: tuple[float, float]) -> Scene:
    tracks = [rigid_transform_track(t, angle, offset) for t in scene.tracks]
    return Scene(scene.scene_id, scene.timestamps, scene.current_index, tracks)


def rigid_transform_predictions(preds: PredictionSet, angle: float, offset: tuple[float, float]) -> PredictionSet:
    rot = _rotation(angle)
    moved = preds.trajectories @ rot.T + np.asarray(offset, dtype=float)
    return PredictionSet(preds.track_id, moved, preds.confidences)
