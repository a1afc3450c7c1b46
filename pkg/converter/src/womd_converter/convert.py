"""Scenario-to-scene conversion: windowing, class mapping, bookkeeping.

Each scenario is windowed to the 91-frame layout around its declared
current time index (10 history frames, the current frame, 80 future
frames); scenarios that are exactly 91 frames long pass through unchanged.
Road users that are not vehicles, pedestrians or cyclists are dropped with
a count, as are tracks with no valid state inside the window.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from trajeval import CURRENT_INDEX, N_FRAMES, RUClass, Scene, Track
from trajeval.io import write_scenes

from . import __version__
from .protowire import WireError
from .scenario import (
    OBJECT_TYPE_CYCLIST,
    OBJECT_TYPE_PEDESTRIAN,
    OBJECT_TYPE_VEHICLE,
    ScenarioData,
    decode_scenario,
)
from .tfrecord import RecordError, read_records

RU_CLASS_BY_TYPE = {
    OBJECT_TYPE_VEHICLE: RUClass.VEHICLE,
    OBJECT_TYPE_PEDESTRIAN: RUClass.PEDESTRIAN,
    OBJECT_TYPE_CYCLIST: RUClass.CYCLIST,
}


@dataclass
class ConversionSummary:
    tool_version: str = __version__
    inputs: list = field(default_factory=list)
    scenes: int = 0
    tracks: dict = field(default_factory=lambda: {c.value: 0 for c in RUClass})
    ttp_tracks: int = 0
    skipped_tracks_other_class: int = 0
    skipped_tracks_no_valid_state: int = 0
    skipped_scenarios_unwindowable: int = 0
    skipped_scenarios_malformed: int = 0
    skipped_scenarios_empty: int = 0
    skipped_shards: list = field(default_factory=list)
    dropped_map_features: int = 0
    dropped_dynamic_states: int = 0

    @property
    def total_tracks(self) -> int:
        return sum(self.tracks.values())

    @property
    def ttp_fraction(self) -> float:
        return self.ttp_tracks / self.total_tracks if self.total_tracks else 0.0

    def to_json(self) -> str:
        payload = asdict(self)
        payload["total_tracks"] = self.total_tracks
        payload["ttp_fraction"] = self.ttp_fraction
        return json.dumps(payload, indent=2, sort_keys=True)

    def print_human(self, out) -> None:
        out.write(f"scenes: {self.scenes}\n")
        for name, count in self.tracks.items():
            out.write(f"tracks[{name}]: {count}\n")
        out.write(f"ttp: {self.ttp_tracks} ({100 * self.ttp_fraction:.2f}% of {self.total_tracks})\n")
        out.write(
            "skipped: "
            f"{self.skipped_tracks_other_class} other-class tracks, "
            f"{self.skipped_tracks_no_valid_state} tracks without valid states, "
            f"{self.skipped_scenarios_unwindowable} unwindowable scenarios, "
            f"{self.skipped_scenarios_malformed} malformed scenarios, "
            f"{self.skipped_scenarios_empty} scenarios without usable tracks, "
            f"{len(self.skipped_shards)} unreadable shards\n"
        )
        out.write(
            f"dropped: {self.dropped_map_features} map features, "
            f"{self.dropped_dynamic_states} dynamic map states\n"
        )


def scenario_to_scene(data: ScenarioData, summary: ConversionSummary) -> "Scene | None":
    """Window one scenario to the 91-frame scene; None when it cannot be used."""
    start = data.current_time_index - CURRENT_INDEX
    if start < 0 or start + N_FRAMES > len(data.timestamps):
        summary.skipped_scenarios_unwindowable += 1
        return None
    window = slice(start, start + N_FRAMES)
    timestamps = np.asarray(data.timestamps[window])

    ttp_ids = {
        data.tracks[i].track_id for i in data.ttp_track_indices if 0 <= i < len(data.tracks)
    }
    tracks = []
    for raw in data.tracks:
        ru_class = RU_CLASS_BY_TYPE.get(raw.object_type)
        if ru_class is None:
            summary.skipped_tracks_other_class += 1
            continue
        if len(raw.states) < start + N_FRAMES:
            summary.skipped_scenarios_malformed += 1
            return None
        states = raw.states[window]
        valid = np.array([s.valid for s in states], dtype=bool)
        if not valid.any():
            summary.skipped_tracks_no_valid_state += 1
            continue
        xy = np.array([(s.center_x, s.center_y) for s in states])
        vxy = np.array([(s.velocity_x, s.velocity_y) for s in states])
        heading = np.array([s.heading for s in states])
        tracks.append(
            Track(str(raw.track_id), ru_class, xy, vxy, heading, valid, is_ttp=raw.track_id in ttp_ids)
        )
    if not tracks:
        summary.skipped_scenarios_empty += 1
        return None
    try:
        scene = Scene(data.scenario_id, timestamps, CURRENT_INDEX, tracks)
    except ValueError:
        summary.skipped_scenarios_malformed += 1
        return None
    summary.scenes += 1
    summary.dropped_map_features += data.n_map_features
    summary.dropped_dynamic_states += data.n_dynamic_states
    for track in tracks:
        summary.tracks[track.ru_class.value] += 1
        if track.is_ttp:
            summary.ttp_tracks += 1
    return scene


def iter_shard_files(input_dir, pattern: str = "*.tfrecord*") -> list[Path]:
    return sorted(Path(input_dir).glob(pattern))


def convert(
    input_dir,
    out_path,
    max_scenes: "int | None" = None,
    pattern: str = "*.tfrecord*",
    verify_checksums: bool = True,
    warn=None,
) -> ConversionSummary:
    """Convert every shard under ``input_dir`` into one scene file.

    Unreadable or truncated shards are skipped with a warning and counted.
    ``max_scenes`` caps the output (0 produces an empty file plus summary).
    """
    summary = ConversionSummary()
    shards = iter_shard_files(input_dir, pattern)
    summary.inputs = [p.name for p in shards]

    def emit() -> Iterator[Scene]:
        for shard in shards:
            try:
                for payload in read_records(shard, verify=verify_checksums):
                    if max_scenes is not None and summary.scenes >= max_scenes:
                        return
                    try:
                        data = decode_scenario(payload)
                    except WireError as e:
                        summary.skipped_scenarios_malformed += 1
                        if warn:
                            warn(f"{shard.name}: bad scenario record ({e})")
                        continue
                    scene = scenario_to_scene(data, summary)
                    if scene is not None:
                        yield scene
            except (OSError, RecordError) as e:
                summary.skipped_shards.append(shard.name)
                if warn:
                    warn(f"skipping shard {shard.name}: {e}")

    write_scenes(emit(), out_path)
    return summary
