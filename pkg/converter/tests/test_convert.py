import json

import numpy as np
import pytest

from trajeval import CURRENT_INDEX, N_FRAMES, RUClass
from trajeval.io import parse_scenes

from womd_converter.convert import ConversionSummary, convert, scenario_to_scene
from womd_converter.scenario import decode_scenario
from womd_converter.tfrecord import write_records

from conftest import FIXTURE_DIR
from fixture_tools import (
    encode_scenario,
    encode_state,
    encode_track,
    two_track_expected_scene,
    two_track_scenario_bytes,
)


def moving_track_bytes(track_id, object_type, n_frames, valid=lambda i: True):
    states = [
        encode_state(x=0.5 * i, y=1.0, heading=0.25, vx=5.0, vy=0.0, valid=valid(i))
        for i in range(n_frames)
    ]
    return encode_track(track_id, object_type, states)


class TestScenarioDecoding:
    def test_fixture_fields(self):
        data = decode_scenario(two_track_scenario_bytes())
        assert data.scenario_id == "fixture-0001"
        assert len(data.timestamps) == N_FRAMES
        assert data.current_time_index == CURRENT_INDEX
        assert [t.track_id for t in data.tracks] == [7, 12]
        assert [t.object_type for t in data.tracks] == [1, 2]
        assert data.ttp_track_indices == [0]
        assert data.n_map_features == 3 and data.n_dynamic_states == 2
        vehicle_states = data.tracks[0].states
        assert len(vehicle_states) == N_FRAMES
        assert vehicle_states[5].center_x == 5.0 and vehicle_states[5].velocity_x == 5.0 * 2


class TestScenarioToScene:
    def test_pass_through_91_frames(self):
        data = decode_scenario(two_track_scenario_bytes())
        summary = ConversionSummary()
        scene = scenario_to_scene(data, summary)
        assert scene == two_track_expected_scene()
        assert summary.scenes == 1 and summary.ttp_tracks == 1
        assert summary.ttp_fraction == 0.5

    def test_windows_longer_segments_at_the_anchor(self):
        n, current = 199, 57
        raw = encode_scenario(
            "long-0001",
            [i * 0.1 for i in range(n)],
            current,
            [moving_track_bytes(1, 1, n)],
        )
        summary = ConversionSummary()
        scene = scenario_to_scene(decode_scenario(raw), summary)
        assert scene is not None and summary.scenes == 1
        assert scene.timestamps.shape == (N_FRAMES,)
        assert scene.timestamps[CURRENT_INDEX] == pytest.approx(current * 0.1)
        track = scene.tracks[0]
        assert track.xy[CURRENT_INDEX, 0] == pytest.approx(0.5 * current)

    def test_unwindowable_scenario_skipped(self):
        raw = encode_scenario("short", [i * 0.1 for i in range(50)], 10, [moving_track_bytes(1, 1, 50)])
        summary = ConversionSummary()
        assert scenario_to_scene(decode_scenario(raw), summary) is None
        assert summary.skipped_scenarios_unwindowable == 1

    def test_other_class_tracks_counted_and_dropped(self):
        raw = encode_scenario(
            "mixed",
            [i * 0.1 for i in range(N_FRAMES)],
            CURRENT_INDEX,
            [
                moving_track_bytes(1, 1, N_FRAMES),
                moving_track_bytes(2, 4, N_FRAMES),  # TYPE_OTHER
                moving_track_bytes(3, 0, N_FRAMES),  # TYPE_UNSET
            ],
        )
        summary = ConversionSummary()
        scene = scenario_to_scene(decode_scenario(raw), summary)
        assert [t.track_id for t in scene.tracks] == ["1"]
        assert summary.skipped_tracks_other_class == 2

    def test_all_invalid_track_dropped(self):
        raw = encode_scenario(
            "ghost",
            [i * 0.1 for i in range(N_FRAMES)],
            CURRENT_INDEX,
            [moving_track_bytes(1, 1, N_FRAMES), moving_track_bytes(2, 2, N_FRAMES, valid=lambda i: False)],
        )
        summary = ConversionSummary()
        scene = scenario_to_scene(decode_scenario(raw), summary)
        assert len(scene.tracks) == 1
        assert summary.skipped_tracks_no_valid_state == 1

    def test_scenario_with_no_usable_tracks_skipped(self):
        raw = encode_scenario(
            "empty",
            [i * 0.1 for i in range(N_FRAMES)],
            CURRENT_INDEX,
            [moving_track_bytes(1, 4, N_FRAMES)],
        )
        summary = ConversionSummary()
        assert scenario_to_scene(decode_scenario(raw), summary) is None
        assert summary.skipped_scenarios_empty == 1


class TestConvertDirectory:
    def test_fixture_matches_expected_scene_file(self, tmp_path):
        out = tmp_path / "scenes.jsonl"
        summary = convert(FIXTURE_DIR, out, pattern="two_tracks.tfrecord")
        assert out.read_bytes() == (FIXTURE_DIR / "two_tracks_expected.jsonl").read_bytes()
        assert summary.scenes == 1
        assert summary.tracks == {"vehicle": 1, "pedestrian": 1, "cyclist": 0}

    def test_checked_in_fixture_is_current(self):
        shard = (FIXTURE_DIR / "two_tracks.tfrecord").read_bytes()
        import io

        buf = io.BytesIO()
        write_records(buf, [two_track_scenario_bytes()])
        assert shard == buf.getvalue()

    def test_output_parses_under_strict_mode(self, tmp_path):
        out = tmp_path / "scenes.jsonl"
        convert(FIXTURE_DIR, out, pattern="two_tracks.tfrecord")
        scenes = list(parse_scenes(out))
        assert len(scenes) == 1
        assert scenes[0] == two_track_expected_scene()

    def test_max_scenes_zero_gives_summary_only(self, tmp_path):
        out = tmp_path / "scenes.jsonl"
        summary = convert(FIXTURE_DIR, out, max_scenes=0, pattern="two_tracks.tfrecord")
        assert out.read_text() == ""
        assert summary.scenes == 0 and summary.total_tracks == 0

    def test_unreadable_shard_skipped_with_counter(self, tmp_path):
        shards = tmp_path / "shards"
        shards.mkdir()
        good = (FIXTURE_DIR / "two_tracks.tfrecord").read_bytes()
        (shards / "a.tfrecord").write_bytes(good[: len(good) // 2])  # truncated
        (shards / "b.tfrecord").write_bytes(good)
        warnings = []
        out = tmp_path / "scenes.jsonl"
        summary = convert(shards, out, warn=warnings.append)
        assert summary.skipped_shards == ["a.tfrecord"]
        assert summary.scenes == 1
        assert warnings and "a.tfrecord" in warnings[0]

    def test_multi_scenario_shard_and_cap(self, tmp_path):
        shards = tmp_path / "shards"
        shards.mkdir()
        records = []
        for i in range(5):
            records.append(
                encode_scenario(
                    f"scene-{i}",
                    [j * 0.1 for j in range(N_FRAMES)],
                    CURRENT_INDEX,
                    [moving_track_bytes(1, 1, N_FRAMES), moving_track_bytes(2, 2, N_FRAMES)],
                    ttp_indices=[0],
                )
            )
        write_records(shards / "multi.tfrecord", records)
        out = tmp_path / "scenes.jsonl"
        summary = convert(shards, out, max_scenes=3)
        assert summary.scenes == 3
        assert summary.ttp_fraction == pytest.approx(0.5)
        assert len(list(parse_scenes(out))) == 3

    def test_summary_json_fields(self, tmp_path):
        out = tmp_path / "scenes.jsonl"
        summary = convert(FIXTURE_DIR, out, pattern="two_tracks.tfrecord")
        payload = json.loads(summary.to_json())
        assert payload["tool_version"]
        assert payload["inputs"] == ["two_tracks.tfrecord"]
        assert payload["ttp_fraction"] == 0.5
        assert payload["dropped_map_features"] == 3
