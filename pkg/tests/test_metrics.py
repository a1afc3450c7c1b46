import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajeval import (
    CURRENT_INDEX,
    Metric,
    MetricStore,
    NotEvaluableError,
    PredictionSet,
    RUClass,
    Scene,
    StreamStats,
    Tag,
    TagSet,
    UnknownTrackError,
    default_horizon_grid,
    evaluate_pair,
    evaluate_scene,
    min_ade,
    min_fde,
    rigid_transform_predictions,
    rigid_transform_track,
)
from trajeval.core import N_FRAMES

from conftest import straight_track
from reference import naive_min_ade, naive_min_fde, random_prediction, random_track

GRID = default_horizon_grid()


def offset_prediction(track, errors_per_horizon):
    """K=1 prediction displaced perpendicular to x-motion by given amounts."""
    frames = CURRENT_INDEX + np.asarray(GRID.frame_offsets)
    points = track.xy[frames].copy()
    points[:, 1] += np.asarray(errors_per_horizon)
    return PredictionSet(track.track_id, points[None], np.ones(1))


class TestMinAde:
    def test_prefix_mean(self):
        track = straight_track(velocity=(4.0, 0.0))
        errors = np.zeros(16)
        errors[0], errors[1] = 1.0, 3.0
        preds = offset_prediction(track, errors)
        assert min_ade(track, preds, GRID, 0.6) == pytest.approx(2.0, abs=1e-12)
        assert min_ade(track, preds, GRID, 0.1) == pytest.approx(1.0, abs=1e-12)

    def test_min_over_modes(self):
        track = straight_track(velocity=(4.0, 0.0))
        a = offset_prediction(track, np.full(16, 2.0)).trajectories
        b = offset_prediction(track, np.full(16, 1.5)).trajectories
        preds = PredictionSet(track.track_id, np.concatenate([a, b]), np.ones(2))
        assert min_ade(track, preds, GRID, 7.6) == pytest.approx(1.5, abs=1e-12)

    def test_whole_trajectory_selection(self):
        # the min picks one trajectory for the whole prefix, no per-horizon cherry-picking
        track = straight_track(velocity=(4.0, 0.0))
        a = np.zeros(16)
        a[-1] = 10.0  # perfect early, bad final
        b = np.full(16, 2.0)
        preds = PredictionSet(
            track.track_id,
            np.concatenate([offset_prediction(track, a).trajectories, offset_prediction(track, b).trajectories]),
            np.ones(2),
        )
        assert min_ade(track, preds, GRID, 7.6) == pytest.approx(10.0 / 16.0, abs=1e-12)
        assert min_fde(track, preds, GRID, 7.6) == pytest.approx(2.0, abs=1e-12)

    def test_matches_oracle(self, rng):
        for _ in range(50):
            track = random_track(rng)
            preds = random_prediction(rng, track, GRID)
            for h in GRID.horizons:
                try:
                    expected = naive_min_ade(track, preds, GRID, h)
                except NotEvaluableError:
                    with pytest.raises(NotEvaluableError):
                        min_ade(track, preds, GRID, h)
                    continue
                assert min_ade(track, preds, GRID, h) == pytest.approx(expected, abs=1e-9)

    def test_not_evaluable(self):
        track = straight_track(velocity=(1.0, 0.0), valid_frames=list(range(0, 11)) + list(range(40, 91)))
        preds = offset_prediction(track, np.zeros(16))
        with pytest.raises(NotEvaluableError):
            min_ade(track, preds, GRID, 0.6)  # first valid future frame is 40 (2.9 s)
        assert min_ade(track, preds, GRID, 3.1) == pytest.approx(0.0)

    def test_rejects_horizon_outside_grid(self):
        track = straight_track(velocity=(1.0, 0.0))
        preds = offset_prediction(track, np.zeros(16))
        with pytest.raises(ValueError):
            min_ade(track, preds, GRID, 0.3)


class TestMinFde:
    def test_exact_prediction_is_zero(self):
        track = straight_track(velocity=(3.0, -1.0))
        preds = offset_prediction(track, np.zeros(16))
        for h in GRID.horizons:
            assert min_fde(track, preds, GRID, h) == 0.0

    def test_min_of_two_candidates(self):
        track = straight_track(origin=(10.0, 0.0), velocity=(0.0, 0.0))
        gt = track.xy[CURRENT_INDEX + np.asarray(GRID.frame_offsets)]
        a, b = gt.copy(), gt.copy()
        a[:, 1] += 2.0  # ends at (10, 2)
        b[:, 0] += 3.0
        b[:, 1] += 4.0  # ends at (13, 4)
        preds = PredictionSet(track.track_id, np.stack([a, b]), np.ones(2))
        assert min_fde(track, preds, GRID, 7.6) == pytest.approx(2.0, abs=1e-12)

    def test_invalid_ground_truth_raises(self):
        track = straight_track(velocity=(1.0, 0.0), valid_frames=range(0, 12))
        preds = offset_prediction(track, np.zeros(16))
        with pytest.raises(NotEvaluableError):
            min_fde(track, preds, GRID, 0.6)

    def test_matches_oracle(self, rng):
        for _ in range(50):
            track = random_track(rng)
            preds = random_prediction(rng, track, GRID)
            for h in GRID.horizons:
                try:
                    expected = naive_min_fde(track, preds, GRID, h)
                except NotEvaluableError:
                    with pytest.raises(NotEvaluableError):
                        min_fde(track, preds, GRID, h)
                    continue
                assert min_fde(track, preds, GRID, h) == pytest.approx(expected, abs=1e-9)


class TestMetricProperties:
    @given(seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_mode_duplication_invariance(self, seed):
        rng = np.random.default_rng(seed)
        track = random_track(rng, ensure_current=True)
        preds = random_prediction(rng, track, GRID)
        dup = PredictionSet(
            preds.track_id,
            np.concatenate([preds.trajectories, preds.trajectories[:1]]),
            np.concatenate([preds.confidences, preds.confidences[:1]]),
        )
        base, with_dup = evaluate_pair(track, preds, GRID), evaluate_pair(track, dup, GRID)
        assert base.minade == with_dup.minade
        assert base.minfde == with_dup.minfde

    @given(seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_mode_addition_never_hurts(self, seed):
        rng = np.random.default_rng(seed)
        track = random_track(rng, ensure_current=True)
        preds = random_prediction(rng, track, GRID)
        extra = random_prediction(rng, track, GRID, max_modes=1)
        grown = PredictionSet(
            preds.track_id,
            np.concatenate([preds.trajectories, extra.trajectories]),
            np.concatenate([preds.confidences, extra.confidences]),
        )
        base, more = evaluate_pair(track, preds, GRID), evaluate_pair(track, grown, GRID)
        for h in base.minade:
            assert more.minade[h] <= base.minade[h] + 1e-12
        for h in base.minfde:
            assert more.minfde[h] <= base.minfde[h] + 1e-12

    @given(seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_single_mode_degenerates_to_plain_ade_fde(self, seed):
        rng = np.random.default_rng(seed)
        track = random_track(rng)
        preds = random_prediction(rng, track, GRID, max_modes=1)
        frames = CURRENT_INDEX + np.asarray(GRID.frame_offsets)
        err = evaluate_pair(track, preds, GRID)
        for h in err.minfde:
            j = GRID.index_of(h)
            plain_fde = math.hypot(*(preds.trajectories[0, j] - track.xy[frames[j]]))
            assert err.minfde[h] == pytest.approx(plain_fde, abs=1e-12)
        for h in err.minade:
            j = GRID.index_of(h)
            ds = [
                math.hypot(*(preds.trajectories[0, i] - track.xy[frames[i]]))
                for i in range(j + 1)
                if track.valid[frames[i]]
            ]
            assert err.minade[h] == pytest.approx(sum(ds) / len(ds), abs=1e-9)

    @given(seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=80, deadline=None)
    def test_first_horizon_identity_exact(self, seed):
        rng = np.random.default_rng(seed)
        track = random_track(rng)
        preds = random_prediction(rng, track, GRID)
        err = evaluate_pair(track, preds, GRID)
        if err.evaluated_horizons:
            h0 = err.evaluated_horizons[0]
            assert err.minade[h0] == err.minfde[h0]  # bit-exact
            assert min_ade(track, preds, GRID, h0) == min_fde(track, preds, GRID, h0)

    @given(
        seed=st.integers(0, 2**31 - 1),
        angle=st.floats(-math.pi, math.pi),
        dx=st.floats(-500, 500),
        dy=st.floats(-500, 500),
    )
    @settings(max_examples=60, deadline=None)
    def test_rigid_motion_invariance(self, seed, angle, dx, dy):
        rng = np.random.default_rng(seed)
        track = random_track(rng)
        preds = random_prediction(rng, track, GRID)
        base = evaluate_pair(track, preds, GRID)
        moved = evaluate_pair(
            rigid_transform_track(track, angle, (dx, dy)),
            rigid_transform_predictions(preds, angle, (dx, dy)),
            GRID,
        )
        assert base.evaluated_horizons == moved.evaluated_horizons
        for h in base.minade:
            assert moved.minade[h] == pytest.approx(base.minade[h], abs=1e-9)
        for h in base.minfde:
            assert moved.minfde[h] == pytest.approx(base.minfde[h], abs=1e-9)

    def test_confidences_are_ignored(self, rng):
        track = random_track(rng)
        preds = random_prediction(rng, track, GRID)
        rescaled = PredictionSet(preds.track_id, preds.trajectories, preds.confidences * 0.01)
        assert evaluate_pair(track, preds, GRID) == evaluate_pair(track, rescaled, GRID)


class TestEvaluateScene:
    def _scene(self, tracks):
        return Scene("s0", np.arange(N_FRAMES) * 0.1, CURRENT_INDEX, tracks)

    def test_missing_tracks_reported(self):
        t1 = straight_track("a", velocity=(1.0, 0.0))
        t2 = straight_track("b", velocity=(2.0, 0.0))
        scene = self._scene([t1, t2])
        result = evaluate_scene(scene, [offset_prediction(t1, np.zeros(16))], GRID)
        assert len(result.errors) == 1 and result.errors[0].track_id == "a"
        assert result.missing == ("b",)

    def test_empty_predictions(self):
        scene = self._scene([straight_track("a"), straight_track("b")])
        result = evaluate_scene(scene, [], GRID)
        assert result.errors == () and result.missing == ("a", "b")

    def test_unknown_track_rejected(self):
        scene = self._scene([straight_track("a")])
        ghost = offset_prediction(straight_track("ghost"), np.zeros(16))
        with pytest.raises(UnknownTrackError, match="ghost"):
            evaluate_scene(scene, [ghost], GRID)

    def test_length_mismatch_rejected(self):
        track = straight_track("a")
        scene = self._scene([track])
        short = PredictionSet("a", np.zeros((1, 15, 2)), np.ones(1))
        with pytest.raises(ValueError, match="15"):
            evaluate_scene(scene, [short], GRID)

    def test_cv_generated_motion_scores_zero(self, rng):
        from trajeval import gen_scene, predict_cv

        scene, _ = gen_scene([("T1", 5)], seed=99)
        preds = [predict_cv(t, GRID) for t in scene.tracks]
        result = evaluate_scene(scene, preds, GRID)
        assert len(result.errors) == 5 and not result.missing
        for err in result.errors:
            assert max(err.minade.values()) < 1e-9
            assert max(err.minfde.values()) < 1e-9


class TestStreamStats:
    def test_two_point_statistics(self):
        s = StreamStats()
        s.add(1.0)
        s.add(3.0)
        assert s.count == 2 and s.mean == 2.0 and s.maximum == 3.0
        assert s.std == pytest.approx(1.0)

    def test_constant_stream_has_zero_std(self):
        s = StreamStats()
        for _ in range(10):
            s.add(0.1)
        assert s.std == pytest.approx(0.0, abs=1e-12)
        assert s.mean <= s.maximum  # clamped against float drift

    def test_single_sample(self):
        s = StreamStats()
        s.add(2.5)
        assert s.count == 1 and s.mean == 2.5 and s.std == 0.0 and s.maximum == 2.5

    @given(
        values=st.lists(st.floats(0.0, 50.0), min_size=1, max_size=200),
        cut=st.integers(0, 199),
    )
    @settings(max_examples=150, deadline=None)
    def test_merge_equals_concatenation(self, values, cut):
        cut = min(cut, len(values))
        single = StreamStats()
        for v in values:
            single.add(v)
        left, right = StreamStats(), StreamStats()
        for v in values[:cut]:
            left.add(v)
        for v in values[cut:]:
            right.add(v)
        left.merge(right)
        assert left.count == single.count
        assert left.mean == pytest.approx(single.mean, abs=1e-9)
        assert left.std == pytest.approx(single.std, abs=1e-9)
        assert left.maximum == single.maximum

    def test_merge_commutes(self, rng):
        xs, ys = rng.uniform(0, 20, 40), rng.uniform(0, 20, 25)
        a1, b1 = StreamStats(), StreamStats()
        a2, b2 = StreamStats(), StreamStats()
        for x in xs:
            a1.add(x), a2.add(x)
        for y in ys:
            b1.add(y), b2.add(y)
        a1.merge(b1)
        b2.merge(a2)
        assert a1.count == b2.count
        assert a1.mean == pytest.approx(b2.mean, abs=1e-12)
        assert a1.std == pytest.approx(b2.std, abs=1e-12)
        assert a1.maximum == b2.maximum


class TestMetricStore:
    def _error(self, track, preds):
        return evaluate_pair(track, preds, GRID)

    def test_all_horizons_row(self):
        track = straight_track(velocity=(4.0, 0.0))
        e1 = self._error(track, offset_prediction(track, np.full(16, 1.0)))
        e2 = self._error(track, offset_prediction(track, np.full(16, 3.0)))
        store = MetricStore()
        tags = TagSet.of(Tag.STRAIGHT, Tag.FULL, Tag.NTTP)
        store.accumulate(e1, tags, "m")
        store.accumulate(e2, tags, "m")
        cells = {(c.tag, c.horizon, c.metric): c for c in store.cells() if c.model == "m"}
        cell = cells[(None, None, Metric.MIN_ADE)]
        assert cell.count == 2 and cell.mean == pytest.approx(2.0) and cell.max == pytest.approx(3.0)
        fde_cell = cells[(None, None, Metric.MIN_FDE)]
        assert fde_cell.mean == pytest.approx(2.0)  # final-horizon values 1.0 and 3.0

    def test_all_horizons_ade_averages_per_horizon_values(self):
        track = straight_track(velocity=(4.0, 0.0))
        errors = np.zeros(16)
        errors[0] = 16.0  # minADE decays as 16/n with the prefix length n
        err = self._error(track, offset_prediction(track, errors))
        store = MetricStore()
        store.accumulate(err, TagSet.of(Tag.NTTP), "m")
        cell = next(c for c in store.cells() if c.horizon is None and c.metric is Metric.MIN_ADE and c.tag is None)
        expected = np.mean([err.minade[h] for h in err.evaluated_horizons])
        assert cell.mean == pytest.approx(expected, abs=1e-12)

    def test_fde_all_mode_switch(self):
        track = straight_track(velocity=(4.0, 0.0))
        ramp = np.linspace(0.0, 3.0, 16)
        err = self._error(track, offset_prediction(track, ramp))
        final_store, mean_store = MetricStore("final"), MetricStore("mean")
        tags = TagSet.of(Tag.NTTP)
        final_store.accumulate(err, tags, "m")
        mean_store.accumulate(err, tags, "m")
        pick = lambda s: next(
            c for c in s.cells() if c.horizon is None and c.metric is Metric.MIN_FDE and c.tag is None
        )
        assert pick(final_store).mean == pytest.approx(3.0, abs=1e-9)
        assert pick(mean_store).mean == pytest.approx(float(np.mean(ramp)), abs=1e-9)

    def test_tag_rows_cover_tags_plus_all(self):
        track = straight_track(velocity=(4.0, 0.0))
        err = self._error(track, offset_prediction(track, np.zeros(16)))
        store = MetricStore()
        store.accumulate(err, TagSet.of(Tag.STRAIGHT, Tag.FULL, Tag.NTTP), "m")
        tags_seen = {c.tag for c in store.cells()}
        assert tags_seen == {None, Tag.STRAIGHT, Tag.FULL, Tag.NTTP}

    def test_store_merge_matches_single_pass(self, rng):
        tracks = [random_track(rng, ensure_current=True, track_id=f"t{i}") for i in range(30)]
        errors = [self._error(t, random_prediction(rng, t, GRID)) for t in tracks]
        tags = TagSet.of(Tag.FULL, Tag.NTTP)
        single = MetricStore()
        for t, e in zip(tracks, errors):
            single.accumulate(e, tags, "m")
        parts = [MetricStore() for _ in range(4)]
        for i, e in enumerate(errors):
            parts[i % 4].accumulate(e, tags, "m")
        merged = MetricStore()
        for p in parts:
            merged.merge(p)
        single_cells, merged_cells = single.cells(), merged.cells()
        assert len(single_cells) == len(merged_cells)
        for a, b in zip(single_cells, merged_cells):
            assert (a.model, a.ru_class, a.tag, a.horizon, a.metric) == (b.model, b.ru_class, b.tag, b.horizon, b.metric)
            assert a.count == b.count
            assert a.mean == pytest.approx(b.mean, abs=1e-9)
            assert a.std == pytest.approx(b.std, abs=1e-9)
            assert a.max == pytest.approx(b.max, abs=1e-9)

    def test_empty_error_is_skipped(self):
        track = straight_track(velocity=(1.0, 0.0), valid_frames=range(0, 11))
        err = self._error(track, offset_prediction(track, np.zeros(16)))
        assert err.evaluated_horizons == ()
        store = MetricStore()
        store.accumulate(err, TagSet.of(Tag.NTTP), "m")
        assert len(store) == 0
