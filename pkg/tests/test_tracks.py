import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmc.errors import DataError, DegenerateTrackError
from tmc.tracks import (
    arc_lengths,
    load_tracks,
    point_to_polyline_distance,
    resample_uniform,
    save_tracks,
    track_direction,
    track_distance_cmm,
)

from conftest import make_track


def random_track(rng, n=None):
    n = n or rng.integers(3, 12)
    steps = rng.uniform(-3, 3, (n, 2))
    return make_track(np.cumsum(steps, axis=0) + rng.uniform(-10, 10, 2))


class TestResample:
    def test_exact_multiple(self, straight_track):
        r = resample_uniform(straight_track, 5.0)
        np.testing.assert_allclose(r.points, [[0, 0], [5, 0], [10, 0]])

    def test_short_final_segment(self, straight_track):
        r = resample_uniform(straight_track, 4.0)
        np.testing.assert_allclose(r.points, [[0, 0], [4, 0], [8, 0], [10, 0]])

    def test_l_shaped_against_arclength_walk(self):
        t = make_track([[0, 0], [3, 0], [3, 4.5]])
        spacing = 1.0
        r = resample_uniform(t, spacing)
        total = 7.5
        # Oracle: scalar walk along the polyline accumulating arc length.
        expected_count = int(np.floor(total / spacing)) + 1
        if total % spacing > 1e-9:
            expected_count += 1
        assert len(r.points) == expected_count
        walked = 0.0
        for k, p in enumerate(r.points[:-1]):
            assert arc_lengths(np.vstack([t.points[:1], p.reshape(1, 2)]))[-1] >= 0
            target = k * spacing
            # point must lie on the L at arc position target
            if target <= 3:
                np.testing.assert_allclose(p, [target, 0], atol=1e-12)
            else:
                np.testing.assert_allclose(p, [3, target - 3], atol=1e-12)
            walked = target
        np.testing.assert_allclose(r.points[-1], [3, 4.5])
        assert walked <= total

    def test_endpoints_preserved(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            t = random_track(rng)
            r = resample_uniform(t, 0.7)
            np.testing.assert_array_equal(r.points[0], t.points[0])
            np.testing.assert_array_equal(r.points[-1], t.points[-1])

    def test_points_lie_on_source_polyline(self):
        # Resampling may cut corners (shortening arc length) but every
        # output point must sit exactly on the source polyline, at most
        # one spacing apart along it.
        rng = np.random.default_rng(1)
        for _ in range(20):
            t = random_track(rng)
            spacing = 0.9
            r = resample_uniform(t, spacing)
            assert r.arc_length() <= t.arc_length() + 1e-9
            for p in r.points:
                assert point_to_polyline_distance(p, t) < 1e-9
            steps = np.linalg.norm(np.diff(r.points, axis=0), axis=1)
            assert steps.max() <= spacing + 1e-9

    def test_straight_track_idempotent(self):
        t = make_track([[0.0, 0.0], [10.0, 2.5]])
        r1 = resample_uniform(t, 0.5)
        r2 = resample_uniform(r1, 0.5)
        np.testing.assert_allclose(r2.points, r1.points, atol=1e-12)

    def test_zero_length_track(self):
        t = make_track([[1, 1], [1, 1]])
        with pytest.raises(DegenerateTrackError):
            resample_uniform(t, 1.0)

    def test_bad_spacing(self, straight_track):
        with pytest.raises(DataError):
            resample_uniform(straight_track, 0.0)

    def test_timestamps_interpolated(self):
        t = make_track([[0, 0], [10, 0]], timestamps=[0.0, 2.0])
        r = resample_uniform(t, 5.0)
        np.testing.assert_allclose(r.timestamps, [0.0, 1.0, 2.0])


class TestDirection:
    def test_vertical(self):
        assert np.allclose(track_direction(make_track([[0, 0], [0, 7]])), [0, 1])

    def test_345(self):
        assert np.allclose(track_direction(make_track([[2, 2], [5, 6]])),
                           [0.6, 0.8])

    def test_loop_uses_endpoints_only(self):
        loop = make_track([[0, 0], [5, 5], [-3, 2], [4, 1]])
        two = make_track([[0, 0], [4, 1]])
        np.testing.assert_allclose(track_direction(loop), track_direction(two))

    def test_coincident_endpoints(self):
        with pytest.raises(DegenerateTrackError):
            track_direction(make_track([[1, 1], [3, 3], [1, 1]]))

    @given(st.floats(-100, 100), st.floats(-100, 100),
           st.floats(-100, 100), st.floats(-100, 100))
    def test_unit_norm(self, x0, y0, x1, y1):
        if (x0, y0) == (x1, y1):
            return
        d = track_direction(make_track([[x0, y0], [x1, y1]]))
        assert abs(np.linalg.norm(d) - 1.0) < 1e-12


class TestPointToPolyline:
    def test_on_polyline(self, straight_track):
        assert point_to_polyline_distance((7.0, 0.0), straight_track) == 0.0

    def test_perpendicular_foot(self, straight_track):
        assert point_to_polyline_distance((5.0, 3.0), straight_track) == pytest.approx(3.0)

    def test_beyond_endpoint_uses_vertex(self, straight_track):
        assert point_to_polyline_distance((13.0, 4.0), straight_track) == pytest.approx(5.0)

    def test_against_dense_resampling_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            t = random_track(rng)
            p = rng.uniform(-15, 15, 2)
            d = point_to_polyline_distance(p, t)
            # Oracle: min distance to a very dense resampling of the line.
            dense = resample_uniform(t, 1e-3)
            oracle = np.linalg.norm(dense.points - p, axis=1).min()
            assert d <= oracle + 1e-12
            assert d >= oracle - 5e-4  # within half the dense spacing


class TestChamferDistance:
    def test_identical_zero(self):
        t = make_track([[0, 0], [3, 1], [6, 0]])
        assert track_distance_cmm(t, t) == 0.0

    def test_parallel_offset(self):
        a = make_track(np.column_stack([np.linspace(0, 10, 21), np.zeros(21)]))
        b = make_track(np.column_stack([np.linspace(0, 10, 21), np.full(21, 4.0)]))
        assert track_distance_cmm(a, b) == pytest.approx(4.0)

    def test_against_double_loop_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            a = random_track(rng)
            b = random_track(rng)
            d = track_distance_cmm(a, b, spacing=0.5)
            # Oracle: plain scalar double loop over resampled points and
            # segments of the other track.
            ra = resample_uniform(a, 0.5).points
            rb = resample_uniform(b, 0.5).points

            def seg_dist(p, q0, q1):
                d_ = q1 - q0
                l2 = float(d_ @ d_)
                u = 0.0 if l2 == 0 else max(0.0, min(1.0, float((p - q0) @ d_) / l2))
                return float(np.linalg.norm(p - (q0 + u * d_)))

            def one_way(ps, poly):
                return np.mean([min(seg_dist(p, poly[i], poly[i + 1])
                                    for i in range(len(poly) - 1)) for p in ps])

            oracle = 0.5 * (one_way(ra, rb) + one_way(rb, ra))
            assert d == pytest.approx(oracle, abs=1e-12)

    def test_symmetric_nonnegative(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            a, b = random_track(rng), random_track(rng)
            dab = track_distance_cmm(a, b)
            dba = track_distance_cmm(b, a)
            assert dab == pytest.approx(dba)
            assert dab >= 0.0


def test_jsonl_roundtrip_and_dedup(tmp_path):
    path = tmp_path / "tracks.jsonl"
    t = make_track([[0, 0], [1, 1], [2, 0]], track_id="a",
                   timestamps=[0.0, 1.0, 2.0])
    save_tracks(path, [t], extra={"a": {"oracle_class": 3}})
    loaded = load_tracks(path)
    assert len(loaded) == 1
    np.testing.assert_allclose(loaded[0].points, t.points)
    np.testing.assert_allclose(loaded[0].timestamps, t.timestamps)

    # duplicate points collapse; degenerate tracks are dropped
    with open(path, "a") as f:
        f.write('{"track_id": "dup", "camera_id": "c", "frame": "ground-m", '
                '"points": [[1,1],[1,1],[2,2]]}\n')
        f.write('{"track_id": "bad", "camera_id": "c", "frame": "ground-m", '
                '"points": [[5,5],[5,5]]}\n')
    loaded = load_tracks(path)
    ids = {t.track_id for t in loaded}
    assert "dup" in ids and "bad" not in ids
    dup = next(t for t in loaded if t.track_id == "dup")
    assert len(dup.points) == 2
