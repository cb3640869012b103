import math

import numpy as np
import pytest

from tmc.errors import DataError
from tmc.geometry import apply_homography
from tmc.roi import ALL_CLASSES, MovementClass, label_training_track
from tmc.synth import (
    SyntheticCamera,
    four_way_intersection,
    generate_scene,
    oblique_camera_homography,
    oracle_label,
    project_scene,
    read_intersection_spec,
    write_intersection_spec,
)
from tmc.tracks import CAMERA_FRAME, GROUND_FRAME


class TestFourWayIntersection:
    def test_roi_square_and_labels(self):
        spec = four_way_intersection(half_size=15.0)
        np.testing.assert_allclose(
            spec.roi.corners, [[-15, 15], [15, 15], [15, -15], [-15, -15]])
        assert spec.roi.edge_labels == ("N", "E", "S", "W")
        assert spec.roi.frame == GROUND_FRAME
        assert set(spec.centerlines) == set(range(1, 13))
        assert all(spec.roi.lane_counts[i] == 1 for i in range(1, 13))

    def test_centerlines_carry_their_own_label(self):
        # Oracle check: labeling each noiseless centerline by ROI edge
        # crossings must recover its class.
        spec = four_way_intersection(half_size=15.0, approach=20.0)
        for idx, lanes in spec.centerlines.items():
            for lane in lanes:
                from conftest import make_track
                t = make_track(lane, track_id=f"c{idx}")
                assert label_training_track(t, spec.roi) == \
                    MovementClass.from_index(idx)

    def test_right_hand_lane_offsets(self):
        spec = four_way_intersection(half_size=15.0, lane_width=3.5)
        # N->S straight centerline: southbound traffic keeps to x < 0 under
        # right-hand driving, offset half a lane width from the road center.
        lane = spec.centerlines[2][0]
        assert np.all(np.abs(lane[:, 0] - (-1.75)) < 1e-9)
        # S->N runs at x = +1.75.
        lane = spec.centerlines[8][0]
        assert np.all(np.abs(lane[:, 0] - 1.75) < 1e-9)

    def test_multiple_lanes(self):
        spec = four_way_intersection(lanes_per_class=2, lane_width=3.0)
        assert all(len(lanes) == 2 for lanes in spec.centerlines.values())
        assert all(spec.roi.lane_counts[i] == 2 for i in range(1, 13))
        a, b = spec.centerlines[2]
        assert abs(a[0][0] - b[0][0]) == pytest.approx(3.0)

    def test_class_subset_and_weights(self):
        spec = four_way_intersection(classes=[2, 5], weights={2: 3.0, 5: 1.0})
        assert set(spec.centerlines) == {2, 5}
        assert spec.weights == {2: 3.0, 5: 1.0}

    def test_weight_without_centerline_rejected(self):
        with pytest.raises(DataError):
            four_way_intersection(classes=[2], weights={5: 1.0})


class TestGenerateScene:
    def test_labels_match_crossing_oracle(self):
        spec = four_way_intersection(half_size=15.0, lateral_sigma=0.3)
        scene = generate_scene(spec, 50, seed=0)
        assert len(scene.ground_tracks) == 50
        for t in scene.ground_tracks:
            got = label_training_track(t, spec.roi)
            assert got is not None
            assert got.index == scene.labels[t.track_id]
            assert oracle_label(scene, t.track_id) == scene.labels[t.track_id]

    def test_deterministic(self):
        spec = four_way_intersection(lateral_sigma=0.5)
        a = generate_scene(spec, 10, seed=7)
        b = generate_scene(spec, 10, seed=7)
        for ta, tb in zip(a.ground_tracks, b.ground_tracks):
            np.testing.assert_array_equal(ta.points, tb.points)
            np.testing.assert_array_equal(ta.timestamps, tb.timestamps)
        assert a.labels == b.labels

    def test_lateral_noise_rms(self):
        # Stationary lateral offsets: RMS across many straight-through
        # tracks must sit near sigma.
        sigma = 0.8
        spec = four_way_intersection(half_size=15.0, approach=25.0,
                                     lateral_sigma=sigma, classes=[2])
        scene = generate_scene(spec, 120, seed=1)
        center_x = -1.75
        offs = np.concatenate([t.points[:, 0] - center_x
                               for t in scene.ground_tracks])
        rms = float(np.sqrt(np.mean(offs ** 2)))
        assert rms == pytest.approx(sigma, rel=0.15)

    def test_noise_correlated_along_track(self):
        spec = four_way_intersection(lateral_sigma=1.0, classes=[2])
        scene = generate_scene(spec, 40, seed=2)
        # lag-1 (0.5 m) autocorrelation of the offsets ~ exp(-0.5/5) = 0.90
        rhos = []
        for t in scene.ground_tracks:
            x = t.points[:, 0] - (-1.75)
            rhos.append(np.corrcoef(x[:-1], x[1:])[0, 1])
        assert np.mean(rhos) == pytest.approx(math.exp(-0.1), abs=0.08)

    def test_timestamps_monotonic_and_speed(self):
        spec = four_way_intersection(speed_range=(10.0, 10.0))
        scene = generate_scene(spec, 5, seed=3)
        for t in scene.ground_tracks:
            assert np.all(np.diff(t.timestamps) > 0)
            dur = t.timestamps[-1] - t.timestamps[0]
            assert t.arc_length() / dur == pytest.approx(10.0, rel=1e-6)

    def test_weight_mixture(self):
        spec = four_way_intersection(classes=[2, 8], weights={2: 9.0, 8: 1.0})
        scene = generate_scene(spec, 400, seed=4)
        frac2 = np.mean([c == 2 for c in scene.labels.values()])
        assert frac2 == pytest.approx(0.9, abs=0.05)

    def test_invalid(self):
        spec = four_way_intersection()
        with pytest.raises(DataError):
            generate_scene(spec, 0, seed=0)


class TestObliqueCamera:
    def test_origin_projects_to_image_center(self):
        h = oblique_camera_homography(height=5.0, distance=45.0,
                                      image_size=(1920, 1080))
        q = h @ np.array([0.0, 0.0, 1.0])
        np.testing.assert_allclose(q[:2] / q[2], [960.0, 540.0], atol=1e-9)

    def test_nearer_points_lower_in_image(self):
        # Camera sits at (0, -45): points closer to it must project lower
        # (larger y) in the image than points farther away.
        h = oblique_camera_homography(height=5.0, distance=45.0)
        near = h @ np.array([0.0, -20.0, 1.0])
        far = h @ np.array([0.0, 20.0, 1.0])
        assert near[1] / near[2] > far[1] / far[2]

    def test_azimuth_rotates_camera(self):
        h = oblique_camera_homography(azimuth=math.pi / 2)
        # Camera now sits at (+45, 0); a point near it ((20, 0)) is low in
        # the image, a far point ((-20, 0)) is high.
        near = h @ np.array([20.0, 0.0, 1.0])
        far = h @ np.array([-20.0, 0.0, 1.0])
        assert near[1] / near[2] > far[1] / far[2]

    def test_calibration_homography_inverts_projection(self):
        h = oblique_camera_homography()
        cam = SyntheticCamera(camera_id="c1", h_ground_to_camera=h)
        calib = cam.calibration_homography(scale_m_per_px=0.05)
        rng = np.random.default_rng(0)
        ground = rng.uniform(-10, 10, (20, 2))
        q = np.column_stack([ground, np.ones(20)]) @ h.T
        px = q[:, :2] / q[:, 2:]
        ortho = apply_homography(calib, px)
        np.testing.assert_allclose(ortho * 0.05, ground, atol=1e-9)


class TestProjectScene:
    def make_scene(self, **kw):
        spec = four_way_intersection(half_size=15.0, lateral_sigma=0.3, **kw)
        return spec, generate_scene(spec, 30, seed=5)

    def camera(self, **kw):
        h = oblique_camera_homography(height=6.0, distance=50.0)
        return SyntheticCamera(camera_id="c1", h_ground_to_camera=h, **kw)

    def test_projection_matches_homography(self):
        spec, scene = self.make_scene()
        cam = self.camera()
        cam_tracks = project_scene(scene, cam, seed=0)
        by_id = {t.track_id: t for t in scene.ground_tracks}
        for ct in cam_tracks:
            assert ct.frame == CAMERA_FRAME
            src = by_id[ct.track_id.split("#")[0]]
            # noiseless projection: every camera point equals the homography
            # image of some source point
            q = np.column_stack([src.points, np.ones(len(src.points))]) \
                @ cam.h_ground_to_camera.T
            proj = q[:, :2] / q[:, 2:]
            for p in ct.points[::7]:
                assert np.min(np.linalg.norm(proj - p, axis=1)) < 1e-9

    def test_points_inside_image(self):
        spec, scene = self.make_scene()
        cam = self.camera()
        for ct in project_scene(scene, cam, seed=0):
            assert np.all(ct.points[:, 0] >= 0)
            assert np.all(ct.points[:, 0] <= cam.image_size[0])
            assert np.all(ct.points[:, 1] >= 0)
            assert np.all(ct.points[:, 1] <= cam.image_size[1])

    def test_occlusion_fragments_tracks(self):
        spec, scene = self.make_scene(classes=[11])  # W->E through tracks
        # Occlude a wedge crossing the W->E lane (which runs at y = -1.75).
        cam = self.camera(occlusion_sector=(-2.0, -1.0),
                          occlusion_center=(0.0, 10.0))
        frags = project_scene(scene, cam, seed=0)
        assert any("#" in t.track_id for t in frags)
        for t in frags:
            assert len(t.points) >= 5
            assert oracle_label(scene, t.track_id) == 11

    def test_truncation_shortens_tracks(self):
        spec, scene = self.make_scene()
        full = project_scene(scene, self.camera(), seed=1)
        cut = project_scene(scene, self.camera(truncation_prob=1.0,
                                               truncation_max_frac=0.4),
                            seed=1)
        n_full = {t.track_id: len(t.points) for t in full}
        assert any(len(t.points) < n_full.get(t.track_id, 10 ** 9)
                   for t in cut)

    def test_detection_noise(self):
        spec, scene = self.make_scene()
        clean = {t.track_id: t for t in project_scene(scene, self.camera(), seed=2)}
        noisy = project_scene(scene, self.camera(detection_noise_px=2.0), seed=2)
        devs = []
        for t in noisy:
            if t.track_id in clean and len(clean[t.track_id].points) == len(t.points):
                devs.append(np.std(t.points - clean[t.track_id].points))
        assert devs and 1.0 < np.mean(devs) < 3.0

    def test_min_fragment_points_enforced(self):
        spec, scene = self.make_scene()
        for t in project_scene(scene, self.camera(), seed=3,
                               min_fragment_points=8):
            assert len(t.points) >= 8

    def test_oracle_label_unknown(self):
        _, scene = self.make_scene()
        with pytest.raises(DataError):
            oracle_label(scene, "nope#3")


def test_spec_file_roundtrip(tmp_path):
    spec = four_way_intersection(half_size=12.0, lanes_per_class=2,
                                 lateral_sigma=0.7, classes=[1, 2, 5],
                                 weights={1: 1.0, 2: 2.0, 5: 0.5},
                                 speed_range=(6.0, 9.0))
    path = tmp_path / "intersection.json"
    write_intersection_spec(path, spec)
    loaded = read_intersection_spec(path)
    np.testing.assert_allclose(loaded.roi.corners, spec.roi.corners)
    assert loaded.roi.lane_counts == spec.roi.lane_counts
    assert loaded.weights == spec.weights
    assert loaded.lateral_sigma == spec.lateral_sigma
    assert loaded.speed_range == spec.speed_range
    assert set(loaded.centerlines) == set(spec.centerlines)
    for idx in spec.centerlines:
        for a, b in zip(loaded.centerlines[idx], spec.centerlines[idx]):
            np.testing.assert_allclose(a, b)
