import json

import numpy as np
import pytest

from tmc.errors import DataError, FrameMismatchError, UnclassifiableError
from tmc.geometry import Homography
from tmc.roi import (
    ALL_CLASSES,
    EDGE_LABELS,
    MovementClass,
    RegionOfInterest,
    edge_crossings,
    entry_exit_class,
    label_training_track,
    read_roi,
    write_roi,
)
from tmc.tracks import GROUND_FRAME

from conftest import make_track

# Frozen class order: for each entry edge (N, E, S, W) the three exits in
# clockwise order starting just past the entry.
EXPECTED_ORDER = [
    ("N", "E"), ("N", "S"), ("N", "W"),
    ("E", "S"), ("E", "W"), ("E", "N"),
    ("S", "W"), ("S", "N"), ("S", "E"),
    ("W", "N"), ("W", "E"), ("W", "S"),
]


def square_roi(a=10.0, frame=GROUND_FRAME, lane_counts=None):
    return RegionOfInterest(
        frame=frame,
        corners=[[-a, a], [a, a], [a, -a], [-a, -a]],
        edge_labels=EDGE_LABELS,
        lane_counts=lane_counts or {},
    )


class TestMovementClass:
    def test_twelve_classes_in_frozen_order(self):
        assert [(c.entry_edge, c.exit_edge) for c in ALL_CLASSES] == EXPECTED_ORDER

    def test_index_roundtrip(self):
        for i in range(1, 13):
            c = MovementClass.from_index(i)
            assert c.index == i
            assert MovementClass(c.entry_edge, c.exit_edge) == c

    def test_all_ordered_pairs_covered(self):
        pairs = {(c.entry_edge, c.exit_edge) for c in ALL_CLASSES}
        assert len(pairs) == 12
        for e in EDGE_LABELS:
            for x in EDGE_LABELS:
                assert ((e, x) in pairs) == (e != x)

    def test_invalid(self):
        with pytest.raises(DataError):
            MovementClass("N", "N")
        with pytest.raises(DataError):
            MovementClass("N", "Q")
        with pytest.raises(DataError):
            MovementClass.from_index(0)
        with pytest.raises(DataError):
            MovementClass.from_index(13)

    def test_str(self):
        assert str(MovementClass("W", "E")) == "W->E"


class TestRegionOfInterest:
    def test_contains(self):
        roi = square_roi(10.0)
        assert roi.contains((0.0, 0.0))
        assert roi.contains((9.9, -9.9))
        assert not roi.contains((10.1, 0.0))
        assert not roi.contains((0.0, -11.0))

    def test_bowtie_rejected(self):
        with pytest.raises(DataError):
            RegionOfInterest(frame=GROUND_FRAME,
                             corners=[[0, 0], [10, 10], [10, 0], [0, 10]])

    def test_bad_labels(self):
        with pytest.raises(DataError):
            square_roi().__class__(frame=GROUND_FRAME,
                                   corners=square_roi().corners,
                                   edge_labels=("N", "N", "S", "W"))

    def test_nearest_edge(self):
        roi = square_roi(10.0)
        assert roi.nearest_edge((0.0, 9.0)) == "N"
        assert roi.nearest_edge((9.0, 0.0)) == "E"
        assert roi.nearest_edge((0.0, -9.0)) == "S"
        assert roi.nearest_edge((-20.0, 0.0)) == "W"

    def test_edge_distances_sorted_and_exact(self):
        roi = square_roi(10.0)
        dists = roi.edge_distances((0.0, 4.0))
        assert [d for d, _ in dists] == sorted(d for d, _ in dists)
        by_label = {label: d for d, label in dists}
        assert by_label["N"] == pytest.approx(6.0)
        assert by_label["S"] == pytest.approx(14.0)
        assert by_label["E"] == pytest.approx(10.0)
        assert by_label["W"] == pytest.approx(10.0)

    def test_in_ground_scales_corners(self):
        roi = square_roi(100.0, frame="ortho-px")
        hom = Homography.identity(scale_m_per_px=0.05)
        g = roi.in_ground(hom)
        assert g.frame == GROUND_FRAME
        np.testing.assert_allclose(g.corners, roi.corners * 0.05)

    def test_in_camera_roundtrip(self):
        roi = square_roi(100.0, frame="ortho-px")
        h = np.array([[2.0, 0.1, 5.0], [0.0, 1.5, -3.0], [1e-4, 0, 1.0]])
        hom = Homography(h)
        cam = roi.in_camera(hom)
        assert cam.frame == "camera-px"
        # Mapping the camera corners forward must land on the ortho corners.
        q = np.column_stack([cam.corners, np.ones(4)]) @ (h / np.linalg.norm(h)).T
        np.testing.assert_allclose(q[:, :2] / q[:, 2:], roi.corners, atol=1e-9)

    def test_frame_guards(self):
        roi = square_roi(10.0, frame=GROUND_FRAME)
        with pytest.raises(FrameMismatchError):
            roi.in_ground(Homography.identity())
        with pytest.raises(FrameMismatchError):
            roi.in_camera(Homography.identity())


class TestEdgeCrossings:
    def test_straight_through_north_south(self):
        roi = square_roi(10.0)
        t = make_track([[0.0, 20.0], [0.0, -20.0]])
        events = edge_crossings(t, roi)
        assert [e.edge for e in events] == ["N", "S"]
        np.testing.assert_allclose(events[0].point, [0.0, 10.0], atol=1e-12)
        np.testing.assert_allclose(events[1].point, [0.0, -10.0], atol=1e-12)
        assert events[0].arc_pos == pytest.approx(10.0)
        assert events[1].arc_pos == pytest.approx(30.0)

    def test_vertex_on_edge_counted_once(self):
        roi = square_roi(10.0)
        # The middle vertex sits exactly on the N edge: the touch is shared
        # by two consecutive segments but is one crossing.
        t = make_track([[0.0, 20.0], [0.0, 10.0], [0.0, -20.0]])
        events = edge_crossings(t, roi)
        assert [e.edge for e in events] == ["N", "S"]

    def test_corner_crossing_attributed_to_crossed_line(self):
        roi = square_roi(10.0)
        # Diagonal through the NE corner (10, 10): crosses the N supporting
        # line there, deterministically attributed once.
        t = make_track([[0.0, 20.0], [20.0, 0.0]])
        events = edge_crossings(t, roi)
        assert len(events) == 1
        np.testing.assert_allclose(events[0].point, [10.0, 10.0], atol=1e-9)

    def test_frame_mismatch(self):
        roi = square_roi(10.0, frame="ortho-px")
        with pytest.raises(FrameMismatchError):
            edge_crossings(make_track([[0, 0], [1, 1]]), roi)

    def test_parity_matches_endpoint_sides(self):
        # Oracle invariant: for endpoints away from the boundary, the number
        # of boundary crossings is odd iff exactly one endpoint is inside.
        roi = square_roi(10.0)
        rng = np.random.default_rng(8)
        for _ in range(200):
            pts = rng.uniform(-25, 25, (rng.integers(2, 8), 2))
            if np.min(np.abs(np.abs(pts) - 10.0)) < 1e-3:
                continue
            t = make_track(pts)
            n = len(edge_crossings(t, roi))
            one_inside = roi.contains(t.start) != roi.contains(t.end)
            assert (n % 2 == 1) == one_inside


class TestLabelTrainingTrack:
    def test_all_twelve_synthetic_throughs(self):
        roi = square_roi(10.0)
        mids = {"N": (0.0, 10.0), "E": (10.0, 0.0),
                "S": (0.0, -10.0), "W": (-10.0, 0.0)}
        outs = {"N": (0.0, 25.0), "E": (25.0, 0.0),
                "S": (0.0, -25.0), "W": (-25.0, 0.0)}
        for c in ALL_CLASSES:
            t = make_track([outs[c.entry_edge], mids[c.entry_edge],
                            (0.0, 0.0), mids[c.exit_edge], outs[c.exit_edge]])
            assert label_training_track(t, roi) == c

    def test_u_turn_rejected(self):
        roi = square_roi(10.0)
        t = make_track([[-2.0, 20.0], [-2.0, 5.0], [2.0, 5.0], [2.0, 20.0]])
        assert label_training_track(t, roi) is None

    def test_truncated_rejected(self):
        roi = square_roi(10.0)
        # ends inside: one crossing only
        assert label_training_track(
            make_track([[0.0, 20.0], [0.0, 0.0]]), roi) is None
        # never reaches the ROI
        assert label_training_track(
            make_track([[15.0, 20.0], [15.0, -20.0]]), roi) is None


class TestEntryExitClass:
    def test_complete_track_matches_training_label(self):
        roi = square_roi(10.0)
        t = make_track([[0.0, 20.0], [0.0, 0.0], [20.0, 0.0]])
        assert entry_exit_class(t, roi) == MovementClass("N", "E")
        assert label_training_track(t, roi) == MovementClass("N", "E")

    def test_truncated_end_inside_uses_nearest_edge(self):
        roi = square_roi(10.0)
        # Enters through N, ends inside near the E edge.
        t = make_track([[0.0, 20.0], [0.0, 2.0], [8.0, 0.0]])
        assert entry_exit_class(t, roi) == MovementClass("N", "E")

    def test_truncated_start_inside(self):
        roi = square_roi(10.0)
        t = make_track([[-8.0, 0.0], [0.0, 0.0], [0.0, -20.0]])
        assert entry_exit_class(t, roi) == MovementClass("W", "S")

    def test_fully_inside_same_edge_reassigned(self):
        roi = square_roi(10.0)
        # Both endpoints nearest to N; exit reassigned to the endpoint's
        # second-nearest edge (E here).
        t = make_track([[-3.0, 9.0], [5.0, 8.0]])
        c = entry_exit_class(t, roi)
        assert c.entry_edge == "N"
        assert c.exit_edge == "E"

    def test_outside_unclassifiable(self):
        roi = square_roi(10.0)
        with pytest.raises(UnclassifiableError):
            entry_exit_class(make_track([[15.0, 0.0], [20.0, 0.0]]), roi)


def test_roi_file_roundtrip(tmp_path):
    roi = square_roi(250.0, frame="ortho-px",
                     lane_counts={i: (i % 3) + 1 for i in range(1, 13)})
    path = tmp_path / "roi.json"
    write_roi(path, roi)
    loaded = read_roi(path)
    assert loaded.frame == roi.frame
    np.testing.assert_allclose(loaded.corners, roi.corners)
    assert loaded.edge_labels == roi.edge_labels
    assert loaded.lane_counts == roi.lane_counts
    # stable serialization: keys sorted, trailing newline
    text = path.read_text()
    assert text.endswith("\n")
    assert json.loads(text)["lane_counts"]["1"] == 2
