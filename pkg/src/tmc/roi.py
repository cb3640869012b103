"""Region of interest, edge crossings and the 12-class movement taxonomy."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FrameMismatchError, UnclassifiableError
from .geometry import Homography, apply_homography
from .tracks import Track, arc_lengths, points_to_polyline_distances

log = logging.getLogger(__name__)

EDGE_LABELS = ("N", "E", "S", "W")
ORTHO_FRAME = "ortho-px"

__all__ = [
    "EDGE_LABELS",
    "MovementClass",
    "ALL_CLASSES",
    "RegionOfInterest",
    "CrossingEvent",
    "edge_crossings",
    "label_training_track",
    "entry_exit_class",
    "read_roi",
    "write_roi",
]


@dataclass(frozen=True)
class MovementClass:
    """Ordered (entry edge, exit edge) pair; 12 valid values.

    Index convention: entry edges enumerated N, E, S, W; for each entry the
    three exits in clockwise order starting from the entry. Indices 1-12.
    """

    entry_edge: str
    exit_edge: str

    def __post_init__(self):
        if self.entry_edge not in EDGE_LABELS or self.exit_edge not in EDGE_LABELS:
            raise DataError(f"unknown edge label in {self}")
        if self.entry_edge == self.exit_edge:
            raise DataError("entry and exit edges must differ")

    @property
    def index(self) -> int:
        e = EDGE_LABELS.index(self.entry_edge)
        x = EDGE_LABELS.index(self.exit_edge)
        return 3 * e + (x - e - 1) % 4 + 1

    @classmethod
    def from_index(cls, idx: int) -> "MovementClass":
        if not 1 <= idx <= 12:
            raise DataError(f"movement class index out of range: {idx}")
        e, pos = divmod(idx - 1, 3)
        x = (e + pos + 1) % 4
        return cls(EDGE_LABELS[e], EDGE_LABELS[x])

    def __str__(self):
        return f"{self.entry_edge}->{self.exit_edge}"


ALL_CLASSES = tuple(MovementClass.from_index(i) for i in range(1, 13))


def _segments_intersect(p0, p1, q0, q1):
    """Intersection of segments p0p1 and q0q1; returns (t, point) with t the
    parameter along p, or None. Parallel segments return None."""
    r = p1 - p0
    s = q1 - q0
    denom = r[0] * s[1] - r[1] * s[0]
    if abs(denom) < 1e-15:
        return None
    qp = q0 - p0
    t = (qp[0] * s[1] - qp[1] * s[0]) / denom
    u = (qp[0] * r[1] - qp[1] * r[0]) / denom
    eps = 1e-12
    if -eps <= t <= 1 + eps and -eps <= u <= 1 + eps:
        t = min(max(t, 0.0), 1.0)
        return t, p0 + t * r
    return None


@dataclass(frozen=True)
class RegionOfInterest:
    """Simple quadrilateral with labeled edges and per-movement lane counts.

    Edge i runs from corners[i] to corners[(i+1) % 4] and carries
    edge_labels[i]; lane_counts maps movement class index -> lanes.
    """

    frame: str
    corners: np.ndarray
    edge_labels: tuple = EDGE_LABELS
    lane_counts: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=float).reshape(4, 2)
        c.setflags(write=False)
        object.__setattr__(self, "corners", c)
        labels = tuple(self.edge_labels)
        if sorted(labels) != sorted(EDGE_LABELS):
            raise DataError(f"edge labels must be a permutation of {EDGE_LABELS}")
        object.__setattr__(self, "edge_labels", labels)
        # Simple polygon check: the two pairs of opposite edges must not cross.
        segs = self._segments(c)
        for i, j in ((0, 2), (1, 3)):
            if _segments_intersect(*segs[i], *segs[j]) is not None:
                raise DataError("ROI corners form a self-intersecting quadrilateral")
        for idx, n in self.lane_counts.items():
            if not (1 <= int(idx) <= 12 and int(n) >= 0):
                raise DataError(f"invalid lane count entry {idx}: {n}")

    @staticmethod
    def _segments(corners):
        return [(corners[i], corners[(i + 1) % 4]) for i in range(4)]

    def edges(self):
        """Yield (label, p0, p1) for the four edges."""
        for label, (p0, p1) in zip(self.edge_labels, self._segments(self.corners)):
            yield label, p0, p1

    def contains(self, p) -> bool:
        """Even-odd point-in-polygon test."""
        x, y = float(p[0]), float(p[1])
        inside = False
        c = self.corners
        j = 3
        for i in range(4):
            xi, yi = c[i]
            xj, yj = c[j]
            if (yi > y) != (yj > y):
                x_cross = xi + (y - yi) / (yj - yi) * (xj - xi)
                if x < x_cross:
                    inside = not inside
            j = i
        return inside

    def edge_distances(self, p) -> list:
        """(distance, label) per edge, sorted ascending (stable in edge order)."""
        out = []
        for label, p0, p1 in self.edges():
            d = float(points_to_polyline_distances(
                np.asarray(p, dtype=float), np.array([p0, p1]))[0])
            out.append((d, label))
        return sorted(out, key=lambda dl: dl[0])

    def nearest_edge(self, p) -> str:
        return self.edge_distances(p)[0][1]

    def transformed(self, fn, frame: str) -> "RegionOfInterest":
        """New ROI with corners mapped through ``fn`` and a new frame tag."""
        return RegionOfInterest(frame=frame, corners=fn(self.corners),
                                edge_labels=self.edge_labels,
                                lane_counts=dict(self.lane_counts))

    def in_ground(self, hom: Homography) -> "RegionOfInterest":
        """Ortho-pixel ROI scaled to ground metres."""
        if self.frame != ORTHO_FRAME:
            raise FrameMismatchError(f"expected {ORTHO_FRAME} ROI, got {self.frame}")
        return self.transformed(lambda c: c * hom.scale_m_per_px, "ground-m")

    def in_camera(self, hom: Homography) -> "RegionOfInterest":
        """ROI mapped to the undistorted camera plane via the inverse homography."""
        if self.frame != ORTHO_FRAME:
            raise FrameMismatchError(f"expected {ORTHO_FRAME} ROI, got {self.frame}")
        return self.transformed(
            lambda c: apply_homography(hom, c, inverse=True), "camera-px")


@dataclass(frozen=True)
class CrossingEvent:
    """One track/edge intersection, located by arc length along the track."""

    edge: str
    segment_index: int
    point: np.ndarray
    arc_pos: float


def _line_side(p, a, b) -> float:
    """Signed area of (a, b, p); sign identifies the side of line ab."""
    return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])


def edge_crossings(t: Track, roi: RegionOfInterest) -> list:
    """All proper track/ROI-edge intersections, ordered by arc length.

    Touches shared by two consecutive track segments (a vertex on an edge)
    are counted once; a crossing at an ROI corner is attributed to the edge
    whose line the track actually crosses there.
    """
    if t.frame != roi.frame:
        raise FrameMismatchError(
            f"track frame {t.frame!r} != ROI frame {roi.frame!r}")
    pts = t.points
    cum = arc_lengths(pts)
    raw = []  # (arc_pos, edge_idx, seg_idx, point)
    edge_list = list(roi.edges())
    for i in range(len(pts) - 1):
        p0, p1 = pts[i], pts[i + 1]
        for e_idx, (label, q0, q1) in enumerate(edge_list):
            hit = _segments_intersect(p0, p1, q0, q1)
            if hit is None:
                continue
            tt, point = hit
            arc = cum[i] + tt * (cum[i + 1] - cum[i])
            raw.append((arc, e_idx, i, point))
    raw.sort(key=lambda r: (r[0], r[1]))

    tol = 1e-9 * max(1.0, cum[-1])
    events = []
    groups = []
    for r in raw:
        if groups and r[0] - groups[-1][-1][0] <= tol:
            groups[-1].append(r)
        else:
            groups.append([r])
    for group in groups:
        edge_idxs = sorted({r[1] for r in group})
        arc, _, seg_idx, point = group[0]
        if len(edge_idxs) == 1:
            chosen = edge_idxs[0]
        else:
            # Corner touch: keep the edge whose supporting line the track
            # crosses, judged from points just before/after the corner.
            before = _point_at_arc(pts, cum, max(arc - tol * 10, arc * 0.0))
            after = _point_at_arc(pts, cum, min(arc + max(tol * 10, 1e-6 * max(1.0, cum[-1])), cum[-1]))
            chosen = None
            for e_idx in edge_idxs:
                _, q0, q1 = edge_list[e_idx]
                if _line_side(before, q0, q1) * _line_side(after, q0, q1) < 0:
                    chosen = e_idx
                    break
            if chosen is None:
                chosen = edge_idxs[0]
        events.append(CrossingEvent(edge=edge_list[chosen][0],
                                    segment_index=seg_idx,
                                    point=np.asarray(point, dtype=float),
                                    arc_pos=float(arc)))
    return events


def _point_at_arc(pts, cum, s):
    x = np.interp(s, cum, pts[:, 0])
    y = np.interp(s, cum, pts[:, 1])
    return np.array([x, y])


def label_training_track(t: Track, roi: RegionOfInterest):
    """Movement class from first/last edge crossings, or None.

    A usable training track crosses at least two ROI edges and its first and
    last crossing edges differ; anything else is rejected (U-turns, tracks
    that start or end inside the ROI, tracks that never reach it).
    """
    events = edge_crossings(t, roi)
    if len(events) < 2:
        return None
    if events[0].edge == events[-1].edge:
        return None
    return MovementClass(events[0].edge, events[-1].edge)


def entry_exit_class(t: Track, roi: RegionOfInterest) -> MovementClass:
    """Entry-exit classification that tolerates truncated tracks.

    Entry is the first crossing edge, or the nearest edge to the start point
    when the track starts inside the ROI (symmetrically for the exit). When
    both resolve to the same edge the exit falls back to the next-nearest
    edge to the endpoint.
    """
    events = edge_crossings(t, roi)
    start_inside = roi.contains(t.start)
    end_inside = roi.contains(t.end)

    if start_inside:
        entry = roi.nearest_edge(t.start)
    elif events:
        entry = events[0].edge
    else:
        raise UnclassifiableError(
            f"track {t.track_id!r} never intersects the ROI")

    if end_inside:
        exit_ = roi.nearest_edge(t.end)
    elif events:
        exit_ = events[-1].edge
    else:
        raise UnclassifiableError(
            f"track {t.track_id!r} never intersects the ROI")

    if entry == exit_:
        for _, label in roi.edge_distances(t.end):
            if label != entry:
                exit_ = label
                break
        log.debug("track %r: same-edge entry/exit %r, exit reassigned to %r",
                  t.track_id, entry, exit_)
    return MovementClass(entry, exit_)


def read_roi(path) -> RegionOfInterest:
    """Load an ROI file: frame, 4 corners, edge labels, lane counts."""
    with open(path) as f:
        doc = json.load(f)
    return RegionOfInterest(
        frame=doc.get("frame", ORTHO_FRAME),
        corners=np.asarray(doc["corners"], dtype=float),
        edge_labels=tuple(doc.get("edge_labels", EDGE_LABELS)),
        lane_counts={int(k): int(v)
                     for k, v in doc.get("lane_counts", {}).items()},
    )


def write_roi(path, roi: RegionOfInterest) -> None:
    doc = {
        "frame": roi.frame,
        "corners": [[float(x), float(y)] for x, y in roi.corners],
        "edge_labels": list(roi.edge_labels),
        "lane_counts": {str(k): int(v) for k, v in sorted(roi.lane_counts.items())},
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
