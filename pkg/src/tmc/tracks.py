"""Track representation, arc-length resampling and track-to-track distance."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, DegenerateTrackError

log = logging.getLogger(__name__)

CAMERA_FRAME = "camera-px"
GROUND_FRAME = "ground-m"

__all__ = [
    "Track",
    "ResampledTrack",
    "arc_lengths",
    "resample_uniform",
    "track_direction",
    "point_to_polyline_distance",
    "points_to_polyline_distances",
    "track_distance_cmm",
    "load_tracks",
    "save_tracks",
]


def _dedup_consecutive(points, timestamps=None, bboxes=None):
    """Drop consecutive duplicate points (carrying companions along)."""
    keep = np.ones(len(points), dtype=bool)
    keep[1:] = np.any(points[1:] != points[:-1], axis=1)
    if np.all(keep):
        return points, timestamps, bboxes
    return (points[keep],
            timestamps[keep] if timestamps is not None else None,
            bboxes[keep] if bboxes is not None else None)


@dataclass(frozen=True)
class Track:
    """Time-ordered 2D positions of one vehicle in one coordinate frame."""

    track_id: str
    camera_id: str
    frame: str
    points: np.ndarray
    timestamps: np.ndarray | None = None
    bboxes: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if len(pts) < 2:
            raise DegenerateTrackError(
                f"track {self.track_id!r} has fewer than 2 points")
        if not np.all(np.isfinite(pts)):
            raise DataError(f"track {self.track_id!r} has non-finite points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps, dtype=float)
            if len(ts) != len(pts):
                raise DataError("timestamps length mismatch")
            if np.any(np.diff(ts) <= 0):
                raise DataError("timestamps must be strictly increasing")
            ts.setflags(write=False)
            object.__setattr__(self, "timestamps", ts)
        if self.bboxes is not None:
            bb = np.asarray(self.bboxes, dtype=float).reshape(-1, 4)
            if len(bb) != len(pts):
                raise DataError("bboxes length mismatch")
            bb.setflags(write=False)
            object.__setattr__(self, "bboxes", bb)

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def arc_length(self) -> float:
        return float(arc_lengths(self.points)[-1])

    def with_points(self, points, frame=None, timestamps=None) -> "Track":
        return Track(track_id=self.track_id, camera_id=self.camera_id,
                     frame=frame or self.frame, points=points,
                     timestamps=timestamps)


@dataclass(frozen=True)
class ResampledTrack(Track):
    """Track whose points sit at uniform arc-length steps of ``spacing``."""

    spacing: float = field(default=0.0)


def arc_lengths(points: np.ndarray) -> np.ndarray:
    """Cumulative arc length at each vertex (starts at 0)."""
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def resample_uniform(t: Track, spacing: float) -> ResampledTrack:
    """Resample onto the source polyline at arc-length multiples of spacing.

    The source endpoints are always preserved; the final segment may be
    shorter than ``spacing``.
    """
    if not spacing > 0:
        raise DataError("spacing must be positive")
    pts, ts, _ = _dedup_consecutive(t.points, t.timestamps, None)
    if len(pts) < 2:
        raise DegenerateTrackError(f"track {t.track_id!r} has zero length")
    cum = arc_lengths(pts)
    total = cum[-1]
    if total <= 0:
        raise DegenerateTrackError(f"track {t.track_id!r} has zero length")

    m = int(np.floor(total / spacing + 1e-12))
    targets = np.arange(m + 1) * spacing
    if total - targets[-1] > 1e-9 * max(total, spacing):
        targets = np.append(targets, total)
    else:
        targets[-1] = total

    x = np.interp(targets, cum, pts[:, 0])
    y = np.interp(targets, cum, pts[:, 1])
    out = np.column_stack([x, y])
    out[0] = pts[0]
    out[-1] = pts[-1]
    new_ts = np.interp(targets, cum, ts) if ts is not None else None
    if new_ts is not None and np.any(np.diff(new_ts) <= 0):
        new_ts = None  # duplicate interpolated stamps carry no information
    return ResampledTrack(track_id=t.track_id, camera_id=t.camera_id,
                          frame=t.frame, points=out, timestamps=new_ts,
                          spacing=spacing)


def track_direction(t: Track) -> np.ndarray:
    """Unit vector from the track's first point to its last point."""
    d = t.end - t.start
    n = np.hypot(d[0], d[1])  # no underflow for tiny displacements
    if n <= 0:
        raise DegenerateTrackError(
            f"track {t.track_id!r} has coincident endpoints")
    return d / n


def points_to_polyline_distances(points, polyline) -> np.ndarray:
    """Euclidean distance from each query point to a polyline (proper
    point-to-segment projection)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(polyline, dtype=float)
    a = poly[:-1]
    d = poly[1:] - a
    seg_len2 = np.einsum("ij,ij->i", d, d)
    seg_len2 = np.where(seg_len2 > 0, seg_len2, 1.0)
    # t has shape (n_points, n_segments)
    ap = p[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("pij,ij->pi", ap, d) / seg_len2, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * d[None, :, :]
    dist = np.linalg.norm(p[:, None, :] - closest, axis=2)
    return dist.min(axis=1)


def point_to_polyline_distance(p, t: Track) -> float:
    """Minimum distance from a single point to the track polyline."""
    return float(points_to_polyline_distances(np.asarray(p, dtype=float), t.points)[0])


def track_distance_cmm(a: Track, b: Track, spacing: float | None = None) -> float:
    """Symmetric Chamfer-style track distance.

    Mean distance from a's points to b's polyline, averaged with the
    reverse direction. When ``spacing`` is given both tracks are resampled
    first; otherwise the tracks' own points are used (pass pre-resampled
    tracks for an arc-length-weighted measure).
    """
    if spacing is not None:
        a = resample_uniform(a, spacing)
        b = resample_uniform(b, spacing)
    d_ab = points_to_polyline_distances(a.points, b.points).mean()
    d_ba = points_to_polyline_distances(b.points, a.points).mean()
    return float(0.5 * (d_ab + d_ba))


def load_tracks(path) -> list[Track]:
    """Read tracks from a JSON Lines file.

    Consecutive duplicate points are removed; tracks left with fewer than
    two points are dropped with a warning.
    """
    out = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON: {e}") from e
            pts = np.asarray(rec["points"], dtype=float).reshape(-1, 2)
            ts = (np.asarray(rec["timestamps"], dtype=float)
                  if rec.get("timestamps") is not None else None)
            bb = (np.asarray(rec["bboxes"], dtype=float)
                  if rec.get("bboxes") is not None else None)
            pts, ts, bb = _dedup_consecutive(pts, ts, bb)
            if len(pts) < 2:
                log.warning("dropping degenerate track %r (%s:%d)",
                            rec.get("track_id"), path, lineno)
                continue
            out.append(Track(track_id=str(rec["track_id"]),
                             camera_id=str(rec.get("camera_id", "")),
                             frame=rec.get("frame", CAMERA_FRAME),
                             points=pts, timestamps=ts, bboxes=bb))
    return out


def save_tracks(path, tracks, extra=None) -> None:
    """Write tracks as JSON Lines; ``extra`` maps track_id -> added fields."""
    with open(path, "w") as f:
        for t in tracks:
            rec = {"track_id": t.track_id, "camera_id": t.camera_id,
                   "frame": t.frame,
                   "points": [[float(x), float(y)] for x, y in t.points]}
            if t.timestamps is not None:
                rec["timestamps"] = [float(v) for v in t.timestamps]
            if t.bboxes is not None:
                rec["bboxes"] = [[float(v) for v in bb] for bb in t.bboxes]
            if extra and t.track_id in extra:
                rec.update(extra[t.track_id])
            f.write(json.dumps(rec, sort_keys=True) + "\n")
