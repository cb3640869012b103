"""End-to-end learning and inference pipelines shared by the CLI and tests.

The camera-domain pipeline works in the undistorted camera plane; the
ground-domain pipeline back-projects detections to ground metres before
resampling, so that metric spacings are meaningful.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .classify import CountReport, count_movements
from .errors import ConfigError, DataError, DegenerateTrackError
from .geometry import Homography, Intrinsics, apply_homography, undistort_point
from .kde import (
    DEFAULT_FLOOR,
    MovementLikelihoodModel,
    build_kde_map,
    grid_covering,
    optimize_bandwidth,
)
from .prototypes import DEFAULT_FEATURE_POINTS, PrototypeSet, learn_prototypes
from .roi import RegionOfInterest, label_training_track
from .tracks import (
    CAMERA_FRAME,
    GROUND_FRAME,
    Track,
    resample_uniform,
)

log = logging.getLogger(__name__)

DEFAULT_SPACING_CAMERA_PX = 5.0
DEFAULT_SPACING_GROUND_M = 0.20
DEFAULT_CELL_GROUND_M = 0.22

__all__ = [
    "DEFAULT_SPACING_CAMERA_PX",
    "DEFAULT_SPACING_GROUND_M",
    "DEFAULT_CELL_GROUND_M",
    "LearnedModels",
    "track_to_camera_plane",
    "track_to_ground",
    "prepare_tracks",
    "domain_roi",
    "label_tracks",
    "learn_models",
    "build_class_maps",
    "count_tracks",
]


def track_to_camera_plane(t: Track, intr: Intrinsics) -> Track:
    """Undistorted camera-plane version of a raw camera track."""
    pts = undistort_point(t.points, intr)
    return Track(track_id=t.track_id, camera_id=t.camera_id,
                 frame=CAMERA_FRAME, points=pts, timestamps=t.timestamps)


def track_to_ground(t: Track, intr: Intrinsics, hom: Homography) -> Track:
    """Back-projected ground-metre version of a raw camera track.

    Uses the bottom-midpoint of each detection box when boxes are present,
    otherwise the track points themselves.
    """
    if t.bboxes is not None:
        raw = np.column_stack([0.5 * (t.bboxes[:, 0] + t.bboxes[:, 2]),
                               t.bboxes[:, 3]])
    else:
        raw = t.points
    und = undistort_point(raw, intr)
    ground = apply_homography(hom, und) * hom.scale_m_per_px
    return Track(track_id=t.track_id, camera_id=t.camera_id,
                 frame=GROUND_FRAME, points=ground, timestamps=t.timestamps)


def prepare_tracks(tracks, domain: str, intr: Intrinsics, hom: Homography,
                   spacing: float) -> list:
    """Transform raw camera tracks into the working frame and resample."""
    out = []
    for t in tracks:
        if domain == "ground":
            if t.frame == GROUND_FRAME:
                moved = t
            else:
                moved = track_to_ground(t, intr, hom)
        elif domain == "camera":
            if t.frame != CAMERA_FRAME:
                raise DataError(
                    f"track {t.track_id!r} is in {t.frame!r}, expected camera")
            moved = track_to_camera_plane(t, intr)
        else:
            raise ConfigError(f"unknown domain {domain!r}")
        try:
            out.append(resample_uniform(moved, spacing))
        except DegenerateTrackError:
            log.warning("dropping degenerate track %r", t.track_id)
    return out


def domain_roi(roi: RegionOfInterest, domain: str,
               hom: Homography) -> RegionOfInterest:
    """ROI converted from orthophoto pixels into the working frame."""
    if roi.frame != "ortho-px":
        return roi
    return roi.in_ground(hom) if domain == "ground" else roi.in_camera(hom)


def label_tracks(tracks, roi: RegionOfInterest) -> dict:
    """Group tracks by their unsupervised training label; unlabeled tracks
    are dropped (they are not valid training tracks)."""
    out: dict = {idx: [] for idx in range(1, 13)}
    for t in tracks:
        cls = label_training_track(t, roi)
        if cls is not None:
            out[cls.index].append(t)
    return out


@dataclass(frozen=True)
class LearnedModels:
    """Artifacts of the unsupervised learning pipeline."""

    prototypes: PrototypeSet
    kde_model: MovementLikelihoodModel
    training_counts: dict  # class index -> number of training tracks


def build_class_maps(training: dict, bandwidth: float, cell: float,
                     roi: RegionOfInterest, floor: float = DEFAULT_FLOOR,
                     margin_bw: float = 3.0) -> MovementLikelihoodModel:
    """One KDE map per non-empty class on a shared grid covering the ROI
    and all training points with a margin of ``margin_bw`` bandwidths."""
    all_pts = [roi.corners]
    for tracks in training.values():
        all_pts.extend(t.points for t in tracks)
    grid = grid_covering(np.vstack(all_pts), cell, margin_bw * bandwidth)
    maps = {}
    for idx in range(1, 13):
        tracks = training.get(idx, [])
        maps[idx] = build_kde_map(tracks, bandwidth, grid) if tracks else None
    return MovementLikelihoodModel(maps=maps, grid=grid, bandwidth=bandwidth,
                                   floor=floor)


def learn_models(tracks, roi: RegionOfInterest, *, bandwidth: float | None,
                 bandwidth_candidates=None, cell: float,
                 floor: float = DEFAULT_FLOOR, seed: int = 0,
                 feature_points: int = DEFAULT_FEATURE_POINTS) -> LearnedModels:
    """Full unsupervised learning stage on prepared (resampled) tracks.

    ``bandwidth`` may be None, in which case it is optimized over
    ``bandwidth_candidates`` with the held-out split.
    """
    training = label_tracks(tracks, roi)
    n_training = sum(len(v) for v in training.values())
    if n_training == 0:
        raise DataError("no track qualifies as a training track")
    protos = learn_prototypes(training, roi, seed=seed,
                              feature_points=feature_points)
    if bandwidth is None:
        if not bandwidth_candidates:
            raise ConfigError("bandwidth optimization requires candidates")
        bandwidth = optimize_bandwidth(training, bandwidth_candidates)
        log.info("optimized bandwidth: %.4g", bandwidth)
    model = build_class_maps(training, bandwidth, cell, roi, floor=floor)
    return LearnedModels(prototypes=protos, kde_model=model,
                         training_counts={idx: len(v)
                                          for idx, v in training.items()})


def count_tracks(tracks, methods, *, roi: RegionOfInterest,
                 prototypes: PrototypeSet | None,
                 model: MovementLikelihoodModel | None,
                 camera_id: str, domain: str) -> list:
    """One CountReport per requested method."""
    reports = []
    for method in methods:
        reports.append(count_movements(
            tracks, method, roi=roi, prototypes=prototypes, model=model,
            camera_id=camera_id, domain=domain))
    return reports
