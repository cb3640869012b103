"""Synthetic intersection simulator.

Generates ground-truth-labeled vehicle trajectories on a planar ground
frame and projects them into synthetic camera views (with clipping, noise,
truncation and occlusion), providing an oracle for end-to-end verification.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .geometry import Homography
from .roi import EDGE_LABELS, MovementClass, RegionOfInterest
from .tracks import GROUND_FRAME, CAMERA_FRAME, Track, arc_lengths

log = logging.getLogger(__name__)

__all__ = [
    "IntersectionSpec",
    "SyntheticCamera",
    "SyntheticScene",
    "four_way_intersection",
    "oblique_camera_homography",
    "generate_scene",
    "project_scene",
    "oracle_label",
    "read_intersection_spec",
    "write_intersection_spec",
]


@dataclass(frozen=True)
class IntersectionSpec:
    """Ground-frame geometry and traffic mix driving the simulator."""

    roi: RegionOfInterest  # ground-m frame
    centerlines: dict  # class index -> list of (k, 2) lane centerlines (m)
    weights: dict  # class index -> traffic weight
    lateral_sigma: float = 0.0
    speed_range: tuple = (8.0, 15.0)
    correlation_length: float = 5.0

    def __post_init__(self):
        if self.lateral_sigma < 0:
            raise DataError("lateral noise sigma must be >= 0")
        for idx, w in self.weights.items():
            if w > 0 and not self.centerlines.get(idx):
                raise DataError(f"class {idx} has weight > 0 but no centerline")


@dataclass(frozen=True)
class SyntheticCamera:
    """Projection of ground tracks into one camera view.

    ``h_ground_to_camera`` maps ground metres to camera pixels (the inverse
    of the calibration direction). Occlusion is an angular sector around
    ``occlusion_center`` inside which ground points are invisible.
    """

    camera_id: str
    h_ground_to_camera: np.ndarray
    image_size: tuple = (1920, 1080)
    detection_noise_px: float = 0.0
    truncation_prob: float = 0.0
    truncation_max_frac: float = 0.5
    occlusion_sector: tuple | None = None  # (theta0, theta1) radians
    occlusion_center: tuple = (0.0, 0.0)

    def __post_init__(self):
        h = np.asarray(self.h_ground_to_camera, dtype=float).reshape(3, 3)
        if abs(np.linalg.det(h)) < 1e-15:
            raise DataError("camera homography must be invertible")
        h.setflags(write=False)
        object.__setattr__(self, "h_ground_to_camera", h)
        if not (0.0 <= self.truncation_prob <= 1.0):
            raise DataError("truncation probability must be in [0, 1]")

    def calibration_homography(self, scale_m_per_px: float = 1.0) -> Homography:
        """Camera -> orthophoto homography matching this synthetic view
        (orthophoto pixels coincide with ground metres / scale)."""
        m = np.diag([1.0 / scale_m_per_px, 1.0 / scale_m_per_px, 1.0])
        return Homography(m @ np.linalg.inv(self.h_ground_to_camera),
                          scale_m_per_px)


@dataclass(frozen=True)
class SyntheticScene:
    """Generated ground tracks, their true classes, and camera projections."""

    ground_tracks: list
    labels: dict  # source track_id -> class index
    camera_tracks: dict = field(default_factory=dict)  # camera_id -> [Track]


def _edge_geometry(label: str):
    """Inward unit direction and outward normal bookkeeping for each arm.

    Ground frame is y-up; the N arm is at +y, E at +x, S at -y, W at -x.
    """
    inward = {"N": (0.0, -1.0), "E": (-1.0, 0.0),
              "S": (0.0, 1.0), "W": (1.0, 0.0)}[label]
    return np.array(inward)


def _right_of(d: np.ndarray) -> np.ndarray:
    """Unit vector 90 degrees clockwise from d (right-hand side of travel)."""
    return np.array([d[1], -d[0]])


def _quadratic_bezier(p0, p1, p2, n: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t ** 2 * p2


def four_way_intersection(half_size: float = 15.0, approach: float = 20.0,
                          lanes_per_class: int = 1, lane_width: float = 3.5,
                          lateral_sigma: float = 0.0,
                          classes=None, weights=None,
                          speed_range=(8.0, 15.0)) -> IntersectionSpec:
    """Canonical symmetric four-way intersection.

    The ROI is a square of side 2*half_size centered at the origin; each
    movement class gets ``lanes_per_class`` parallel centerlines entering
    and leaving through its arm at right-hand lane offsets.
    """
    a = half_size
    corners = np.array([[-a, a], [a, a], [a, -a], [-a, -a]])  # N,E,S,W edges
    class_idxs = list(classes) if classes is not None else list(range(1, 13))
    edge_mid = {"N": np.array([0.0, a]), "E": np.array([a, 0.0]),
                "S": np.array([0.0, -a]), "W": np.array([-a, 0.0])}

    centerlines: dict = {}
    lane_counts: dict = {}
    for idx in class_idxs:
        mc = MovementClass.from_index(idx)
        d_in = _edge_geometry(mc.entry_edge)
        d_out = -_edge_geometry(mc.exit_edge)
        lanes = []
        for lane in range(lanes_per_class):
            off = (lane + 0.5) * lane_width
            entry_pt = edge_mid[mc.entry_edge] + off * _right_of(d_in)
            exit_pt = edge_mid[mc.exit_edge] + off * _right_of(d_out)
            start = entry_pt - approach * d_in
            end = exit_pt + approach * d_out
            cross = d_in[0] * d_out[1] - d_in[1] * d_out[0]
            if abs(cross) < 1e-9:
                control = 0.5 * (entry_pt + exit_pt)
            else:
                # Intersection of the entry and exit lane lines.
                rhs = exit_pt - entry_pt
                s = (rhs[0] * d_out[1] - rhs[1] * d_out[0]) / cross
                control = entry_pt + s * d_in
            curve = _quadratic_bezier(entry_pt, control, exit_pt, 21)
            lanes.append(np.vstack([start, curve, end]))
        centerlines[idx] = lanes
        lane_counts[idx] = lanes_per_class

    roi = RegionOfInterest(frame=GROUND_FRAME, corners=corners,
                           edge_labels=EDGE_LABELS, lane_counts=lane_counts)
    w = dict(weights) if weights is not None else {idx: 1.0 for idx in class_idxs}
    return IntersectionSpec(roi=roi, centerlines=centerlines, weights=w,
                            lateral_sigma=lateral_sigma,
                            speed_range=tuple(speed_range))


def oblique_camera_homography(height: float = 5.0, distance: float = 45.0,
                              focal_px: float = 900.0,
                              image_size=(1920, 1080),
                              azimuth: float = 0.0) -> np.ndarray:
    """Ground(z=0, metres) -> camera pixel homography of a pinhole camera.

    The camera sits ``distance`` metres from the origin at ``height``
    metres, on the bearing ``azimuth`` (radians, measured from the -y
    direction), looking at the origin. Low heights give the strongly
    oblique foreshortening typical of temporary traffic-survey mounts.
    """
    ca, sa = math.cos(azimuth), math.sin(azimuth)
    cam_pos = np.array([distance * sa, -distance * ca, height])
    target = np.array([0.0, 0.0, 0.0])
    fwd = target - cam_pos
    fwd = fwd / np.linalg.norm(fwd)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(fwd, up)
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    r = np.vstack([right, down, fwd])  # world -> camera rotation
    t = -r @ cam_pos
    k = np.array([[focal_px, 0.0, image_size[0] / 2.0],
                  [0.0, focal_px, image_size[1] / 2.0],
                  [0.0, 0.0, 1.0]])
    # Plane z=0: columns for x, y and translation.
    ext = np.column_stack([r[:, 0], r[:, 1], t])
    return k @ ext


def _ou_offsets(n: int, ds: float, sigma: float, corr_len: float, rng) -> np.ndarray:
    """Stationary Ornstein-Uhlenbeck samples along arc length (RMS = sigma)."""
    if sigma <= 0:
        return np.zeros(n)
    out = np.empty(n)
    out[0] = rng.normal(0.0, sigma)
    rho = math.exp(-ds / corr_len)
    innov = sigma * math.sqrt(1.0 - rho * rho)
    for i in range(1, n):
        out[i] = rho * out[i - 1] + innov * rng.normal()
    return out


def _resample_polyline(points: np.ndarray, ds: float) -> np.ndarray:
    cum = arc_lengths(points)
    targets = np.arange(0.0, cum[-1], ds)
    targets = np.append(targets, cum[-1])
    x = np.interp(targets, cum, points[:, 0])
    y = np.interp(targets, cum, points[:, 1])
    return np.column_stack([x, y])


def generate_scene(spec: IntersectionSpec, n_tracks: int, seed) -> SyntheticScene:
    """Sample labeled ground tracks: class by weight, lane uniformly, then
    the lane centerline perturbed by correlated lateral noise."""
    if n_tracks < 1:
        raise DataError("n_tracks must be >= 1")
    rng = np.random.default_rng(seed)
    class_idxs = sorted(idx for idx, w in spec.weights.items() if w > 0)
    if not class_idxs:
        raise DataError("all class weights are zero")
    probs = np.array([spec.weights[i] for i in class_idxs], dtype=float)
    probs /= probs.sum()

    ds = 0.5  # generation step, metres
    tracks = []
    labels = {}
    for i in range(n_tracks):
        idx = int(rng.choice(class_idxs, p=probs))
        lanes = spec.centerlines[idx]
        lane = lanes[rng.integers(len(lanes))]
        base = _resample_polyline(np.asarray(lane, dtype=float), ds)
        tangents = np.gradient(base, axis=0)
        norms = np.linalg.norm(tangents, axis=1, keepdims=True)
        normals = np.column_stack([-tangents[:, 1], tangents[:, 0]]) / norms
        offsets = _ou_offsets(len(base), ds, spec.lateral_sigma,
                              spec.correlation_length, rng)
        pts = base + offsets[:, None] * normals
        speed = rng.uniform(*spec.speed_range)
        ts = arc_lengths(pts) / speed
        ts = ts + np.arange(len(ts)) * 1e-9  # guard against stalls
        tid = f"t{i:05d}"
        tracks.append(Track(track_id=tid, camera_id="ground",
                            frame=GROUND_FRAME, points=pts, timestamps=ts))
        labels[tid] = idx
    return SyntheticScene(ground_tracks=tracks, labels=labels)


def _in_sector(points: np.ndarray, center, theta0: float, theta1: float) -> np.ndarray:
    ang = np.arctan2(points[:, 1] - center[1], points[:, 0] - center[0])
    width = (theta1 - theta0) % (2 * math.pi)
    rel = (ang - theta0) % (2 * math.pi)
    return rel <= width


def project_scene(scene: SyntheticScene, cam: SyntheticCamera, seed,
                  min_fragment_points: int = 5) -> list:
    """Project ground tracks into one camera view.

    Points beyond the horizon, outside the image, or inside the camera's
    occlusion sector are dropped; occlusion may fragment one ground track
    into several camera tracks (ids suffixed ``#k``). With probability
    ``truncation_prob`` a random prefix or suffix is also removed.
    """
    rng = np.random.default_rng(seed)
    h = cam.h_ground_to_camera
    w_img, h_img = cam.image_size
    out = []
    for t in scene.ground_tracks:
        pts = t.points
        visible = np.ones(len(pts), dtype=bool)
        if cam.occlusion_sector is not None:
            visible &= ~_in_sector(pts, cam.occlusion_center,
                                   *cam.occlusion_sector)
        q = pts @ h[:, :2].T + h[:, 2]
        w = q[:, 2]
        visible &= w > 1e-9
        proj = np.zeros_like(pts)
        ok = w > 1e-9
        proj[ok] = q[ok, :2] / w[ok, None]
        visible &= ((proj[:, 0] >= 0) & (proj[:, 0] <= w_img)
                    & (proj[:, 1] >= 0) & (proj[:, 1] <= h_img))

        if rng.random() < cam.truncation_prob and visible.sum() > min_fragment_points:
            frac = rng.uniform(0.0, cam.truncation_max_frac)
            cut = int(frac * len(pts))
            if cut > 0:
                if rng.random() < 0.5:
                    visible[:cut] = False
                else:
                    visible[len(pts) - cut:] = False

        # Contiguous visible runs become separate camera tracks.
        runs = []
        start = None
        for i, v in enumerate(visible):
            if v and start is None:
                start = i
            elif not v and start is not None:
                runs.append((start, i))
                start = None
        if start is not None:
            runs.append((start, len(pts)))
        runs = [(s, e) for s, e in runs if e - s >= min_fragment_points]

        for k, (s, e) in enumerate(runs):
            p = proj[s:e].copy()
            if cam.detection_noise_px > 0:
                p = p + rng.normal(0.0, cam.detection_noise_px, p.shape)
            tid = t.track_id if len(runs) == 1 else f"{t.track_id}#{k}"
            ts = t.timestamps[s:e] if t.timestamps is not None else None
            out.append(Track(track_id=tid, camera_id=cam.camera_id,
                             frame=CAMERA_FRAME, points=p, timestamps=ts))
    return out


def oracle_label(scene: SyntheticScene, track_id: str) -> int:
    """Ground-truth class of a generated track (fragments inherit their
    source track's class)."""
    source = track_id.split("#", 1)[0]
    if source not in scene.labels:
        raise DataError(f"unknown track id {track_id!r}")
    return scene.labels[source]


def write_intersection_spec(path, spec: IntersectionSpec) -> None:
    doc = {
        "roi": {
            "frame": spec.roi.frame,
            "corners": [[float(x), float(y)] for x, y in spec.roi.corners],
            "edge_labels": list(spec.roi.edge_labels),
            "lane_counts": {str(k): int(v)
                            for k, v in sorted(spec.roi.lane_counts.items())},
        },
        "classes": {
            str(idx): {
                "weight": float(spec.weights.get(idx, 0.0)),
                "centerlines": [[[float(x), float(y)] for x, y in line]
                                for line in lines],
            }
            for idx, lines in sorted(spec.centerlines.items())
        },
        "lateral_sigma": spec.lateral_sigma,
        "speed_range": list(spec.speed_range),
        "correlation_length": spec.correlation_length,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def read_intersection_spec(path) -> IntersectionSpec:
    with open(path) as f:
        doc = json.load(f)
    roi_doc = doc["roi"]
    roi = RegionOfInterest(
        frame=roi_doc.get("frame", GROUND_FRAME),
        corners=np.asarray(roi_doc["corners"], dtype=float),
        edge_labels=tuple(roi_doc.get("edge_labels", EDGE_LABELS)),
        lane_counts={int(k): int(v)
                     for k, v in roi_doc.get("lane_counts", {}).items()})
    centerlines = {}
    weights = {}
    for key, entry in doc["classes"].items():
        idx = int(key)
        centerlines[idx] = [np.asarray(line, dtype=float)
                            for line in entry["centerlines"]]
        weights[idx] = float(entry.get("weight", 0.0))
    return IntersectionSpec(
        roi=roi, centerlines=centerlines, weights=weights,
        lateral_sigma=float(doc.get("lateral_sigma", 0.0)),
        speed_range=tuple(doc.get("speed_range", (8.0, 15.0))),
        correlation_length=float(doc.get("correlation_length", 5.0)))
