"""Calibration walkthrough: from clicked point pairs to a ground-plane map.

A synthetic oblique camera stands in for a real roadside camera. We
"click" a handful of landmark pairs (camera pixel <-> orthophoto pixel),
estimate the homography, inspect the per-point reprojection errors, and
back-project a bounding-box track onto the ground plane in metres.

Run:  python3 demos/calibration_walkthrough.py
"""

import numpy as np

from tmc.geometry import (
    Homography,
    Intrinsics,
    PointCorrespondence,
    apply_homography,
    estimate_homography,
    reprojection_stats,
)
from tmc.pipeline import track_to_ground
from tmc.synth import SyntheticCamera, oblique_camera_homography
from tmc.tracks import Track, CAMERA_FRAME

SCALE_M_PER_PX = 0.05  # orthophoto resolution: 5 cm per pixel

# --- a "real" camera we pretend not to know -------------------------------
h_true = oblique_camera_homography(height=8.0, distance=40.0)
cam = SyntheticCamera(camera_id="demo", h_ground_to_camera=h_true)

# Landmarks on the ground (metres), e.g. lane markings and curb corners.
landmarks_m = np.array([
    [-10.0, -8.0], [12.0, -6.0], [9.0, 9.0], [-11.0, 10.0],
    [0.0, 0.0], [5.0, -12.0],
])

# What the user would click: the camera pixel of each landmark...
q = np.column_stack([landmarks_m, np.ones(len(landmarks_m))]) @ h_true.T
camera_px = q[:, :2] / q[:, 2:]
# ...and its orthophoto pixel. Clicks are a bit sloppy: ~1 px of jitter.
rng = np.random.default_rng(42)
ortho_px = landmarks_m / SCALE_M_PER_PX + rng.normal(0.0, 1.0, (6, 2))

pairs = [PointCorrespondence(tuple(c), tuple(o))
         for c, o in zip(camera_px, ortho_px)]
hom = estimate_homography(pairs, scale_m_per_px=SCALE_M_PER_PX)

stats = reprojection_stats(hom, pairs)
print("mean reprojection error: %.2f ortho px  (%.2f camera px)"
      % (stats.mean_err_ortho, stats.mean_err_camera))
worst = max(stats.per_point_err_ortho)
for i, e in enumerate(stats.per_point_err_ortho):
    print("  pair %d: %.2f px%s"
          % (i, e, "  <- worst, re-click this one" if e == worst else ""))

# --- use it: send a bounding-box track to the ground plane -----------------
# A detector hands us boxes (x1, y1, x2, y2); the bottom midpoint of a box
# is where the vehicle touches the road, and that's what gets mapped.
boxes = np.array([[560.0 + 12 * k, 470.0 + 6 * k,
                   640.0 + 12 * k, 530.0 + 6 * k] for k in range(10)])
track = Track(track_id="veh-1", camera_id="demo", frame=CAMERA_FRAME,
              points=0.5 * (boxes[:, :2] + boxes[:, 2:]),
              timestamps=np.arange(10) * 0.5, bboxes=boxes)
ground = track_to_ground(track, Intrinsics.identity(), hom)
print("\nground-plane track (m):")
for p in ground.points[:4]:
    print("  (%.2f, %.2f)" % (p[0], p[1]))
print("  ... length %.1f m in %.1f s"
      % (ground.arc_length(), ground.timestamps[-1] - ground.timestamps[0]))

# Sanity: the estimated map agrees with the true geometry away from the
# clicked points too.
probe = np.array([[3.0, 4.0], [-7.0, -2.0]])
qp = np.column_stack([probe, np.ones(2)]) @ h_true.T
est = apply_homography(hom, qp[:, :2] / qp[:, 2:]) * SCALE_M_PER_PX
print("\nprobe error vs true geometry: %.3f m"
      % np.abs(est - probe).max())
