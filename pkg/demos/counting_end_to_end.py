"""End-to-end turning-movement counting on a synthetic intersection.

We simulate a four-way intersection, view it through two oblique cameras
of very different quality (a distant low mount with heavy truncation and
detection noise, and a closer cleaner one), learn per-class density maps
from each camera's own tracks, count with the maximum-likelihood
classifier, and fuse the two cameras per movement class.

Run:  python3 demos/counting_end_to_end.py
"""

import math

from tmc import pipeline
from tmc.classify import count_movements
from tmc.fusion import assign_classes, fused_counts, mae_and_bias, \
    per_class_error
from tmc.geometry import Intrinsics
from tmc.roi import MovementClass, RegionOfInterest
from tmc.synth import (
    SyntheticCamera,
    four_way_intersection,
    generate_scene,
    oblique_camera_homography,
    oracle_label,
    project_scene,
)

rng_seed = 33
intr = Intrinsics.identity()

# --- simulate the world -----------------------------------------------------
spec = four_way_intersection(half_size=12.0, approach=10.0, lateral_sigma=1.0)
train = generate_scene(spec, 150, seed=rng_seed)
test = generate_scene(spec, 150, seed=rng_seed + 1)

# The orthophoto ROI at 1 m/px, so orthophoto pixels are ground metres.
ortho_roi = RegionOfInterest(frame="ortho-px", corners=spec.roi.corners,
                             lane_counts=dict(spec.roi.lane_counts))

def truth(scene):
    out = {}
    for tid in scene.labels:
        c = oracle_label(scene, tid)
        out[c] = out.get(c, 0) + 1
    return out

gt_train, gt_test = truth(train), truth(test)
print("ground truth (test scene):",
      {i: gt_test.get(i, 0) for i in range(1, 13)})

# --- two cameras of very different quality ----------------------------------
CAMERAS = [
    ("cam-north", dict(height=4.0, distance=60.0, azimuth=math.pi),
     dict(truncation_prob=0.7, truncation_max_frac=0.5,
          detection_noise_px=8.0)),
    ("cam-south", dict(height=4.0, distance=35.0, azimuth=0.0),
     dict(truncation_prob=0.5, truncation_max_frac=0.4,
          detection_noise_px=5.0)),
]
reports_train, reports_test, errors = {}, {}, {}
for j, (cam_id, view_kw, defect_kw) in enumerate(CAMERAS):
    h = oblique_camera_homography(**view_kw)
    cam = SyntheticCamera(camera_id=cam_id, h_ground_to_camera=h,
                          **defect_kw)
    calib = cam.calibration_homography(scale_m_per_px=1.0)
    roi = pipeline.domain_roi(ortho_roi, "ground", calib)

    # learn on this camera's own view of the training scene
    seen = project_scene(train, cam, seed=rng_seed + 11 * j)
    prepared = pipeline.prepare_tracks(seen, "ground", intr, calib,
                                       spacing=0.5)
    training = pipeline.label_tracks(prepared, roi)
    model = pipeline.build_class_maps(training, bandwidth=1.0, cell=0.4,
                                      roi=roi)

    rep = count_movements(prepared, "ml", model=model, camera_id=cam.camera_id)
    reports_train[cam.camera_id] = rep
    errors[cam.camera_id] = per_class_error(rep, gt_train)

    # count the unseen test scene
    seen_t = project_scene(test, cam, seed=rng_seed + 11 * j + 5)
    prep_t = pipeline.prepare_tracks(seen_t, "ground", intr, calib, 0.5)
    reports_test[cam.camera_id] = count_movements(
        prep_t, "ml", model=model, camera_id=cam.camera_id)
    mae, bias = mae_and_bias(reports_test[cam.camera_id], gt_test)
    print("%s alone: test MAE %.1f%%  bias %+.1f%%"
          % (cam.camera_id, 100 * mae, 100 * bias))

# --- fuse: each movement class is counted by its best training camera -------
assignment = assign_classes(errors)
fused = fused_counts(reports_test, assignment)
mae, bias = mae_and_bias(fused, gt_test)
print("fused:     test MAE %.1f%%  bias %+.1f%%" % (100 * mae, 100 * bias))

print("\nper-class assignment and fused counts:")
for i in range(1, 13):
    mc = MovementClass.from_index(i)
    print("  %2d %s->%s  %s  count %3d (true %3d)"
          % (i, mc.entry_edge, mc.exit_edge, assignment[i],
             fused.count(i), gt_test.get(i, 0)))
