"""Count-error metrics and weak multi-camera fusion.

Weak fusion assigns each movement class to the single camera with the
lowest training-partition count error, then reads that camera's validation
count for the class.
"""

from __future__ import annotations

import csv
import json
import logging
import math

from .classify import CountReport
from .errors import DataError

log = logging.getLogger(__name__)

__all__ = [
    "per_class_error",
    "mae_and_bias",
    "assign_classes",
    "fused_counts",
    "read_ground_truth",
    "write_ground_truth",
    "read_assignment",
    "write_assignment",
]


def per_class_error(pred: CountReport, gt: dict) -> dict:
    """Relative count error |pred - gt| / gt per class index.

    Classes with gt == 0 and a non-zero prediction are undefined (None) and
    excluded from means; gt == 0 with pred == 0 is a clean 0.
    """
    out = {}
    for idx in range(1, 13):
        g = int(gt.get(idx, 0))
        p = pred.count(idx)
        if g > 0:
            out[idx] = abs(p - g) / g
        else:
            out[idx] = 0.0 if p == 0 else None
    return out


def mae_and_bias(pred: CountReport, gt: dict) -> tuple:
    """Mean absolute relative error and mean signed relative bias over the
    classes where the error is defined."""
    abs_errs = []
    signed = []
    for idx in range(1, 13):
        g = int(gt.get(idx, 0))
        p = pred.count(idx)
        if g > 0:
            abs_errs.append(abs(p - g) / g)
            signed.append((p - g) / g)
        elif p == 0:
            abs_errs.append(0.0)
            signed.append(0.0)
    if not abs_errs:
        raise DataError("no class has a defined count error")
    return (sum(abs_errs) / len(abs_errs), sum(signed) / len(signed))


def assign_classes(errors: dict) -> dict:
    """Assign each movement class to the camera with the lowest error.

    ``errors`` maps camera_id -> {class index -> relative error or None}.
    Ties are broken in favor of the camera with the highest overall mean
    error (the generally weaker camera takes the class it is competitive
    on, keeping stronger cameras for classes where they are uniquely best),
    then toward the camera with the fewest classes assigned so far, then
    the lowest camera id. Classes are processed in index order.
    """
    if not errors:
        raise DataError("no cameras in error matrix")
    cam_ids = sorted(errors)
    overall = {}
    for cam in cam_ids:
        defined = [v for v in errors[cam].values() if v is not None]
        overall[cam] = sum(defined) / len(defined) if defined else math.inf

    loads = {cam: 0 for cam in cam_ids}
    assignment = {}
    for idx in range(1, 13):
        defined = [(errors[cam].get(idx), cam) for cam in cam_ids
                   if errors[cam].get(idx) is not None]
        if not defined:
            raise DataError(f"class {idx} has no defined error on any camera")
        best_err = min(e for e, _ in defined)
        tied = [cam for e, cam in defined if e == best_err]
        tied.sort(key=lambda cam: (-overall[cam], loads[cam], cam))
        chosen = tied[0]
        assignment[idx] = chosen
        loads[chosen] += 1
    return assignment


def fused_counts(per_camera: dict, assignment: dict) -> CountReport:
    """Fused report: class c's count comes from its assigned camera."""
    counts = {}
    domain = ""
    method = ""
    for idx in range(1, 13):
        cam = assignment.get(idx)
        if cam is None:
            raise DataError(f"class {idx} has no camera assignment")
        if cam not in per_camera:
            raise DataError(f"no count report for camera {cam!r}")
        rep = per_camera[cam]
        counts[idx] = rep.count(idx)
        domain = rep.domain
        method = rep.method
    return CountReport(camera_id="fused", domain=domain, method=method,
                       counts=counts)


def read_ground_truth(path) -> dict:
    """Ground-truth CSV: class_index, count."""
    out = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            out[int(row["class_index"])] = int(row["count"])
    return out


def write_ground_truth(path, gt: dict) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["class_index", "count"])
        for idx in range(1, 13):
            w.writerow([idx, int(gt.get(idx, 0))])


def read_assignment(path) -> dict:
    with open(path) as f:
        return {int(k): str(v) for k, v in json.load(f).items()}


def write_assignment(path, assignment: dict) -> None:
    with open(path, "w") as f:
        json.dump({str(k): v for k, v in sorted(assignment.items())},
                  f, indent=2, sort_keys=True)
        f.write("\n")
