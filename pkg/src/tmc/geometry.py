"""Camera geometry: lens undistortion, homography estimation and back-projection.

Conventions:
  * homographies map undistorted camera pixels -> orthophoto pixels,
  * matrices are normalized to unit Frobenius norm with h[2,2] >= 0,
  * ground coordinates are orthophoto pixels times ``scale_m_per_px``
    (origin at the orthophoto top-left, y down).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataError,
    DegenerateGeometryError,
    HorizonError,
    NonConvergenceError,
)

__all__ = [
    "Intrinsics",
    "PointCorrespondence",
    "Homography",
    "ReprojectionStats",
    "BoundingBox",
    "distort_point",
    "undistort_point",
    "estimate_homography",
    "apply_homography",
    "invert_homography",
    "reprojection_stats",
    "back_project_detection",
    "write_calibration",
    "read_calibration",
]


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics with Brown-Conrady distortion coefficients."""

    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise DataError("focal lengths must be positive")
        vals = [self.fx, self.fy, self.cx, self.cy,
                self.k1, self.k2, self.k3, self.p1, self.p2]
        if not all(math.isfinite(v) for v in vals):
            raise DataError("intrinsic parameters must be finite")

    @classmethod
    def identity(cls) -> "Intrinsics":
        """Distortion-free unit-focal intrinsics (pixel pass-through)."""
        return cls(fx=1.0, fy=1.0, cx=0.0, cy=0.0)

    def to_dict(self) -> dict:
        return {k: getattr(self, k)
                for k in ("fx", "fy", "cx", "cy", "k1", "k2", "k3", "p1", "p2")}

    @classmethod
    def from_dict(cls, d: dict) -> "Intrinsics":
        return cls(**{k: float(d[k]) for k in d})


@dataclass(frozen=True)
class PointCorrespondence:
    """One manually clicked camera <-> orthophoto keypoint pair."""

    camera_pt: tuple
    ortho_pt: tuple

    def __post_init__(self):
        pts = (*self.camera_pt, *self.ortho_pt)
        if not all(math.isfinite(float(v)) for v in pts):
            raise DataError("correspondence points must be finite")


@dataclass(frozen=True)
class Homography:
    """3x3 projective map, camera plane -> orthophoto, plus ground resolution."""

    h: np.ndarray
    scale_m_per_px: float = 1.0

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float).reshape(3, 3)
        n = np.linalg.norm(h)
        if n == 0 or not np.all(np.isfinite(h)):
            raise DegenerateGeometryError("homography matrix is not finite")
        h = h / n
        if h[2, 2] < 0:
            h = -h
        if abs(np.linalg.det(h)) <= 1e-12:
            raise DegenerateGeometryError("homography matrix is singular")
        if not self.scale_m_per_px > 0:
            raise DataError("scale_m_per_px must be positive")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @classmethod
    def identity(cls, scale_m_per_px: float = 1.0) -> "Homography":
        return cls(np.eye(3), scale_m_per_px)

    def to_dict(self) -> dict:
        return {"homography": [float(v) for v in self.h.ravel()],
                "scale_m_per_px": self.scale_m_per_px}


@dataclass(frozen=True)
class ReprojectionStats:
    """Per-point and mean reprojection errors in both planes."""

    per_point_err_camera: list = field(default_factory=list)
    per_point_err_ortho: list = field(default_factory=list)

    @property
    def mean_err_camera(self) -> float:
        return float(np.mean(self.per_point_err_camera))

    @property
    def mean_err_ortho(self) -> float:
        return float(np.mean(self.per_point_err_ortho))


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned detection box in the distorted camera frame."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DataError("bounding box must have positive extent")

    @property
    def bottom_midpoint(self) -> tuple:
        return (0.5 * (self.x_min + self.x_max), self.y_max)


def _normalized(p, intr: Intrinsics):
    x = (np.asarray(p, dtype=float)[..., 0] - intr.cx) / intr.fx
    y = (np.asarray(p, dtype=float)[..., 1] - intr.cy) / intr.fy
    return x, y


def _apply_distortion(x, y, intr: Intrinsics):
    r2 = x * x + y * y
    radial = 1.0 + r2 * (intr.k1 + r2 * (intr.k2 + r2 * intr.k3))
    xd = x * radial + 2.0 * intr.p1 * x * y + intr.p2 * (r2 + 2.0 * x * x)
    yd = y * radial + intr.p1 * (r2 + 2.0 * y * y) + 2.0 * intr.p2 * x * y
    return xd, yd


def distort_point(p, intr: Intrinsics):
    """Forward Brown-Conrady model: ideal pixel -> distorted pixel."""
    x, y = _normalized(p, intr)
    xd, yd = _apply_distortion(x, y, intr)
    return np.stack([xd * intr.fx + intr.cx, yd * intr.fy + intr.cy], axis=-1)


def undistort_point(p, intr: Intrinsics, max_iter: int = 20, tol: float = 1e-10):
    """Invert the distortion model by fixed-point iteration.

    Starts at the distorted location; raises NonConvergenceError when the
    update is still above ``tol`` (normalized units) after ``max_iter``
    iterations, which signals ill-conditioned coefficients.
    """
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise DataError("point must be finite")
    xd, yd = _normalized(p, intr)
    x, y = xd.copy() if hasattr(xd, "copy") else xd, yd.copy() if hasattr(yd, "copy") else yd
    for _ in range(max_iter):
        r2 = x * x + y * y
        radial = 1.0 + r2 * (intr.k1 + r2 * (intr.k2 + r2 * intr.k3))
        tan_x = 2.0 * intr.p1 * x * y + intr.p2 * (r2 + 2.0 * x * x)
        tan_y = intr.p1 * (r2 + 2.0 * y * y) + 2.0 * intr.p2 * x * y
        x_new = (xd - tan_x) / radial
        y_new = (yd - tan_y) / radial
        step = np.maximum(np.abs(x_new - x), np.abs(y_new - y))
        x, y = x_new, y_new
        if np.all(step < tol):
            break
    else:
        raise NonConvergenceError(
            f"undistortion did not converge in {max_iter} iterations")
    return np.stack([x * intr.fx + intr.cx, y * intr.fy + intr.cy], axis=-1)


def _hartley_normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity transform taking pts to centroid 0, mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    d = np.linalg.norm(pts - centroid, axis=1).mean()
    if d <= 0:
        raise DegenerateGeometryError("all points coincide")
    s = math.sqrt(2.0) / d
    return np.array([[s, 0.0, -s * centroid[0]],
                     [0.0, s, -s * centroid[1]],
                     [0.0, 0.0, 1.0]])


def estimate_homography(corrs, scale_m_per_px: float = 1.0) -> Homography:
    """Normalized DLT from >=4 camera/orthophoto correspondences."""
    corrs = list(corrs)
    if len(corrs) < 4:
        raise DegenerateGeometryError(
            f"need at least 4 correspondences, got {len(corrs)}")
    src = np.array([c.camera_pt for c in corrs], dtype=float)
    dst = np.array([c.ortho_pt for c in corrs], dtype=float)

    t_src = _hartley_normalization(src)
    t_dst = _hartley_normalization(dst)
    sh = (t_src @ np.column_stack([src, np.ones(len(src))]).T).T
    dh = (t_dst @ np.column_stack([dst, np.ones(len(dst))]).T).T

    a = np.zeros((2 * len(corrs), 9))
    for i, ((x, y, _), (u, v, _)) in enumerate(zip(sh, dh)):
        a[2 * i] = [-x, -y, -1, 0, 0, 0, u * x, u * y, u]
        a[2 * i + 1] = [0, 0, 0, -x, -y, -1, v * x, v * y, v]

    _, s, vt = np.linalg.svd(a)
    # A wide system (exactly 4 points: 8x9) reports only row-count singular
    # values; the remaining ones of the 9 columns are exactly zero.
    s = np.concatenate([s, np.zeros(9 - len(s))])
    # Degeneracy: null space of dimension > 1 means the solution direction
    # is not determined by the correspondences.
    if s[-2] <= 1e-9 * s[0] or (s[-2] > 0 and s[-1] / s[-2] > 0.99):
        raise DegenerateGeometryError(
            "degenerate correspondence configuration (collinear points?)")

    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ hn @ t_src
    return Homography(h, scale_m_per_px)


def apply_homography(hom: Homography, p, inverse: bool = False):
    """Projective transform with homogeneous normalization.

    Accepts a single (x, y) or an (n, 2) array; raises HorizonError for
    points that map to the line at infinity.
    """
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    pts = np.atleast_2d(p)
    if not np.all(np.isfinite(pts)):
        raise DataError("points must be finite")
    m = np.linalg.inv(hom.h) if inverse else hom.h
    q = pts @ m[:, :2].T + m[:, 2]
    w = q[:, 2]
    if np.any(np.abs(w) < 1e-12):
        raise HorizonError("point maps to the line at infinity")
    out = q[:, :2] / w[:, None]
    return out[0] if single else out


def invert_homography(hom: Homography) -> Homography:
    """Orthophoto -> camera map; ground resolution is carried through."""
    return Homography(np.linalg.inv(hom.h), hom.scale_m_per_px)


def reprojection_stats(hom: Homography, corrs) -> ReprojectionStats:
    """Forward (ortho) and backward (camera) reprojection errors, as in a
    calibration report with one column per plane."""
    corrs = list(corrs)
    if not corrs:
        raise DataError("need at least one correspondence")
    cam = np.array([c.camera_pt for c in corrs], dtype=float)
    ortho = np.array([c.ortho_pt for c in corrs], dtype=float)
    err_o = np.linalg.norm(apply_homography(hom, cam) - ortho, axis=1)
    err_c = np.linalg.norm(apply_homography(hom, ortho, inverse=True) - cam, axis=1)
    return ReprojectionStats(per_point_err_camera=[float(e) for e in err_c],
                             per_point_err_ortho=[float(e) for e in err_o])


def back_project_detection(bbox: BoundingBox, intr: Intrinsics,
                           hom: Homography) -> np.ndarray:
    """Ground position (metres) of a detection: bottom-midpoint of the box,
    undistorted, mapped through the homography, scaled to metres."""
    mid = undistort_point(np.array(bbox.bottom_midpoint), intr)
    ortho = apply_homography(hom, mid)
    return ortho * hom.scale_m_per_px


def write_calibration(path, intr: Intrinsics, hom: Homography, corrs,
                      stats: ReprojectionStats | None = None) -> None:
    """Write the calibration JSON consumed by the learn/count commands."""
    if stats is None:
        stats = reprojection_stats(hom, corrs)
    doc = {
        "intrinsics": intr.to_dict(),
        "homography": [float(v) for v in hom.h.ravel()],
        "scale_m_per_px": hom.scale_m_per_px,
        "keypoints": [{"camera": [float(v) for v in c.camera_pt],
                       "ortho": [float(v) for v in c.ortho_pt]} for c in corrs],
        "reprojection": {"camera_px": stats.mean_err_camera,
                         "ortho_px": stats.mean_err_ortho},
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def read_calibration(path):
    """Load (Intrinsics, Homography, correspondences) from a calibration file."""
    with open(path) as f:
        doc = json.load(f)
    intr = Intrinsics.from_dict(doc["intrinsics"])
    hom = Homography(np.array(doc["homography"], dtype=float).reshape(3, 3),
                     float(doc["scale_m_per_px"]))
    corrs = [PointCorrespondence(tuple(k["camera"]), tuple(k["ortho"]))
             for k in doc.get("keypoints", [])]
    return intr, hom, corrs
