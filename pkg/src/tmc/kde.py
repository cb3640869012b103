"""Gaussian KDE likelihood maps per movement class, track log-likelihoods
under the conditional-independence model, and held-out bandwidth search."""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DataError

log = logging.getLogger(__name__)

DEFAULT_FLOOR = 1e-12
# Reference optima reported for the source datasets; used as config defaults.
REFERENCE_BANDWIDTH_CAMERA_PX = 9.7
REFERENCE_BANDWIDTH_GROUND_M = 3.36

_CHUNK = 2048

__all__ = [
    "DEFAULT_FLOOR",
    "REFERENCE_BANDWIDTH_CAMERA_PX",
    "REFERENCE_BANDWIDTH_GROUND_M",
    "GridSpec",
    "LikelihoodMap",
    "MovementLikelihoodModel",
    "grid_covering",
    "build_kde_map",
    "density_at",
    "track_log_likelihood",
    "default_bandwidth_candidates",
    "optimize_bandwidth",
    "write_model",
    "read_model",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform evaluation grid; densities live at cell centers."""

    origin: tuple
    cell: float
    width: int
    height: int

    def __post_init__(self):
        if not self.cell > 0:
            raise DataError("cell size must be positive")
        if self.width < 1 or self.height < 1:
            raise DataError("grid must have at least one cell per axis")
        object.__setattr__(self, "origin",
                           (float(self.origin[0]), float(self.origin[1])))

    @property
    def x_centers(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.width) + 0.5) * self.cell

    @property
    def y_centers(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.height) + 0.5) * self.cell

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "cell": self.cell,
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(origin=tuple(d["origin"]), cell=float(d["cell"]),
                   width=int(d["width"]), height=int(d["height"]))


def grid_covering(points: np.ndarray, cell: float, margin: float) -> GridSpec:
    """Grid whose cells cover the points' bounding box plus ``margin``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    lo = pts.min(axis=0) - margin
    hi = pts.max(axis=0) + margin
    width = max(1, int(math.ceil((hi[0] - lo[0]) / cell)))
    height = max(1, int(math.ceil((hi[1] - lo[1]) / cell)))
    return GridSpec(origin=(lo[0], lo[1]), cell=cell, width=width, height=height)


@dataclass(frozen=True)
class LikelihoodMap:
    """Gridded probability density (per unit area) for one movement class."""

    grid: GridSpec
    density: np.ndarray  # (height, width)
    bandwidth: float
    n_points: int

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float)
        if d.shape != (self.grid.height, self.grid.width):
            raise DataError("density shape does not match grid")
        if np.any(d < 0):
            raise DataError("density must be non-negative")
        d.setflags(write=False)
        object.__setattr__(self, "density", d)

    def mass(self) -> float:
        """Kernel mass captured by the grid (cell sum times cell area)."""
        return float(self.density.sum() * self.grid.cell ** 2)


def _kernel_points(tracks) -> np.ndarray:
    pts = [t.points for t in tracks]
    if not pts:
        raise DataError("no tracks to build a KDE map from")
    return np.vstack(pts)


def build_kde_map(tracks, bw: float, grid: GridSpec) -> LikelihoodMap:
    """Sum of isotropic Gaussian kernels over all track points, evaluated
    exactly at the cell centers via the separable-kernel factorization."""
    if not bw > 0:
        raise DataError("bandwidth must be positive")
    pts = _kernel_points(tracks)
    xc = grid.x_centers
    yc = grid.y_centers
    inv = -0.5 / (bw * bw)
    density = np.zeros((grid.height, grid.width))
    for start in range(0, len(pts), _CHUNK):
        chunk = pts[start:start + _CHUNK]
        gx = np.exp(inv * (xc[None, :] - chunk[:, 0:1]) ** 2)  # (m, W)
        gy = np.exp(inv * (yc[None, :] - chunk[:, 1:2]) ** 2)  # (m, H)
        density += gy.T @ gx
    density /= len(pts) * 2.0 * math.pi * bw * bw
    return LikelihoodMap(grid=grid, density=density, bandwidth=bw,
                         n_points=len(pts))


def density_at(lmap: LikelihoodMap, points) -> np.ndarray:
    """Bilinear interpolation of the density at query points.

    Points outside the cell-center lattice return 0 (the caller applies the
    density floor).
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    g = lmap.grid
    fx = (p[:, 0] - g.origin[0]) / g.cell - 0.5
    fy = (p[:, 1] - g.origin[1]) / g.cell - 0.5
    eps = 1e-9  # tolerate rounding for points exactly on the lattice edge
    valid = ((fx >= -eps) & (fx <= g.width - 1 + eps)
             & (fy >= -eps) & (fy <= g.height - 1 + eps))
    out = np.zeros(len(p))
    if np.any(valid):
        fxv = np.clip(fx[valid], 0.0, g.width - 1)
        fyv = np.clip(fy[valid], 0.0, g.height - 1)
        ix = np.minimum(fxv.astype(int), g.width - 2) if g.width > 1 else np.zeros(len(fxv), int)
        iy = np.minimum(fyv.astype(int), g.height - 2) if g.height > 1 else np.zeros(len(fyv), int)
        tx = fxv - ix
        ty = fyv - iy
        d = lmap.density
        ix1 = np.minimum(ix + 1, g.width - 1)
        iy1 = np.minimum(iy + 1, g.height - 1)
        out[valid] = ((1 - ty) * ((1 - tx) * d[iy, ix] + tx * d[iy, ix1])
                      + ty * ((1 - tx) * d[iy1, ix] + tx * d[iy1, ix1]))
    return out


def track_log_likelihood(t, lmap: LikelihoodMap,
                         floor: float = DEFAULT_FLOOR) -> float:
    """Sum over track points of log density, floored to avoid -inf.

    Positions are treated as conditionally independent given the class, so
    the track log-likelihood is the sum of per-point log densities.
    """
    if not floor > 0:
        raise DataError("floor must be positive")
    dens = density_at(lmap, t.points)
    return float(np.log(np.maximum(dens, floor)).sum())


@dataclass(frozen=True)
class MovementLikelihoodModel:
    """Per-class likelihood maps sharing one grid, bandwidth and floor."""

    maps: dict  # class index -> LikelihoodMap
    grid: GridSpec
    bandwidth: float
    floor: float = DEFAULT_FLOOR

    def non_empty(self) -> dict:
        return {idx: m for idx, m in self.maps.items() if m is not None}


def default_bandwidth_candidates(cell: float, n: int = 16) -> list:
    """Geometric sweep from one cell to 50 cells."""
    return [float(v) for v in np.geomspace(cell, 50.0 * cell, n)]


def _exact_log_density(query: np.ndarray, centers: np.ndarray, bw: float) -> np.ndarray:
    """Exact (ungridded) Gaussian KDE log-density at query points."""
    inv = -0.5 / (bw * bw)
    norm = len(centers) * 2.0 * math.pi * bw * bw
    out = np.empty(len(query))
    for start in range(0, len(query), _CHUNK):
        q = query[start:start + _CHUNK]
        d2 = cdist(q, centers, "sqeuclidean")
        out[start:start + _CHUNK] = np.log(
            np.maximum(np.exp(inv * d2).sum(axis=1) / norm, DEFAULT_FLOOR))
    return out


def optimize_bandwidth(training: dict, candidates) -> float:
    """Held-out bandwidth search.

    Each class's tracks are split temporally in half (by first timestamp
    when present, otherwise by list order); models built from the first
    half score the second half, and the candidate maximizing the mean
    per-point log-likelihood wins. Classes with fewer than two tracks are
    excluded.
    """
    candidates = [float(c) for c in candidates]
    if not candidates or any(c <= 0 for c in candidates):
        raise DataError("candidates must be non-empty and positive")

    splits = []
    for idx, tracks in sorted(training.items()):
        tracks = list(tracks)
        if len(tracks) < 2:
            continue
        if all(t.timestamps is not None for t in tracks):
            tracks = sorted(tracks, key=lambda t: float(t.timestamps[0]))
        half = (len(tracks) + 1) // 2
        fit = np.vstack([t.points for t in tracks[:half]])
        held = np.vstack([t.points for t in tracks[half:]])
        splits.append((fit, held))
    if not splits:
        raise DataError("no class has enough tracks for a held-out split")

    best_bw = candidates[0]
    best_obj = -math.inf
    for bw in candidates:
        total = 0.0
        count = 0
        for fit, held in splits:
            total += _exact_log_density(held, fit, bw).sum()
            count += len(held)
        obj = total / count
        log.debug("bandwidth %.4g: mean per-point log-likelihood %.4f", bw, obj)
        if obj > best_obj:
            best_obj = obj
            best_bw = bw
    return best_bw


def write_model(path, model: MovementLikelihoodModel) -> None:
    """JSON header plus one little-endian float32 sidecar per class map."""
    base = os.path.splitext(os.path.basename(path))[0]
    dirname = os.path.dirname(path) or "."
    classes = {}
    for idx in sorted(model.maps):
        lmap = model.maps[idx]
        if lmap is None:
            continue
        fname = f"{base}.class{idx:02d}.f32"
        lmap.density.astype("<f4").tofile(os.path.join(dirname, fname))
        classes[str(idx)] = {"file": fname, "n_points": lmap.n_points}
    doc = {"grid": model.grid.to_dict(), "bandwidth": model.bandwidth,
           "floor": model.floor, "classes": classes}
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def read_model(path) -> MovementLikelihoodModel:
    with open(path) as f:
        doc = json.load(f)
    grid = GridSpec.from_dict(doc["grid"])
    dirname = os.path.dirname(path) or "."
    maps = {}
    for key, entry in doc["classes"].items():
        density = np.fromfile(os.path.join(dirname, entry["file"]),
                              dtype="<f4").astype(float)
        maps[int(key)] = LikelihoodMap(
            grid=grid, density=density.reshape(grid.height, grid.width),
            bandwidth=float(doc["bandwidth"]), n_points=int(entry["n_points"]))
    return MovementLikelihoodModel(maps=maps, grid=grid,
                                   bandwidth=float(doc["bandwidth"]),
                                   floor=float(doc["floor"]))
