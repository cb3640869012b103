"""Local HTTP service backing the browser calibration UI.

Holds one in-memory annotation session: keypoint correspondences, the live
homography with per-point reprojection errors, the ROI quadrilateral and
lane counts. Saving writes the calibration and ROI files consumed by the
learn/count commands.
"""

from __future__ import annotations

import logging
import os
import threading

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles

from .errors import DegenerateGeometryError
from .geometry import (
    Homography,
    Intrinsics,
    PointCorrespondence,
    estimate_homography,
    reprojection_stats,
    write_calibration,
)
from .roi import EDGE_LABELS, RegionOfInterest, write_roi
from .errors import DataError

log = logging.getLogger(__name__)

__all__ = ["create_app"]


def _parse_pairs(payload) -> list:
    pairs = payload.get("correspondences")
    if not isinstance(pairs, list):
        raise HTTPException(422, "missing correspondences list")
    out = []
    for pair in pairs:
        try:
            cam = (float(pair["camera"][0]), float(pair["camera"][1]))
            ortho = (float(pair["ortho"][0]), float(pair["ortho"][1]))
        except (KeyError, TypeError, ValueError, IndexError):
            raise HTTPException(422, "malformed correspondence pair")
        out.append(PointCorrespondence(cam, ortho))
    return out


def _homography_response(pairs, scale_m_per_px: float) -> dict:
    corr_json = [{"camera": list(c.camera_pt), "ortho": list(c.ortho_pt)}
                 for c in pairs]
    if len(pairs) < 4:
        return {"correspondences": corr_json, "homography": None,
                "per_point_errors": None, "mean_errors": None}
    try:
        hom = estimate_homography(pairs, scale_m_per_px)
    except DegenerateGeometryError as e:
        raise HTTPException(422, f"degenerate correspondences: {e}")
    stats = reprojection_stats(hom, pairs)
    return {
        "correspondences": corr_json,
        "homography": [float(v) for v in hom.h.ravel()],
        "per_point_errors": {"camera": stats.per_point_err_camera,
                             "ortho": stats.per_point_err_ortho},
        "mean_errors": {"camera_px": stats.mean_err_camera,
                        "ortho_px": stats.mean_err_ortho},
    }


def create_app(config: dict) -> FastAPI:
    """Build the calibration service for one site.

    ``config`` keys: images.camera / images.ortho (image files), calibration
    and roi (output paths), optional intrinsics and scale_m_per_px.
    """
    app = FastAPI(title="tmc calibration service")
    images = config.get("images", {})
    scale = float(config.get("scale_m_per_px", 1.0))
    intr = (Intrinsics.from_dict(config["intrinsics"])
            if config.get("intrinsics") else Intrinsics.identity())
    out_calibration = config.get("calibration", "calibration.json")
    out_roi = config.get("roi", "roi.json")

    state = {"pairs": [], "roi_corners": None, "lane_counts": {}}
    lock = threading.Lock()

    @app.get("/images/{which}")
    def get_image(which: str):
        if which not in ("camera", "ortho"):
            raise HTTPException(404, "unknown image")
        path = images.get(which)
        if not path or not os.path.isfile(path):
            raise HTTPException(404, f"{which} image not configured")
        return FileResponse(path)

    @app.get("/correspondences")
    def get_correspondences():
        with lock:
            return _homography_response(state["pairs"], scale)

    @app.post("/correspondences")
    def post_correspondences(payload: dict):
        pairs = _parse_pairs(payload)
        with lock:
            state["pairs"] = pairs
            if len(pairs) < 4:
                raise HTTPException(422, "insufficient correspondences")
            return _homography_response(pairs, scale)

    @app.get("/roi")
    def get_roi():
        with lock:
            return {"corners": state["roi_corners"],
                    "lane_counts": state["lane_counts"]}

    @app.post("/roi")
    def post_roi(payload: dict):
        corners = payload.get("corners")
        lane_counts = payload.get("lane_counts", {})
        if corners is not None:
            if len(corners) != 4:
                raise HTTPException(422, "ROI needs exactly 4 corners")
            try:
                RegionOfInterest(frame="ortho-px",
                                 corners=np.asarray(corners, dtype=float))
            except DataError as e:
                raise HTTPException(422, str(e))
        try:
            lane_counts = {str(int(k)): int(v) for k, v in lane_counts.items()}
        except (TypeError, ValueError):
            raise HTTPException(422, "lane counts must be integers")
        if any(v < 0 for v in lane_counts.values()):
            raise HTTPException(422, "lane counts must be >= 0")
        with lock:
            if corners is not None:
                state["roi_corners"] = [[float(x), float(y)] for x, y in corners]
            state["lane_counts"].update(lane_counts)
            return {"corners": state["roi_corners"],
                    "lane_counts": state["lane_counts"]}

    @app.post("/save")
    def save():
        with lock:
            pairs = list(state["pairs"])
            corners = state["roi_corners"]
            lane_counts = dict(state["lane_counts"])
        problems = []
        if len(pairs) < 4:
            problems.append("insufficient correspondences")
        if corners is None:
            problems.append("ROI corners not set")
        missing = [str(i) for i in range(1, 13) if str(i) not in lane_counts]
        if missing:
            problems.append(f"missing lane counts for classes {missing}")
        if problems:
            raise HTTPException(422, "; ".join(problems))
        hom = estimate_homography(pairs, scale)
        write_calibration(out_calibration, intr, hom, pairs)
        roi = RegionOfInterest(
            frame="ortho-px", corners=np.asarray(corners, dtype=float),
            edge_labels=EDGE_LABELS,
            lane_counts={int(k): v for k, v in lane_counts.items()})
        write_roi(out_roi, roi)
        return {"calibration": out_calibration, "roi": out_roi}

    static_dir = config.get("ui_assets")
    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
