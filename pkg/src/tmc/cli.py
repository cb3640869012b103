"""Command-line entry points for calibration, learning, counting, fusion,
simulation and the calibration-UI service.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical
degeneracy. Set TMC_LOG to control log verbosity.
"""

from __future__ import annotations

import functools
import json
import logging
import os
import sys

import click
import numpy as np

from . import fusion, kde, pipeline, synth
from .classify import METHODS, read_counts_csv, write_counts_csv
from .errors import ConfigError, DataError, GeometryError
from .geometry import (
    Intrinsics,
    PointCorrespondence,
    estimate_homography,
    read_calibration,
    reprojection_stats,
    write_calibration,
)
from .prototypes import read_prototypes, write_prototypes
from .roi import read_roi
from .tracks import load_tracks, save_tracks

log = logging.getLogger(__name__)


def _setup_logging():
    level = os.environ.get("TMC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config(path) -> dict:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid config JSON: {e}") from e


def _require(config: dict, key: str):
    if key not in config:
        raise ConfigError(f"config is missing required key {key!r}")
    return config[key]


def _existing_path(config: dict, key: str) -> str:
    path = _require(config, key)
    if not os.path.isfile(path):
        raise ConfigError(f"config key {key!r}: file not found: {path}")
    return path


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(2)
        except DataError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(3)
        except GeometryError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(4)
    return wrapper


def _domain(config, override):
    domain = override or config.get("domain", "ground")
    if domain not in ("camera", "ground"):
        raise ConfigError(f"domain must be camera or ground, got {domain!r}")
    return domain


def _spacing(config, domain):
    res = config.get("resample", {})
    if domain == "camera":
        return float(res.get("camera_px", pipeline.DEFAULT_SPACING_CAMERA_PX))
    return float(res.get("ground_m", pipeline.DEFAULT_SPACING_GROUND_M))


def _kde_params(config, domain):
    k = config.get("kde", {})
    if domain == "camera":
        cell = float(k.get("cell_camera_px", 1.0))
        bw = k.get("bandwidth_camera_px", kde.REFERENCE_BANDWIDTH_CAMERA_PX)
    else:
        cell = float(k.get("cell_ground_m", pipeline.DEFAULT_CELL_GROUND_M))
        bw = k.get("bandwidth_ground_m", kde.REFERENCE_BANDWIDTH_GROUND_M)
    bw = None if k.get("optimize") else float(bw)
    candidates = k.get("candidates") or kde.default_bandwidth_candidates(cell)
    floor = float(k.get("floor", kde.DEFAULT_FLOOR))
    return cell, bw, candidates, floor


@click.group()
def main():
    """Turning movement counts from traffic-camera trajectories."""
    _setup_logging()


def _config_option(fn):
    return click.option("--config", "config_path", required=True,
                        type=click.Path(), help="Site config JSON.")(fn)


@main.command()
@_config_option
@_exit_codes
def calibrate(config_path):
    """Estimate the camera->orthophoto homography from keypoint pairs."""
    config = _load_config(config_path)
    kp_path = _existing_path(config, "keypoints")
    with open(kp_path) as f:
        doc = json.load(f)
    pairs = [PointCorrespondence(tuple(k["camera"]), tuple(k["ortho"]))
             for k in (doc["keypoints"] if isinstance(doc, dict) else doc)]
    intr = (Intrinsics.from_dict(config["intrinsics"])
            if config.get("intrinsics") else Intrinsics.identity())
    scale = float(config.get("scale_m_per_px", 1.0))
    hom = estimate_homography(pairs, scale)
    stats = reprojection_stats(hom, pairs)
    out = _require(config, "calibration")
    write_calibration(out, intr, hom, pairs, stats)
    click.echo(f"calibration written to {out} "
               f"(reprojection camera {stats.mean_err_camera:.2f} px, "
               f"ortho {stats.mean_err_ortho:.2f} px)")


@main.command()
@_config_option
@click.option("--domain", type=click.Choice(["camera", "ground"]), default=None)
@click.option("--seed", type=int, default=None)
@_exit_codes
def learn(config_path, domain, seed):
    """Run the unsupervised learning pipeline and write model artifacts."""
    config = _load_config(config_path)
    domain = _domain(config, domain)
    seed = seed if seed is not None else int(config.get("seed", 0))
    intr, hom, _ = read_calibration(_existing_path(config, "calibration"))
    roi = read_roi(_existing_path(config, "roi"))
    tracks = load_tracks(_existing_path(config, "tracks"))
    if not tracks:
        raise DataError("track file contains no usable tracks")

    spacing = _spacing(config, domain)
    cell, bw, candidates, floor = _kde_params(config, domain)
    prepared = pipeline.prepare_tracks(tracks, domain, intr, hom, spacing)
    work_roi = pipeline.domain_roi(roi, domain, hom)
    models = pipeline.learn_models(
        prepared, work_roi, bandwidth=bw, bandwidth_candidates=candidates,
        cell=cell, floor=floor, seed=seed)

    proto_path = _require(config, "prototypes")
    model_path = _require(config, "kde_model")
    write_prototypes(proto_path, models.prototypes)
    kde.write_model(model_path, models.kde_model)
    summary = {
        "domain": domain,
        "seed": seed,
        "bandwidth": models.kde_model.bandwidth,
        "training_counts": {str(k): v
                            for k, v in sorted(models.training_counts.items())},
    }
    summary_path = config.get("summary")
    if summary_path:
        with open(summary_path, "w") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
            f.write("\n")
    click.echo(f"learned prototypes -> {proto_path}, KDE model -> {model_path} "
               f"({sum(models.training_counts.values())} training tracks)")


@main.command()
@_config_option
@click.option("--domain", type=click.Choice(["camera", "ground"]), default=None)
@click.option("--methods", default=None,
              help="Comma-separated subset of ee,dir,vote,ml.")
@_exit_codes
def count(config_path, domain, methods):
    """Classify tracks and write per-class counts (plus metrics with GT)."""
    config = _load_config(config_path)
    domain = _domain(config, domain)
    requested = [m.strip().lower() for m in
                 (methods.split(",") if methods else config.get("methods", METHODS))]
    for m in requested:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")

    intr, hom, _ = read_calibration(_existing_path(config, "calibration"))
    roi = read_roi(_existing_path(config, "roi"))
    tracks = load_tracks(_existing_path(config, "tracks"))
    spacing = _spacing(config, domain)
    prepared = pipeline.prepare_tracks(tracks, domain, intr, hom, spacing)
    work_roi = pipeline.domain_roi(roi, domain, hom)

    protos = model = None
    if any(m in ("dir", "vote") for m in requested):
        protos = read_prototypes(_existing_path(config, "prototypes"))
        if protos.frame != prepared[0].frame:
            raise DataError(f"prototype frame {protos.frame!r} does not match "
                            f"domain {domain!r}")
    if "ml" in requested:
        model = kde.read_model(_existing_path(config, "kde_model"))

    reports = pipeline.count_tracks(
        prepared, requested, roi=work_roi, prototypes=protos, model=model,
        camera_id=str(config.get("camera_id", "")), domain=domain)
    counts_path = _require(config, "counts")
    write_counts_csv(counts_path, reports)
    click.echo(f"counts written to {counts_path}")

    gt_path = config.get("ground_truth")
    if gt_path:
        gt = fusion.read_ground_truth(gt_path)
        metrics_path = config.get("metrics", counts_path + ".metrics.csv")
        with open(metrics_path, "w") as f:
            f.write("camera_id,domain,method,mae,bias\n")
            for r in reports:
                mae, bias = fusion.mae_and_bias(r, gt)
                f.write(f"{r.camera_id},{r.domain},{r.method},"
                        f"{mae:.6f},{bias:.6f}\n")
                click.echo(f"{r.method.upper():5s} MAE {mae:6.1%}  "
                           f"bias {bias:+6.1%}")
        click.echo(f"metrics written to {metrics_path}")


@main.command()
@_config_option
@click.option("--method", default=None, help="Counting method to fuse.")
@_exit_codes
def fuse(config_path, method):
    """Weak multi-camera fusion: per-class camera assignment from training
    errors, fused counts on the validation partition."""
    config = _load_config(config_path)
    fcfg = _require(config, "fuse")
    method = (method or fcfg.get("method", "ml")).lower()
    gt_train = fusion.read_ground_truth(_existing_path(fcfg, "training_ground_truth"))
    cameras = _require(fcfg, "cameras")
    if not cameras:
        raise ConfigError("fuse.cameras is empty")

    def _pick(path, cam):
        for rep in read_counts_csv(path):
            if rep.method == method:
                return rep
        raise DataError(f"no {method!r} counts for camera {cam!r} in {path}")

    errors = {}
    validation = {}
    for cam, entry in sorted(cameras.items()):
        train_rep = _pick(entry["training_counts"], cam)
        validation[cam] = _pick(entry["validation_counts"], cam)
        errors[cam] = fusion.per_class_error(train_rep, gt_train)
    assignment = fusion.assign_classes(errors)
    fused = fusion.fused_counts(validation, assignment)

    fusion.write_assignment(_require(fcfg, "assignment"), assignment)
    write_counts_csv(_require(fcfg, "fused_counts"), [fused])

    gt_val_path = fcfg.get("validation_ground_truth")
    if gt_val_path:
        gt_val = fusion.read_ground_truth(gt_val_path)
        fused_mae, fused_bias = fusion.mae_and_bias(fused, gt_val)
        click.echo(f"fused MAE {fused_mae:6.1%}  bias {fused_bias:+6.1%}")
        for cam, rep in sorted(validation.items()):
            mae, bias = fusion.mae_and_bias(rep, gt_val)
            click.echo(f"{cam:6s} MAE {mae:6.1%}  bias {bias:+6.1%}")
    click.echo(f"assignment written to {fcfg['assignment']}")


@main.command()
@_config_option
@click.option("--seed", type=int, default=None)
@_exit_codes
def simulate(config_path, seed):
    """Generate a labeled synthetic scene and write its tracks."""
    config = _load_config(config_path)
    scfg = _require(config, "simulate")
    seed = seed if seed is not None else int(config.get("seed", 0))
    if "spec" in scfg:
        spec = synth.read_intersection_spec(_existing_path(scfg, "spec"))
    else:
        spec = synth.four_way_intersection(
            lateral_sigma=float(scfg.get("lateral_sigma", 1.0)))
    n_tracks = int(scfg.get("n_tracks", 100))
    scene = synth.generate_scene(spec, n_tracks, seed)
    out = _require(scfg, "out")
    extra = {t.track_id: {"oracle_class": scene.labels[t.track_id]}
             for t in scene.ground_tracks}
    save_tracks(out, scene.ground_tracks, extra=extra)
    spec_out = scfg.get("spec_out")
    if spec_out:
        synth.write_intersection_spec(spec_out, spec)
    click.echo(f"{n_tracks} synthetic tracks written to {out}")


@main.command(name="serve-ui")
@_config_option
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@_exit_codes
def serve_ui(config_path, host, port):
    """Serve the browser calibration UI and its endpoints."""
    import uvicorn

    from .service import create_app

    config = _load_config(config_path)
    app = create_app(config)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
