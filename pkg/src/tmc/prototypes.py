"""Unsupervised per-class prototype selection: k-means++ over fixed-length
track features, then Chamfer-medoid extraction within each cluster."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateTrackError
from .tracks import Track, arc_lengths, track_distance_cmm

log = logging.getLogger(__name__)

DEFAULT_FEATURE_POINTS = 32

__all__ = [
    "DEFAULT_FEATURE_POINTS",
    "PrototypeSet",
    "featurize",
    "kmeans_pp_cluster",
    "select_medoid",
    "learn_prototypes",
    "read_prototypes",
    "write_prototypes",
]


def featurize(t: Track, n: int = DEFAULT_FEATURE_POINTS) -> np.ndarray:
    """Flattened coordinates of the track resampled to n points at equal
    arc-length fractions (endpoints included)."""
    cum = arc_lengths(t.points)
    total = cum[-1]
    if total <= 0:
        raise DegenerateTrackError(f"track {t.track_id!r} has zero length")
    targets = np.linspace(0.0, total, n)
    x = np.interp(targets, cum, t.points[:, 0])
    y = np.interp(targets, cum, t.points[:, 1])
    feat = np.column_stack([x, y])
    feat[0] = t.points[0]
    feat[-1] = t.points[-1]
    return feat.ravel()


def kmeans_pp_cluster(features, k: int, seed) -> np.ndarray:
    """k-means with D^2 seeding; returns a cluster label per feature vector.

    Lloyd iterations run until assignments stabilize (or 100 rounds); empty
    clusters are re-seeded from the point farthest from its centroid. When
    there are fewer features than k, k is reduced with a warning.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or len(x) == 0:
        raise DataError("features must be a non-empty 2D array")
    if k < 1:
        raise DataError("k must be >= 1")
    if len(x) < k:
        log.warning("only %d features for k=%d clusters; reducing k", len(x), k)
        k = len(x)

    rng = np.random.default_rng(seed)
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(len(x))]
    d2 = np.sum((x - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[j] = x[rng.integers(len(x))]
        else:
            centroids[j] = x[rng.choice(len(x), p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centroids[j]) ** 2, axis=1))

    labels = np.full(len(x), -1)
    for _ in range(100):
        dist2 = np.sum((x[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_labels = dist2.argmin(axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = x[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
            else:
                worst = dist2[np.arange(len(x)), labels].argmax()
                centroids[j] = x[worst]
    return labels


def select_medoid(cluster: list, distance=track_distance_cmm) -> Track:
    """Cluster member minimizing mean distance to the other members.

    Singletons return themselves; ties break toward the lowest track_id.
    """
    if not cluster:
        raise DataError("cluster must be non-empty")
    if len(cluster) == 1:
        return cluster[0]
    n = len(cluster)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = distance(cluster[i], cluster[j])
    means = d.sum(axis=1) / (n - 1)
    order = sorted(range(n), key=lambda i: (means[i], cluster[i].track_id))
    return cluster[order[0]]


@dataclass(frozen=True)
class PrototypeSet:
    """Per-movement-class prototype tracks (one per lane where possible)."""

    frame: str
    classes: dict  # class index -> list of Track
    seed: int = 0
    feature_points: int = DEFAULT_FEATURE_POINTS

    def non_empty(self) -> dict:
        return {idx: ps for idx, ps in self.classes.items() if ps}

    def all_prototypes(self):
        """Yield (class_index, prototype) pairs in class-index order."""
        for idx in sorted(self.classes):
            for p in self.classes[idx]:
                yield idx, p


def learn_prototypes(training: dict, roi, seed: int = 0,
                     feature_points: int = DEFAULT_FEATURE_POINTS) -> PrototypeSet:
    """Per class: featurize, k-means++ with k = lane count, one Chamfer
    medoid per cluster. ``training`` maps class index -> list of tracks."""
    frames = {t.frame for tracks in training.values() for t in tracks}
    if len(frames) > 1:
        raise DataError(f"training tracks span multiple frames: {frames}")
    frame = frames.pop() if frames else roi.frame

    classes = {}
    for idx in range(1, 13):
        tracks = list(training.get(idx, []))
        if not tracks:
            log.warning("movement class %d has no training tracks", idx)
            classes[idx] = []
            continue
        k = max(1, int(roi.lane_counts.get(idx, 1)))
        feats = np.array([featurize(t, feature_points) for t in tracks])
        labels = kmeans_pp_cluster(feats, k, seed=(seed, idx))
        protos = []
        for j in sorted(set(labels.tolist())):
            cluster = [t for t, l in zip(tracks, labels) if l == j]
            protos.append(select_medoid(cluster))
        classes[idx] = protos
    return PrototypeSet(frame=frame, classes=classes, seed=seed,
                        feature_points=feature_points)


def write_prototypes(path, protos: PrototypeSet) -> None:
    doc = {
        "frame": protos.frame,
        "seed": protos.seed,
        "feature_points": protos.feature_points,
        "classes": {
            str(idx): [{"track_id": p.track_id,
                        "points": [[float(x), float(y)] for x, y in p.points]}
                       for p in ps]
            for idx, ps in sorted(protos.classes.items())
        },
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def read_prototypes(path) -> PrototypeSet:
    with open(path) as f:
        doc = json.load(f)
    classes = {}
    for key, entries in doc["classes"].items():
        classes[int(key)] = [
            Track(track_id=str(e["track_id"]), camera_id="prototype",
                  frame=doc["frame"], points=np.asarray(e["points"], dtype=float))
            for e in entries
        ]
    return PrototypeSet(frame=doc["frame"], classes=classes,
                        seed=int(doc.get("seed", 0)),
                        feature_points=int(doc.get("feature_points",
                                                   DEFAULT_FEATURE_POINTS)))
