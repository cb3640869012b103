"""The four turning-movement classifiers and per-video count aggregation."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateTrackError, UnclassifiableError
from .kde import MovementLikelihoodModel, track_log_likelihood
from .prototypes import PrototypeSet
from .roi import RegionOfInterest, entry_exit_class
from .tracks import Track, points_to_polyline_distances, track_direction

log = logging.getLogger(__name__)

METHODS = ("ee", "dir", "vote", "ml")

__all__ = [
    "METHODS",
    "ClassifiedTrack",
    "CountReport",
    "classify_ee",
    "classify_dir",
    "classify_vote",
    "classify_ml",
    "count_movements",
    "write_counts_csv",
    "read_counts_csv",
]


@dataclass(frozen=True)
class ClassifiedTrack:
    """One classification outcome; class_index is None when unclassifiable."""

    track_id: str
    class_index: int | None
    method: str
    score: float = 0.0


@dataclass(frozen=True)
class CountReport:
    """Per-class counts for one camera, domain and method."""

    camera_id: str
    domain: str
    method: str
    counts: dict = field(default_factory=dict)  # class index -> count
    unclassifiable: int = 0

    def count(self, idx: int) -> int:
        return int(self.counts.get(idx, 0))

    def total(self) -> int:
        return sum(self.counts.values()) + self.unclassifiable


def classify_ee(t: Track, roi: RegionOfInterest) -> ClassifiedTrack:
    """Entry-exit classification from ROI edge crossings."""
    try:
        cls = entry_exit_class(t, roi)
    except UnclassifiableError:
        return ClassifiedTrack(t.track_id, None, "ee")
    return ClassifiedTrack(t.track_id, cls.index, "ee", score=1.0)


def classify_dir(t: Track, prototypes: PrototypeSet) -> ClassifiedTrack:
    """Class of the prototype whose endpoint-to-endpoint direction has the
    highest cosine similarity with the track's direction."""
    try:
        d = track_direction(t)
    except DegenerateTrackError:
        return ClassifiedTrack(t.track_id, None, "dir")
    best_idx = None
    best_cos = -np.inf
    for idx, proto in prototypes.all_prototypes():
        cos = float(np.dot(d, track_direction(proto)))
        if cos > best_cos or (cos == best_cos and best_idx is not None and idx < best_idx):
            best_cos = cos
            best_idx = idx
    if best_idx is None:
        return ClassifiedTrack(t.track_id, None, "dir")
    return ClassifiedTrack(t.track_id, best_idx, "dir", score=best_cos)


def classify_vote(t: Track, prototypes: PrototypeSet) -> ClassifiedTrack:
    """Each track point votes for the class of its nearest prototype;
    plurality wins. Ties break toward the class with the smallest summed
    point-to-prototype distance, then the lowest class index."""
    entries = list(prototypes.all_prototypes())
    if not entries:
        return ClassifiedTrack(t.track_id, None, "vote")
    # (n_points, n_prototypes) distance table, then per-class minimum.
    dists = np.column_stack([
        points_to_polyline_distances(t.points, proto.points)
        for _, proto in entries])
    class_ids = sorted({idx for idx, _ in entries})
    per_class = np.column_stack([
        dists[:, [j for j, (idx, _) in enumerate(entries) if idx == c]].min(axis=1)
        for c in class_ids])
    winners = per_class.argmin(axis=1)
    votes = np.bincount(winners, minlength=len(class_ids))
    sums = per_class.sum(axis=0)
    order = sorted(range(len(class_ids)),
                   key=lambda j: (-votes[j], sums[j], class_ids[j]))
    best = order[0]
    share = votes[best] / len(t.points)
    return ClassifiedTrack(t.track_id, class_ids[best], "vote", score=float(share))


def classify_ml(t: Track, model: MovementLikelihoodModel) -> ClassifiedTrack:
    """Maximum-likelihood class under the per-class KDE maps; the score is
    the log-likelihood gap to the runner-up."""
    maps = model.non_empty()
    if not maps:
        return ClassifiedTrack(t.track_id, None, "ml")
    lls = {idx: track_log_likelihood(t, lmap, model.floor)
           for idx, lmap in sorted(maps.items())}
    ranked = sorted(lls.items(), key=lambda kv: (-kv[1], kv[0]))
    best_idx, best_ll = ranked[0]
    gap = best_ll - ranked[1][1] if len(ranked) > 1 else 0.0
    return ClassifiedTrack(t.track_id, best_idx, "ml", score=float(gap))


def count_movements(tracks, method: str, *, roi: RegionOfInterest | None = None,
                    prototypes: PrototypeSet | None = None,
                    model: MovementLikelihoodModel | None = None,
                    camera_id: str = "", domain: str = "") -> CountReport:
    """Classify every track with one method and tally per-class counts.

    Unclassifiable tracks are tallied separately, never forced into a class.
    """
    method = method.lower()
    if method not in METHODS:
        raise DataError(f"unknown method {method!r}")
    if method == "ee" and roi is None:
        raise DataError("EE counting requires an ROI")
    if method in ("dir", "vote") and prototypes is None:
        raise DataError(f"{method.upper()} counting requires prototypes")
    if method == "ml" and model is None:
        raise DataError("ML counting requires a likelihood model")

    counts: dict = {}
    unclassifiable = 0
    for t in tracks:
        if method == "ee":
            res = classify_ee(t, roi)
        elif method == "dir":
            res = classify_dir(t, prototypes)
        elif method == "vote":
            res = classify_vote(t, prototypes)
        else:
            res = classify_ml(t, model)
        if res.class_index is None:
            unclassifiable += 1
        else:
            counts[res.class_index] = counts.get(res.class_index, 0) + 1
    return CountReport(camera_id=camera_id, domain=domain, method=method,
                       counts=counts, unclassifiable=unclassifiable)


_CSV_FIELDS = ["camera_id", "domain", "method", "class_index", "count",
               "unclassifiable_total"]


def write_counts_csv(path, reports) -> None:
    """One row per (report, class index 1-12)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(_CSV_FIELDS)
        for r in reports:
            for idx in range(1, 13):
                w.writerow([r.camera_id, r.domain, r.method, idx,
                            r.count(idx), r.unclassifiable])


def read_counts_csv(path) -> list:
    """Reconstruct CountReports from a counts CSV."""
    groups: dict = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            key = (row["camera_id"], row["domain"], row["method"])
            g = groups.setdefault(key, {"counts": {}, "unclassifiable": 0})
            g["counts"][int(row["class_index"])] = int(row["count"])
            g["unclassifiable"] = int(row["unclassifiable_total"])
    return [CountReport(camera_id=k[0], domain=k[1], method=k[2],
                        counts=v["counts"], unclassifiable=v["unclassifiable"])
            for k, v in groups.items()]
