"""Turning movement counts from traffic-camera trajectories.

Calibrates cameras to a ground-plane orthophoto, learns unsupervised
per-movement models from vehicle tracks, and counts turning movements with
four classifiers in either the camera plane or the ground plane, with weak
multi-camera fusion and a synthetic intersection oracle for verification.
"""

from .classify import (
    ClassifiedTrack,
    CountReport,
    classify_dir,
    classify_ee,
    classify_ml,
    classify_vote,
    count_movements,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateGeometryError,
    DegenerateTrackError,
    FrameMismatchError,
    GeometryError,
    HorizonError,
    NonConvergenceError,
    TmcError,
    UnclassifiableError,
)
from .fusion import assign_classes, fused_counts, mae_and_bias, per_class_error
from .geometry import (
    BoundingBox,
    Homography,
    Intrinsics,
    PointCorrespondence,
    ReprojectionStats,
    apply_homography,
    back_project_detection,
    distort_point,
    estimate_homography,
    invert_homography,
    reprojection_stats,
    undistort_point,
)
from .kde import (
    GridSpec,
    LikelihoodMap,
    MovementLikelihoodModel,
    build_kde_map,
    optimize_bandwidth,
    track_log_likelihood,
)
from .prototypes import (
    PrototypeSet,
    featurize,
    kmeans_pp_cluster,
    learn_prototypes,
    select_medoid,
)
from .roi import (
    ALL_CLASSES,
    CrossingEvent,
    MovementClass,
    RegionOfInterest,
    edge_crossings,
    entry_exit_class,
    label_training_track,
)
from .synth import (
    IntersectionSpec,
    SyntheticCamera,
    SyntheticScene,
    four_way_intersection,
    generate_scene,
    oracle_label,
    project_scene,
)
from .tracks import (
    ResampledTrack,
    Track,
    point_to_polyline_distance,
    resample_uniform,
    track_direction,
    track_distance_cmm,
)

__version__ = "0.1.0"
