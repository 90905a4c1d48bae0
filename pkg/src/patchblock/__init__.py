"""Defense against adversarial image patches: segment, isolate, block.

Overlapping image windows are clustered with DBSCAN; windows that join no
cluster are treated as patch material and overwritten with their own
per-channel summary value. A Mahalanobis-distance diagnostic, a synthetic
patch injector (including a distribution-constrained adaptive variant),
and a corpus evaluation harness round out the toolkit.
"""

__version__ = "0.1.0"

from .analyzer import (
    DistanceReport,
    SegmentDistribution,
    export_histogram,
    fit_distribution,
    mahalanobis,
    mahalanobis_scores,
    modality_report,
)
from .attacksim import (
    AdaptiveBounds,
    AdaptivePatchError,
    PatchSpec,
    make_adaptive_patch,
    make_patch,
)
from .clustering import (
    NOISE,
    ClusterLabels,
    ClusterParams,
    dbscan,
    distance,
    extract_noise,
    region_query,
)
from .defense import (
    DefenseConfig,
    DefenseOutcome,
    defend,
    defend_batch,
    replace_segment,
)
from .harness import (
    DetectionMetrics,
    RunManifest,
    calibrate,
    evaluate,
    score,
)
from .imagecore import (
    apply_mask_compose,
    load_image,
    load_mask,
    save_image,
    save_mask,
)
from .segmenter import Segment, SegmentGrid, footprint, segment
from .synth import make_host, write_corpus
