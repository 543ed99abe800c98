"""Object-center heatmap toolkit.

Renders probability heatmaps of object centers from box annotations,
evaluates heatmap-regression losses with analytic gradients, extracts
centers back out of heatmaps, and scores predicted centers against ground
truth with the Center Alignment Score.

The hot kernels run through a compiled extension when it is built; a numpy
fallback with identical behaviour is selected otherwise (see
`centerkit.BACKEND`, forceable with the CENTERKIT_BACKEND environment
variable).
"""

from ._backend import BACKEND
from .annotations import (
    BANDS,
    BoundingBox,
    Dataset,
    ImageInfo,
    box_center,
    box_diagonal_threshold,
    group_by_unit,
    parse_coco,
    size_band,
)
from .errors import CenterkitError, FormatError, IntegrityError, ParseError
from .heatmap import (
    GcParams,
    Heatmap,
    gc_value,
    grid_shape,
    merge_max,
    render_ellipse,
    render_gaussian,
    render_gc,
    stack,
)
from .loss import (
    KERNELS,
    BcflParams,
    LossReport,
    alpha_c,
    bcfl,
    bcfl_grad_p,
    estimate_alpha,
    focal_loss,
    loss_map,
    qfl,
    reduce_loss,
    weighted_bce,
    weighted_mse,
)
from .matching import (
    GroundTruthCenter,
    MatchCostParams,
    MatchPair,
    MatchSet,
    brute_force_assignment,
    cost_matrix,
    hungarian,
    match_and_refine,
    match_cost,
)
from .metrics import (
    AGGREGATIONS,
    CasReport,
    CategoryReport,
    EvalUnit,
    UnitScore,
    cas,
    cas_stratified,
    evaluate_units,
    penalty_terms,
    precision_recall_f1,
    score_unit,
    score_unit_banded,
)
from .ochm import read_ochm, read_sidecar, write_ochm, write_sidecar
from .peaks import CenterPoint, PeakParams, find_peaks, peaks_per_class

__version__ = "0.1.0"

__all__ = [
    "AGGREGATIONS",
    "BACKEND",
    "BANDS",
    "BcflParams",
    "BoundingBox",
    "CasReport",
    "CategoryReport",
    "CenterPoint",
    "CenterkitError",
    "Dataset",
    "EvalUnit",
    "FormatError",
    "GcParams",
    "GroundTruthCenter",
    "Heatmap",
    "ImageInfo",
    "IntegrityError",
    "KERNELS",
    "LossReport",
    "MatchCostParams",
    "MatchPair",
    "MatchSet",
    "ParseError",
    "PeakParams",
    "UnitScore",
    "alpha_c",
    "bcfl",
    "bcfl_grad_p",
    "box_center",
    "box_diagonal_threshold",
    "brute_force_assignment",
    "cas",
    "cas_stratified",
    "cost_matrix",
    "estimate_alpha",
    "evaluate_units",
    "find_peaks",
    "focal_loss",
    "gc_value",
    "grid_shape",
    "group_by_unit",
    "hungarian",
    "loss_map",
    "match_and_refine",
    "match_cost",
    "merge_max",
    "parse_coco",
    "peaks_per_class",
    "penalty_terms",
    "precision_recall_f1",
    "qfl",
    "read_ochm",
    "read_sidecar",
    "reduce_loss",
    "render_ellipse",
    "render_gaussian",
    "render_gc",
    "score_unit",
    "score_unit_banded",
    "size_band",
    "stack",
    "weighted_bce",
    "weighted_mse",
    "write_ochm",
    "write_sidecar",
    "__version__",
]
