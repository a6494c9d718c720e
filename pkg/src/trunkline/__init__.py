"""Bezier trunk-curve modelling, curve losses, and depth-based 3D length measurement."""

from .bezier import (
    BezierCurve,
    BoundingBox,
    ParamSet,
    bernstein,
    bernstein_basis,
    control_bbox,
    decasteljau,
    evaluate,
    sample,
    uniform_params,
)
from .errors import (
    DegenerateInputError,
    DomainError,
    MeasurementRejectedError,
    OptimizationDivergenceError,
    ParseError,
    TrunklineError,
    UnderdeterminedError,
    ValidationError,
)
from .fitting import AnnotationPolyline, FitResult, chord_length_params, design_matrix, fit_curve
from .formats import (
    AnnotationRecord,
    CurveRecord,
    PredictionRecord,
    parse_annotations,
    parse_curves,
    parse_depth,
    parse_intrinsics,
    parse_predictions,
    write_annotations,
    write_curves,
    write_depth,
    write_intrinsics,
    write_predictions,
)
from .losses import (
    LossBreakdown,
    LossWeights,
    WingParams,
    combined_loss,
    endpoint_loss,
    endpoint_loss_grad,
    sampling_loss,
    sampling_loss_grad,
    wing,
)
from .measure import (
    CameraIntrinsics,
    DepthMap,
    MeasureConfig,
    MeasurementResult,
    RepairConfig,
    SpaceCurveSamples,
    backproject,
    curve_to_space,
    integrate_length,
    measure,
    project,
    sample_depth,
)
from .metrics import (
    CurveEvalConfig,
    ErrorStats,
    GroundTruthCurve,
    ScoredCurve,
    curve_map,
    error_stats,
    oks,
    pck,
    rel_errors,
    render_report,
)
from .optimize import OptimConfig, OptimTrace, default_init, fit_to_polyline, fit_to_target
from .synth import (
    NoiseConfig,
    SceneConfig,
    SyntheticScene,
    gen_scene,
    make_slab_scene,
    oracle_length,
    perturb_depth,
)

__version__ = "0.1.0"
