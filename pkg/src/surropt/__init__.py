"""Model-free evaluation of censored surrogate endpoints."""

from .data import (
    SnapshotKind,
    SubjectRecord,
    SurrogateSnapshot,
    TrialDataset,
    ingest_csv,
    snapshot,
    to_csv,
)
from .errors import (
    DegenerateArmError,
    DegenerateSampleError,
    EmptyStratumError,
    EstimationError,
    IllDefinedPTEError,
    InternalConsistencyError,
    NodeFitError,
    ParseError,
    PositivityError,
    SurroptError,
    UnreliableInferenceError,
    ValidationError,
)
from .inference import (
    IntervalEstimate,
    PerturbationConfig,
    perturb_landmark_metrics,
    perturb_rmst_metrics,
    perturbed_estimate,
)
from .pte import (
    AnalysisOptions,
    LandmarkWorkspace,
    OptimalTransform,
    PteResult,
    apply_transform,
    estimate_pte,
    estimate_pte_ind,
    estimate_transform,
)
from .rmst import TimeGrid, estimate_pte_rmst, estimate_pte_rmst_ind
from .sim import (
    ConditionReport,
    OracleTruth,
    PotentialOutcomeSample,
    SimSetting,
    StudyRow,
    StudyTable,
    check_conditions,
    generate_setting,
    oracle_truth,
    run_study,
)
from .survival import censoring_km, ipcw_weights, km_with_ci

__version__ = "0.1.0"

__all__ = [
    "AnalysisOptions",
    "ConditionReport",
    "DegenerateArmError",
    "DegenerateSampleError",
    "EmptyStratumError",
    "EstimationError",
    "IllDefinedPTEError",
    "IntervalEstimate",
    "InternalConsistencyError",
    "LandmarkWorkspace",
    "NodeFitError",
    "OptimalTransform",
    "OracleTruth",
    "ParseError",
    "PerturbationConfig",
    "PositivityError",
    "PotentialOutcomeSample",
    "PteResult",
    "SimSetting",
    "SnapshotKind",
    "StudyRow",
    "StudyTable",
    "SubjectRecord",
    "SurroptError",
    "SurrogateSnapshot",
    "TimeGrid",
    "TrialDataset",
    "UnreliableInferenceError",
    "ValidationError",
    "apply_transform",
    "censoring_km",
    "check_conditions",
    "estimate_pte",
    "estimate_pte_ind",
    "estimate_pte_rmst",
    "estimate_pte_rmst_ind",
    "estimate_transform",
    "generate_setting",
    "ingest_csv",
    "ipcw_weights",
    "km_with_ci",
    "oracle_truth",
    "perturb_landmark_metrics",
    "perturb_rmst_metrics",
    "perturbed_estimate",
    "run_study",
    "snapshot",
    "to_csv",
    "__version__",
]
