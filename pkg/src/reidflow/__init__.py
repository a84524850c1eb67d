"""Key-person-aided re-identification re-ranking over pedestrian flows.

The pipeline scores how much each pedestrian stands out from the crowd
(saliency via normalized mean K-NN distance), selects the stand-outs as key
persons across a bank of feature spaces, matches them across two cameras,
and uses their entering times to project temporal candidate windows that
discount the baseline distances of plausible matches.
"""

from ._kernels import BACKEND, HAVE_EXT
from .errors import (
    ConfigError,
    EvaluationError,
    InputError,
    NotFoundError,
    ParameterError,
    ReidflowError,
    ValidationError,
)
from .evaluation import (
    CMCCurve,
    EvalResult,
    cmc_curve,
    compare_table,
    rank_of_true_match,
    run_trials,
)
from .flow import (
    SubsetPairing,
    build_flow,
    correspond_subsets,
    split_by_velocity,
    temporal_distance,
)
from .io import (
    dump_dataset,
    emit_results,
    load_bundle,
    load_config,
    parse_distance_matrix,
    parse_embeddings,
    parse_metadata,
)
from .model import (
    FeatureBank,
    FeatureSpace,
    FlowSet,
    KeyEntry,
    KeySet,
    PedestrianRecord,
    PipelineConfig,
    PrecomputedMetric,
    ReidDataset,
    ScoreMatrix,
    ValidationReport,
    VelocitySubset,
    validate_inputs,
)
from .oracle import naive_knn_mean, naive_saliency_scores, oracle_rerank
from .rerank import (
    CandidateWindow,
    KeyAnchor,
    candidate_window,
    compute_weights,
    match_key_person,
    nearest_key_persons,
    rerank_all,
    rerank_query,
    rerank_scores,
)
from .saliency import (
    SaliencyTable,
    knn_mean_distance,
    saliency_scores,
    select_key_persons,
    sweep_rho,
    union_key_sets,
)
from .synth import SynthParams, generate_flow, order_inversion_rate

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "HAVE_EXT",
    "CMCCurve",
    "CandidateWindow",
    "ConfigError",
    "EvalResult",
    "EvaluationError",
    "FeatureBank",
    "FeatureSpace",
    "FlowSet",
    "InputError",
    "KeyAnchor",
    "KeyEntry",
    "KeySet",
    "NotFoundError",
    "ParameterError",
    "PedestrianRecord",
    "PipelineConfig",
    "PrecomputedMetric",
    "ReidDataset",
    "ReidflowError",
    "SaliencyTable",
    "ScoreMatrix",
    "SubsetPairing",
    "SynthParams",
    "ValidationError",
    "ValidationReport",
    "VelocitySubset",
    "build_flow",
    "candidate_window",
    "cmc_curve",
    "compare_table",
    "compute_weights",
    "correspond_subsets",
    "dump_dataset",
    "emit_results",
    "generate_flow",
    "knn_mean_distance",
    "load_bundle",
    "load_config",
    "match_key_person",
    "naive_knn_mean",
    "naive_saliency_scores",
    "nearest_key_persons",
    "oracle_rerank",
    "order_inversion_rate",
    "parse_distance_matrix",
    "parse_embeddings",
    "parse_metadata",
    "rank_of_true_match",
    "rerank_all",
    "rerank_query",
    "rerank_scores",
    "run_trials",
    "saliency_scores",
    "select_key_persons",
    "split_by_velocity",
    "sweep_rho",
    "temporal_distance",
    "union_key_sets",
    "validate_inputs",
]
