"""Cost-aware encoding-ladder estimation for tiled 360° ERP video."""

__version__ = "0.1.0"

from .bdrate import RDCurve, bd_rate
from .domain import (
    BandwidthProfile,
    CandidateRep,
    Config,
    ConfigError,
    ContentType,
    EncodingFeatures,
    Ladder,
    ModelKind,
    PowerFitParams,
    Resolution,
    SolverConfig,
    default_config,
    load_config,
    validate_config,
)
from .features import ContentTypeClassifier, FrameFeatureExtractor, classify, extract_features
from .rdmodel import PowerSeriesRegressor, eval_model, fit_power_series
from .solver import (
    InfeasibleError,
    LadderOptimizer,
    generate_candidates,
    solve,
    solve_bruteforce,
    validate_ladder,
)
from .sphere import erp_weight, sequence_ws_mse, ws_mse, ws_psnr

__all__ = [
    "BandwidthProfile", "CandidateRep", "Config", "ConfigError", "ContentType",
    "ContentTypeClassifier", "EncodingFeatures", "FrameFeatureExtractor", "InfeasibleError",
    "Ladder", "LadderOptimizer", "ModelKind", "PowerFitParams", "PowerSeriesRegressor",
    "RDCurve", "Resolution", "SolverConfig", "bd_rate", "classify", "default_config",
    "erp_weight", "eval_model", "extract_features", "fit_power_series", "generate_candidates",
    "load_config", "sequence_ws_mse", "solve", "solve_bruteforce", "validate_config",
    "validate_ladder", "ws_mse", "ws_psnr",
]
