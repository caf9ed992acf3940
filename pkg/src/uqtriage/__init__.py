"""Fine-grained aleatoric-uncertainty triage for dual-quality imaging pipelines.

Scores epistemic/aleatoric uncertainty in latent space, classifies samples
into C / UAR / UAI / UE, selects budget-constrained re-imaging queries, fuses
LI/HI predictions, and evaluates the result.
"""

__version__ = "0.1.0"

from .adaptive import (
    CostModel,
    QueryPlan,
    baseline_max_au,
    baseline_random,
    fuse_predictions,
    fused_certainty_tags,
    select_queries,
)
from .calibrate import CalibrationSet, calibrate_tau_au, calibrate_tau_eu, sample_calibration_set
from .core import (
    FeatureRecord,
    FeatureSet,
    StaticLabel,
    Thresholds,
    classify_static,
    classify_static_batch,
    entropy,
)
from .distance import (
    GaussianBank,
    NeighborBank,
    PcaProjector,
    fit_gaussian_bank,
    fit_neighbor_bank,
    fit_pca,
    knn_score,
    knn_scores,
    mahalanobis_score,
    mahalanobis_scores,
)
from .dynamic import (
    AgreementReport,
    DynamicLabel,
    ResolvabilityBanks,
    build_resolvability_banks,
    classify_dynamic_oracle,
    classify_dynamic_oracle_batch,
    classify_dynamic_surrogate,
    classify_dynamic_surrogate_batch,
    surrogate_agreement,
)
from .fdmp import FittedModel, read_fdbk, read_fdmp, write_fdbk, write_fdmp
from .ingest import downscale_grid, make_grid, pair_grids, validate_grid
from .metrics import EvalReport, aucc, budget_auc, ece, kendall_tau, macro_f1, p_accurate_certain
from .synth import SynthConfig, SynthResult, generate_paired_dataset
