"""Constraint-guided Gaussian RBM feature learning, clustering pipelines,
and rank-test evaluation."""

from ._backend import backend_name
from .clustering import (
    ApConfig,
    ClusteringResult,
    InfeasibleConstraintsError,
    IsolatedPointError,
    affinity_propagation,
    cop_kmeans,
    count_violations,
    kmeans,
    spectral,
)
from .data import (
    ConstraintSet,
    Dataset,
    FoldSplit,
    kfold,
    load_csv,
    normalize,
    sample_constraints,
    sample_constraints_incremental,
    synth_blobs,
    transitive_closure,
)
from .evaluation import (
    DegenerateRanksError,
    RankTable,
    ScoreMatrix,
    accuracy,
    aligned_ranks,
    chi_square_sf,
    friedman_aligned_statistic,
    friedman_aligned_test,
    purity,
    rank_table_from_ranks,
)
from .grbm import (
    CdStats,
    GrbmParams,
    TrainConfig,
    apply_cd_update,
    cd1_step,
    energy,
    extract_features,
    hidden_prob,
    reconstruct_visible,
    reconstruction_mse,
    sample_hidden,
    train_grbm,
)
from .guided import (
    HiddenPairBatch,
    PcgrbmConfig,
    combined_update,
    constraint_gradient,
    mean_pair_distance,
    pairwise_penalty,
    penalty_trace,
    train_pcgrbm,
)
from .model_io import load_constraints, load_model, save_constraints, save_grbm, save_pcgrbm
from .pipeline import (
    AlgorithmSpec,
    DatasetSpec,
    ExperimentConfig,
    ReportTable,
    check_no_test_leakage,
    emit_report,
    register_algorithm,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "ApConfig",
    "AlgorithmSpec",
    "CdStats",
    "ClusteringResult",
    "ConstraintSet",
    "Dataset",
    "DatasetSpec",
    "DegenerateRanksError",
    "ExperimentConfig",
    "FoldSplit",
    "GrbmParams",
    "HiddenPairBatch",
    "InfeasibleConstraintsError",
    "IsolatedPointError",
    "PcgrbmConfig",
    "RankTable",
    "ReportTable",
    "ScoreMatrix",
    "TrainConfig",
    "accuracy",
    "affinity_propagation",
    "aligned_ranks",
    "apply_cd_update",
    "backend_name",
    "cd1_step",
    "check_no_test_leakage",
    "chi_square_sf",
    "combined_update",
    "constraint_gradient",
    "cop_kmeans",
    "count_violations",
    "emit_report",
    "energy",
    "extract_features",
    "friedman_aligned_statistic",
    "friedman_aligned_test",
    "hidden_prob",
    "kfold",
    "kmeans",
    "load_constraints",
    "load_csv",
    "load_model",
    "mean_pair_distance",
    "normalize",
    "pairwise_penalty",
    "penalty_trace",
    "purity",
    "rank_table_from_ranks",
    "reconstruct_visible",
    "reconstruction_mse",
    "register_algorithm",
    "run_experiment",
    "sample_constraints",
    "sample_constraints_incremental",
    "sample_hidden",
    "save_constraints",
    "save_grbm",
    "save_pcgrbm",
    "spectral",
    "synth_blobs",
    "train_grbm",
    "train_pcgrbm",
    "transitive_closure",
]
