"""Ordinal maximum-margin matrix factorization with a self-training loop
that augments confident predictions and refines noisy observations."""

from .core import (
    FactorModel,
    Hyperparams,
    SparseRatingMatrix,
    avg_threshold_gap,
    avg_threshold_gaps,
    discretize,
    discretize_scores,
    predict_score,
    smooth_hinge,
    smooth_hinge_grad,
    t_indicator,
)
from .trainer import (
    TrainingDivergedError,
    TrainTrace,
    complete_matrix,
    compute_gradients,
    gd_step,
    load_checkpoint,
    objective,
    predict_all,
    predict_ratings,
    save_checkpoint,
    train,
)
from .selftrain import (
    CandidateSet,
    IterationReport,
    SelfTrainConfig,
    SelfTrainResult,
    apply_augment,
    apply_refine,
    high_confidence_candidates,
    low_confidence_observed,
    overlap_stats,
    sample_augment,
    selftrain_loop,
    skew_allocation,
)
from .evaluation import (
    ConfusionMatrix,
    MetricsSnapshot,
    confusion,
    hr_at_k,
    hr_table,
    mae,
    rmse,
    split,
)
from .ingest import (
    ParseError,
    PreprocessResult,
    RawRatings,
    load_matrix,
    parse_ml100k,
    parse_ml1m,
    preprocess,
    save_matrix,
)
from .baseline import (
    BaselineConfig,
    BaselineModel,
    predict_baseline,
    rounds_experiment,
    strip_overlap,
    train_baseline,
)

__version__ = "0.1.0"
