"""Text-guided ranking fusion of multi-view embeddings, with hand-derived
gradients, text-generation metrics and a synthetic ablation harness."""

from .core import (
    AffineBlockParams,
    GradCheckReport,
    affine_refine,
    cosine_similarity,
    finite_diff_check,
    linear_project,
    softmax_temp,
)
from .errors import (
    EvaluationError,
    ParameterError,
    SchemaError,
    ShapeError,
    SoftRankError,
    TrainingDiverged,
    ZeroNormError,
)
from .fusion import (
    FusionOutput,
    Projection,
    TgsspGrads,
    TgsspParams,
    fuse,
    fuse_vjp,
    init_params,
    params_from_json,
    params_to_json,
    similarity_scores,
)
from .metrics import MetricReport, bleu, cider, evaluate_corpus, meteor, rouge_l, tokenize
from .ranking import (
    FlopCount,
    Strategy,
    StrategyConfig,
    WeightMode,
    flop_count,
    hard_top1,
    simple_softmax,
    sinkhorn_sort,
    soft_sort,
    strategy_vjp,
    strategy_weights,
    topk_soft,
    uniform_weights,
    weights_from_relaxed_perm,
)

__version__ = "0.1.0"
