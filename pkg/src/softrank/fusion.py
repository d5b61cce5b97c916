"""Text-guided pooling of multi-view embeddings.

Pipeline for ``N`` views and one query::

    v_i'  = vis_proj(refine(v_i))          refine = affine + standardize + relu
    t'    = txt_proj(mean of query tokens)
    s_i   = cos(v_i', t')
    W     = strategy(s)
    fused = sum_i W_i v_i'

``fuse_vjp`` runs the whole chain backwards by hand.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    AffineBlockParams,
    affine_refine_backward,
    affine_refine_forward,
    as_mat,
    as_vec,
    cosine_rows,
    cosine_rows_vjp,
    linear_project,
)
from .errors import ParameterError, ShapeError
from .ranking import StrategyConfig, strategy_vjp, strategy_weights

PARAM_KEYS = (
    "refine.weight",
    "refine.bias",
    "refine.norm_gain",
    "refine.norm_bias",
    "vis_proj.weight",
    "vis_proj.bias",
    "txt_proj.weight",
    "txt_proj.bias",
)


@dataclass(frozen=True)
class Projection:
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match weight {self.weight.shape}"
            )


@dataclass(frozen=True)
class TgsspParams:
    refine: AffineBlockParams
    vis_proj: Projection
    txt_proj: Projection
    strategy: StrategyConfig = field(default_factory=StrategyConfig)

    def __post_init__(self):
        d_v = self.refine.weight.shape[1]
        if self.refine.weight.shape[0] != d_v:
            raise ShapeError("refine block must map D_v to D_v")
        if self.vis_proj.weight.shape[1] != d_v:
            raise ShapeError("vis_proj input dimension must equal D_v")
        if self.vis_proj.weight.shape[0] != self.txt_proj.weight.shape[0]:
            raise ShapeError("vis_proj and txt_proj must share the embedding dimension")

    @property
    def dims(self):
        return {
            "d_v": self.refine.weight.shape[1],
            "d_t": self.txt_proj.weight.shape[1],
            "d_e": self.vis_proj.weight.shape[0],
        }

    def arrays(self) -> dict:
        """Parameter arrays keyed by their snapshot names."""
        return {
            "refine.weight": self.refine.weight,
            "refine.bias": self.refine.bias,
            "refine.norm_gain": self.refine.norm_gain,
            "refine.norm_bias": self.refine.norm_bias,
            "vis_proj.weight": self.vis_proj.weight,
            "vis_proj.bias": self.vis_proj.bias,
            "txt_proj.weight": self.txt_proj.weight,
            "txt_proj.bias": self.txt_proj.bias,
        }

    @classmethod
    def from_arrays(cls, arrays, strategy=None):
        missing = [k for k in PARAM_KEYS if k not in arrays]
        if missing:
            raise ParameterError(f"missing parameter arrays: {missing}")
        a = {k: np.asarray(arrays[k], dtype=np.float64) for k in PARAM_KEYS}
        return cls(
            AffineBlockParams(a["refine.weight"], a["refine.bias"],
                              a["refine.norm_gain"], a["refine.norm_bias"]),
            Projection(a["vis_proj.weight"], a["vis_proj.bias"]),
            Projection(a["txt_proj.weight"], a["txt_proj.bias"]),
            strategy if strategy is not None else StrategyConfig(),
        )

    def with_strategy(self, strategy: StrategyConfig):
        return replace(self, strategy=strategy)


@dataclass(frozen=True)
class TgsspGrads:
    """Gradient slots mirroring ``TgsspParams`` (strategy excluded)."""

    refine: AffineBlockParams
    vis_proj: Projection
    txt_proj: Projection

    def arrays(self) -> dict:
        return TgsspParams.arrays(self)


@dataclass(frozen=True)
class FusionOutput:
    fused: np.ndarray
    weights: np.ndarray
    scores: np.ndarray


def init_params(d_v: int, d_t: int, d_e: int, seed: int = 0, strategy=None) -> TgsspParams:
    """Glorot-uniform weights, zero biases, unit gains; deterministic in ``seed``."""
    if min(d_v, d_t, d_e) < 1:
        raise ParameterError(f"dimensions must be >= 1, got {(d_v, d_t, d_e)}")
    rng = np.random.default_rng(seed)

    def glorot(fan_out, fan_in):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-a, a, size=(fan_out, fan_in))

    refine = AffineBlockParams(glorot(d_v, d_v), np.zeros(d_v), np.ones(d_v), np.zeros(d_v))
    vis = Projection(glorot(d_e, d_v), np.zeros(d_e))
    txt = Projection(glorot(d_e, d_t), np.zeros(d_e))
    return TgsspParams(refine, vis, txt, strategy if strategy is not None else StrategyConfig())


def pool_query(query) -> np.ndarray:
    """Mean-pool token embeddings ``(L, D_t)`` to a single ``D_t`` vector."""
    q = np.asarray(query, dtype=np.float64)
    if q.ndim == 2:
        if q.shape[0] < 1:
            raise ShapeError("query has no tokens")
        q = q.mean(axis=0)
    return as_vec(q, "query")


def similarity_scores(v_proj, t_proj) -> np.ndarray:
    """Cosine of each projected view against the projected query."""
    v = as_mat(v_proj, "v_proj")
    t = as_vec(t_proj, "t_proj")
    if v.shape[1] != t.size:
        raise ShapeError(f"views have dimension {v.shape[1]}, query has {t.size}")
    return cosine_rows(v, t)[0]


def _check_inputs(views, query, params):
    v = as_mat(views, "views")
    q = pool_query(query)
    dims = params.dims
    if v.shape[1] != dims["d_v"]:
        raise ShapeError(f"views have dimension {v.shape[1]}, params expect {dims['d_v']}")
    if q.size != dims["d_t"]:
        raise ShapeError(f"query has dimension {q.size}, params expect {dims['d_t']}")
    return v, q


def _forward(v, q, params):
    refined, refine_cache = affine_refine_forward(v, params.refine)
    v_proj = linear_project(refined, params.vis_proj.weight, params.vis_proj.bias)
    t_proj = linear_project(q, params.txt_proj.weight, params.txt_proj.bias)
    cos = cosine_rows(v_proj, t_proj)
    scores = cos[0]
    weights = strategy_weights(params.strategy, scores)
    fused = weights @ v_proj
    cache = (refined, refine_cache, v_proj, cos)
    return FusionOutput(fused, weights, scores), cache


def fuse(views, query, params: TgsspParams) -> FusionOutput:
    """Score every view against the query and pool the projected views."""
    v, q = _check_inputs(views, query, params)
    return _forward(v, q, params)[0]


@dataclass(frozen=True)
class Tape:
    """Forward intermediates kept by ``fuse_forward`` for ``fuse_backward``."""

    query: np.ndarray
    pooled_query: np.ndarray
    params: TgsspParams
    output: FusionOutput
    cache: tuple


def fuse_forward(views, query, params: TgsspParams):
    """``fuse`` that also returns the tape needed by ``fuse_backward``."""
    v, q = _check_inputs(views, query, params)
    out, cache = _forward(v, q, params)
    return out, Tape(np.asarray(query, dtype=np.float64), q, params, out, cache)


def fuse_backward(tape: Tape, upstream):
    """Returns ``(grads, d_views, d_query)`` for the loss ``upstream . fused``.

    ``d_query`` has the shape of the query argument, so token-level queries
    get per-token gradients.
    """
    params, out = tape.params, tape.output
    refined, refine_cache, v_proj, cos = tape.cache
    g = as_vec(upstream, "upstream")
    if g.size != params.dims["d_e"]:
        raise ShapeError(f"upstream has length {g.size}, expected {params.dims['d_e']}")

    d_vproj = np.outer(out.weights, g)
    d_weights = v_proj @ g
    d_scores = strategy_vjp(params.strategy, out.scores, d_weights)
    d_vcos, d_tproj = cosine_rows_vjp(d_scores, *cos)
    d_vproj = d_vproj + d_vcos

    vis = Projection(d_vproj.T @ refined, d_vproj.sum(axis=0))
    txt = Projection(np.outer(d_tproj, tape.pooled_query), d_tproj)
    d_refined = d_vproj @ params.vis_proj.weight
    refine, d_views = affine_refine_backward(d_refined, params.refine, refine_cache)
    d_q = d_tproj @ params.txt_proj.weight
    if tape.query.ndim == 2:
        d_q = np.broadcast_to(d_q / tape.query.shape[0], tape.query.shape).copy()
    return TgsspGrads(refine, vis, txt), d_views, d_q


def fuse_vjp(views, query, params: TgsspParams, upstream):
    """Analytic gradients of ``upstream . fuse(views, query, params).fused``.

    Returns ``(grads, d_views, d_query)``.
    """
    _, tape = fuse_forward(views, query, params)
    return fuse_backward(tape, upstream)


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

def params_to_json(params: TgsspParams) -> str:
    """Flat key -> row-major array document, with the dimensions alongside."""
    doc = {"dims": params.dims}
    for key, arr in params.arrays().items():
        doc[key] = arr.ravel().tolist()
    return json.dumps(doc, indent=1)


def params_from_json(text: str, strategy=None) -> TgsspParams:
    doc = json.loads(text)
    try:
        d_v, d_t, d_e = (int(doc["dims"][k]) for k in ("d_v", "d_t", "d_e"))
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"snapshot has no valid 'dims' entry: {exc}") from None
    shapes = {
        "refine.weight": (d_v, d_v),
        "refine.bias": (d_v,),
        "refine.norm_gain": (d_v,),
        "refine.norm_bias": (d_v,),
        "vis_proj.weight": (d_e, d_v),
        "vis_proj.bias": (d_e,),
        "txt_proj.weight": (d_e, d_t),
        "txt_proj.bias": (d_e,),
    }
    arrays = {}
    for key, shape in shapes.items():
        if key not in doc:
            raise ParameterError(f"snapshot is missing {key!r}")
        arr = np.asarray(doc[key], dtype=np.float64)
        if arr.size != int(np.prod(shape)):
            raise ShapeError(f"{key} has {arr.size} values, expected shape {shape}")
        arrays[key] = arr.reshape(shape)
    return TgsspParams.from_arrays(arrays, strategy)
