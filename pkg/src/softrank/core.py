"""Dense float64 primitives shared by the ranking and fusion code.

Vectors and matrices are plain ``numpy.ndarray`` objects of dtype float64.
``as_vec`` and ``as_mat`` are the construction-time checks: they copy the
input to float64, verify the shape and reject NaN/Inf entries.

Every differentiable primitive here comes with a hand-written backward
function, and ``finite_diff_check`` compares any such backward pass against
central differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationError, ParameterError, ShapeError, ZeroNormError

# variance floor for the per-vector standardization in affine_refine
VAR_FLOOR = 1e-6


def as_vec(x, name="x") -> np.ndarray:
    v = np.array(x, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ShapeError(f"{name} must be a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ParameterError(f"{name} has non-finite entries")
    return v


def as_mat(x, name="w") -> np.ndarray:
    m = np.array(x, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ParameterError(f"{name} has non-finite entries")
    return m


def _check_tau(tau):
    if not tau > 0:
        raise ParameterError(f"temperature must be > 0, got {tau}")


@dataclass(frozen=True)
class AffineBlockParams:
    """Affine map followed by a gain/bias standardization and a ReLU.

    ``weight`` is ``(d_out, d_in)``; the three vectors have length ``d_out``.
    The same container doubles as the gradient slot for these parameters.
    """

    weight: np.ndarray
    bias: np.ndarray
    norm_gain: np.ndarray
    norm_bias: np.ndarray

    def __post_init__(self):
        d_out = self.weight.shape[0]
        for name in ("bias", "norm_gain", "norm_bias"):
            if getattr(self, name).shape != (d_out,):
                raise ShapeError(
                    f"{name} has shape {getattr(self, name).shape}, expected ({d_out},)"
                )

    @classmethod
    def create(cls, weight, bias, norm_gain, norm_bias):
        return cls(
            as_mat(weight, "weight"),
            as_vec(bias, "bias"),
            as_vec(norm_gain, "norm_gain"),
            as_vec(norm_bias, "norm_bias"),
        )

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d), np.zeros(d), np.ones(d), np.zeros(d))


# ---------------------------------------------------------------------------
# cosine similarity
# ---------------------------------------------------------------------------

def cosine_similarity(a, b) -> float:
    """Cosine of the angle between ``a`` and ``b``, clamped to [-1, 1]."""
    a = as_vec(a, "a")
    b = as_vec(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.size} vs {b.size}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0:
        raise ZeroNormError("first argument has zero norm")
    if nb == 0.0:
        raise ZeroNormError("second argument has zero norm")
    return float(np.clip(np.dot(a / na, b / nb), -1.0, 1.0))


def cosine_rows(a: np.ndarray, t: np.ndarray):
    """Cosine of every row of ``a`` against ``t``.

    Returns ``(scores, a_unit, t_unit, a_norms, t_norm)``; the extra values are
    what ``cosine_rows_vjp`` needs.
    """
    a_norms = np.linalg.norm(a, axis=1)
    t_norm = np.linalg.norm(t)
    if t_norm == 0.0:
        raise ZeroNormError("query projection has zero norm")
    bad = np.flatnonzero(a_norms == 0.0)
    if bad.size:
        raise ZeroNormError(f"view {bad[0]} projection has zero norm", index=int(bad[0]))
    a_unit = a / a_norms[:, None]
    t_unit = t / t_norm
    scores = np.clip(a_unit @ t_unit, -1.0, 1.0)
    return scores, a_unit, t_unit, a_norms, t_norm


def cosine_rows_vjp(ds, scores, a_unit, t_unit, a_norms, t_norm):
    """Backward of ``cosine_rows``: returns ``(da, dt)``."""
    da = ds[:, None] * (t_unit[None, :] - scores[:, None] * a_unit) / a_norms[:, None]
    dt = (ds[:, None] * (a_unit - scores[:, None] * t_unit[None, :])).sum(axis=0) / t_norm
    return da, dt


# ---------------------------------------------------------------------------
# tempered softmax
# ---------------------------------------------------------------------------

def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax along the last axis."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_rows_vjp(probs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Gradient with respect to the logits of ``softmax_rows``."""
    return probs * (upstream - (upstream * probs).sum(axis=-1, keepdims=True))


def softmax_temp(s, tau: float) -> np.ndarray:
    """``exp(s / tau)`` normalized to sum one."""
    _check_tau(tau)
    s = as_vec(s, "s")
    return softmax_rows(s / tau)


def softmax_temp_vjp(s, tau: float, upstream) -> np.ndarray:
    _check_tau(tau)
    p = softmax_temp(s, tau)
    return softmax_rows_vjp(p, np.asarray(upstream, dtype=np.float64)) / tau


# ---------------------------------------------------------------------------
# affine maps
# ---------------------------------------------------------------------------

def linear_project(x, w, b) -> np.ndarray:
    """``w @ x + b``. ``x`` may also be a stack of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w.ndim != 2 or b.shape != (w.shape[0],) or x.shape[-1:] != (w.shape[1],):
        raise ShapeError(
            f"cannot project x{x.shape} with weight{w.shape} and bias{b.shape}"
        )
    return x @ w.T + b


def affine_refine_forward(x: np.ndarray, p: AffineBlockParams):
    """Forward pass of ``affine_refine`` on a stack of rows, returning a cache."""
    if x.shape[-1:] != (p.weight.shape[1],):
        raise ShapeError(
            f"input dimension {x.shape[-1]} does not match weight{p.weight.shape}"
        )
    z = x @ p.weight.T + p.bias
    centered = z - z.mean(axis=-1, keepdims=True)
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    floored = var < VAR_FLOOR
    std = np.sqrt(np.where(floored, VAR_FLOOR, var))
    xhat = centered / std
    y = p.norm_gain * xhat + p.norm_bias
    out = np.maximum(y, 0.0)
    return out, (x, xhat, std, floored, y)


def affine_refine_backward(upstream: np.ndarray, p: AffineBlockParams, cache):
    """Returns ``(grads, dx)`` with ``grads`` an ``AffineBlockParams``."""
    x, xhat, std, floored, y = cache
    dy = np.where(y > 0.0, upstream, 0.0)
    rows = dy.reshape(-1, dy.shape[-1])
    d_gain = (rows * xhat.reshape(rows.shape)).sum(axis=0)
    d_nbias = rows.sum(axis=0)
    dxhat = dy * p.norm_gain
    dz = dxhat - dxhat.mean(axis=-1, keepdims=True)
    # the floored variance is a constant, so its branch drops the variance term
    dz = dz - np.where(floored, 0.0, xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    dz = dz / std
    dz_rows = dz.reshape(-1, dz.shape[-1])
    x_rows = x.reshape(-1, x.shape[-1])
    grads = AffineBlockParams(dz_rows.T @ x_rows, dz_rows.sum(axis=0), d_gain, d_nbias)
    return grads, dz @ p.weight


def affine_refine(x, p: AffineBlockParams) -> np.ndarray:
    """``relu(gain * standardize(weight @ x + bias) + norm_bias)``.

    Standardization runs over the feature axis of each vector, with the
    variance floored at ``VAR_FLOOR``.
    """
    out, _ = affine_refine_forward(np.asarray(x, dtype=np.float64), p)
    return out


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param_errors: list = field(default_factory=list)
    passed: bool = True
    tolerance: float = 1e-4

    def worst(self, count=5):
        return sorted(self.per_param_errors, key=lambda item: -item[1])[:count]


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    return np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))


def finite_diff_check(
    f: Callable[[np.ndarray], float],
    analytic_grad: Callable[[np.ndarray], np.ndarray],
    point,
    h: float = 1e-5,
    tol: float = 1e-4,
    names: Sequence[str] | None = None,
) -> GradCheckReport:
    """Compare ``analytic_grad(point)`` against central differences of ``f``.

    The per-coordinate error is ``|a - n| / max(1e-8, |a| + |n|)`` and the
    check passes when the largest such error is below ``tol``.
    """
    if not h > 0:
        raise ParameterError(f"step h must be > 0, got {h}")
    x = np.array(point, dtype=np.float64).ravel()
    if names is None:
        names = [f"x[{i}]" for i in range(x.size)]
    analytic = np.asarray(analytic_grad(x.copy()), dtype=np.float64).ravel()
    if analytic.shape != x.shape:
        raise ShapeError(f"analytic gradient has {analytic.size} entries, point has {x.size}")
    numeric = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EvaluationError(f"non-finite function value at coordinate {names[i]}", i)
        numeric[i] = (fp - fm) / (2.0 * h)
    errors = relative_error(analytic, numeric)
    max_err = float(errors.max()) if errors.size else 0.0
    return GradCheckReport(
        max_rel_error=max_err,
        per_param_errors=[(n, float(e)) for n, e in zip(names, errors)],
        passed=max_err < tol,
        tolerance=tol,
    )
