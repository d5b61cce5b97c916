"""Ranking strategies that turn view scores into pooling weights.

Six strategies are available: SoftSort, SinkhornSort, TopKSoft,
SimpleSoftmax, HardTop1 and UniformPooling. Each has a forward function, an
analytic vector-Jacobian product (``strategy_vjp``) and a closed-form
operation count (``flop_count``).

Ranks are descending: rank 0 is the highest score. Ties always go to the
lowest index.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import _check_tau, as_vec, softmax_rows, softmax_rows_vjp
from .errors import ParameterError, ShapeError


class Strategy(str, enum.Enum):
    SOFTSORT = "softsort"
    SINKHORN = "sinkhornsort"
    TOPK = "topksoft"
    SOFTMAX = "simplesoftmax"
    HARDTOP1 = "hardtop1"
    UNIFORM = "uniformpooling"

    @property
    def label(self):
        return _LABELS[self]

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "")
        for member in cls:
            if key in (member.value, member.label.lower(), member.name.lower()):
                return member
        raise ParameterError(f"unknown strategy {name!r}")


_LABELS = {
    Strategy.SOFTSORT: "SoftSort",
    Strategy.SINKHORN: "SinkhornSort",
    Strategy.TOPK: "TopKSoft",
    Strategy.SOFTMAX: "SimpleSoftmax",
    Strategy.HARDTOP1: "HardTop1",
    Strategy.UNIFORM: "UniformPooling",
}


class WeightMode(str, enum.Enum):
    """How a relaxed permutation matrix is reduced to a weight vector."""

    TOP_ROW = "top_row"
    RANK_DECAY = "rank_decay"


@dataclass(frozen=True)
class StrategyConfig:
    kind: Strategy = Strategy.SOFTSORT
    tau: float = 1.0
    top_k: int = 3
    sinkhorn_iters: int = 50
    weight_mode: WeightMode = WeightMode.TOP_ROW
    rank_decay: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "kind", Strategy.parse(self.kind))
        object.__setattr__(self, "weight_mode", WeightMode(self.weight_mode))
        _check_tau(self.tau)
        if self.top_k < 1:
            raise ParameterError(f"top_k must be >= 1, got {self.top_k}")
        if self.sinkhorn_iters < 1:
            raise ParameterError(f"sinkhorn_iters must be >= 1, got {self.sinkhorn_iters}")
        if not 0.0 < self.rank_decay <= 1.0:
            raise ParameterError(f"rank_decay must lie in (0, 1], got {self.rank_decay}")

    def to_dict(self):
        d = asdict(self)
        d["kind"] = self.kind.value
        d["weight_mode"] = self.weight_mode.value
        return d


def _scores(s):
    s = as_vec(s, "s")
    return s


def descending_order(s: np.ndarray) -> np.ndarray:
    """Indices that sort ``s`` from largest to smallest, ties by lowest index."""
    return np.argsort(-s, kind="stable")


def _sort_cost(s):
    order = descending_order(s)
    d = s[order]
    return order, d, np.abs(d[:, None] - s[None, :])


def _cost_vjp(s, order, d, dcost):
    # cost[r, j] = |d_r - s_j| with d_r = s[order[r]]; the entry j = order[r]
    # is identically zero and np.sign(0) = 0 drops it
    sg = np.sign(d[:, None] - s[None, :])
    g = dcost * sg
    ds = -g.sum(axis=0)
    ds[order] += g.sum(axis=1)
    return ds


# ---------------------------------------------------------------------------
# relaxed permutation operators
# ---------------------------------------------------------------------------

def soft_sort(s, tau: float = 1.0) -> np.ndarray:
    """Row-stochastic relaxation of the descending sort permutation.

    ``p[r, j] = softmax_j(-|sorted(s)[r] - s_j| / tau)``.
    """
    _check_tau(tau)
    s = _scores(s)
    _, _, cost = _sort_cost(s)
    return softmax_rows(-cost / tau)


def _soft_sort_top_row(s, tau):
    # row 0 only: the top sorted value is the maximum, no full sort needed
    return softmax_rows(-np.abs(s.max() - s) / tau)


def _sinkhorn_forward(s, tau, iters):
    order, d, cost = _sort_cost(s)
    kernel = np.exp(-cost / tau)
    p = kernel
    trace = []
    for _ in range(iters):
        for axis in (0, 1):  # columns, then rows: the last step is a row pass
            sums = p.sum(axis=axis, keepdims=True)
            p = p / sums
            trace.append((axis, sums, p))
    return p, (order, d, kernel, trace)


def sinkhorn_sort(s, tau: float = 1.0, iters: int = 50) -> np.ndarray:
    """Sinkhorn-normalized version of the ``soft_sort`` kernel.

    Starts from ``exp(-|sorted(s)[r] - s_j| / tau)`` and alternates column
    and row normalization ``iters`` times, ending on rows, so every row sums
    to one exactly and columns sum to one up to convergence.
    """
    _check_tau(tau)
    if iters < 1:
        raise ParameterError(f"iters must be >= 1, got {iters}")
    p, _ = _sinkhorn_forward(_scores(s), tau, int(iters))
    return p


def _sinkhorn_vjp(s, tau, cache, dp):
    order, d, kernel, trace = cache
    g = dp
    for axis, sums, out in reversed(trace):
        g = (g - (g * out).sum(axis=axis, keepdims=True)) / sums
    dcost = -g * kernel / tau
    return _cost_vjp(s, order, d, dcost)


# ---------------------------------------------------------------------------
# direct weighting operators
# ---------------------------------------------------------------------------

def topk_mask(s: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask of the ``k`` largest entries, ties to the lowest index.

    Selection uses pairwise rank counting rather than a sort.
    """
    n = s.size
    idx = np.arange(n)
    beats = (s[None, :] > s[:, None]) | ((s[None, :] == s[:, None]) & (idx[None, :] < idx[:, None]))
    return beats.sum(axis=1) < k


def _check_k(k, n):
    if not 1 <= k <= n:
        raise ParameterError(f"k must satisfy 1 <= k <= {n}, got {k}")


def topk_soft(s, tau: float = 1.0, k: int = 3) -> np.ndarray:
    """Softmax restricted to the ``k`` highest scores; zero elsewhere."""
    _check_tau(tau)
    s = _scores(s)
    _check_k(k, s.size)
    mask = topk_mask(s, k)
    w = np.zeros_like(s)
    w[mask] = softmax_rows(s[mask] / tau)
    return w


def simple_softmax(s, tau: float = 1.0) -> np.ndarray:
    _check_tau(tau)
    return softmax_rows(_scores(s) / tau)


def hard_top1(s) -> np.ndarray:
    s = _scores(s)
    w = np.zeros_like(s)
    w[int(np.argmax(s))] = 1.0
    return w


def uniform_weights(n: int) -> np.ndarray:
    if n < 1:
        raise ParameterError(f"need at least one view, got n={n}")
    return np.full(n, 1.0 / n)


def weights_from_relaxed_perm(p, mode=WeightMode.TOP_ROW, rank_decay: float = 0.5) -> np.ndarray:
    """Reduce a row-stochastic rank matrix to a weight vector.

    ``TOP_ROW`` keeps the soft assignment of rank 0. ``RANK_DECAY`` mixes all
    rows with weights ``rank_decay ** r`` and renormalizes.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {p.shape}")
    mode = WeightMode(mode)
    if mode is WeightMode.TOP_ROW:
        return p[0].copy()
    if not 0.0 < rank_decay <= 1.0:
        raise ParameterError(f"rank_decay must lie in (0, 1], got {rank_decay}")
    u = (rank_decay ** np.arange(p.shape[0])) @ p
    return u / u.sum()


def _weights_from_perm_vjp(p, mode, rank_decay, upstream):
    dp = np.zeros_like(p)
    if mode is WeightMode.TOP_ROW:
        dp[0] = upstream
        return dp
    c = rank_decay ** np.arange(p.shape[0])
    u = c @ p
    total = u.sum()
    w = u / total
    du = (upstream - upstream @ w) / total
    return np.outer(c, du)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def strategy_weights(cfg: StrategyConfig, s) -> np.ndarray:
    """Forward pass of the configured strategy: scores to pooling weights."""
    s = _scores(s)
    kind = cfg.kind
    if kind is Strategy.SOFTSORT:
        if cfg.weight_mode is WeightMode.TOP_ROW:
            return _soft_sort_top_row(s, cfg.tau)
        return weights_from_relaxed_perm(soft_sort(s, cfg.tau), cfg.weight_mode, cfg.rank_decay)
    if kind is Strategy.SINKHORN:
        p = sinkhorn_sort(s, cfg.tau, cfg.sinkhorn_iters)
        return weights_from_relaxed_perm(p, cfg.weight_mode, cfg.rank_decay)
    if kind is Strategy.TOPK:
        return topk_soft(s, cfg.tau, cfg.top_k)
    if kind is Strategy.SOFTMAX:
        return simple_softmax(s, cfg.tau)
    if kind is Strategy.HARDTOP1:
        return hard_top1(s)
    return uniform_weights(s.size)


def strategy_vjp(cfg: StrategyConfig, s, upstream) -> np.ndarray:
    """Gradient of ``upstream . strategy_weights(cfg, s)`` with respect to ``s``.

    HardTop1 has no useful derivative, so its backward pass is the
    SimpleSoftmax backward at the same temperature (straight-through).
    UniformPooling returns zeros.
    """
    s = _scores(s)
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != s.shape:
        raise ShapeError(f"upstream has shape {g.shape}, scores have {s.shape}")
    kind = cfg.kind
    tau = cfg.tau
    if kind is Strategy.SOFTSORT:
        order, d, cost = _sort_cost(s)
        p = softmax_rows(-cost / tau)
        dp = _weights_from_perm_vjp(p, cfg.weight_mode, cfg.rank_decay, g)
        dcost = -softmax_rows_vjp(p, dp) / tau
        return _cost_vjp(s, order, d, dcost)
    if kind is Strategy.SINKHORN:
        p, cache = _sinkhorn_forward(s, tau, cfg.sinkhorn_iters)
        dp = _weights_from_perm_vjp(p, cfg.weight_mode, cfg.rank_decay, g)
        return _sinkhorn_vjp(s, tau, cache, dp)
    if kind is Strategy.TOPK:
        _check_k(cfg.top_k, s.size)
        mask = topk_mask(s, cfg.top_k)
        ds = np.zeros_like(s)
        w = softmax_rows(s[mask] / tau)
        ds[mask] = softmax_rows_vjp(w, g[mask]) / tau
        return ds
    if kind in (Strategy.SOFTMAX, Strategy.HARDTOP1):
        return softmax_rows_vjp(softmax_rows(s / tau), g) / tau
    return np.zeros_like(s)


# ---------------------------------------------------------------------------
# operation counts
# ---------------------------------------------------------------------------

FLOP_CONVENTION = (
    "one unit per scalar add/subtract, multiply, divide, exp and comparison "
    "(max, abs and sort steps count as comparisons); negation and indexing are "
    "free; a full sort costs ceil(n*log2(n)) comparisons; weighted pooling of "
    "the view embeddings is excluded"
)


@dataclass(frozen=True)
class FlopCount:
    additions: int = 0
    multiplications: int = 0
    exponentials: int = 0
    comparisons: int = 0
    divisions: int = 0

    @property
    def total(self):
        return (
            self.additions + self.multiplications + self.exponentials
            + self.comparisons + self.divisions
        )

    def __add__(self, other):
        return FlopCount(
            self.additions + other.additions,
            self.multiplications + other.multiplications,
            self.exponentials + other.exponentials,
            self.comparisons + other.comparisons,
            self.divisions + other.divisions,
        )

    def scaled(self, factor):
        return FlopCount(*(factor * v for v in (
            self.additions, self.multiplications, self.exponentials,
            self.comparisons, self.divisions)))

    def to_dict(self):
        return {
            "additions": self.additions,
            "multiplications": self.multiplications,
            "exponentials": self.exponentials,
            "comparisons": self.comparisons,
            "divisions": self.divisions,
            "total": self.total,
        }


def _sort_comparisons(n):
    return math.ceil(n * math.log2(n)) if n > 1 else 0


def _softmax_flops(m, rows=1, temperature=True):
    # optional scale by 1/tau, row max, shift, exp, row sum, normalize
    return FlopCount(
        additions=rows * (m + m - 1),
        exponentials=rows * m,
        comparisons=rows * (m - 1),
        divisions=rows * (m + (m if temperature else 0)),
    )


def _cost_matrix_flops(rows, n):
    # |d_r - s_j| / tau: one subtract, one abs, one divide per entry
    return FlopCount(additions=rows * n, comparisons=rows * n, divisions=rows * n)


def _extraction_flops(mode, n):
    if mode is WeightMode.TOP_ROW:
        return FlopCount()
    # n - 1 decay powers, row mixture, renormalization
    return FlopCount(
        multiplications=(n - 1) + n * n,
        additions=n * (n - 1) + (n - 1),
        divisions=n,
    )


def flop_count(cfg: StrategyConfig, n: int) -> FlopCount:
    """Scalar operation count of the strategy's forward pass at ``n`` views.

    The counting rules are in ``FLOP_CONVENTION``. The count follows what
    ``strategy_weights`` computes: SoftSort in top-row mode only builds rank 0.
    """
    if n < 1:
        raise ParameterError(f"need at least one view, got n={n}")
    kind = cfg.kind
    if kind is Strategy.UNIFORM:
        return FlopCount(divisions=1)
    if kind is Strategy.HARDTOP1:
        return FlopCount(comparisons=n - 1)
    if kind is Strategy.SOFTMAX:
        return _softmax_flops(n)
    if kind is Strategy.TOPK:
        k = min(cfg.top_k, n)
        pairwise = FlopCount(comparisons=n * (n - 1) + n, additions=n * max(n - 2, 0))
        return pairwise + _softmax_flops(k)
    if kind is Strategy.SOFTSORT:
        if cfg.weight_mode is WeightMode.TOP_ROW:
            return (
                FlopCount(comparisons=n - 1)
                + _cost_matrix_flops(1, n)
                + _softmax_flops(n, temperature=False)
            )
        return (
            FlopCount(comparisons=_sort_comparisons(n))
            + _cost_matrix_flops(n, n)
            + _softmax_flops(n, rows=n, temperature=False)
            + _extraction_flops(cfg.weight_mode, n)
        )
    # Sinkhorn: sort, kernel, then 2 * iters normalizations of an n x n matrix
    normalize = FlopCount(additions=n * (n - 1), divisions=n * n)
    return (
        FlopCount(comparisons=_sort_comparisons(n))
        + _cost_matrix_flops(n, n)
        + FlopCount(exponentials=n * n)
        + normalize.scaled(2 * cfg.sinkhorn_iters)
        + _extraction_flops(cfg.weight_mode, n)
    )
